import math

import numpy as np
import pytest

from abho.errors import CutoffInterference, InvalidParameter, ZeroAtEndpoint
from abho.model import Config, PhasePoint, wedge
from abho.flow import flow, flow_jacobians, vector_potential
from abho.action import phase
from abho.kernel import QuadratureSpec, kernel_u0
from abho.zmat import det_z_closed
from abho.stationary import (
    TestBump,
    filtered_integral_leading,
    im_phase_hessian_check,
    mehler_kernel_b0,
    mehler_leading,
    morse_index,
    stationary_eta,
    stationary_y0,
)
from conftest import annulus_point

CFG = Config(alpha=0.1, flux_b=0.05, omega=1.0, damping_B=8.0, cutoff_eps=0.02)
Q = QuadratureSpec(tail_tol=1e-12, osc_points_per_period=12, refine_ratio_tol=1e-8)


def test_stationary_eta_quarter_period():
    t = math.pi / 2 / CFG.omega
    x, y = np.array([0.4, 0.8]), np.array([1.0, -0.2])
    se = stationary_eta(t, x, y, CFG)
    assert np.allclose(se.eta_star, vector_potential(y, CFG) + CFG.omega * x, atol=1e-13)


def test_stationary_eta_flux_free_action():
    cfg0 = Config(alpha=0.1, flux_b=0.0, omega=1.0, damping_B=8.0, cutoff_eps=0.02)
    t, x, y = 1.1, np.array([0.7, 0.3]), np.array([1.0, -0.4])
    se = stationary_eta(t, x, y, cfg0)
    w, s, c = cfg0.omega, math.sin(1.1), math.cos(1.1)
    expected = (w / (2 * s)) * (c * (float(x @ x) + float(y @ y)) - 2 * float(x @ y))
    assert math.isclose(se.s_at_star, expected, rel_tol=1e-12)


def test_stationary_eta_inverts_forward_flow(rng):
    for _ in range(6):
        y = annulus_point(rng, 0.7, 1.4)
        eta = rng.uniform(-1.2, 1.2, 2)
        p = PhasePoint(y, eta)
        if p.on_collision_manifold(CFG):
            continue
        t = rng.uniform(0.4, 2.6)
        if abs(math.sin(CFG.omega * t)) < 0.1:
            continue
        x = flow(t, p, CFG).x
        se = stationary_eta(t, x, y, CFG)
        assert np.max(np.abs(se.eta_star - eta)) < 1e-10


def test_stationarity_of_phase(rng):
    for _ in range(5):
        y = annulus_point(rng, 0.7, 1.4)
        x = annulus_point(rng, 0.7, 1.4)
        t = rng.uniform(0.5, 2.5)
        if abs(math.sin(CFG.omega * t)) < 0.2:
            continue
        se = stationary_eta(t, x, y, CFG)
        pv = phase(t, x, PhasePoint(y, se.eta_star), CFG)
        assert np.max(np.abs(pv.grad_eta)) < 1e-10


def test_mehler_leading_flux_free_is_mehler():
    cfg0 = Config(alpha=0.1, flux_b=0.0, omega=1.0, damping_B=8.0, cutoff_eps=0.02)
    t, x, y = 0.9, np.array([0.8, 0.1]), np.array([1.0, 0.5])
    lead = mehler_leading(t, x, y, cfg0, tail_tol=1e-8)
    mh = mehler_kernel_b0(t, x, y, cfg0.alpha, cfg0.omega)
    assert abs(lead - mh) < 1e-12 * abs(mh)


def test_mehler_leading_modulus():
    t, x, y = 1.3, np.array([0.9, 0.2]), np.array([0.8, -0.6])
    lead = mehler_leading(t, x, y, CFG, tail_tol=1e-8)
    assert math.isclose(
        abs(lead), CFG.omega / (2 * math.pi * CFG.alpha * abs(math.sin(CFG.omega * t))),
        rel_tol=1e-12,
    )


def test_mehler_leading_cutoff_interference():
    cfg = Config(alpha=0.1, flux_b=0.05, omega=1.0, damping_B=1.0, cutoff_eps=0.1)
    with pytest.raises(CutoffInterference):
        mehler_leading(1.0, np.array([0.25, 0.12]), np.array([1.0, 0.4]), cfg)


def test_im_phase_hessian():
    t, x, y = 1.0, np.array([0.7, 0.5]), np.array([1.0, -0.3])
    # Im phi is exactly quadratic in eta (x^t is affine in eta), so central
    # differences reproduce B (sin/w)^2 I to rounding at any sane step.
    for step in (1e-3, 1e-5):
        assert im_phase_hessian_check(t, x, y, CFG, fd_step=step) < 1e-6
    # omega t = pi/2, omega = 1: predicted matrix is B times identity
    t2 = math.pi / 2
    dev2 = im_phase_hessian_check(t2, x, y, CFG)
    assert dev2 < 1e-6


def test_stationary_y0_flux_free_linear():
    cfg0 = Config(alpha=0.1, flux_b=0.0, omega=1.0, damping_B=8.0, cutoff_eps=0.02)
    t = 0.8
    x, eta0 = np.array([0.9, 0.4]), np.array([0.3, 0.7])
    y0 = stationary_y0(t, x, eta0, cfg0)
    w, s, c = 1.0, math.sin(t), math.cos(t)
    assert np.allclose(y0, (x - (s / w) * eta0) / c, atol=1e-12)


def test_stationary_y0_forward_backward(rng):
    for _ in range(6):
        y = annulus_point(rng, 0.7, 1.3)
        eta0 = rng.uniform(-1.0, 1.0, 2)
        p = PhasePoint(y, eta0)
        if p.on_collision_manifold(CFG):
            continue
        t = rng.uniform(0.3, 2.5)
        if abs(math.sin(CFG.omega * t)) < 0.2 or abs(math.cos(CFG.omega * t)) < 0.15:
            continue
        x = flow(t, p, CFG).x
        y0 = stationary_y0(t, x, eta0, CFG)
        assert np.max(np.abs(y0 - y)) < 1e-9
        # both stationary equations hold
        s = math.sin(CFG.omega * t)
        r1 = float(wedge(x, y0)) + (float(wedge(y0, eta0)) - CFG.flux_b) * s / CFG.omega
        assert abs(r1) < 1e-10


def _det_scan_oracle(t, y, cfg, n=10_000):
    """Multiplicity-weighted zero count of det x^s_y by sign/touch scanning."""
    ss = np.linspace(1e-9, t * (1 - 1e-12), n)
    kappa = cfg.flux_b**2 / (cfg.omega**2 * float(y @ y) ** 2)
    det = np.cos(cfg.omega * ss) ** 2 - kappa * np.sin(cfg.omega * ss) ** 2
    count = 0
    sign_changes = np.where(np.sign(det[:-1]) * np.sign(det[1:]) < 0)[0]
    count += len(sign_changes)
    # touch zeros (double roots): local minima of |det| below threshold with no sign change
    absd = np.abs(det)
    for i in range(1, n - 1):
        if absd[i] < 1e-6 and absd[i] <= absd[i - 1] and absd[i] <= absd[i + 1]:
            if np.sign(det[max(i - 50, 0)]) == np.sign(det[min(i + 50, n - 1)]) != 0:
                if not any(abs(i - j) <= 1 for j in sign_changes):
                    count += 2
    return count


def test_morse_index_no_conjugate_points_early():
    md = morse_index(0.5, np.array([1.0, 0.0]), np.array([0.2, 0.9]), CFG)
    assert md.index_m == 0 and md.zero_times == []


def test_morse_index_flux_free_double_zero():
    cfg0 = Config(alpha=0.1, flux_b=0.0, omega=1.0, damping_B=1.0, cutoff_eps=0.1)
    y = np.array([1.0, 0.0])
    md = morse_index(2.0, y, np.array([0.2, 0.9]), cfg0)
    assert md.index_m == 2
    assert len(md.zero_times) == 1 and md.zero_times[0][1] == 2
    assert math.isclose(md.zero_times[0][0], math.pi / 2, rel_tol=1e-12)
    assert md.index_m == _det_scan_oracle(2.0, y, cfg0)


def test_morse_index_split_simple_zeros():
    cfg = Config(alpha=0.1, flux_b=0.05, omega=1.0, damping_B=1.0, cutoff_eps=0.1)
    y = np.array([1.0, 0.0])
    md = morse_index(2.0, y, np.array([0.2, 0.9]), cfg)
    assert md.index_m == 2
    assert [m for _, m in md.zero_times] == [1, 1]
    a0 = math.atan(cfg.omega * float(y @ y) / cfg.flux_b)
    assert math.isclose(md.zero_times[0][0], a0, rel_tol=1e-12)
    assert math.isclose(md.zero_times[1][0], math.pi - a0, rel_tol=1e-12)
    assert md.index_m == _det_scan_oracle(2.0, y, cfg)
    # each zero satisfies the defining equation
    kappa = cfg.flux_b**2 / (cfg.omega**2 * float(y @ y) ** 2)
    for s, _ in md.zero_times:
        val = math.cos(cfg.omega * s) ** 2 - kappa * math.sin(cfg.omega * s) ** 2
        assert abs(val) < 1e-10


def test_morse_index_longer_trajectory():
    cfg = Config(alpha=0.1, flux_b=0.05, omega=1.0, damping_B=1.0, cutoff_eps=0.1)
    y = np.array([1.0, 0.0])
    t = 5.0
    md = morse_index(t, y, np.array([0.2, 0.9]), cfg)
    assert md.index_m == _det_scan_oracle(t, y, cfg)


def test_morse_zero_at_endpoint():
    cfg0 = Config(alpha=0.1, flux_b=0.0, omega=1.0, damping_B=1.0, cutoff_eps=0.1)
    with pytest.raises(ZeroAtEndpoint):
        morse_index(math.pi / 2, np.array([1.0, 0.0]), np.array([0.2, 0.9]), cfg0)


def test_det_xty_matches_closed_prefactor(rng):
    for _ in range(10):
        y = annulus_point(rng, 0.6, 1.5)
        t = rng.uniform(0.2, 4.0)
        md = None
        try:
            md = morse_index(t, y, np.array([0.2, 0.9]), CFG)
        except ZeroAtEndpoint:
            continue
        w, s, c = CFG.omega, math.sin(CFG.omega * t), math.cos(CFG.omega * t)
        closed = c**2 - (CFG.flux_b**2 / w**2) * float(y @ y) ** -2 * s**2
        assert abs(abs(md.det_xty) - abs(closed)) < 1e-12 * max(1.0, abs(closed))


def test_bump_validation_and_shape():
    eta0 = np.array([0.2, 0.9])
    with pytest.raises(InvalidParameter, match="origin"):
        TestBump([0.1, 0.0], 0.3, eta0, CFG)
    with pytest.raises(InvalidParameter, match="collision"):
        # center on the line y ^ eta0 = b
        c = np.array([1.0, (0.2 * 1.0 - CFG.flux_b) / -0.9])
        lineward = np.array([1.0, (1.0 * 0.9 - CFG.flux_b) / 0.2])  # wedge == b
        TestBump(lineward / np.hypot(*lineward) * 1.0, 0.9, eta0, CFG)
    rho = TestBump([1.05, 0.1], 0.4, eta0, CFG)
    assert rho(np.array([1.05, 0.1])) == 1.0
    assert rho(np.array([2.0, 2.0])) == 0.0
    ys = np.stack([np.linspace(0.7, 1.4, 30), np.full(30, 0.1)], axis=-1)
    vals = rho(ys)
    assert np.all(vals >= 0.0)


def test_filtered_leading_outside_support():
    eta0 = np.array([0.2, 0.9])
    rho = TestBump([1.05, 0.1], 0.2, eta0, CFG)
    # choose x so the stationary y0 is far from the bump
    fl = filtered_integral_leading(1.0, np.array([-1.2, 0.6]), eta0, rho, CFG)
    assert fl.outside_support and fl.value == 0.0


def test_filtered_leading_modulus_formula():
    eta0 = np.array([0.2, 0.9])
    y0t = np.array([1.05, 0.1])
    rho = TestBump(y0t, 0.4, eta0, CFG)
    t = 0.3
    x = flow(t, PhasePoint(y0t, eta0), CFG).x
    fl = filtered_integral_leading(t, x, eta0, rho, CFG)
    pred = float(rho(fl.y0)) / math.sqrt(abs(fl.det_xty))
    assert math.isclose(abs(fl.value), pred, rel_tol=1e-12)


def test_morse_parity_against_brute_phase():
    # e^{-i pi m/2} |det x^t_y|^{-1/2} is the continuous branch of
    # (det x^t_y)^{-1/2}: at an odd Morse index a wrong jump sign would
    # offset the leading value's phase by pi relative to the brute-force
    # integral.  Large flux separates the conjugate times so each test
    # point sits on a healthy |det|; the O(alpha) corrections drift the
    # discrepancy by ~1 rad, far from the pi signature.
    from abho.stationary import filtered_integral_quadrature

    cfg = Config(alpha=0.05, flux_b=0.3, omega=1.0, damping_B=10.0, cutoff_eps=0.02)
    y0t = np.array([0.9, -0.1])
    eta0 = np.array([0.2, 0.9])
    rho = TestBump(y0t, 0.5, eta0, cfg)
    q = QuadratureSpec(tail_tol=1e-10, osc_points_per_period=8, refine_ratio_tol=1e-7)
    expected_m = {0.92: 0, 1.52: 1, 2.25: 2}
    angs = {}
    for t, m_want in expected_m.items():
        x = flow(t, PhasePoint(y0t, eta0), cfg).x
        assert morse_index(t, y0t, eta0, cfg).index_m == m_want
        lead = filtered_integral_leading(t, x, eta0, rho, cfg)
        ref = filtered_integral_quadrature(t, x, eta0, rho, cfg, q)
        angs[m_want] = float(np.angle(lead.value / ref))
    # the odd-index point is the sign-sensitive one
    assert abs(angs[1]) < 1.3
    assert abs(angs[0]) < 1.45 and abs(angs[2]) < 1.45


def test_hessian_factorization(rng):
    # det of the FD 4x4 Hessian of psi = phi + y.eta0 equals det Z det x^t_y
    t = 1.0
    y0t = np.array([1.05, 0.1])
    eta0 = np.array([0.2, 0.9])
    x = flow(t, PhasePoint(y0t, eta0), CFG).x
    h = 1e-4

    def psi(yv, ev):
        pv = phase(t, x, PhasePoint(yv, ev), CFG)
        return pv.phi + complex(yv @ eta0)

    z0 = np.concatenate([y0t, eta0])

    def psi_z(z):
        return psi(z[:2], z[2:])

    hess = np.empty((4, 4), dtype=complex)
    for i in range(4):
        for j in range(i, 4):
            ei = np.zeros(4)
            ej = np.zeros(4)
            ei[i] = h
            ej[j] = h
            if i == j:
                val = (psi_z(z0 + ei) - 2 * psi_z(z0) + psi_z(z0 - ei)) / h**2
            else:
                val = (
                    psi_z(z0 + ei + ej)
                    - psi_z(z0 + ei - ej)
                    - psi_z(z0 - ei + ej)
                    + psi_z(z0 - ei - ej)
                ) / (4 * h**2)
            hess[i, j] = hess[j, i] = val
    det_fd = np.linalg.det(hess)
    p = PhasePoint(y0t, eta0)
    det_pred = det_z_closed(t, p, CFG) * np.linalg.det(flow_jacobians(t, p, CFG).x_y)
    assert abs(det_fd - det_pred) < 1e-6 * abs(det_pred)
