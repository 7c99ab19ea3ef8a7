import math

import numpy as np
import pytest

from abho.errors import NonDecayingPhase
from abho.model import Config, PhasePoint
from abho.flow import flow
from abho.kernel import (
    QuadratureSpec,
    _eval_level,
    cutoff,
    cutoff_radial,
    eta_center,
    gaussian_scales,
    kernel_grid,
    kernel_u0,
    kernel_u0_batch,
    pde_residual,
    symbol_u0,
)
from abho.stationary import mehler_kernel_b0
from conftest import annulus_point

# cutoff-clean quadrature scenario used throughout this module
CFG0 = Config(alpha=0.1, flux_b=0.0, omega=1.0, damping_B=40.0, cutoff_eps=0.02)
CFGB = Config(alpha=0.1, flux_b=0.05, omega=1.0, damping_B=8.0, cutoff_eps=0.02)
Q = QuadratureSpec(tail_tol=1e-12, osc_points_per_period=12, refine_ratio_tol=1e-8)


def test_cutoff_plateaus():
    eps = 0.3
    assert cutoff(np.array([0.5 * eps, 0.0]), eps) == 0.0
    assert cutoff(np.array([0.0, 3.0 * eps]), eps) == 1.0
    # smooth, monotone transition
    rs = np.linspace(1.0, 2.0, 101) * eps
    vals = cutoff_radial(rs, eps)
    assert np.all(np.diff(vals) >= 0)
    assert 0.0 < float(cutoff_radial(1.5 * eps, eps)) < 1.0
    # frozen regression values of the chosen exp(-1/s) ramp
    assert math.isclose(float(cutoff_radial(1.5 * eps, eps)), 0.5, rel_tol=1e-12)
    assert math.isclose(float(cutoff_radial(1.25 * eps, eps)), 0.06496916912866406, rel_tol=1e-9)


def test_symbol_u0_examples(cfg):
    p = PhasePoint([1.0, 0.0], [0.2, 0.9])
    assert symbol_u0(0.0, p, cfg) == 1.0 + 0.0j
    inner = PhasePoint([0.5 * cfg.cutoff_eps, 0.0], [0.2, 0.9])
    assert symbol_u0(0.3, inner, cfg) == 0.0


def test_symbol_u0_vanishes_when_trajectory_lands_in_cutoff():
    cfg = Config(alpha=0.1, flux_b=0.0, omega=1.0, damping_B=1.0, cutoff_eps=0.1)
    # pick initial data whose x^t lands inside the cutoff ball at t = pi/2:
    # x^(pi/2) = eta, so take |eta| < eps with |y| large
    p = PhasePoint([1.0, 0.0], [0.0, 0.05])
    assert symbol_u0(math.pi / 2, p, cfg) == 0.0


def test_kernel_matches_mehler_flux_free(rng):
    for t in (0.7, 1.0, 2.5):
        for _ in range(3):
            x = annulus_point(rng, 0.5, 2.0)
            y = annulus_point(rng, 0.5, 2.0)
            ks = kernel_u0(t, x, y, CFG0, Q)
            mh = mehler_kernel_b0(t, x, y, CFG0.alpha, CFG0.omega)
            assert abs(ks.value - mh) < 1e-6 * abs(mh)


def test_kernel_guard_at_focal_times():
    with pytest.raises(NonDecayingPhase):
        kernel_u0(math.pi, np.array([1.0, 0.0]), np.array([0.5, 0.5]), CFG0, Q)


def test_kernel_zero_inside_y_cutoff():
    ks = kernel_u0(1.0, np.array([1.0, 0.0]), np.array([0.01, 0.0]), CFG0, Q)
    assert ks.value == 0.0 and ks.n_points == 0


def test_far_field_suppression():
    # With sin(wt) != 0 every x is hit by some trajectory, so "x far from
    # every reachable x^t" means far from the symbol's support: inside a
    # cutoff hole wide compared with the Gaussian width sqrt(alpha/B).
    cfg = Config(alpha=0.1, flux_b=0.0, omega=1.0, damping_B=40.0, cutoff_eps=0.5)
    y = np.array([1.5, 0.0])
    x = np.array([0.1, 0.0])
    ks = kernel_u0(1.0, x, y, cfg, Q)
    natural = cfg.omega / (2 * math.pi * cfg.alpha * abs(math.sin(cfg.omega)))
    assert abs(ks.value) < Q.tail_tol * natural


def test_doubling_bounded_by_estimate():
    x, y = np.array([0.7, 0.4]), np.array([1.1, -0.2])
    ks = kernel_u0(1.0, x, y, CFGB, Q)
    n = int(round(math.sqrt(ks.n_points)))
    center = eta_center(1.0, x, y, CFGB)
    _, radius = gaussian_scales(1.0, CFGB, Q)
    v2 = _eval_level(1.0, x, y, center, radius, 2 * n - 1, CFGB)
    assert abs(v2 - ks.value) < 10 * max(ks.est_error, 1e-15)


def test_gaussian_localization():
    x, y = np.array([0.7, 0.4]), np.array([1.1, -0.2])
    ks = kernel_u0(1.0, x, y, CFGB, Q)
    n = int(round(math.sqrt(ks.n_points)))
    center = eta_center(1.0, x, y, CFGB)
    _, radius = gaussian_scales(1.0, CFGB, Q)
    wide = _eval_level(1.0, x, y, center, 1.3 * radius, int(1.3 * n) | 1, CFGB)
    assert abs(wide - ks.value) < 2 * Q.tail_tol * abs(ks.value) + 10 * ks.est_error


def test_cutoff_neutrality():
    x, y = np.array([0.8, 0.5]), np.array([1.0, -0.3])
    a = kernel_u0(1.0, x, y, CFGB, Q).value
    b = kernel_u0(1.0, x, y, CFGB.replace(cutoff_eps=2 * CFGB.cutoff_eps), Q).value
    assert abs(a - b) < 1e-8 * abs(a)


def test_kernel_grid_matches_pointwise_and_orders():
    y = np.array([1.0, 0.0])
    xs = [np.array([0.6, 0.0]), np.array([0.6, 0.4]), np.array([0.9, -0.2])]
    grid = kernel_grid(1.0, xs, y, CFG0, Q)
    assert len(grid) == 3
    single = kernel_u0(1.0, xs[1], y, CFG0, Q)
    assert grid[1].value == single.value
    threaded = kernel_grid(1.0, xs, y, CFG0, Q, threads=3)
    assert [s.value for s in threaded] == [s.value for s in grid]
    assert kernel_grid(1.0, [], y, CFG0, Q) == []


def test_kernel_grid_records_errors_in_row():
    y = np.array([1.0, 0.0])
    xs = [np.array([0.6, 0.0])]
    rows = kernel_grid(math.pi, xs, y, CFG0, Q)  # sin ~ 0: per-sample failure
    assert rows[0].error == "NonDecayingPhase"
    assert math.isnan(rows[0].value.real)


def test_reflection_symmetry_flux_free():
    # b = 0, y on the first axis: kernel symmetric under x2 -> -x2
    y = np.array([1.2, 0.0])
    up = kernel_u0(1.0, np.array([0.7, 0.5]), y, CFG0, Q).value
    dn = kernel_u0(1.0, np.array([0.7, -0.5]), y, CFG0, Q).value
    assert abs(up - dn) < 1e-10 * abs(up)


def test_kernel_u0_batch_consistent():
    x = np.array([0.7, 0.4])
    ys = np.array([[1.1, -0.2], [0.9, 0.3], [1.3, 0.1]])
    vals = kernel_u0_batch(1.0, x, ys, CFGB, Q)
    for yi, vi in zip(ys, vals):
        ref = kernel_u0(1.0, x, yi, CFGB, Q).value
        assert abs(vi - ref) < 5e-7 * abs(ref)


def test_pde_residual_flux_free_floor():
    # Mehler solves the equation exactly: the b = 0 residual is numerics only
    t, x, y = 1.0, np.array([0.6, 0.9]), np.array([1.1, -0.3])
    qr = QuadratureSpec(tail_tol=1e-14, osc_points_per_period=16, refine_ratio_tol=1e-10)
    res = pde_residual(t, x, y, CFG0.replace(damping_B=8.0), qr, 1e-6, 2e-3)
    u0 = kernel_u0(t, x, y, CFG0.replace(damping_B=8.0), qr).value
    assert abs(res) / abs(u0) < 1e-7


def test_pde_residual_stencil_consistency():
    # residual converges to a stable value as fd steps shrink
    t, x, y = 1.0, np.array([0.6, 0.9]), np.array([1.1, -0.3])
    qr = QuadratureSpec(tail_tol=1e-14, osc_points_per_period=16, refine_ratio_tol=1e-10)
    r1 = pde_residual(t, x, y, CFGB, qr, 4e-6, 4e-3)
    r2 = pde_residual(t, x, y, CFGB, qr, 2e-6, 2e-3)
    r3 = pde_residual(t, x, y, CFGB, qr, 1e-6, 1.4e-3)
    assert abs(r3 - r2) < abs(r2 - r1)
    assert abs(r3 - r2) < 0.2 * abs(r3)
