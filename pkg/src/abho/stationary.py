"""Stationary-phase machinery: the Mehler-type leading term and the
filtered integral with its Morse-index prefactor.

For fixed (t, x, y) with sin(wt) != 0 the phase has the unique stationary
point eta* = A(y) + w (x - cos(wt) y)/sin(wt), at which

    S(t,y,eta*) = w/(2 sin wt) (cos(wt)(|x|^2+|y|^2) - 2 x.y)
                + b (Arg x - Arg y + 2 pi l),

and the kernel equals  w e^{i S/alpha} / (2 pi i alpha sin wt) (1 + O(alpha))
wherever the cutoffs are identically one on the Gaussian support.

Integrating the kernel against rho(y) e^{i y.eta0/alpha} concentrates at
the initial point y0 solving x = x^t(y0, eta0); the leading value carries
e^{-i pi m/2} |det x^t_y|^{-1/2} with m the Morse index (conjugate-point
count) of the trajectory, where

    det x^s_y = cos^2(ws) - (b^2/w^2) |y|^-4 sin^2(ws).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    CutoffInterference,
    DegenerateJacobian,
    NoConvergence,
    NonDecayingPhase,
    InvalidParameter,
    ToleranceNotMet,
    TrajectoryHitsOrigin,
    ZeroAtEndpoint,
)
from .model import Config, PhasePoint, wedge
from .flow import (
    flow_jacobians,
    min_radius_squared,
    position_momentum,
    potential_jacobian,
    vector_potential,
    _norm2,
)
from .action import action, winding_lift_closed
from .kernel import (
    QuadratureSpec,
    SIN_MIN,
    eta_center,
    gaussian_scales,
    kernel_u0_batch,
    u0_phase_nodes,
)

_ENDPOINT_DET_TOL = 1e-10


@dataclass(frozen=True)
class StationaryEta:
    """Stationary momentum eta* with the action value there."""

    eta_star: np.ndarray
    s_at_star: float
    winding_l: int


@dataclass(frozen=True)
class MorseData:
    """Conjugate-point census of a trajectory up to time t."""

    index_m: int
    zero_times: list
    det_xty: float


@dataclass(frozen=True)
class FilteredLeading:
    """Leading value of the filtered integral, with its ingredients."""

    value: complex
    y0: np.ndarray
    index_m: int
    s_value: float
    det_xty: float
    outside_support: bool


def mehler_kernel_b0(t, x, y, alpha: float, omega: float) -> complex:
    """Exact flux-free harmonic-oscillator kernel (the classical closed form)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = math.sin(omega * t)
    c = math.cos(omega * t)
    pref = omega / (2j * math.pi * alpha * s)
    ph = omega * (c * (float(x @ x) + float(y @ y)) - 2.0 * float(x @ y)) / (2 * alpha * s)
    return pref * complex(np.exp(1j * ph))


def stationary_eta(t, x, y, cfg: Config) -> StationaryEta:
    """Solve phi_eta = 0 for eta and evaluate the action there two ways.

    The closed form of S(t,y,eta*) (with the closed-form winding lift) and
    the action operation (with the sampled lift) must agree to relative
    1e-9; disagreement means broken winding bookkeeping and raises.
    """
    t = float(t)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = cfg.omega
    s, c = math.sin(w * t), math.cos(w * t)
    if abs(s) < SIN_MIN:
        raise NonDecayingPhase(f"|sin(omega t)| = {abs(s):.2e} < {SIN_MIN}")
    estar = eta_center(t, x, y, cfg)
    p = PhasePoint(y, estar)
    p.require_off_manifold(cfg)
    if math.sqrt(max(min_radius_squared(t, y, estar, cfg), 0.0)) <= 1e-8 * float(np.hypot(*y)):
        raise TrajectoryHitsOrigin("stationary trajectory passes through the flux line")

    av = action(t, p, cfg)
    s_closed = (w / (2 * s)) * (c * (float(x @ x) + float(y @ y)) - 2.0 * float(x @ y)) + (
        cfg.flux_b * float(winding_lift_closed(t, y, estar, cfg))
    )
    if abs(av.s_value - s_closed) > 1e-9 * max(1.0, abs(s_closed)):
        raise ToleranceNotMet(
            f"action/closed-form disagreement at eta*: {av.s_value!r} vs {s_closed!r}"
        )
    return StationaryEta(eta_star=estar, s_at_star=s_closed, winding_l=av.winding_l)


def _support_cutoff_clear(t, x, y, cfg: Config, tail_tol: float) -> bool:
    """True when both cutoffs are 1 on the effective Gaussian eta-support.

    The x^t-image of the eta-Gaussian has standard deviation
    sqrt(alpha/B) around x; the cutoff ball |x^t| <= 2 eps interferes with
    weight exp(-B (|x| - 2 eps)^2 / (2 alpha)), which must not exceed
    tail_tol.
    """
    if float(np.hypot(*np.asarray(y, dtype=float))) < 2 * cfg.cutoff_eps:
        return False
    gap = float(np.hypot(*np.asarray(x, dtype=float))) - 2 * cfg.cutoff_eps
    if gap <= 0:
        return False
    weight = math.exp(-cfg.damping_B * gap**2 / (2 * cfg.alpha))
    return weight <= tail_tol


def mehler_leading(t, x, y, cfg: Config, tail_tol: float = 1e-10) -> complex:
    """Mehler-type leading term  w e^{i S(t,y,eta*)/alpha}/(2 pi i alpha sin wt)."""
    se = stationary_eta(t, x, y, cfg)
    if not _support_cutoff_clear(t, x, y, cfg, tail_tol):
        raise CutoffInterference("a cutoff is active on the Gaussian eta-support")
    s = math.sin(cfg.omega * float(t))
    return cfg.omega * complex(np.exp(1j * se.s_at_star / cfg.alpha)) / (
        2j * math.pi * cfg.alpha * s
    )


def phi_nodes(t, x, y, eta, cfg: Config):
    """Complex phase phi at arbitrary eta nodes (vectorized helper)."""
    _, phi = u0_phase_nodes(t, x, y, eta, cfg)
    return phi


def im_phase_hessian_check(t, x, y, cfg: Config, fd_step: float = 1e-5) -> float:
    """Max-entry deviation of the FD Im phi_etaeta at eta* from B (sin/w)^2 I."""
    se = stationary_eta(t, x, y, cfg)
    e0 = se.eta_star
    h = float(fd_step)
    pts = []
    for i in range(2):
        ei = np.zeros(2)
        ei[i] = h
        pts += [e0 + ei, e0 - ei]
    pts += [
        e0 + np.array([h, h]),
        e0 + np.array([h, -h]),
        e0 + np.array([-h, h]),
        e0 + np.array([-h, -h]),
        e0,
    ]
    phi = phi_nodes(float(t), x, y, np.stack(pts)[:, None, :], cfg)[:, 0]
    hess = np.empty((2, 2), dtype=complex)
    hess[0, 0] = (phi[0] - 2 * phi[8] + phi[1]) / h**2
    hess[1, 1] = (phi[2] - 2 * phi[8] + phi[3]) / h**2
    hess[0, 1] = hess[1, 0] = (phi[4] - phi[5] - phi[6] + phi[7]) / (4 * h**2)
    s = math.sin(cfg.omega * float(t))
    target = cfg.damping_B * (s / cfg.omega) ** 2 * np.eye(2)
    return float(np.max(np.abs(hess.imag - target)))


def stationary_y0(t, x, eta0, cfg: Config) -> np.ndarray:
    """Newton solve of x^t(y, eta0) = x with the analytic Jacobian x^t_y."""
    t = float(t)
    x = np.asarray(x, dtype=float)
    eta0 = np.asarray(eta0, dtype=float)
    w = cfg.omega
    s, c = math.sin(w * t), math.cos(w * t)
    if abs(s) < SIN_MIN:
        raise NonDecayingPhase(f"|sin(omega t)| = {abs(s):.2e} < {SIN_MIN}")

    if abs(c) > 0.1:
        y = (x - (s / w) * eta0) / c
    else:
        # near cos = 0 the system pins A(y) = eta0 - w x / s, which inverts
        # in closed form when the flux is nonzero
        a_target = eta0 - (w / s) * x
        na = float(np.hypot(*a_target))
        if abs(cfg.flux_b) > 1e-12 and na > 1e-8:
            y = (cfg.flux_b / na**2) * np.array([a_target[1], -a_target[0]])
        else:
            y = x.copy()
    if float(np.hypot(*y)) < 1e-12:
        y = np.array([1.0, 0.0])

    tol = 1e-12 * (1.0 + float(np.hypot(*x)))
    for _ in range(50):
        xt, _ = position_momentum(t, y, eta0, cfg)
        f = xt - x
        if float(np.hypot(*f)) < tol:
            break
        jac = c * np.eye(2) - (s / w) * potential_jacobian(y, cfg)
        if abs(np.linalg.det(jac)) < 1e-10:
            raise DegenerateJacobian("det x^t_y ~ 0 at a Newton iterate")
        y = y - np.linalg.solve(jac, f)
        if float(np.hypot(*y)) < 1e-12:
            raise NoConvergence("Newton iterate collapsed onto the origin")
    else:
        raise NoConvergence("stationary-point Newton did not converge in 50 iterations")

    # post-hoc check of both stationary equations
    scale = max(1.0, float(np.hypot(*x)) * float(np.hypot(*y)))
    r1 = float(wedge(x, y)) + (float(wedge(y, eta0)) - cfg.flux_b) * s / w
    r2 = float(x @ y) - c * float(y @ y) - (s / w) * float(eta0 @ y)
    if abs(r1) > 1e-10 * scale or abs(r2) > 1e-10 * scale:
        raise ToleranceNotMet("stationary system residuals exceed 1e-10")
    return y


def morse_index(t, y, eta, cfg: Config) -> MorseData:
    """Zeros of det x^s_y on (0, t) with multiplicities, and det at s = t.

    det x^s_y = cos^2(ws) - (b^2/w^2)|y|^-4 sin^2(ws) depends only on |y|;
    for b != 0 its zeros ws = arctan(+- w|y|^2/b) mod pi are simple, for
    b = 0 the zeros ws = pi/2 mod pi are double.
    """
    t = float(t)
    y = np.asarray(y, dtype=float)
    w = cfg.omega
    b = cfg.flux_b
    y2 = float(_norm2(y))
    if y2 == 0.0:
        raise InvalidParameter("morse_index requires |y| > 0")
    kappa = b * b / (w * w * y2 * y2)

    zeros: list[tuple[float, int]] = []
    if b == 0.0:
        base = math.pi / 2
        k = 0
        while True:
            s = (base + k * math.pi) / w
            if s >= t:
                break
            zeros.append((s, 2))
            k += 1
    else:
        a0 = math.atan2(w * y2, abs(b))  # in (0, pi/2)
        k = 0
        while True:
            added = False
            for root in (a0 + k * math.pi, math.pi - a0 + k * math.pi):
                s = root / w
                if 0.0 < s < t:
                    zeros.append((s, 1))
                    added = True
            if not added and (a0 + k * math.pi) / w >= t:
                break
            k += 1
            if k > 10**6:
                break
        zeros.sort()

    p = PhasePoint(y, np.asarray(eta, dtype=float))
    det_end = float(np.linalg.det(flow_jacobians(t, p, cfg).x_y).real)
    if abs(det_end) < _ENDPOINT_DET_TOL:
        raise ZeroAtEndpoint(f"det x^t_y = {det_end:.2e}: endpoint is conjugate")
    return MorseData(
        index_m=sum(m for _, m in zeros),
        zero_times=zeros,
        det_xty=det_end,
    )


@dataclass(frozen=True)
class TestBump:
    """Compactly supported bump exp(1 - 1/(1 - r^2)), r = |y - center|/radius.

    Construction validates that the closed support ball avoids both the
    origin and the line {y : y ^ eta0 = b}.
    """

    center: np.ndarray
    radius: float

    __test__ = False  # not a pytest class, despite the Test* name

    def __init__(self, center, radius: float, eta0, cfg: Config):
        center = np.asarray(center, dtype=float)
        if radius <= 0:
            raise InvalidParameter("bump radius must be positive")
        if float(np.hypot(*center)) <= radius:
            raise InvalidParameter("bump support must exclude the origin")
        eta0 = np.asarray(eta0, dtype=float)
        n_eta = float(np.hypot(*eta0))
        if n_eta == 0.0:
            raise InvalidParameter("eta0 must be nonzero")
        if abs(float(wedge(center, eta0)) - cfg.flux_b) / n_eta <= radius:
            raise InvalidParameter("bump support meets the collision line {y ^ eta0 = b}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(radius))

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        r2 = _norm2(y - self.center) / self.radius**2
        scalar = r2.ndim == 0
        r2 = np.atleast_1d(r2)
        out = np.zeros(r2.shape)
        inside = r2 < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
        return float(out[0]) if scalar else out


def filtered_integral_leading(t, x, eta0, rho: TestBump, cfg: Config) -> FilteredLeading:
    """Leading term of int U_0(t,x,y) rho(y) e^{i y.eta0/alpha} dy."""
    t = float(t)
    eta0 = np.asarray(eta0, dtype=float)
    y0 = stationary_y0(t, x, eta0, cfg)
    rho0 = float(rho(y0))
    if rho0 == 0.0:
        return FilteredLeading(
            value=0.0j, y0=y0, index_m=0, s_value=0.0, det_xty=0.0, outside_support=True
        )
    md = morse_index(t, y0, eta0, cfg)
    av = action(t, PhasePoint(y0, eta0), cfg)
    phase = float(y0 @ eta0) / cfg.alpha + av.s_value / cfg.alpha - 0.5 * math.pi * md.index_m
    value = rho0 * complex(np.exp(1j * phase)) / math.sqrt(abs(md.det_xty))
    return FilteredLeading(
        value=value,
        y0=y0,
        index_m=md.index_m,
        s_value=av.s_value,
        det_xty=md.det_xty,
        outside_support=False,
    )


def filtered_integral_quadrature(
    t,
    x,
    eta0,
    rho: TestBump,
    cfg: Config,
    q: QuadratureSpec | None = None,
    n_outer: int | None = None,
    n_inner: int | None = None,
    chunk: int = 512,
) -> complex:
    """Brute-force double quadrature of int U_0(t,x,y) rho(y) e^{i y.eta0/alpha} dy.

    Outer tensor trapezoid over the bump's bounding square with
    oscillation-resolving node counts; inner kernel values from the batched
    shared-grid evaluator.  This is the oracle the leading term is checked
    against; it makes no use of the stationary-phase formula.
    """
    if q is None:
        q = QuadratureSpec()
    t = float(t)
    x = np.asarray(x, dtype=float)
    eta0 = np.asarray(eta0, dtype=float)
    w = cfg.omega
    s = math.sin(w * t)
    if abs(s) < SIN_MIN:
        raise NonDecayingPhase(f"|sin(omega t)| = {abs(s):.2e} < {SIN_MIN}")

    r = rho.radius
    c0 = rho.center
    y_min = max(float(np.hypot(*c0)) - r, 1e-6)
    # The outer phase is stationary inside the support; its gradient grows
    # from y0 like d(eta*)/dy = (w/s)(cos I + (s/w) A_y), so the support-wide
    # bound is that times the bump diameter (plus the flux winding term).
    c = math.cos(w * t)
    deta_dy = (w / abs(s)) * (abs(c) + (abs(s) / w) * abs(cfg.flux_b) / y_min**2)
    grad_bound = 1.3 * deta_dy * r * math.sqrt(2) + 2 * abs(cfg.flux_b) / y_min
    if n_outer is None:
        n_outer = int(
            math.ceil(2 * r * grad_bound * q.osc_points_per_period / (2 * math.pi * cfg.alpha))
        )
        n_outer = max(48, min(n_outer, 512))

    ax1 = np.linspace(c0[0] - r, c0[0] + r, n_outer)
    ax2 = np.linspace(c0[1] - r, c0[1] + r, n_outer)
    h1, h2 = ax1[1] - ax1[0], ax2[1] - ax2[0]
    w1 = np.full(n_outer, h1)
    w1[0] = w1[-1] = h1 / 2
    w2 = np.full(n_outer, h2)
    w2[0] = w2[-1] = h2 / 2
    wts = np.outer(w1, w2).ravel()
    ys = np.stack(np.meshgrid(ax1, ax2, indexing="ij"), axis=-1).reshape(-1, 2)
    rv = np.asarray(rho(ys))
    mask = rv > 0.0
    kv = kernel_u0_batch(t, x, ys[mask], cfg, q, n_axis=n_inner, chunk=chunk)
    osc = np.exp(1j * (ys[mask] @ eta0) / cfg.alpha)
    return complex(np.sum(kv * rv[mask] * osc * wts[mask]))
