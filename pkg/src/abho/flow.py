"""Closed-form Hamiltonian flow in the Aharonov-Bohm oscillator field.

The flow of

    xdot  = xi - A(x),          x(0) = y != 0,
    xidot = (xi - A) . A_x - omega^2 x,   xi(0) = eta,

with A(x) = b*(-x2, x1)/|x|^2 is periodic and known in closed form as long
as the trajectory stays away from the origin:

    x^t  = cos(wt) y + sin(wt)/w (eta - A(y)),
    xi^t = -w sin(wt) y + cos(wt) (eta - A(y)) + A(x^t).

Everything here broadcasts over stacked inputs of shape (..., 2); the
public per-point operations validate their arguments and return small
dataclasses.  ``integrate_flow_ode`` is an independent adaptive
Runge-Kutta-Fehlberg 4(5) oracle for the same system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    InvalidParameter,
    NearOriginAbort,
    OriginCollision,
    OriginSingularity,
    ToleranceNotMet,
)
from .model import Config, PhasePoint, wedge

# Hard floor below which |x| counts as "at the origin" for A(x).
ORIGIN_ABS_TOL = 1e-300
# Relative floor for detecting that the closed-form flow hit the flux line.
COLLISION_REL_TOL = 1e-12
# Distance guard for the ODE oracle.
ODE_ORIGIN_GUARD = 1e-6
ODE_MAX_STEPS = 10**7

_I2 = np.eye(2)


def _norm2(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0] ** 2 + x[..., 1] ** 2


def vector_potential(x, cfg: Config) -> np.ndarray:
    """A(x) = b * (-x2, x1) / |x|^2, broadcasting over (..., 2)."""
    x = np.asarray(x, dtype=float)
    r2 = _norm2(x)
    if np.any(np.sqrt(r2) < ORIGIN_ABS_TOL):
        raise OriginSingularity("vector potential evaluated at the origin")
    out = np.empty_like(x)
    out[..., 0] = -cfg.flux_b * x[..., 1] / r2
    out[..., 1] = cfg.flux_b * x[..., 0] / r2
    return out


def potential_jacobian(x, cfg: Config) -> np.ndarray:
    """Jacobian matrix A_x of the vector potential; symmetric, trace 0.

    Returns shape (..., 2, 2); det A_x = -b^2 |x|^{-4}, eigenvalues
    +-b |x|^{-2}.
    """
    x = np.asarray(x, dtype=float)
    r2 = _norm2(x)
    if np.any(np.sqrt(r2) < ORIGIN_ABS_TOL):
        raise OriginSingularity("potential Jacobian evaluated at the origin")
    r4 = r2 * r2
    d = 2.0 * cfg.flux_b * x[..., 0] * x[..., 1] / r4
    off = cfg.flux_b * (x[..., 1] ** 2 - x[..., 0] ** 2) / r4
    out = np.empty(x.shape[:-1] + (2, 2), dtype=float)
    out[..., 0, 0] = d
    out[..., 0, 1] = off
    out[..., 1, 0] = off
    out[..., 1, 1] = -d
    return out


def hamiltonian(x, xi, cfg: Config):
    """h(x, xi) = |xi - A(x)|^2 / 2 + omega^2 |x|^2 / 2."""
    v = np.asarray(xi, dtype=float) - vector_potential(x, cfg)
    return 0.5 * _norm2(v) + 0.5 * cfg.omega**2 * _norm2(x)


def position_momentum(t, y, eta, cfg: Config):
    """Closed-form (x^t, xi^t) without validation; broadcasts over (..., 2).

    ``t`` may be a scalar or an array broadcastable against the leading
    axes of ``y``/``eta``.  Callers are responsible for |x^t| > 0 where
    A(x^t) is needed; entries with |x^t| = 0 get xi^t = nan there.
    """
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    w = cfg.omega
    t = np.asarray(t, dtype=float)
    c = np.cos(w * t)[..., None]
    s = np.sin(w * t)[..., None]
    v = eta - vector_potential(y, cfg)
    x = c * y + (s / w) * v
    r2 = _norm2(x)
    safe = np.where(r2 > 0.0, r2, np.nan)
    ax = np.stack([-cfg.flux_b * x[..., 1] / safe, cfg.flux_b * x[..., 0] / safe], axis=-1)
    xi = -w * s * y + c * v + ax
    return x, xi


@dataclass(frozen=True)
class FlowState:
    """Point (x^t, xi^t) of the flow at elapsed time t."""

    x: np.ndarray
    xi: np.ndarray
    t: float


@dataclass(frozen=True)
class FlowJacobians:
    """Closed-form Jacobians of the flow w.r.t. initial data (complex dtype)."""

    x_eta: np.ndarray
    xi_eta: np.ndarray
    x_y: np.ndarray
    xi_y: np.ndarray


def flow(t, p: PhasePoint, cfg: Config) -> FlowState:
    """Evaluate the closed-form flow at time t."""
    x, xi = position_momentum(float(t), p.y, p.eta, cfg)
    if np.hypot(*x) < COLLISION_REL_TOL * np.hypot(*p.y):
        raise OriginCollision(f"trajectory reached the flux line at t = {t}")
    return FlowState(x=x, xi=xi, t=float(t))


def flow_jacobians(t, p: PhasePoint, cfg: Config) -> FlowJacobians:
    """All four closed-form Jacobians x^t_eta, xi^t_eta, x^t_y, xi^t_y.

    x^t_eta = sin(wt)/w I exactly;
    xi^t_eta = cos(wt) I + A_x(x^t) sin(wt)/w;
    x^t_y = cos(wt) I - A_x(y) sin(wt)/w;
    xi^t_y = -w sin(wt) I - cos(wt) A_x(y) + A_x(x^t) x^t_y.
    """
    st = flow(t, p, cfg)
    w = cfg.omega
    c, s = math.cos(w * t), math.sin(w * t)
    a_y = potential_jacobian(p.y, cfg)
    a_xt = potential_jacobian(st.x, cfg)
    x_eta = (s / w) * _I2
    xi_eta = c * _I2 + a_xt * (s / w)
    x_y = c * _I2 - a_y * (s / w)
    xi_y = -w * s * _I2 - c * a_y + a_xt @ x_y
    return FlowJacobians(
        x_eta=x_eta.astype(complex),
        xi_eta=xi_eta.astype(complex),
        x_y=x_y.astype(complex),
        xi_y=xi_y.astype(complex),
    )


def angular_momentum(p: PhasePoint, cfg: Config) -> float:
    """Conserved angular momentum L = x^t ^ xdot^t = y ^ eta - b."""
    return float(wedge(p.y, p.eta)) - cfg.flux_b


def collision_time(p: PhasePoint, cfg: Config) -> Optional[float]:
    """Smallest t > 0 at which the trajectory hits the flux line, if any.

    Off the collision manifold the trajectory never reaches the origin and
    None is returned.  On it, the collision time solves
    cos(wt) |y|^2 + sin(wt)/w eta.y = 0, whose smallest positive root is
    atan2(|y|^2, -eta.y/w) / w in (0, pi/w].
    """
    if not p.on_collision_manifold(cfg):
        return None
    w = cfg.omega
    a = float(_norm2(p.y))
    bb = float(np.dot(p.eta, p.y)) / w
    return math.atan2(a, -bb) / w


# ---------------------------------------------------------------------------
# Independent ODE oracle: Runge-Kutta-Fehlberg 4(5) with step control.
# ---------------------------------------------------------------------------

_RKF_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_RKF_A = [
    [],
    [1 / 4],
    [3 / 32, 9 / 32],
    [1932 / 2197, -7200 / 2197, 7296 / 2197],
    [439 / 216, -8.0, 3680 / 513, -845 / 4104],
    [-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40],
]
_RKF_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])
_RKF_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])


def _hj_rhs(state, cfg: Config, with_action: bool):
    x1, x2, xi1, xi2 = state[0], state[1], state[2], state[3]
    r2 = x1 * x1 + x2 * x2
    if r2 < ODE_ORIGIN_GUARD**2:
        raise NearOriginAbort(f"|x| = {math.sqrt(r2):.3e} inside the origin guard")
    b = cfg.flux_b
    w2 = cfg.omega**2
    a1 = -b * x2 / r2
    a2 = b * x1 / r2
    r4 = r2 * r2
    j11 = 2.0 * b * x1 * x2 / r4
    j12 = b * (x2 * x2 - x1 * x1) / r4
    v1 = xi1 - a1
    v2 = xi2 - a2
    dxi1 = j11 * v1 + j12 * v2 - w2 * x1
    dxi2 = j12 * v1 - j11 * v2 - w2 * x2
    if not with_action:
        return np.array([v1, v2, dxi1, dxi2])
    # Lagrangian integrand h_xi . xi - h along the trajectory.
    h = 0.5 * (v1 * v1 + v2 * v2) + 0.5 * w2 * r2
    ds = v1 * xi1 + v2 * xi2 - h
    return np.array([v1, v2, dxi1, dxi2, ds])


def integrate_flow_ode(t, p: PhasePoint, cfg: Config, tol: float, with_action: bool = False):
    """Integrate the Hamilton equations with an embedded RKF 4(5) pair.

    Independent oracle for the closed-form flow: no trigonometric shortcut
    is taken.  Aborts with NearOriginAbort whenever the trajectory comes
    within 1e-6 of the origin.  With ``with_action`` the Lagrangian
    h_xi.xi - h is accumulated as an extra component and the pair
    (FlowState, S) is returned.
    """
    if t < 0:
        raise InvalidParameter("oracle integrates forward in time only")
    n = 5 if with_action else 4
    state = np.concatenate([p.y, p.eta, [0.0]])[:n].astype(float)
    if t == 0:
        st = FlowState(x=state[0:2].copy(), xi=state[2:4].copy(), t=0.0)
        return (st, 0.0) if with_action else st

    t_now = 0.0
    h = min(t / 16.0, 0.1 / cfg.omega)
    steps = 0
    rows = [np.array(r) for r in _RKF_A]
    # The 5th-order solution is propagated while the 4/5 difference (the
    # 4th-order formula's local error) is controlled; the extra safety
    # margin keeps the accumulated propagated error well below tol.
    tol_eff = tol / 32.0
    while t_now < t:
        if steps > ODE_MAX_STEPS:
            raise ToleranceNotMet(f"step budget {ODE_MAX_STEPS} exhausted at t = {t_now}")
        h = min(h, t - t_now)
        if h < 1e-15 * max(1.0, t):
            raise ToleranceNotMet(f"step size underflow at t = {t_now}")
        k = np.empty((6, n))
        k[0] = _hj_rhs(state, cfg, with_action)
        for i in range(1, 6):
            si = state + h * (rows[i] @ k[:i])
            k[i] = _hj_rhs(si, cfg, with_action)
        y5 = state + h * (_RKF_B5 @ k)
        y4 = state + h * (_RKF_B4 @ k)
        scale = tol_eff + tol_eff * np.abs(y5)
        err = math.sqrt(float(np.mean(((y5 - y4) / scale) ** 2)))
        if err <= 1.0:
            state = y5
            t_now += h
            steps += 1
            if state[0] ** 2 + state[1] ** 2 < ODE_ORIGIN_GUARD**2:
                raise NearOriginAbort(f"|x| < {ODE_ORIGIN_GUARD} at t = {t_now}")
        factor = 0.9 * err ** (-0.2) if err > 0 else 5.0
        h = h * min(5.0, max(0.2, factor))

    st = FlowState(x=state[0:2].copy(), xi=state[2:4].copy(), t=float(t))
    return (st, float(state[4])) if with_action else st


def radius_squared(t, y, eta, cfg: Config):
    """|x^s|^2 in expanded closed form (broadcasts; independent check path).

    |x^s|^2 = |y|^2 cos^2 + sin^2/w^2 (|eta|^2 - 2b(y^eta - b/2)|y|^{-2})
              + sin(2ws)/w y.eta
    """
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    w = cfg.omega
    b = cfg.flux_b
    t = np.asarray(t, dtype=float)
    c, s = np.cos(w * t), np.sin(w * t)
    y2 = _norm2(y)
    dot = np.sum(y * eta, axis=-1)
    mod = _norm2(eta) - 2.0 * b * (wedge(y, eta) - b / 2.0) / y2
    return y2 * c**2 + (s**2 / w**2) * mod + (np.sin(2 * w * t) / w) * dot


def min_radius_squared(t, y, eta, cfg: Config) -> float:
    """Exact minimum of |x^s|^2 over s in [0, t] for a single trajectory.

    |x^s|^2 = (a+b)/2 + (a-b)/2 cos(2ws) + c/2 sin(2ws) is harmonic in 2ws,
    so the interior minimum sits at the critical angles of that harmonic.
    """
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    w = cfg.omega
    v = eta - vector_potential(y, cfg)
    a = float(_norm2(y))
    b2 = float(_norm2(v)) / w**2
    c2 = 2.0 * float(np.dot(y, v)) / w
    candidates = [0.0, float(t)]
    # critical points of the harmonic part: tan(2ws) = c2/(a-b2)
    phi0 = math.atan2(c2 / 2.0, (a - b2) / 2.0)
    k = 0
    while True:
        s = (phi0 + (k + 1) * math.pi) / (2 * w)
        if s > t:
            break
        if s > 0:
            candidates.append(s)
        k += 1
        if k > 1000:
            break
    vals = [radius_squared(s, y, eta, cfg) for s in candidates]
    return float(min(vals))
