"""The matrix Z = xi^t_eta - i B x^t_eta and its square-rooted determinant.

With c(t) = cos(wt) - i B sin(wt)/w,

    Z     = c(t) I + sin(wt)/w A_x(x^t),
    det Z = c(t)^2 - b^2 sin(wt)^2 / (w^2 |x^t|^4),
    mu_12 = c(t) +- b sin(wt) / (w |x^t|^2),

and det Z never vanishes for B > 0.  The kernel symbol needs the branch of
sqrt(det Z) that is continuous in t with arg det Z|_{t=0} = 0.  Writing
det Z = c^2 (1 - w_t) with w_t = b^2 sin^2/(w^2 c^2 |x^t|^4), one checks
arg(w_t) = -2 arg(c) stays strictly off 0 mod 2 pi except where w_t = 0,
so w_t never meets the ray [1, oo); hence

    sqrt(det Z)(t) = c(t) * principal_sqrt(1 - w_t)

is that continuous branch, in closed form.  ``sqrt_det_z_tracked`` is the
independent unwrapping walker that cross-checks it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import OriginCollision, StepRefinementFailed
from .model import Config, PhasePoint
from .flow import (
    COLLISION_REL_TOL,
    flow_jacobians,
    position_momentum,
    radius_squared,
    _norm2,
)

_REFINE_DEPTH = 40


@dataclass(frozen=True)
class ZValue:
    """Z at time t with the branch-tracked square root of its determinant."""

    z: np.ndarray
    det_z: complex
    sqrt_det_z: complex
    arg_lift_det: float


def z_matrix(t, p: PhasePoint, cfg: Config) -> np.ndarray:
    """Z = xi^t_eta - i B x^t_eta, assembled from the flow Jacobians."""
    jac = flow_jacobians(t, p, cfg)
    return jac.xi_eta - 1j * cfg.damping_B * jac.x_eta


def _c_factor(t, cfg: Config):
    w = cfg.omega
    t = np.asarray(t, dtype=float)
    return np.cos(w * t) - 1j * cfg.damping_B * np.sin(w * t) / w


def det_z_closed_at(t, r2, cfg: Config):
    """det Z given |x^t|^2 (broadcasts); callers guarantee r2 > 0."""
    w = cfg.omega
    t = np.asarray(t, dtype=float)
    s = np.sin(w * t)
    return _c_factor(t, cfg) ** 2 - (cfg.flux_b**2 / w**2) * s**2 / np.asarray(r2) ** 2


def det_z_closed(t, p: PhasePoint, cfg: Config) -> complex:
    """Closed-form det Z along the trajectory of p."""
    x, _ = position_momentum(float(t), p.y, p.eta, cfg)
    r2 = float(_norm2(x))
    if math.sqrt(r2) < COLLISION_REL_TOL * np.hypot(*p.y):
        raise OriginCollision(f"|x^t| ~ 0 at t = {t}")
    return complex(det_z_closed_at(float(t), r2, cfg))


def z_eigenvalues(t, p: PhasePoint, cfg: Config):
    """Eigenvalues mu_12 = c(t) +- b sin(wt) / (w |x^t|^2)."""
    x, _ = position_momentum(float(t), p.y, p.eta, cfg)
    r2 = float(_norm2(x))
    if math.sqrt(r2) < COLLISION_REL_TOL * np.hypot(*p.y):
        raise OriginCollision(f"|x^t| ~ 0 at t = {t}")
    c = complex(_c_factor(float(t), cfg))
    off = cfg.flux_b * math.sin(cfg.omega * t) / (cfg.omega * r2)
    return c + off, c - off


def sqrt_det_z_closed_at(t, r2, cfg: Config):
    """Continuous-branch sqrt(det Z) given |x^t|^2 (broadcasts).

    Exact for B > 0 by the argument in the module docstring; needs only
    endpoint data.
    """
    w = cfg.omega
    t = np.asarray(t, dtype=float)
    s = np.sin(w * t)
    c = _c_factor(t, cfg)
    wt = (cfg.flux_b**2 / w**2) * s**2 / (c**2 * np.asarray(r2) ** 2)
    return c * np.sqrt(1.0 - wt)


def sqrt_det_z_closed(t, p: PhasePoint, cfg: Config) -> complex:
    """Closed-form continuous branch of sqrt(det Z) for a single trajectory."""
    r2 = radius_squared(float(t), p.y, p.eta, cfg)
    if math.sqrt(float(r2)) < COLLISION_REL_TOL * np.hypot(*p.y):
        raise OriginCollision(f"|x^t| ~ 0 at t = {t}")
    return complex(sqrt_det_z_closed_at(float(t), float(r2), cfg))


def default_track_step(t, cfg: Config) -> float:
    """Branch-tracking step ceiling: min(0.01/w, t/64)."""
    return min(0.01 / cfg.omega, t / 64.0) if t > 0 else 0.01 / cfg.omega


def sqrt_det_z_tracked(t, p: PhasePoint, cfg: Config, dt_track: float | None = None) -> ZValue:
    """Branch-continuous sqrt(det Z) by walking s from 0 to t.

    Unwraps arg det Z(s) on an adaptive grid (every increment below pi/2,
    refined where needed), then returns |det Z|^(1/2) exp(i arg_lift / 2).
    """
    t = float(t)
    if dt_track is None:
        dt_track = default_track_step(t, cfg)
    if t == 0.0:
        z0 = z_matrix(0.0, p, cfg)
        return ZValue(z=z0, det_z=1.0 + 0.0j, sqrt_det_z=1.0 + 0.0j, arg_lift_det=0.0)

    n0 = max(2, int(math.ceil(abs(t) / dt_track)) + 1)
    ts = np.linspace(0.0, t, n0)
    min_dt = dt_track * 2.0**-_REFINE_DEPTH
    y_norm = float(np.hypot(*p.y))
    for _ in range(200):
        r2 = radius_squared(ts, p.y, p.eta, cfg)
        if np.any(np.sqrt(np.maximum(r2, 0.0)) < COLLISION_REL_TOL * y_norm):
            raise OriginCollision("trajectory meets the flux line on the tracking grid")
        dets = det_z_closed_at(ts, r2, cfg)
        inc = np.angle(dets[1:] / dets[:-1])
        bad = np.abs(inc) >= math.pi / 2
        if not bad.any():
            arg_lift = float(np.sum(inc))
            break
        if np.min(np.diff(ts)[bad]) < min_dt:
            raise StepRefinementFailed(
                f"arg det Z increment >= pi/2 persists below dt_track * 2^-{_REFINE_DEPTH}"
            )
        mids = 0.5 * (ts[:-1][bad] + ts[1:][bad])
        ts = np.sort(np.concatenate([ts, mids]))
    else:
        raise StepRefinementFailed("refinement loop did not terminate")

    det_t = complex(dets[-1])
    sqrt_det = math.sqrt(abs(det_t)) * complex(np.exp(0.5j * arg_lift))
    return ZValue(z=z_matrix(t, p, cfg), det_z=det_t, sqrt_det_z=sqrt_det, arg_lift_det=arg_lift)
