"""Action along the flow, its winding lift, and the complex phase.

The action has the closed form

    S(t,y,eta) = (cos(2wt)-1)/2 y.eta
               + sin(2wt)/(4w) (|eta - A(y)|^2 - w^2 |y|^2)
               + b * lift(t),

where lift(t) = Arg x^t - Arg y + 2 pi l is the continuous lift of the
trajectory's polar angle from s = 0.  The lift is the only topological
ingredient; everything else is trigonometry.

Two independent evaluations of the lift are provided:

* ``arg_lift`` walks the trajectory with an adaptive step, accumulating
  principal-branch angle increments each below pi/2 (the contract's
  sampler);
* ``winding_lift_closed`` exploits x^{s+pi/w} = -x^s and the monotonicity
  of the polar angle (theta' = L/|x|^2 has constant sign): the angle
  advances exactly pi per half period, so the lift is

      lift = k pi sign(L) + angle(x^{k pi/w} -> x^t),  k = floor(wt/pi),

  with the last increment in (-pi, pi) resolved by the principal branch.
  This is exact, needs only the endpoint, and vectorizes; the sampler
  cross-checks it in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import StepRefinementFailed
from .model import Config, PhasePoint, wedge
from .flow import flow, position_momentum, vector_potential, _norm2
from .zmat import z_matrix

# Branch-wrap guard for the closed-form lift: genuine last increments with
# the "wrong" sign only arise from rounding near 0 or near +-pi.
_WRAP_TOL = 1e-6
_REFINE_DEPTH = 40


@dataclass(frozen=True)
class ActionValue:
    """Action S with its winding bookkeeping."""

    s_value: float
    winding_l: int
    arg_lift: float


@dataclass(frozen=True)
class PhaseValue:
    """Complex phase phi and its eta-gradient."""

    phi: complex
    grad_eta: np.ndarray


def _trig_part(t, y, eta, cfg: Config):
    """b-independent trigonometric part of S (broadcasts)."""
    w = cfg.omega
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    v = eta - vector_potential(y, cfg)
    dot = np.sum(y * eta, axis=-1)
    return 0.5 * (np.cos(2 * w * t) - 1.0) * dot + (np.sin(2 * w * t) / (4 * w)) * (
        _norm2(v) - w**2 * _norm2(y)
    )


def winding_lift_closed(t, y, eta, cfg: Config):
    """Exact continuous lift of Arg x^s - Arg y over s in [0, t] (broadcasts).

    Valid off the collision manifold (L != 0); on it the lift is undefined
    and the returned value is meaningless there (sign(0) = 0 is used).
    """
    w = cfg.omega
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    sgn = np.sign(wedge(y, eta) - cfg.flux_b)
    k = np.floor(w * t / math.pi)
    xt, _ = position_momentum(t, y, eta, cfg)
    flip = np.where(k[..., None] % 2 == 0, 1.0, -1.0)
    xref = flip * y
    dth = np.arctan2(wedge(xref, xt), np.sum(xref * xt, axis=-1))
    dth = np.where((sgn > 0) & (dth < -_WRAP_TOL), dth + 2 * math.pi, dth)
    dth = np.where((sgn < 0) & (dth > _WRAP_TOL), dth - 2 * math.pi, dth)
    return k * math.pi * sgn + dth


def action_closed(t, y, eta, cfg: Config):
    """Closed-form S with the closed-form lift (vectorized hot path)."""
    return _trig_part(t, y, eta, cfg) + cfg.flux_b * winding_lift_closed(t, y, eta, cfg)


def default_lift_step(t, cfg: Config) -> float:
    """Sampler step ceiling: min(0.05/w, t/16)."""
    return min(0.05 / cfg.omega, t / 16.0) if t > 0 else 0.05 / cfg.omega


def arg_lift(t, p: PhasePoint, cfg: Config, dt_max: float | None = None):
    """Sampled continuous lift of the trajectory's polar angle.

    Walks s from 0 to t with step <= dt_max, accumulating principal-branch
    angle increments; any interval whose increment reaches pi/2 is bisected
    (down to dt_max * 2^-40, then StepRefinementFailed).  Returns
    (lift, l) with l the winding integer.
    """
    p.require_off_manifold(cfg)
    t = float(t)
    if t == 0.0:
        return 0.0, 0
    if dt_max is None:
        dt_max = default_lift_step(t, cfg)
    n0 = max(2, int(math.ceil(abs(t) / dt_max)) + 1)
    ts = np.linspace(0.0, t, n0)
    min_dt = dt_max * 2.0**-_REFINE_DEPTH
    for _ in range(200):
        x, _ = position_momentum(ts, p.y, p.eta, cfg)
        z = x[..., 0] + 1j * x[..., 1]
        inc = np.angle(z[1:] / z[:-1])
        bad = np.abs(inc) >= math.pi / 2
        if not bad.any():
            lift = float(np.sum(inc))
            break
        if np.min(np.diff(ts)[bad]) < min_dt:
            raise StepRefinementFailed(
                f"angle increment >= pi/2 persists below dt_max * 2^-{_REFINE_DEPTH}"
            )
        mids = 0.5 * (ts[:-1][bad] + ts[1:][bad])
        ts = np.sort(np.concatenate([ts, mids]))
    else:
        raise StepRefinementFailed("refinement loop did not terminate")

    principal = math.atan2(x[-1, 1], x[-1, 0]) - math.atan2(p.y[1], p.y[0])
    ell = (lift - principal) / (2 * math.pi)
    ell_int = int(round(ell))
    if abs(ell - ell_int) > 1e-9:
        raise StepRefinementFailed(f"winding lift {lift} is not a 2 pi shift of the principal angle")
    return lift, ell_int


def action(t, p: PhasePoint, cfg: Config, dt_max: float | None = None) -> ActionValue:
    """Action S(t, y, eta); the winding term uses the sampled lift."""
    p.require_off_manifold(cfg)
    t = float(t)
    lift, ell = arg_lift(t, p, cfg, dt_max)
    s0 = float(_trig_part(t, p.y, p.eta, cfg))
    return ActionValue(s_value=s0 + cfg.flux_b * lift, winding_l=ell, arg_lift=lift)


def phase(t, x, p: PhasePoint, cfg: Config, dt_max: float | None = None) -> PhaseValue:
    """Complex phase phi = S + (x - x^t).xi^t + i B |x - x^t|^2 / 2.

    grad_eta is the row vector (x - x^t) Z, which vanishes exactly on the
    stationary set x = x^t.
    """
    av = action(t, p, cfg, dt_max)
    st = flow(t, p, cfg)
    x = np.asarray(x, dtype=float)
    dx = x - st.x
    phi = av.s_value + complex(dx @ st.xi) + 0.5j * cfg.damping_B * float(dx @ dx)
    z = z_matrix(t, p, cfg)
    grad = dx.astype(complex) @ z
    return PhaseValue(phi=phi, grad_eta=grad)
