"""Problem configuration, shared geometric helpers and validation.

All quantities are dimensionless.  Vectors are plain numpy arrays of shape
(2,) (or broadcastable stacks (..., 2)); 2x2 matrices are numpy arrays of
shape (2, 2), complex-valued where a module needs them to be.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import CollisionManifold, InvalidParameter, OrderNotImplemented, OriginSingularity

# Relative machine-scale guard on the excluded set {y ^ eta = b}.
COLLISION_RTOL = 1e-12

CONFIG_KEYS = ("alpha", "flux_b", "omega", "damping_B", "cutoff_eps", "order_N")


def as_vec2(v) -> np.ndarray:
    """Coerce to a float array of shape (2,)."""
    a = np.asarray(v, dtype=float)
    if a.shape != (2,):
        raise InvalidParameter(f"expected a 2-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidParameter("vector components must be finite")
    return a


def wedge(u, v):
    """2D wedge (cross) product u1*v2 - u2*v1, broadcasting over (..., 2)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


@dataclass(frozen=True)
class Config:
    """Scalar parameters of the problem.

    alpha      : semiclassical parameter, > 0
    flux_b     : magnetic flux (any real; the gauge reduction to
                 0 < b <= alpha/2 is not enforced)
    omega      : oscillator frequency, > 0
    damping_B  : phase-damping constant, > 0
    cutoff_eps : cutoff scale, > 0
    order_N    : expansion order; only 0 is supported
    """

    alpha: float = 0.1
    flux_b: float = 0.05
    omega: float = 1.0
    damping_B: float = 1.0
    cutoff_eps: float = 0.1
    order_N: int = 0

    def replace(self, **kw) -> "Config":
        return validate_config(replace(self, **kw))


def validate_config(raw: Config) -> Config:
    """Check every Config invariant; return the config unchanged if all hold."""
    for name in ("alpha", "omega", "damping_B", "cutoff_eps"):
        val = getattr(raw, name)
        if not (isinstance(val, (int, float)) and math.isfinite(val)):
            raise InvalidParameter(f"{name} must be a finite number, got {val!r}")
        if val <= 0:
            raise InvalidParameter(f"{name} must be > 0, got {val}")
    if not math.isfinite(raw.flux_b):
        raise InvalidParameter(f"flux_b must be finite, got {raw.flux_b!r}")
    if raw.order_N != int(raw.order_N) or raw.order_N < 0:
        raise InvalidParameter(f"order_N must be a non-negative integer, got {raw.order_N!r}")
    if raw.order_N >= 1:
        raise OrderNotImplemented("only expansion order N = 0 is implemented")
    return raw


@dataclass(frozen=True)
class PhasePoint:
    """Initial data (y, eta) of the Hamiltonian flow.

    The origin is excluded (|y| > 0); whether the point lies on the
    collision manifold {y ^ eta = b} is checked against the flux of a
    given Config via :meth:`on_collision_manifold`.
    """

    y: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "y", as_vec2(self.y))
        object.__setattr__(self, "eta", as_vec2(self.eta))
        if float(np.hypot(*self.y)) == 0.0:
            raise OriginSingularity("flow is undefined at y = 0")

    def on_collision_manifold(self, cfg: Config) -> bool:
        """True when |y ^ eta - b| is below the model tolerance."""
        scale = max(1.0, float(np.hypot(*self.y)) * float(np.hypot(*self.eta)))
        return abs(float(wedge(self.y, self.eta)) - cfg.flux_b) <= COLLISION_RTOL * scale

    def require_off_manifold(self, cfg: Config) -> None:
        if self.on_collision_manifold(cfg):
            raise CollisionManifold(
                f"y ^ eta = {float(wedge(self.y, self.eta))!r} coincides with flux b = {cfg.flux_b!r}"
            )


def dump_config(cfg: Config) -> str:
    """Serialize to the flat key=value text format (one key per line)."""
    lines = [f"{k}={repr(getattr(cfg, k))}" for k in CONFIG_KEYS]
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> Config:
    """Parse the flat key=value format.  '#' begins a comment line."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise InvalidParameter(f"config line {lineno}: expected key=value, got {line!r}")
        key, _, val = stripped.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise InvalidParameter(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise InvalidParameter(f"config line {lineno}: duplicate key {key!r}")
        try:
            values[key] = int(val) if key == "order_N" else float(val)
        except ValueError as exc:
            raise InvalidParameter(f"config line {lineno}: bad value {val!r}") from exc
    missing = [k for k in CONFIG_KEYS if k not in values]
    if missing:
        raise InvalidParameter(f"config is missing keys: {', '.join(missing)}")
    return validate_config(Config(**values))


def load_config(path) -> Config:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def save_config(cfg: Config, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_config(cfg))
