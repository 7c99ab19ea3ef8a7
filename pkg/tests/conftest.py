"""Shared fixtures and admissible-point samplers."""

import math

import numpy as np
import pytest

from abho.model import Config, PhasePoint, wedge


@pytest.fixture
def cfg():
    """Canonical configuration used by the flow/action/Z-algebra tests."""
    return Config(alpha=0.1, flux_b=0.05, omega=1.0, damping_B=1.0, cutoff_eps=0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


def random_phase_points(rng, cfg, n, l_min=0.05, r_min=0.3, r_max=2.0):
    """Sample PhasePoints with |y| in [r_min, r_max] and |L| >= l_min."""
    pts = []
    while len(pts) < n:
        y = rng.uniform(-r_max, r_max, 2)
        if not (r_min <= np.hypot(*y) <= r_max):
            continue
        eta = rng.uniform(-2.0, 2.0, 2)
        if abs(float(wedge(y, eta)) - cfg.flux_b) < l_min:
            continue
        pts.append(PhasePoint(y, eta))
    return pts


def annulus_point(rng, r_lo, r_hi):
    r = rng.uniform(r_lo, r_hi)
    a = rng.uniform(0.0, 2 * math.pi)
    return r * np.array([math.cos(a), math.sin(a)])
