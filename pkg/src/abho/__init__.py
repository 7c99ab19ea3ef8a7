"""Semiclassical propagator of a 2D harmonic oscillator in an AB flux."""

from .model import Config, PhasePoint, validate_config, wedge
from .errors import AbhoError

__all__ = ["Config", "PhasePoint", "validate_config", "wedge", "AbhoError"]

__version__ = "0.1.0"
