"""Domain error hierarchy.

Every numerical-domain failure raised by this package derives from
:class:`AbhoError`, so callers (in particular the CLI) can separate usage
errors from domain errors.
"""


class AbhoError(Exception):
    """Base class for all domain errors raised by abho."""


class InvalidParameter(AbhoError):
    """A configuration field violates its invariant."""


class OrderNotImplemented(AbhoError, NotImplementedError):
    """Expansion orders N >= 1 are declared out of scope."""


class OriginSingularity(AbhoError):
    """The vector potential was evaluated at (or too close to) x = 0."""


class OriginCollision(AbhoError):
    """A trajectory reached the flux line at the requested time."""


class CollisionManifold(AbhoError):
    """Initial data lies on the excluded set y ^ eta = b."""


class NearOriginAbort(AbhoError):
    """The ODE oracle came within its distance guard of the origin."""


class ToleranceNotMet(AbhoError):
    """An adaptive computation could not reach its requested tolerance."""


class StepRefinementFailed(AbhoError):
    """Angle unwrapping failed to resolve an increment below pi/2."""


class NonDecayingPhase(AbhoError):
    """sin(omega*t) is too close to 0: no Gaussian decay in eta."""


class QuadratureNotConverged(AbhoError):
    """Oscillatory quadrature did not stabilize within the node budget."""


class StencilOutOfDomain(AbhoError):
    """A finite-difference stencil point violates a kernel precondition."""


class NoConvergence(AbhoError):
    """Newton iteration for the stationary point did not converge."""


class DegenerateJacobian(AbhoError):
    """det x^t_y vanished at a Newton iterate."""


class ZeroAtEndpoint(AbhoError):
    """The endpoint of the trajectory is conjugate: det x^t_y ~ 0."""


class CutoffInterference(AbhoError):
    """A cutoff is not identically 1 on the Gaussian support in eta."""


class TrajectoryHitsOrigin(AbhoError):
    """The stationary trajectory passes too close to the flux line."""


class TruncationInsufficient(AbhoError):
    """The spectral sum's tail estimate exceeds the requested tolerance."""


class OverflowGuard(AbhoError):
    """Recurrence index beyond the validated stability range."""
