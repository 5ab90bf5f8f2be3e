"""Exception types shared across the package."""


class OscillabError(Exception):
    """Base class for all package errors."""


class EmptyBall(OscillabError):
    """No cell center falls inside the requested ball."""


class DegenerateMask(OscillabError):
    """Pixel mask is empty or full; no meaningful boundary exists."""


class BadRadius(OscillabError):
    """Ball radius too small for stable cell averages (below 4h)."""


class OutOfDomain(OscillabError):
    """A queried point leaves a non-periodic computational window."""


class StepTooLarge(OscillabError):
    """Integrator step violates the h * Lip <= 0.5 stability guard."""


class DomainError(OscillabError):
    """Scale-gauge function evaluated at a ratio below 1."""


class ZeroSeminorm(OscillabError):
    """Composition ratio requested for a (numerically) constant function."""


class ViolatedBound(OscillabError):
    """An inequality certified analytically failed numerically.

    Carries the witness point in ``args[1]`` when available.
    """


class HeightExceeded(OscillabError):
    """Carleson box taller than the density's maximal height T."""


class RadiusViolation(OscillabError):
    """A covering ball exceeds the source ball radius."""


class NonPeriodic(OscillabError):
    """Spectral operation requested on a non-periodic grid."""


class TooFewPoints(OscillabError):
    """Growth-law fit needs at least 4 sample points."""


class SpecError(OscillabError):
    """Sweep specification failed validation; message lists the bad fields."""
