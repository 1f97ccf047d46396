"""Exception hierarchy for bohmlab."""

from __future__ import annotations


class BohmlabError(Exception):
    """Base class for all bohmlab errors."""


class ConfigError(BohmlabError):
    """Invalid or malformed run configuration."""


# -- spacetime ---------------------------------------------------------------

class BetaOutOfRangeError(BohmlabError):
    """Boost velocity with |beta| >= 1."""


class DegenerateTriadError(BohmlabError):
    """Separation vectors do not span a 3-dimensional tangent space."""


class NonTimelikeNormalError(BohmlabError):
    """Null space of the orthogonality system is not timelike."""


# -- fields ------------------------------------------------------------------

class DomainError(BohmlabError):
    """Field evaluated outside the packet support (z <= 0 behind the wall)."""


class BothZeroError(BohmlabError):
    """Both branch amplitudes vanish; weights are undefined."""


class ModeError(BohmlabError):
    """Operation requested in an incompatible waveguide mode."""


class ZeroAmplitudeError(BohmlabError):
    """Amplitude vanishes where a logarithmic gradient is needed."""


# -- trajectories ------------------------------------------------------------

class FieldBlowupError(BohmlabError):
    """Velocity magnitude exceeded the configured bound during integration."""


# -- ensemble ----------------------------------------------------------------

class NoArrivalsError(BohmlabError):
    """Statistic requested on a histogram with no recorded arrivals."""


class TooFewSamplesError(BohmlabError):
    """Ensemble smaller than the classifier's minimum size."""


class InsufficientSeparationError(BohmlabError):
    """Reference distributions do not clear the calibration margin."""


class EmptySampleError(BohmlabError):
    """Empty sample passed to a statistic."""


class EmptyChannelPairError(BohmlabError):
    """A channel pair has zero total counts."""


# -- protocol ----------------------------------------------------------------

class ProtocolError(BohmlabError):
    """Base class for failures of the detection/signaling protocols."""


class SimultaneousAmbiguousError(ProtocolError):
    """Run rejected: events fall within the simultaneity tolerance."""


class NoBracketError(ProtocolError):
    """Both search endpoints classify identically; no switch point bracketed."""


class IndeterminateRunError(ProtocolError):
    """Run classification stayed indeterminate after escalating the ensemble."""


class CannotEstablishOrderError(ProtocolError):
    """Calibration exhausted the waveguide range without locking the order."""


class NotCalibratedError(ProtocolError):
    """Signaling attempted on a geometry that was never calibrated."""
