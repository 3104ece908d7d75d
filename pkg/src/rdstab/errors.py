"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class RdstabError(Exception):
    """Base class for all toolkit-specific failures."""


class InvalidPlant(RdstabError):
    """Plant data violates a structural requirement (e.g. p <= 0 somewhere)."""


class ResolutionError(RdstabError):
    """Requested mode count is not resolved by the requested grid."""


class DivergenceGuard(RdstabError):
    """A series bound that must converge failed its convergence condition."""


class SpectrumTooShort(RdstabError):
    """Not enough computed modes to satisfy a dimension requirement."""


class DegenerateSpectrum(RdstabError):
    """Eigenvalues too close to treat as distinct for gain design."""


class IllConditioned(RdstabError):
    """A design linear system is numerically unreliable."""


class DimensionError(RdstabError):
    """Inconsistent dimensions between spectral data, gains and requests."""


class LyapunovFailure(RdstabError):
    """Lyapunov equation unsolvable or produced an indefinite solution."""


class NotFeasibleWithinBudget(RdstabError):
    """Certificate search exhausted its budget without a feasible point.

    Carries the per-dimension best margins seen during the search in
    ``attempts`` as a list of ``(N, margins)`` pairs.
    """

    def __init__(self, message: str, attempts=None):
        super().__init__(message)
        self.attempts = list(attempts) if attempts is not None else []


class BlowupDetected(RdstabError):
    """Simulated state norm exceeded the runaway threshold."""

    def __init__(self, message: str, time: float | None = None, norm: float | None = None):
        super().__init__(message)
        self.time = time
        self.norm = norm


class ConfigError(RdstabError):
    """Invalid configuration file or inconsistent run parameters."""


class MissingHistory(RdstabError):
    """Recorded trajectory is too coarse to resolve the delay window."""


class NonPositiveData(RdstabError):
    """Logarithmic fit requested on data that is not strictly positive."""


class MissingArtifact(RdstabError):
    """A report stage needs an artifact that an earlier stage did not write."""
