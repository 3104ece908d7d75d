"""Finite-dimensional gain design for the observer-predictor controller.

The unstable part of the modal system is the diagonal pair
``A0 = diag(-lambda_n + q_c)``, ``B0 = (beta_n)`` for ``n <= N0``, observed
through the boundary trace row ``C0``.  This module picks ``N0``, checks
controllability/observability of the reduced pair, and places poles with the
single-input Ackermann formula (observer gains via duality).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrum, IllConditioned, SpectrumTooShort
from .spectral import Measurement, PlantSpec, SpectralData, measurement_traces

__all__ = [
    "KalmanReport",
    "GainSet",
    "select_n0",
    "kalman_check",
    "place_poles",
    "default_targets",
    "design_gains",
    "gainset_from_arrays",
]

#: Eigenvalue separation below which the diagonal pair is treated as degenerate.
GAP_TOL = 1e-10

#: Condition-number ceiling for the Ackermann controllability matrix.
COND_LIMIT = 1e12


@dataclass(frozen=True)
class KalmanReport:
    """Outcome of the rank test for a diagonal single-input/output pair."""

    controllable: bool
    offending_index: int | None
    min_gap: float
    mode: str


@dataclass(frozen=True)
class GainSet:
    """Designed or injected feedback/observer gains with stability margins.

    ``K`` is the state-feedback row (length N0) acting on the predicted
    modal state, ``L`` the observer injection column (length N0).  Margins
    are ``-delta - max Re eig(...)`` of the corresponding closed-loop block,
    positive when the design meets the decay target.
    """

    delta: float
    n0: int
    K: np.ndarray
    L: np.ndarray
    margin_ctrl: float
    margin_obs: float


def select_n0(data: SpectralData, delta: float) -> int:
    """Smallest N0 >= 1 with -lambda_n + q_c < -delta for all n > N0."""
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    mu = -data.lam + data.split.q_c
    # mu is strictly decreasing, so the condition is just on index N0 + 1
    stable = np.flatnonzero(mu < -delta)
    if stable.size == 0 or stable[0] >= data.n_modes - 1:
        raise SpectrumTooShort(
            f"no admissible N0 within {data.n_modes} computed modes for delta = {delta}")
    return max(1, int(stable[0]))


def kalman_check(a_diag: np.ndarray, b: np.ndarray, mode: str = "control") -> KalmanReport:
    """PBH test for a diagonal pair: every coupling entry must be nonzero.

    Raises
    ------
    DegenerateSpectrum
        If two diagonal entries are closer than 1e-10; pole placement on a
        repeated diagonal mode is meaningless for a single input.
    """
    a_diag = np.asarray(a_diag, dtype=float)
    b = np.asarray(b, dtype=float)
    if a_diag.shape != b.shape or a_diag.ndim != 1:
        raise ValueError("diagonal and coupling vectors must be 1-D and equal length")
    if a_diag.size > 1:
        min_gap = float(np.min(np.abs(np.diff(np.sort(a_diag)))))
    else:
        min_gap = np.inf
    if min_gap < GAP_TOL:
        raise DegenerateSpectrum(
            f"diagonal entries separated by {min_gap:.2e} < {GAP_TOL:.0e}")
    tol = 1e-14 * max(1.0, float(np.max(np.abs(b))) if b.size else 1.0)
    zero = np.flatnonzero(np.abs(b) <= tol)
    if zero.size:
        return KalmanReport(False, int(zero[0]) + 1, min_gap, mode)
    return KalmanReport(True, None, min_gap, mode)


def place_poles(a_diag: np.ndarray, b: np.ndarray, targets,
                delta: float | None = None) -> np.ndarray:
    """Gain row K with eig(diag(a) + b K) equal to the requested targets.

    Single-input Ackermann formula.  Targets must be closed under complex
    conjugation; when ``delta`` is given they must also satisfy
    ``Re(target) < -delta``.

    Raises
    ------
    IllConditioned
        If the pair is uncontrollable, the controllability matrix has
        condition number above 1e12, or the placed spectrum misses the
        targets by more than 1e-6 relative.
    """
    a_diag = np.asarray(a_diag, dtype=float)
    b = np.asarray(b, dtype=float)
    targets = np.asarray(targets, dtype=complex)
    n = a_diag.size
    if targets.size != n or b.size != n:
        raise ValueError("targets, diagonal and coupling must share one length")

    report = kalman_check(a_diag, b)
    if not report.controllable:
        raise IllConditioned(
            f"mode {report.offending_index} has zero coupling; pair is uncontrollable")

    coeffs = np.poly(targets)
    if np.max(np.abs(coeffs.imag)) > 1e-9 * max(1.0, float(np.max(np.abs(coeffs)))):
        raise ValueError("targets must be closed under complex conjugation")
    coeffs = coeffs.real
    if delta is not None and np.any(targets.real >= -delta):
        raise ValueError(f"all targets need real part < -delta = {-delta}")

    cols = [b]
    for _ in range(n - 1):
        cols.append(a_diag * cols[-1])
    ctrb = np.stack(cols, axis=1)
    cond = np.linalg.cond(ctrb)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditioned(
            f"controllability matrix condition {cond:.2e} exceeds {COND_LIMIT:.0e}; "
            "reduce N0 or spread the target poles")

    # Ackermann row e_n^T C^{-1} alpha(A); alpha(A) is diagonal here
    alpha_of_a = np.polyval(coeffs, a_diag)
    y = np.linalg.solve(ctrb.T, _last_basis_vector(n))
    gain = -(y * alpha_of_a)

    placed = np.linalg.eigvals(np.diag(a_diag) + np.outer(b, gain))
    if _spectrum_distance(placed, targets) > 1e-6 * (1.0 + float(np.max(np.abs(targets)))):
        raise IllConditioned("pole placement lost accuracy; spread targets or reduce N0")
    return gain


def _last_basis_vector(n: int) -> np.ndarray:
    e = np.zeros(n)
    e[-1] = 1.0
    return e


def _spectrum_distance(got: np.ndarray, want: np.ndarray) -> float:
    order = np.lexsort((got.imag, got.real))
    worder = np.lexsort((want.imag, want.real))
    return float(np.max(np.abs(got[order] - want[worder])))


def default_targets(mu: np.ndarray, delta: float) -> np.ndarray:
    """Shifted open-loop poles: min(mu_n, 0) - delta - 1 - 0.3 (n - 1)."""
    mu = np.asarray(mu, dtype=float)
    idx = np.arange(mu.size)
    return np.minimum(mu, 0.0) - delta - 1.0 - 0.3 * idx


def design_gains(plant: PlantSpec, data: SpectralData, delta: float,
                 n0: int | None = None,
                 ctrl_targets=None, obs_targets=None) -> GainSet:
    """Select N0 and place feedback and observer poles.

    Observer gains come from the dual pair ``(A0, C0^T)``: if K' places the
    dual spectrum then ``L = -K'^T`` gives ``eig(A0 - L C0)`` at the targets.
    """
    if n0 is None:
        n0 = select_n0(data, delta)
    if n0 >= data.n_modes:
        raise SpectrumTooShort(f"n0 = {n0} needs more than {data.n_modes} computed modes")
    mu = -data.lam[:n0] + data.split.q_c
    if -data.lam[n0] + data.split.q_c >= -delta:
        raise SpectrumTooShort(
            f"mode {n0 + 1} is not delta-stable; increase n0 (select_n0 gives the minimum)")
    b0 = data.beta_n[:n0] if data.beta_n is not None else None
    if b0 is None:
        raise SpectrumTooShort("spectral data lacks projections; run project_sources")
    c0 = measurement_traces(data, plant.measurement)[:n0]

    if ctrl_targets is None:
        ctrl_targets = default_targets(mu, delta)
    if obs_targets is None:
        obs_targets = default_targets(mu, delta)
    K = place_poles(mu, b0, ctrl_targets, delta=delta)
    L = -place_poles(mu, c0, obs_targets, delta=delta)
    return _with_margins(delta, n0, K, L, mu, b0, c0)


def gainset_from_arrays(plant: PlantSpec, data: SpectralData, delta: float,
                        K, L) -> GainSet:
    """Wrap externally supplied gains, recomputing the stability margins."""
    K = np.asarray(K, dtype=float).ravel()
    L = np.asarray(L, dtype=float).ravel()
    if K.size != L.size or K.size == 0:
        raise ValueError("K and L must be non-empty and of equal length")
    n0 = K.size
    required = select_n0(data, delta)
    if n0 < required:
        raise SpectrumTooShort(
            f"supplied gains cover {n0} modes but delta = {delta} needs N0 >= {required}")
    mu = -data.lam[:n0] + data.split.q_c
    b0 = data.beta_n[:n0]
    c0 = measurement_traces(data, plant.measurement)[:n0]
    return _with_margins(delta, n0, K, L, mu, b0, c0)


def _with_margins(delta: float, n0: int, K: np.ndarray, L: np.ndarray,
                  mu: np.ndarray, b0: np.ndarray, c0: np.ndarray) -> GainSet:
    ctrl_eigs = np.linalg.eigvals(np.diag(mu) + np.outer(b0, K))
    obs_eigs = np.linalg.eigvals(np.diag(mu) - np.outer(L, c0))
    margin_ctrl = -delta - float(np.max(ctrl_eigs.real))
    margin_obs = -delta - float(np.max(obs_eigs.real))
    return GainSet(delta=delta, n0=n0, K=K.copy(), L=L.copy(),
                   margin_ctrl=margin_ctrl, margin_obs=margin_obs)
