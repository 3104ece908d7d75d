"""Spectral analysis of the reaction-diffusion operator on [0, 1].

The operator is ``A f = -(p f')' + q f`` with separated boundary conditions

* ``cos(theta1) f(0) - sin(theta1) f'(0) = 0``,
* ``cos(theta2) f(1) + sin(theta2) f'(1) = 0``,

where ``q`` comes from shifting the raw reaction coefficient ``q_tilde`` by a
constant ``q_c`` so that ``q > 0``.  This module computes the low spectrum
and boundary traces with a self-adjoint second-order finite-volume scheme,
sharpened by Richardson extrapolation over an exact ratio-2 grid chain, and
derives the modal source coefficients used by the controller design:
``a_n``, ``b_n`` and the input vector ``beta_n``.

All quadratures are composite trapezoid rules with Euler-Maclaurin endpoint
correction, which keeps the modal identity

``beta_n = a_n + (-lambda_n + q_c) b_n = p(1) (-cos(theta2) phi_n'(1) + sin(theta2) phi_n(1))``

tight for the low modes that the design actually uses.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .coeffs import Coefficient
from .errors import DivergenceGuard, InvalidPlant, ResolutionError

__all__ = [
    "Measurement",
    "CertificateKind",
    "PlantSpec",
    "ReactionSplit",
    "SpectralData",
    "split_reaction",
    "eigensolve_on_grid",
    "compute_spectrum",
    "project_sources",
    "identity_residuals",
    "residual_norms",
    "tail_constant",
    "measurement_traces",
    "analyze_plant",
]

#: Relative drift of the refined top eigenvalue above which the grid is
#: declared too coarse for the requested mode count.
RESOLUTION_GUARD = 1.0e-4

#: Safety factor applied to empirical trace bounds in the tail estimate.
TRACE_SAFETY = 2.0

_TRAPZ = getattr(np, "trapezoid", np.trapz)


class Measurement(enum.Enum):
    """Which boundary observation the output feedback uses at x = 0."""

    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


class CertificateKind(enum.Enum):
    """Stability-certificate family; fixes norms, tail weights and scalars."""

    H1_DIRICHLET = "h1-dirichlet"
    L2_DIRICHLET = "l2-dirichlet"
    H1_NEUMANN = "h1-neumann"

    @property
    def measurement(self) -> Measurement:
        if self is CertificateKind.H1_NEUMANN:
            return Measurement.NEUMANN
        return Measurement.DIRICHLET


@dataclass(frozen=True)
class PlantSpec:
    """Plant description: coefficients, boundary angles, delay, measurement.

    Parameters
    ----------
    p : Coefficient
        Diffusion coefficient, strictly positive on [0, 1].
    q_tilde : Coefficient
        Raw reaction coefficient (sign-indefinite).
    theta1, theta2 : float
        Boundary angles in [0, pi/2].  theta1 = 0 is a Dirichlet condition
        at x = 0, theta1 = pi/2 a Neumann condition; theta2 plays the same
        role at x = 1 where the delayed control enters.
    delay : float
        Input delay h > 0.
    measurement : Measurement
        Boundary observation; DIRICHLET requires theta1 > 0, NEUMANN
        requires theta1 < pi/2.
    """

    p: Coefficient
    q_tilde: Coefficient
    theta1: float
    theta2: float
    delay: float
    measurement: Measurement

    def __post_init__(self) -> None:
        half_pi = math.pi / 2.0
        for name, theta in (("theta1", self.theta1), ("theta2", self.theta2)):
            if not 0.0 <= theta <= half_pi + 1e-12:
                raise InvalidPlant(f"{name} = {theta} outside [0, pi/2]")
        if self.delay <= 0.0:
            raise InvalidPlant(f"delay must be positive, got {self.delay}")
        if self.measurement is Measurement.DIRICHLET and math.sin(self.theta1) == 0.0:
            raise InvalidPlant("Dirichlet measurement needs theta1 in (0, pi/2]")
        if self.measurement is Measurement.NEUMANN and math.cos(self.theta1) == 0.0:
            raise InvalidPlant("Neumann measurement needs theta1 in [0, pi/2)")
        probe = np.linspace(0.0, 1.0, 201)
        pv = self.p(probe)
        if np.any(pv <= 0.0):
            raise InvalidPlant("diffusion coefficient must be positive on [0, 1]")


@dataclass(frozen=True)
class ReactionSplit:
    """Shifted reaction coefficient: q = q_tilde + q_c with q > 0."""

    q_c: float
    q: Coefficient


@dataclass(frozen=True)
class SpectralData:
    """Computed spectrum, boundary traces and modal source coefficients.

    Eigenvectors are stored on the full fine grid (boundary nodes included),
    L2-normalized under the trapezoid inner product, with the sign fixed so
    that the first of (phi_n(0), phi_n'(0)) exceeding 1e-8 in magnitude is
    positive.  ``a_n``/``b_n``/``beta_n`` are None until
    :func:`project_sources` fills them.
    """

    n_modes: int
    grid_size: int
    dx: float
    x: np.ndarray
    lam: np.ndarray
    eigvecs: np.ndarray
    phi0: np.ndarray
    dphi0: np.ndarray
    phi1: np.ndarray
    dphi1: np.ndarray
    split: ReactionSplit
    pstar: float
    a_n: np.ndarray | None = None
    b_n: np.ndarray | None = None
    beta_n: np.ndarray | None = None
    norm_a_sq: float | None = None
    norm_b_sq: float | None = None


# ---------------------------------------------------------------------------
# reaction split


def split_reaction(plant: PlantSpec, probe_points: int = 4001) -> ReactionSplit:
    """Shift q_tilde by q_c = max(0, 1 - min q_tilde) so that q >= 1 or q_c = 0.

    The minimum is taken over a dense uniform probe grid, which is exact for
    the closed coefficient forms used in practice and conservative enough
    for sampled data.
    """
    probe = np.linspace(0.0, 1.0, probe_points)
    qt = plant.q_tilde(probe)
    q_c = max(0.0, 1.0 - float(np.min(qt)))
    shifted = _shift_coefficient(plant.q_tilde, q_c)
    return ReactionSplit(q_c=q_c, q=shifted)


def _shift_coefficient(coef: Coefficient, delta: float) -> Coefficient:
    if delta == 0.0:
        return coef
    if coef.kind == "constant":
        return Coefficient.constant(coef.params["value"] + delta)
    if coef.kind == "polynomial":
        c = list(coef.params["coeffs"])
        c[0] += delta
        return Coefficient.polynomial(c)
    if coef.kind == "trig":
        p = dict(coef.params)
        p["offset"] += delta
        return Coefficient.trig(**p)
    return Coefficient.samples(coef.params["values"] + delta)


# ---------------------------------------------------------------------------
# eigensolve


def _is_dirichlet(theta: float) -> bool:
    return math.sin(theta) == 0.0


def eigensolve_on_grid(plant: PlantSpec, split: ReactionSplit, n_modes: int,
                       interior_points: int):
    """Raw second-order eigensolve at one fixed resolution.

    Builds the self-adjoint finite-volume discretization (half-cell rows for
    Robin/Neumann ends, eliminated nodes for Dirichlet ends) and solves the
    resulting symmetric tridiagonal problem for the lowest ``n_modes`` pairs.

    Returns
    -------
    lam : ndarray
        Raw eigenvalues, ascending, without extrapolation.
    vecs : ndarray, shape (interior_points + 2, n_modes)
        Eigenvectors on the full grid (zeros inserted at Dirichlet ends),
        orthonormal under the trapezoid inner product.
    x : ndarray
        Full grid including both boundary nodes.
    """
    G = int(interior_points)
    dx = 1.0 / (G + 1)
    x = np.linspace(0.0, 1.0, G + 2)
    robin0 = not _is_dirichlet(plant.theta1)
    robin1 = not _is_dirichlet(plant.theta2)
    lo = 0 if robin0 else 1
    hi = G + 1 if robin1 else G
    nodes = x[lo:hi + 1]
    n_dof = nodes.size
    if n_modes > n_dof:
        raise ResolutionError(
            f"{n_modes} modes requested from a {n_dof}-unknown discretization")

    p_half = plant.p(0.5 * (x[:-1] + x[1:]))
    if np.any(p_half <= 0.0):
        raise InvalidPlant("diffusion coefficient must be positive on [0, 1]")
    q_nodes = split.q(nodes)
    if np.any(q_nodes < 0.0):
        raise InvalidPlant("shifted reaction coefficient must be nonnegative")

    # flux couplings between retained nodes; p_half[i] couples x_i to x_{i+1}
    flux = p_half[lo:hi] / dx
    diag = np.empty(n_dof)
    diag[1:-1] = flux[:-1] + flux[1:]
    mass = np.full(n_dof, dx)
    if robin0:
        diag[0] = flux[0] + float(plant.p(0.0)) * _cot(plant.theta1)
        mass[0] = dx / 2.0
    else:
        diag[0] = (p_half[0] + p_half[1]) / dx
    if robin1:
        diag[-1] = flux[-1] + float(plant.p(1.0)) * _cot(plant.theta2)
        mass[-1] = dx / 2.0
    else:
        diag[-1] = (p_half[-2] + p_half[-1]) / dx
    diag += mass * q_nodes
    off = -flux

    d_sym = diag / mass
    e_sym = off / np.sqrt(mass[:-1] * mass[1:])
    lam, g = eigh_tridiagonal(d_sym, e_sym, select="i",
                              select_range=(0, n_modes - 1))
    vecs_dof = g / np.sqrt(mass)[:, None]

    vecs = np.zeros((G + 2, n_modes))
    vecs[lo:hi + 1, :] = vecs_dof
    return lam, vecs, x


def _cot(theta: float) -> float:
    return math.cos(theta) / math.sin(theta)


def _one_sided_derivative(values: np.ndarray, dx: float, left: bool) -> np.ndarray:
    """Fourth-order 5-point one-sided first derivative at an endpoint."""
    w = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * dx)
    if left:
        sl = values[:5]
        return np.tensordot(w, sl, axes=(0, 0))
    sl = values[-5:][::-1]
    return -np.tensordot(w, sl, axes=(0, 0))


def _corrected_trapezoid(values: np.ndarray, dx: float):
    """Trapezoid rule with Euler-Maclaurin endpoint-slope correction."""
    base = _TRAPZ(values, dx=dx, axis=0)
    d0 = _one_sided_derivative(values, dx, left=True)
    d1 = _one_sided_derivative(values, dx, left=False)
    return base - dx * dx / 12.0 * (d1 - d0)


def _normalize_grid(interior_points: int) -> int:
    """Smallest G' >= G with G' = 3 (mod 4), so the ratio-2 chain is exact."""
    G = int(interior_points)
    return G + ((3 - G) % 4)


def compute_spectrum(plant: PlantSpec, split: ReactionSplit,
                     n_modes: int = 120, grid_size: int = 4001) -> SpectralData:
    """Compute the lowest ``n_modes`` eigenpairs with boundary traces.

    The raw scheme is solved on a chain of three grids with mesh ratio
    exactly 2 (the requested interior count is rounded up to 3 mod 4 to make
    the chain exact).  Eigenvalues are Richardson-extrapolated from the two
    finer grids; the same extrapolation on the two coarser grids provides an
    error estimate for the resolution guard.  Eigenvectors and boundary
    traces come from the finest grid, with derivatives extracted by
    fourth-order one-sided stencils.

    Raises
    ------
    ResolutionError
        If ``grid_size < 10 * n_modes`` or the refined top eigenvalue still
        drifts by more than 1e-4 relative between the two grid pairs.
    InvalidPlant
        If p is not positive, q is negative, or the spectrum comes out
        negative/non-increasing, which indicates inconsistent plant data.
    """
    if n_modes < 2:
        raise ResolutionError("at least 2 modes are required")
    if grid_size < 10 * n_modes:
        raise ResolutionError(
            f"grid_size = {grid_size} cannot resolve {n_modes} modes; "
            f"need at least {10 * n_modes} interior points")

    G_f = _normalize_grid(grid_size)
    G_c = (G_f - 1) // 2
    G_cc = (G_c - 1) // 2
    lam_f, vecs, x = eigensolve_on_grid(plant, split, n_modes, G_f)
    lam_c, _, _ = eigensolve_on_grid(plant, split, n_modes, G_c)
    lam_cc, _, _ = eigensolve_on_grid(plant, split, n_modes, G_cc)

    lam_fine = (4.0 * lam_f - lam_c) / 3.0
    lam_coarse = (4.0 * lam_c - lam_cc) / 3.0
    scale = max(1.0, float(lam_fine[-1]))
    drift = float(np.max(np.abs(lam_fine - lam_coarse))) / scale
    if drift > RESOLUTION_GUARD:
        raise ResolutionError(
            f"top mode drifts by {drift:.2e} relative between refinements "
            f"(guard {RESOLUTION_GUARD:.0e}); increase grid_size or reduce n_modes")

    lam = lam_fine.copy()
    tiny = 1e-10 * scale
    lam[np.abs(lam) < tiny] = 0.0
    if lam[0] < 0.0:
        raise InvalidPlant(f"negative leading eigenvalue {lam[0]:.3e}")
    if np.any(np.diff(lam) <= 0.0):
        raise InvalidPlant("computed eigenvalues are not strictly increasing")

    dx = 1.0 / (G_f + 1)
    phi0 = vecs[0, :].copy()
    phi1 = vecs[-1, :].copy()
    dphi0 = _one_sided_derivative(vecs, dx, left=True)
    dphi1 = _one_sided_derivative(vecs, dx, left=False)

    lead = np.where(np.abs(phi0) > 1e-8, np.sign(phi0), np.sign(dphi0))
    lead[lead == 0.0] = 1.0
    vecs *= lead
    phi0 *= lead
    phi1 *= lead
    dphi0 *= lead
    dphi1 *= lead

    pstar = float(np.min(plant.p(x)))
    return SpectralData(
        n_modes=n_modes, grid_size=G_f, dx=dx, x=x, lam=lam, eigvecs=vecs,
        phi0=phi0, dphi0=dphi0, phi1=phi1, dphi1=dphi1, split=split,
        pstar=pstar,
    )


# ---------------------------------------------------------------------------
# modal sources


def project_sources(plant: PlantSpec, split: ReactionSplit,
                    data: SpectralData) -> SpectralData:
    """Fill the modal source coefficients a_n, b_n, beta_n and source norms.

    The auxiliary input-normalization functions are

    ``a(x) = (2 p + 2 x p' - x^2 q_tilde) / (cos(theta2) + 2 sin(theta2))``,
    ``b(x) = -x^2 / (cos(theta2) + 2 sin(theta2))``,

    projected onto the eigenbasis by endpoint-corrected trapezoid
    quadrature, while ``beta_n`` is evaluated from the boundary traces as
    ``p(1) (-cos(theta2) phi_n'(1) + sin(theta2) phi_n(1))``.
    """
    x = data.x
    den = math.cos(plant.theta2) + 2.0 * math.sin(plant.theta2)
    a_vals = (2.0 * plant.p(x) + 2.0 * x * plant.p.derivative(x)
              - x * x * plant.q_tilde(x)) / den
    b_vals = -x * x / den

    a_n = _corrected_trapezoid(a_vals[:, None] * data.eigvecs, data.dx)
    b_n = _corrected_trapezoid(b_vals[:, None] * data.eigvecs, data.dx)
    beta_n = float(plant.p(1.0)) * (
        -math.cos(plant.theta2) * data.dphi1 + math.sin(plant.theta2) * data.phi1)
    norm_a_sq = float(_corrected_trapezoid(a_vals * a_vals, data.dx))
    norm_b_sq = float(_corrected_trapezoid(b_vals * b_vals, data.dx))
    return replace(data, a_n=a_n, b_n=b_n, beta_n=beta_n,
                   norm_a_sq=norm_a_sq, norm_b_sq=norm_b_sq)


def identity_residuals(data: SpectralData) -> np.ndarray:
    """Per-mode normalized residual of the beta identity.

    ``|beta_n - (a_n + (-lambda_n + q_c) b_n)| / max(1, |beta_n|)`` -- the
    consistency check tying quadrature projections to boundary traces.
    """
    _require_projections(data)
    mu = -data.lam + data.split.q_c
    lhs = data.a_n + mu * data.b_n
    return np.abs(data.beta_n - lhs) / np.maximum(1.0, np.abs(data.beta_n))


def residual_norms(data: SpectralData, N: int) -> tuple[float, float]:
    """L2 norms of the source functions minus their first N modes (squared).

    Returns ``(resA, resB)`` with ``resA = ||a||^2 - sum_{n<=N} a_n^2``
    clamped at zero, and similarly for b.
    """
    _require_projections(data)
    if not 0 <= N <= data.n_modes:
        raise ResolutionError(f"N = {N} outside computed range 0..{data.n_modes}")
    resA = max(data.norm_a_sq - float(np.sum(data.a_n[:N] ** 2)), 0.0)
    resB = max(data.norm_b_sq - float(np.sum(data.b_n[:N] ** 2)), 0.0)
    return resA, resB


def _require_projections(data: SpectralData) -> None:
    if data.a_n is None or data.b_n is None or data.beta_n is None:
        raise ResolutionError("spectral data lacks projections; run project_sources")


# ---------------------------------------------------------------------------
# tail constants


def _tail_split(data: SpectralData, N: int, kind: CertificateKind,
                epsilon: float | None) -> tuple[float, float]:
    """(partial sum over computed modes, analytic bound beyond them)."""
    if not 0 <= N < data.n_modes:
        raise ResolutionError(
            f"tail requires N < n_modes, got N = {N}, n_modes = {data.n_modes}")
    lam_tail = data.lam[N:]
    if lam_tail[0] <= 0.0:
        raise DivergenceGuard("tail weights need lambda_{N+1} > 0")

    if kind is CertificateKind.H1_NEUMANN:
        if epsilon is None or not 0.0 < epsilon <= 0.5:
            raise DivergenceGuard("epsilon must lie in (0, 1/2] for the Neumann tail")
        numer = data.dphi0[N:] ** 2
        exponent = 1.5 + epsilon
        positive = data.lam > 0.0
        trace_bound = TRACE_SAFETY * float(
            np.max(np.abs(data.dphi0[positive]) / np.sqrt(data.lam[positive])))
        # |phi_n'(0)|^2 <= trace_bound^2 * lambda_n, so the generic tail
        # exponent drops by one power of lambda
        s = exponent - 1.0
    else:
        numer = data.phi0[N:] ** 2
        exponent = 1.0 if kind is CertificateKind.H1_DIRICHLET else 0.75
        trace_bound = TRACE_SAFETY * float(np.max(np.abs(data.phi0)))
        s = exponent

    partial = float(np.sum(numer / lam_tail ** exponent))

    if 2.0 * s <= 1.0:
        raise DivergenceGuard(f"tail exponent 2s = {2 * s:.3f} <= 1 does not converge")
    # modes beyond the computed range: lambda_n >= pi^2 (n-1)^2 p_*, and the
    # index shift n-1 >= n_modes turns the remainder into sum_{j>=M} j^{-2s}
    M = data.n_modes
    base = trace_bound ** 2 / (math.pi ** 2 * data.pstar) ** s
    tail = base * (M ** (-2.0 * s) + M ** (1.0 - 2.0 * s) / (2.0 * s - 1.0))
    return partial, tail


def tail_constant(data: SpectralData, N: int, kind: CertificateKind,
                  epsilon: float | None = None) -> float:
    """Upper bound on the measurement-trace tail series beyond mode N.

    Sums the explicit terms over the computed modes N+1..n_modes and bounds
    the remainder analytically from the eigenvalue growth
    ``lambda_n >= pi^2 (n-1)^2 p_*`` together with an empirical trace bound
    (maximum over computed modes, doubled).  The remainder piece is a
    heuristic, not a certified constant; certificates carry a note saying so.

    Series by kind:

    * H1_DIRICHLET: ``sum phi_n(0)^2 / lambda_n``
    * L2_DIRICHLET: ``sum phi_n(0)^2 / lambda_n^(3/4)``
    * H1_NEUMANN:   ``sum phi_n'(0)^2 / lambda_n^(3/2 + epsilon)``
    """
    partial, tail = _tail_split(data, N, kind, epsilon)
    return partial + tail


def measurement_traces(data: SpectralData, measurement: Measurement) -> np.ndarray:
    """Boundary traces of the eigenfunctions seen by the chosen sensor."""
    if measurement is Measurement.DIRICHLET:
        return data.phi0
    return data.dphi0


def analyze_plant(plant: PlantSpec, n_modes: int = 120,
                  grid_size: int = 4001) -> SpectralData:
    """Split the reaction term, solve the spectrum and project the sources."""
    split = split_reaction(plant)
    data = compute_spectrum(plant, split, n_modes=n_modes, grid_size=grid_size)
    return project_sources(plant, split, data)
