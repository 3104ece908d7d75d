"""Spectral reduction against closed-form oracles.

The reference plant (constant diffusion 1, reaction -5 shifted by q_c = 6,
Robin angle pi/5 at x = 0, Dirichlet end at x = 1) separates: with
k = sqrt(lambda - 1) the eigenvalues solve

    k + arctan(k tan(pi/5)) = m pi,   m = 1, 2, ...

and the eigenfunctions are c sin(k (1 - x)) with c^2 = 4k / (2k - sin 2k).
Every reference-plant check below is against this closed form; the frozen
numbers were produced by an independent evaluation of the root equation.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdstab import (
    CertificateKind,
    Coefficient,
    DivergenceGuard,
    InvalidPlant,
    Measurement,
    PlantSpec,
    ReactionSplit,
    ResolutionError,
    compute_spectrum,
    eigensolve_on_grid,
    identity_residuals,
    measurement_traces,
    project_sources,
    residual_norms,
    split_reaction,
    tail_constant,
)
from tests.conftest import make_reference_plant

TAN1 = math.tan(math.pi / 5.0)

# roots of k + arctan(k tan(pi/5)) = m pi, squared plus the shift q = 1
ORACLE_LAM = np.array([5.58791525, 25.81972142, 65.38239843,
                       124.62631559, 203.59442761, 302.29628787])
# |c_m sin k_m| after the positive-leading-trace sign convention
ORACLE_PHI0 = np.array([1.08055446, 1.32933205, 1.37960377, 1.39586869])
# sign(sin k_m) c_m k_m: the Dirichlet-end input coefficients
ORACLE_BETA = np.array([2.75113977, -6.87075015, 11.23143470, -15.63876053])


def _roots(count: int) -> np.ndarray:
    """Fixed-point solve of the transcendental eigenvalue equation."""
    m = np.arange(1, count + 1, dtype=float)
    k = m * math.pi
    for _ in range(80):
        k = m * math.pi - np.arctan(k * TAN1)
    return k


def _mode_shapes(k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(phi_m(0), beta_m) of the normalized closed-form eigenfunctions."""
    c = np.sqrt(4.0 * k / (2.0 * k - np.sin(2.0 * k)))
    sign = np.sign(np.sin(k))
    return np.abs(c * np.sin(k)), sign * c * k


def _oracle_tail(N: int, kind: CertificateKind, terms: int = 300_000) -> float:
    """Direct summation of the trace tail series from the closed form."""
    k = _roots(terms)[N:]
    lam = k * k + 1.0
    c2 = 4.0 * k / (2.0 * k - np.sin(2.0 * k))
    if kind is CertificateKind.H1_NEUMANN:
        series = c2 * (k * np.cos(k)) ** 2 / lam ** 1.625
        remainder = (2.0 / TAN1 ** 2) / (math.pi ** 1.25 * 1.25 * terms ** 1.25)
    elif kind is CertificateKind.H1_DIRICHLET:
        series = c2 * np.sin(k) ** 2 / lam
        remainder = 2.0 / (math.pi ** 2 * terms)
    else:
        series = c2 * np.sin(k) ** 2 / lam ** 0.75
        remainder = 4.0 / (math.pi ** 1.5 * math.sqrt(terms))
    return float(np.sum(series)) + remainder


# ---------------------------------------------------------------------------
# reference-plant oracles


def test_eigenvalues_match_root_equation(dirichlet_data):
    np.testing.assert_allclose(dirichlet_data.lam[:6], ORACLE_LAM, rtol=1e-6)
    k = _roots(6)
    np.testing.assert_allclose(dirichlet_data.lam[:6], k * k + 1.0, rtol=1e-8)


def test_traces_and_input_coefficients_match_closed_form(dirichlet_data):
    np.testing.assert_allclose(dirichlet_data.phi0[:4], ORACLE_PHI0, rtol=1e-6)
    np.testing.assert_allclose(dirichlet_data.beta_n[:4], ORACLE_BETA, rtol=1e-6)
    phi0, beta = _mode_shapes(_roots(4))
    np.testing.assert_allclose(dirichlet_data.phi0[:4], phi0, rtol=1e-7)
    np.testing.assert_allclose(dirichlet_data.beta_n[:4], beta, rtol=1e-7)


def test_source_projections_match_quadrature_oracle(dirichlet_data):
    # a(x) = 2 + 5 x^2 projected onto the closed-form eigenfunctions
    k = _roots(4)
    x = np.linspace(0.0, 1.0, 20001)
    c = np.sqrt(4.0 * k / (2.0 * k - np.sin(2.0 * k))) * np.sign(np.sin(k))
    phi = c[:, None] * np.sin(k[:, None] * (1.0 - x[None, :]))
    a_oracle = np.trapezoid((2.0 + 5.0 * x * x) * phi, x, axis=1)
    b_oracle = np.trapezoid(-x * x * phi, x, axis=1)
    np.testing.assert_allclose(dirichlet_data.a_n[:4], a_oracle, rtol=1e-6)
    np.testing.assert_allclose(dirichlet_data.b_n[:4], b_oracle, rtol=1e-6, atol=1e-9)


def test_source_identity_tight_for_low_modes(dirichlet_data):
    assert identity_residuals(dirichlet_data)[:20].max() <= 1e-6


def test_source_norms_closed_form(dirichlet_data):
    assert dirichlet_data.norm_a_sq == pytest.approx(47.0 / 3.0, rel=1e-9)
    assert dirichlet_data.norm_b_sq == pytest.approx(0.2, rel=1e-9)


def test_reaction_split_shifts_by_six(dirichlet_plant, dirichlet_data):
    assert dirichlet_data.split.q_c == pytest.approx(6.0)
    x = np.linspace(0.0, 1.0, 7)
    np.testing.assert_allclose(dirichlet_data.split.q(x), 1.0, rtol=1e-12)


def test_measurement_does_not_change_the_operator(dirichlet_data, neumann_data):
    np.testing.assert_array_equal(dirichlet_data.lam, neumann_data.lam)


# ---------------------------------------------------------------------------
# constant-coefficient analytic spectra


def _identity_split_data(theta1: float, theta2: float,
                         measurement: Measurement, grid: int = 2001):
    plant = PlantSpec(p=Coefficient.constant(1.0), q_tilde=Coefficient.constant(0.0),
                      theta1=theta1, theta2=theta2, delay=1.0,
                      measurement=measurement)
    split = ReactionSplit(q_c=0.0, q=Coefficient.constant(0.0))
    return plant, split, compute_spectrum(plant, split, n_modes=24, grid_size=grid)


def test_dirichlet_dirichlet_spectrum_and_input():
    plant, split, data = _identity_split_data(0.0, 0.0, Measurement.NEUMANN)
    n = np.arange(1, 11)
    np.testing.assert_allclose(data.lam[:10], (n * math.pi) ** 2, rtol=1e-8)
    data = project_sources(plant, split, data)
    assert data.beta_n[0] == pytest.approx(math.sqrt(2.0) * math.pi, rel=1e-8)
    assert identity_residuals(data)[:10].max() <= 1e-6


def test_neumann_neumann_spectrum_starts_at_zero():
    _, _, data = _identity_split_data(math.pi / 2.0, math.pi / 2.0,
                                      Measurement.DIRICHLET)
    assert data.lam[0] == 0.0
    n = np.arange(1, 11)
    exact = ((n - 1) * math.pi) ** 2
    np.testing.assert_allclose(data.lam[:10], exact, atol=1e-8 * exact[-1])


# ---------------------------------------------------------------------------
# basis quality


def test_eigenvectors_orthonormal_under_trapezoid(dirichlet_data):
    w = np.full(dirichlet_data.x.size, dirichlet_data.dx)
    w[0] = w[-1] = dirichlet_data.dx / 2.0
    vecs = dirichlet_data.eigvecs[:, :12]
    gram = (vecs * w[:, None]).T @ vecs
    np.testing.assert_allclose(gram, np.eye(12), atol=1e-7)


def test_eigenvalues_strictly_increase(dirichlet_data):
    assert np.all(np.diff(dirichlet_data.lam) > 0.0)


def test_leading_trace_sign_convention(dirichlet_data):
    assert np.all(dirichlet_data.phi0 > 0.0)


def test_richardson_ratio_is_second_order(dirichlet_plant):
    split = split_reaction(dirichlet_plant)
    lam_1, _, _ = eigensolve_on_grid(dirichlet_plant, split, 6, 499)
    lam_2, _, _ = eigensolve_on_grid(dirichlet_plant, split, 6, 999)
    lam_3, _, _ = eigensolve_on_grid(dirichlet_plant, split, 6, 1999)
    ratios = (lam_1 - lam_2) / (lam_2 - lam_3)
    assert np.all((3.5 <= ratios) & (ratios <= 4.5))


# ---------------------------------------------------------------------------
# tail constants


@pytest.mark.parametrize("N", [2, 5])
@pytest.mark.parametrize("kind,epsilon,tight", [
    (CertificateKind.H1_DIRICHLET, None, 1.2),
    (CertificateKind.L2_DIRICHLET, None, 1.7),
    (CertificateKind.H1_NEUMANN, 0.125, None),
])
def test_tail_constant_bounds_the_true_series(dirichlet_data, N, kind, epsilon, tight):
    bound = tail_constant(dirichlet_data, N, kind, epsilon)
    true = _oracle_tail(N, kind)
    assert bound >= true * (1.0 - 1e-6)
    if tight is not None:
        # the Dirichlet-trace bounds stay within honest reach of the series;
        # the Neumann one must also cover plants whose derivative trace
        # grows like sqrt(lambda), so no tightness is promised there
        assert bound <= tight * true


def test_tail_constant_frozen_values(dirichlet_data):
    assert tail_constant(dirichlet_data, 2, CertificateKind.H1_DIRICHLET) == \
        pytest.approx(0.0995586, rel=1e-4)
    assert tail_constant(dirichlet_data, 2, CertificateKind.L2_DIRICHLET) == \
        pytest.approx(0.6886656, rel=1e-4)
    assert tail_constant(dirichlet_data, 2, CertificateKind.H1_NEUMANN, 0.125) == \
        pytest.approx(0.4656846, rel=1e-4)


def test_tail_constant_guards(dirichlet_data):
    with pytest.raises(DivergenceGuard):
        tail_constant(dirichlet_data, 2, CertificateKind.H1_NEUMANN, None)
    with pytest.raises(ResolutionError):
        tail_constant(dirichlet_data, dirichlet_data.n_modes,
                      CertificateKind.H1_DIRICHLET)
    _, _, nn = _identity_split_data(math.pi / 2.0, math.pi / 2.0,
                                    Measurement.DIRICHLET, grid=513)
    with pytest.raises(DivergenceGuard):
        tail_constant(nn, 0, CertificateKind.H1_DIRICHLET)


def test_residual_norms_monotone_and_anchored(dirichlet_data):
    res_a0, res_b0 = residual_norms(dirichlet_data, 0)
    assert res_a0 == pytest.approx(dirichlet_data.norm_a_sq)
    assert res_b0 == pytest.approx(dirichlet_data.norm_b_sq)
    pairs = [residual_norms(dirichlet_data, n) for n in (0, 2, 5, 10, 20)]
    for (a_prev, b_prev), (a_next, b_next) in zip(pairs, pairs[1:]):
        assert a_next <= a_prev + 1e-12
        assert b_next <= b_prev + 1e-12
    res_a2, res_b2 = residual_norms(dirichlet_data, 2)
    assert res_a2 == pytest.approx(4.7257684, rel=1e-5)
    assert res_b2 == pytest.approx(0.0933788, rel=1e-5)


# ---------------------------------------------------------------------------
# guards and rejects


def test_grid_too_small_for_modes(dirichlet_plant):
    split = split_reaction(dirichlet_plant)
    with pytest.raises(ResolutionError):
        compute_spectrum(dirichlet_plant, split, n_modes=80, grid_size=159)
    with pytest.raises(ResolutionError):
        compute_spectrum(dirichlet_plant, split, n_modes=1, grid_size=1001)


def test_underresolved_chain_trips_the_drift_guard(dirichlet_plant):
    split = split_reaction(dirichlet_plant)
    with pytest.raises(ResolutionError, match="drifts"):
        compute_spectrum(dirichlet_plant, split, n_modes=100, grid_size=1003)


def test_invalid_plants_rejected():
    with pytest.raises(InvalidPlant):
        PlantSpec(p=Coefficient.constant(-1.0), q_tilde=Coefficient.constant(0.0),
                  theta1=0.1, theta2=0.0, delay=1.0,
                  measurement=Measurement.DIRICHLET)
    with pytest.raises(InvalidPlant):
        PlantSpec(p=Coefficient.constant(1.0), q_tilde=Coefficient.constant(0.0),
                  theta1=0.0, theta2=0.0, delay=1.0,
                  measurement=Measurement.DIRICHLET)
    with pytest.raises(InvalidPlant):
        PlantSpec(p=Coefficient.constant(1.0), q_tilde=Coefficient.constant(0.0),
                  theta1=math.pi / 2.0, theta2=0.0, delay=1.0,
                  measurement=Measurement.NEUMANN)
    with pytest.raises(InvalidPlant):
        PlantSpec(p=Coefficient.constant(1.0), q_tilde=Coefficient.constant(0.0),
                  theta1=0.1, theta2=0.0, delay=0.0,
                  measurement=Measurement.DIRICHLET)


def test_negative_shifted_reaction_rejected(dirichlet_plant):
    bad = ReactionSplit(q_c=0.0, q=Coefficient.constant(-1.0))
    with pytest.raises(InvalidPlant):
        compute_spectrum(dirichlet_plant, bad, n_modes=4, grid_size=127)


def test_unprojected_data_has_no_residuals(dirichlet_plant):
    split = split_reaction(dirichlet_plant)
    bare = compute_spectrum(dirichlet_plant, split, n_modes=4, grid_size=127)
    with pytest.raises(ResolutionError):
        identity_residuals(bare)


def test_measurement_traces_pick_the_right_column(dirichlet_data):
    np.testing.assert_array_equal(
        measurement_traces(dirichlet_data, Measurement.DIRICHLET),
        dirichlet_data.phi0)
    np.testing.assert_array_equal(
        measurement_traces(dirichlet_data, Measurement.NEUMANN),
        dirichlet_data.dphi0)


# ---------------------------------------------------------------------------
# reaction-split properties


@settings(max_examples=40)
@given(st.floats(min_value=-8.0, max_value=3.0, allow_nan=False))
def test_split_constant_reaction(value):
    plant = PlantSpec(p=Coefficient.constant(1.0),
                      q_tilde=Coefficient.constant(value),
                      theta1=0.3, theta2=0.2, delay=1.0,
                      measurement=Measurement.DIRICHLET)
    split = split_reaction(plant)
    assert split.q_c == pytest.approx(max(0.0, 1.0 - value))
    probe = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(split.q(probe), max(1.0, value), rtol=1e-12)


@settings(max_examples=40)
@given(st.floats(min_value=-6.0, max_value=2.0, allow_nan=False),
       st.floats(min_value=-2.0, max_value=2.0, allow_nan=False),
       st.floats(min_value=-2.0, max_value=2.0, allow_nan=False))
def test_split_quadratic_reaction_is_at_least_one(c0, c1, c2):
    plant = PlantSpec(p=Coefficient.constant(1.0),
                      q_tilde=Coefficient.polynomial([c0, c1, c2]),
                      theta1=0.3, theta2=0.2, delay=1.0,
                      measurement=Measurement.DIRICHLET)
    split = split_reaction(plant)
    probe = np.linspace(0.0, 1.0, 4001)
    q_min = float(np.min(split.q(probe)))
    q_tilde_min = float(np.min(plant.q_tilde(probe)))
    assert split.q_c >= 0.0
    assert q_min == pytest.approx(max(1.0, q_tilde_min), abs=1e-9)
