"""Coefficient descriptors: evaluation, derivatives, round trips, rejects."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rdstab import Coefficient, ConfigError

X = np.linspace(0.0, 1.0, 101)


def test_constant_evaluates_flat():
    c = Coefficient.constant(3.5)
    assert np.all(c(X) == 3.5)
    assert np.all(c.derivative(X) == 0.0)


def test_polynomial_matches_horner():
    c = Coefficient.polynomial([1.0, -2.0, 0.5])
    expected = 1.0 - 2.0 * X + 0.5 * X ** 2
    np.testing.assert_allclose(c(X), expected, rtol=1e-14)
    np.testing.assert_allclose(c.derivative(X), -2.0 + X, rtol=1e-13, atol=1e-14)


def test_trig_evaluates_and_differentiates():
    c = Coefficient.trig(offset=1.0, amplitude=0.25, cycles=2.0, phase=0.3)
    w = 2.0 * np.pi * 2.0
    np.testing.assert_allclose(c(X), 1.0 + 0.25 * np.cos(w * X + 0.3), rtol=1e-14)
    np.testing.assert_allclose(c.derivative(X), -0.25 * w * np.sin(w * X + 0.3),
                               rtol=1e-13, atol=1e-12)


def test_samples_interpolates_linearly():
    c = Coefficient.samples([0.0, 1.0, 0.0])
    assert c(0.25) == pytest.approx(0.5)
    assert c(0.75) == pytest.approx(0.5)


def test_samples_derivative_matches_slope():
    values = np.linspace(2.0, 5.0, 41)
    c = Coefficient.samples(values)
    np.testing.assert_allclose(c.derivative(X), 3.0, rtol=1e-10)


@pytest.mark.parametrize("coeff", [
    Coefficient.constant(-2.0),
    Coefficient.polynomial([0.5, 1.0, -1.0]),
    Coefficient.trig(offset=2.0, amplitude=0.5, cycles=1.5, phase=0.1, function="sin"),
    Coefficient.samples([1.0, 2.0, 1.5, 0.5]),
])
def test_descriptor_round_trip(coeff):
    clone = Coefficient.from_dict(coeff.to_dict())
    np.testing.assert_array_equal(clone(X), coeff(X))
    assert clone.to_dict() == coeff.to_dict()


def test_derivative_matches_finite_differences():
    c = Coefficient.trig(offset=0.0, amplitude=1.0, cycles=0.75, phase=0.2)
    x = np.linspace(0.05, 0.95, 19)
    e = 1e-6
    numeric = (c(x + e) - c(x - e)) / (2.0 * e)
    np.testing.assert_allclose(c.derivative(x), numeric, rtol=1e-8, atol=1e-7)


@pytest.mark.parametrize("build", [
    lambda: Coefficient("rational", {}),
    lambda: Coefficient.polynomial([]),
    lambda: Coefficient.trig(function="tan"),
    lambda: Coefficient.samples([1.0]),
    lambda: Coefficient.from_dict({"value": 1.0}),
    lambda: Coefficient.from_dict({"kind": "polynomial"}),
    lambda: Coefficient.from_dict({"kind": "spline", "values": [1, 2]}),
])
def test_bad_descriptors_rejected(build):
    with pytest.raises(ConfigError):
        build()


@given(st.lists(st.floats(min_value=-10, max_value=10, allow_nan=False),
                min_size=1, max_size=6))
def test_polynomial_round_trip_preserves_values(coeffs):
    c = Coefficient.polynomial(coeffs)
    clone = Coefficient.from_dict(c.to_dict())
    np.testing.assert_array_equal(clone(X), c(X))


@given(st.floats(min_value=-5, max_value=5, allow_nan=False),
       st.floats(min_value=-3, max_value=3, allow_nan=False),
       st.floats(min_value=0.1, max_value=4, allow_nan=False))
def test_trig_round_trip_preserves_values(offset, amplitude, cycles):
    c = Coefficient.trig(offset=offset, amplitude=amplitude, cycles=cycles)
    clone = Coefficient.from_dict(c.to_dict())
    np.testing.assert_array_equal(clone(X), c(X))
