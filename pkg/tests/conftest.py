"""Shared fixtures: the open-loop-unstable reference plant in both
measurement modes, its spectral data, and the externally supplied gains."""

from __future__ import annotations

import math

import pytest

from rdstab import (
    Coefficient,
    Measurement,
    PlantSpec,
    analyze_plant,
    gainset_from_arrays,
)

DELTA = 0.5
REFERENCE_K = [-0.6950]
REFERENCE_L_DIRICHLET = [1.7695]
REFERENCE_L_NEUMANN = [1.2856]


def make_reference_plant(measurement: Measurement) -> PlantSpec:
    return PlantSpec(
        p=Coefficient.constant(1.0),
        q_tilde=Coefficient.constant(-5.0),
        theta1=math.pi / 5.0,
        theta2=0.0,
        delay=1.0,
        measurement=measurement,
    )


@pytest.fixture(scope="session")
def dirichlet_plant() -> PlantSpec:
    return make_reference_plant(Measurement.DIRICHLET)


@pytest.fixture(scope="session")
def neumann_plant() -> PlantSpec:
    return make_reference_plant(Measurement.NEUMANN)


@pytest.fixture(scope="session")
def dirichlet_data(dirichlet_plant):
    return analyze_plant(dirichlet_plant)


@pytest.fixture(scope="session")
def neumann_data(neumann_plant):
    return analyze_plant(neumann_plant)


@pytest.fixture(scope="session")
def dirichlet_gains(dirichlet_plant, dirichlet_data):
    return gainset_from_arrays(dirichlet_plant, dirichlet_data, DELTA,
                               REFERENCE_K, REFERENCE_L_DIRICHLET)


@pytest.fixture(scope="session")
def neumann_gains(neumann_plant, neumann_data):
    return gainset_from_arrays(neumann_plant, neumann_data, DELTA,
                               REFERENCE_K, REFERENCE_L_NEUMANN)
