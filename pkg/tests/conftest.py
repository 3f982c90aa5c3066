"""Shared fixtures."""

__copyright__ = """
Copyright (c) 2024 The vacuum-cns contributors.
All rights reserved.
"""

import pytest

from grid_state import build_grid
from init_families import (
    BumpVelocity,
    GasConstants,
    InitialData,
    PowerLawFamily,
    power_law_initial_data,
    raw_initial_data,
)


@pytest.fixture(name="gas")
def fixture_gas() -> GasConstants:
    """Air-like gas with unit viscosity."""
    return GasConstants(gamma=1.4, viscosity=1.0)


@pytest.fixture(name="bump_family")
def fixture_bump_family() -> PowerLawFamily:
    """The rho0 = <y>^(-3/2), s0 = 1 family with a bump of amplitude 1/2."""
    return PowerLawFamily(
        k_rho=1.0,
        ell_rho=1.5,
        s0=1.0,
        bump=BumpVelocity(amplitude=0.5, center=0.0, width=2.0),
    )


@pytest.fixture(name="bump_data")
def fixture_bump_data(gas: GasConstants, bump_family: PowerLawFamily) -> InitialData:
    """Bump data on a moderate grid."""
    return power_law_initial_data(build_grid(10.0, 100), gas, bump_family)


@pytest.fixture(name="uniform_data")
def fixture_uniform_data(gas: GasConstants) -> InitialData:
    """rho0 = 1, v0 = 0, pi0 = 1 on [-1, 1] with 8 cells."""
    g = build_grid(1.0, 8)
    return raw_initial_data(g, gas, [1.0] * 9, [0.0] * 9, [1.0] * 8)


@pytest.fixture(name="flagship_data")
def fixture_flagship_data(
    gas: GasConstants, bump_family: PowerLawFamily
) -> InitialData:
    """The bump family on [-50, 50] with 2000 cells."""
    return power_law_initial_data(build_grid(50.0, 2000), gas, bump_family)
