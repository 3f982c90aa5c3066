"""Tests for the Lagrangian-to-Euler map."""

__copyright__ = """
Copyright (c) 2024 The vacuum-cns contributors.
All rights reserved.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from euler_map import EulerSnapshot, euler_mass, flow_map, to_euler
from grid_state import build_grid
from init_families import InitialData
from lag_state import LagState, initial_state
from stepper import StepperConfig, run


def test_identity_at_start(bump_data: InitialData) -> None:
    """With J = 1 and no anchor shift the particles sit at their labels."""
    snap = to_euler(initial_state(bump_data), bump_data)
    np.testing.assert_allclose(snap.x_nodes, bump_data.grid.nodes, atol=1e-12)
    np.testing.assert_allclose(snap.x_cells, bump_data.grid.cells, atol=1e-12)
    np.testing.assert_array_equal(snap.rho, bump_data.rho0_cell)
    np.testing.assert_array_equal(snap.u, bump_data.v0)


def test_mass_is_rho0_integral(bump_data: InitialData) -> None:
    """sum rho dx recovers h sum rho0."""
    snap = to_euler(initial_state(bump_data), bump_data)
    expected = bump_data.grid.h * float(np.sum(bump_data.rho0_cell))
    assert euler_mass(snap) == pytest.approx(expected, rel=1e-14)


def test_stretched_cells() -> None:
    """Doubling J doubles every cell width."""
    g = build_grid(1.0, 4)
    state = LagState(t=0.0, j=[2.0] * 4, v=[0.0] * 5, pi=[0.0] * 4, anchor_shift=0.5)
    eta = flow_map(state, g)
    assert eta.tolist() == [-0.5, 0.5, 1.5, 2.5, 3.5]


def test_flow_map_needs_positive_j() -> None:
    """A folded map is refused."""
    g = build_grid(1.0, 4)
    state = LagState(t=0.0, j=[1.0, -1.0, 1.0, 1.0], v=[0.0] * 5, pi=[0.0] * 4)
    with pytest.raises(ValueError, match="J > 0"):
        flow_map(state, g)


def test_flow_map_rejects_collapsed_cells() -> None:
    """A cell too thin to move its right node is refused."""
    g = build_grid(1.0, 4)
    state = LagState(t=0.0, j=[1.0, 1e-300, 1.0, 1.0], v=[0.0] * 5, pi=[0.0] * 4)
    with pytest.raises(ValueError, match="not increasing"):
        flow_map(state, g)


def test_snapshot_must_be_monotone() -> None:
    """Particles may not overtake each other."""
    with pytest.raises(ValidationError, match="not injective"):
        EulerSnapshot(
            t=0.0,
            x_nodes=np.array([0.0, 2.0, 1.0]),
            x_cells=np.array([1.0, 1.5]),
            widths=np.array([2.0, 1.0]),
            rho=np.ones(2),
            u=np.zeros(3),
            p=np.zeros(2),
        )


def test_mass_conserved_along_run(bump_data: InitialData) -> None:
    """The moving cells keep their mass while the gas expands."""
    final, _ = run(bump_data, StepperConfig(dt=1e-2), 0.1, sample_every=10, delta=1.4)
    snap0 = to_euler(initial_state(bump_data), bump_data)
    snap = to_euler(final, bump_data)
    assert euler_mass(snap) == pytest.approx(euler_mass(snap0), rel=1e-12)
    assert np.all(np.diff(snap.x_nodes) > 0.0)
    left = -bump_data.grid.half_width + final.anchor_shift
    assert snap.x_nodes[0] == pytest.approx(left)
    # free walls move outwards into the vacuum
    assert snap.x_nodes[0] < -bump_data.grid.half_width
    assert snap.x_nodes[-1] > bump_data.grid.half_width
