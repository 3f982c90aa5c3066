"""Maps a Lagrangian state to Euler coordinates through the flow map."""

__copyright__ = """
Copyright (c) 2024 The vacuum-cns contributors.
All rights reserved.
"""

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from grid_state import CellField, Grid1D, NodeField
from init_families import InitialData
from lag_state import LagState


class EulerSnapshot(BaseModel):
    """Represents (rho, u, p) sampled at the particle positions at time t.

    x_nodes: eta(y_i, t), where u lives.
    x_cells: midpoints of the moved cells, where rho and p live.
    widths: moved cell widths h J.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    t: float
    x_nodes: NodeField
    x_cells: CellField
    widths: CellField
    rho: CellField
    u: NodeField
    p: CellField

    @model_validator(mode="after")
    def _check_monotone(self) -> "EulerSnapshot":
        if not np.all(np.diff(self.x_nodes) > 0.0):
            raise ValueError("flow map is not injective")
        return self


def flow_map(state: LagState, g: Grid1D) -> NodeField:
    """Integrates eta_y = J from the left endpoint.

    eta(y_0) = y_0 + anchor_shift, then eta(y_{i+1}) = eta(y_i) + h J_{i+1/2}.

    Example:
    >>> from grid_state import build_grid
    >>> g = build_grid(1.0, 4)
    >>> s = LagState(t=0.0, j=[2.0] * 4, v=[0.0] * 5, pi=[0.0] * 4)
    >>> flow_map(s, g).tolist()
    [-1.0, 0.0, 1.0, 2.0, 3.0]
    """
    if not np.all(state.j > 0.0):
        raise ValueError("flow map needs J > 0")
    start = -g.half_width + state.anchor_shift
    eta = np.empty(g.num_nodes)
    eta[0] = start
    eta[1:] = start + np.cumsum(g.h * state.j)
    if not np.all(np.diff(eta) > 0.0):
        raise ValueError("flow map is not increasing")
    return eta


def to_euler(state: LagState, d: InitialData) -> EulerSnapshot:
    """Samples rho = rho0/J, u = v and p = pi at the moved particles."""
    x = flow_map(state, d.grid)
    return EulerSnapshot(
        t=state.t,
        x_nodes=x,
        x_cells=0.5 * (x[:-1] + x[1:]),
        widths=d.grid.h * state.j,
        rho=d.rho0_cell / state.j,
        u=state.v.copy(),
        p=state.pi.copy(),
    )


def euler_mass(snap: EulerSnapshot) -> float:
    """Returns sum rho dx over the moved cells, h sum rho0 up to rounding."""
    return float(np.sum(snap.rho * snap.widths))
