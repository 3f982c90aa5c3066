"""The evolving Lagrangian state and the effective viscous flux."""

__copyright__ = """
Copyright (c) 2024 The vacuum-cns contributors.
All rights reserved.
"""

from typing import Any

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, model_validator

from grid_state import CellField, NodeField, cell_derivative
from init_families import InitialData


class LagState(BaseModel):
    """Represents the solution (J, v, pi) at time t.

    j: Jacobian of the flow map at the cells.
    v: velocity at the nodes.
    pi: pressure at the cells.
    anchor_shift: displacement of the left endpoint, int_0^t v(-L) dtau.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    t: float
    j: CellField
    v: NodeField
    pi: CellField
    anchor_shift: float = 0.0

    @model_validator(mode="before")
    @classmethod
    def _coerce_arrays(cls, data: Any) -> Any:
        if isinstance(data, dict):
            for key in ("j", "v", "pi"):
                if key in data:
                    data[key] = np.asarray(data[key], dtype=np.float64)
        return data

    @model_validator(mode="after")
    def _check_layout(self) -> "LagState":
        if self.j.shape != self.pi.shape or self.v.shape != (self.j.size + 1,):
            raise ValueError(
                f"inconsistent layout: J {self.j.shape}, pi {self.pi.shape}, "
                f"v {self.v.shape}"
            )
        return self


def initial_state(d: InitialData) -> LagState:
    """Returns (J, v, pi) at t = 0, equal to (J0, v0, pi0)."""
    return LagState(t=0.0, j=d.j0.copy(), v=d.v0.copy(), pi=d.pi0.copy())


def compute_G(state: LagState, d: InitialData) -> CellField:  # noqa: N802
    """Returns the effective viscous flux G = mu v_y/J - pi at the cells.

    Example:
    >>> from grid_state import build_grid
    >>> from init_families import GasConstants, raw_initial_data
    >>> g = build_grid(1.0, 4)
    >>> d = raw_initial_data(g, GasConstants(viscosity=2.0), [1.0] * 5,
    ...                      [0.0] * 5, [0.0] * 4)
    >>> s = LagState(t=0.0, j=[1.0] * 4, v=g.nodes, pi=[0.0] * 4)
    >>> compute_G(s, d).tolist()
    [2.0, 2.0, 2.0, 2.0]
    """
    result: CellField = (
        d.constants.viscosity * cell_derivative(state.v, d.grid) / state.j
        - state.pi
    )
    return result


def floor_product(
    j: npt.NDArray[np.float64], pi: npt.NDArray[np.float64], gamma: float
) -> npt.NDArray[np.float64]:
    """Returns J^gamma pi, the quantity nondecreasing along every trajectory.

    The stepper and the diagnostics both go through this function so the
    monotonicity check compares bit-identical expressions.
    """
    result: npt.NDArray[np.float64] = np.power(j, gamma) * pi
    return result
