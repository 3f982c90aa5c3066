"""Staggered 1D grid and the discrete calculus shared by every module."""

__copyright__ = """
Copyright (c) 2024 The vacuum-cns contributors.
All rights reserved.
"""

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, model_validator

# velocity v, nodal density, flow map eta
NodeField = npt.NDArray[np.float64]
# J, pi, cell density, G, temperature, entropy
CellField = npt.NDArray[np.float64]

MIN_CELLS = 4


class Grid1D(BaseModel):
    """Represents a uniform staggered grid on the truncated line [-L, L].

    half_width: L, the half-width of the domain.
    num_cells: N, the number of thermodynamic cells.

    Velocities live on the N+1 nodes y_i = -L + i*h, thermodynamic variables
    on the N cell centers y_{i+1/2} = -L + (i+1/2)*h.

    Example:
    >>> g = Grid1D(half_width=1.0, num_cells=4)
    >>> g.h
    0.5
    >>> g.nodes.tolist()
    [-1.0, -0.5, 0.0, 0.5, 1.0]
    >>> g.cells.tolist()
    [-0.75, -0.25, 0.25, 0.75]
    """

    model_config = ConfigDict(frozen=True)

    half_width: float
    num_cells: int

    @model_validator(mode="after")
    def _check_domain(self) -> "Grid1D":
        if self.half_width <= 0.0:
            raise ValueError(f"degenerate domain: L = {self.half_width} <= 0")
        if self.num_cells < MIN_CELLS:
            raise ValueError(
                f"degenerate domain: N = {self.num_cells} < {MIN_CELLS} cells"
            )
        return self

    @property
    def h(self) -> float:
        """Returns the spacing 2L/N."""
        return 2.0 * self.half_width / self.num_cells

    @property
    def num_nodes(self) -> int:
        """Returns the node count N+1."""
        return self.num_cells + 1

    @property
    def nodes(self) -> NodeField:
        """Returns the node coordinates, endpoints exactly at -L and +L."""
        return np.linspace(-self.half_width, self.half_width, self.num_nodes)

    @property
    def cells(self) -> CellField:
        """Returns the cell-center coordinates."""
        return -self.half_width + (np.arange(self.num_cells) + 0.5) * self.h


def build_grid(half_width: float, num_cells: int) -> Grid1D:
    """Builds the staggered grid on [-L, L] with N cells.

    Raises ValueError on a degenerate domain (L <= 0 or N < 4).

    Example:
    >>> build_grid(50.0, 2000).h
    0.05
    >>> build_grid(1.0, 3)
    Traceback (most recent call last):
    ...
    ValueError: degenerate domain: N = 3 < 4 cells
    """
    if half_width <= 0.0:
        raise ValueError(f"degenerate domain: L = {half_width} <= 0")
    if num_cells < MIN_CELLS:
        raise ValueError(f"degenerate domain: N = {num_cells} < {MIN_CELLS} cells")
    return Grid1D(half_width=half_width, num_cells=num_cells)


def check_node_field(f: npt.ArrayLike, g: Grid1D, name: str = "field") -> NodeField:
    """Returns f as a float array after checking it has one value per node."""
    arr = np.asarray(f, dtype=np.float64)
    if arr.shape != (g.num_nodes,):
        raise ValueError(
            f"{name} has shape {arr.shape}, expected ({g.num_nodes},) node values"
        )
    return arr


def check_cell_field(f: npt.ArrayLike, g: Grid1D, name: str = "field") -> CellField:
    """Returns f as a float array after checking it has one value per cell."""
    arr = np.asarray(f, dtype=np.float64)
    if arr.shape != (g.num_cells,):
        raise ValueError(
            f"{name} has shape {arr.shape}, expected ({g.num_cells},) cell values"
        )
    return arr


def cell_derivative(v: npt.ArrayLike, g: Grid1D) -> CellField:
    """Differentiates a node field onto the cells: (v_{i+1} - v_i)/h.

    Exact for affine fields, second order at the cell midpoints.

    Example:
    >>> g = build_grid(1.0, 4)
    >>> cell_derivative(g.nodes**2, g).tolist()
    [-1.5, -0.5, 0.5, 1.5]
    """
    return np.diff(check_node_field(v, g, "v")) / g.h


def node_divergence(flux: npt.ArrayLike, g: Grid1D) -> NodeField:
    """Differentiates a cell field onto the interior nodes.

    Returns a node field whose interior entries are
    (F_{i+1/2} - F_{i-1/2})/h; the two boundary entries are left at zero,
    they belong to the boundary closure of the stepper.

    Example:
    >>> g = build_grid(1.0, 4)
    >>> node_divergence(g.cells, g).tolist()
    [0.0, 1.0, 1.0, 1.0, 0.0]
    """
    f = check_cell_field(flux, g, "flux")
    div = np.zeros(g.num_nodes)
    div[1:-1] = np.diff(f) / g.h
    return div


def node_to_cell(f: npt.ArrayLike, g: Grid1D) -> CellField:
    """Averages a node field onto the cells.

    Boundary node entries are replaced by their interior neighbour first, so a
    field produced by node_divergence interpolates without the zero fill.
    """
    arr = check_node_field(f, g).copy()
    arr[0] = arr[1]
    arr[-1] = arr[-2]
    return 0.5 * (arr[:-1] + arr[1:])


def integrate(f: npt.ArrayLike, g: Grid1D) -> float:
    """Returns h * sum(f), the quadrature used for both node and cell fields."""
    return float(g.h * np.sum(np.asarray(f, dtype=np.float64)))


def weighted_l2(f: npt.ArrayLike, w: npt.ArrayLike, g: Grid1D) -> float:
    """Returns the discrete weighted norm sqrt(sum f_k^2 w_k h).

    Raises ValueError if any weight is negative.

    Example:
    >>> g = build_grid(1.0, 4)
    >>> round(weighted_l2([1.0] * 4, [1.0] * 4, g) ** 2, 12)
    2.0
    """
    farr = np.asarray(f, dtype=np.float64)
    warr = np.broadcast_to(np.asarray(w, dtype=np.float64), farr.shape)
    if np.any(warr < 0.0):
        raise ValueError("weighted_l2 requires nonnegative weights")
    return float(np.sqrt(np.sum(farr * farr * warr) * g.h))


def l2_norm(f: npt.ArrayLike, g: Grid1D) -> float:
    """Returns the unweighted discrete L2 norm."""
    return weighted_l2(f, 1.0, g)


def sup_norm(f: npt.ArrayLike) -> float:
    """Returns max |f_k| (zero for an empty field).

    Example:
    >>> sup_norm([1.0, -3.0, 2.0])
    3.0
    """
    arr = np.asarray(f, dtype=np.float64)
    return float(np.max(np.abs(arr))) if arr.size else 0.0
