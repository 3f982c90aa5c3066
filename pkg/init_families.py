"""Initial-data families, hypothesis checks and regime classification."""

__copyright__ = """
Copyright (c) 2024 The vacuum-cns contributors.
All rights reserved.
"""

import math
from enum import Enum
from typing import Any

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy import integrate, special

from grid_state import (
    CellField,
    Grid1D,
    NodeField,
    cell_derivative,
    check_cell_field,
    check_node_field,
    integrate as grid_integrate,
    l2_norm,
    weighted_l2,
)


class GasConstants(BaseModel):
    """Represents a polytropic ideal gas without heat conduction.

    gamma: adiabatic exponent, > 1.
    viscosity: mu > 0.
    gas_constant: R > 0.
    entropy_constant: A > 0 in p = A exp(s/c_v) rho^gamma.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    gamma: float = 1.4
    viscosity: float = 1.0
    gas_constant: float = 1.0
    entropy_constant: float = 1.0

    @field_validator("gamma")
    @classmethod
    def _check_gamma(cls, value: float) -> float:
        if not value > 1.0:
            raise ValueError("γ must exceed 1")
        return value

    @field_validator("viscosity", "gas_constant", "entropy_constant")
    @classmethod
    def _check_positive(cls, value: float) -> float:
        if not value > 0.0:
            raise ValueError("must be positive")
        return value

    @property
    def c_v(self) -> float:
        """Returns the specific heat R/(gamma - 1).

        Example:
        >>> round(GasConstants(gamma=1.4, gas_constant=1.0).c_v, 12)
        2.5
        """
        return self.gas_constant / (self.gamma - 1.0)


class BumpVelocity(BaseModel):
    """Represents a compactly supported smooth velocity bump."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    amplitude: float
    center: float = 0.0
    width: float = 1.0


class PowerLawFamily(BaseModel):
    """Represents the far-field-vacuum family rho0 = K / <y>^ell.

    k_rho: amplitude K > 0.
    ell_rho: decay exponent ell >= 0.
    s0: uniform initial entropy of the isentropic pressure.
    bump: initial velocity, None for v0 = 0.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    k_rho: float = 1.0
    ell_rho: float = 1.5
    s0: float = 1.0
    bump: BumpVelocity | None = None

    @field_validator("k_rho")
    @classmethod
    def _check_amplitude(cls, value: float) -> float:
        if not value > 0.0:
            raise ValueError("K_rho must be positive")
        return value

    @field_validator("ell_rho")
    @classmethod
    def _check_exponent(cls, value: float) -> float:
        if value < 0.0:
            raise ValueError("ell_rho must be nonnegative")
        return value


class InitialData(BaseModel):
    """Represents the Cauchy data (J0, v0, pi0) with the reference density rho0.

    rho0_cell and rho0_node sample the same density at cells and nodes.
    family: the generating family, None for raw discrete data.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid1D
    rho0_cell: CellField
    rho0_node: NodeField
    v0: NodeField
    pi0: CellField
    j0: CellField
    constants: GasConstants
    family: PowerLawFamily | None = None

    @model_validator(mode="before")
    @classmethod
    def _coerce_fields(cls, data: Any) -> Any:
        if isinstance(data, dict) and isinstance(data.get("grid"), Grid1D):
            g = data["grid"]
            for key in ("rho0_node", "v0"):
                if key in data:
                    data[key] = check_node_field(data[key], g, key)
            for key in ("rho0_cell", "pi0", "j0"):
                if key in data:
                    data[key] = check_cell_field(data[key], g, key)
        return data

    @model_validator(mode="after")
    def _check_invariants(self) -> "InitialData":
        if not (np.all(self.rho0_cell > 0.0) and np.all(self.rho0_node > 0.0)):
            raise ValueError("rho0 must be positive on the truncated grid")
        if not np.all(self.pi0 >= 0.0):
            raise ValueError("pi0 must be nonnegative")
        if not np.all(self.j0 > 0.0):
            raise ValueError("J0 must be positive")
        for name in ("rho0_cell", "rho0_node", "v0", "pi0", "j0"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} must be finite")
        return self


class RegimeTag(Enum):
    """Regimes in which the weighted flux estimates hold."""

    LOCAL_DELTA1 = "LOCAL_δ1"
    LOCAL_DELTA_GAMMA = "LOCAL_δγ"
    GLOBAL_DELTA1 = "GLOBAL_δ1"
    GLOBAL_DELTA_GAMMA = "GLOBAL_δγ"
    LOCAL_TEMPERATURE = "LOCAL_θ"
    GLOBAL_TEMPERATURE = "GLOBAL_θ"
    LOCAL_COMBINED = "LOCAL_COMBINED"
    GLOBAL_COMBINED = "GLOBAL_COMBINED"


# temperature regimes need gamma above this
TEMPERATURE_GAMMA = 1.25
ELL_MAX = 2.0


class HypothesisReport(BaseModel):
    """Represents the outcome of checking (H1)-(H4) on a dataset.

    Each boolean is recomputed from the margins stored next to it:
    h1 from rho0_max and rho0_min, h2 from pi0_min and the finite (H2) norms,
    h3 from k0 and g0_tail_margin, h4 from rho0_l1, pi0_l1 and a0.
    """

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    delta: float
    analytic: bool
    rho0_max: float
    rho0_min: float
    pi0_min: float
    h2_norms: dict[str, float]
    k0: float
    k0_discrete: float
    g0_weighted_l2: float
    g0_tail_margin: float
    rho0_l1: float
    rho0_l1_grid: float
    pi0_l1: float
    pi0_l1_grid: float
    a0: float
    a0_grid: float
    tags: list[RegimeTag]

    @property
    def h1_ok(self) -> bool:
        """Bounded density, positive on the (truncated) compact."""
        return math.isfinite(self.rho0_max) and self.rho0_min > 0.0

    @property
    def h2_ok(self) -> bool:
        """Nonnegative pressure and finite (H2) norms."""
        return self.pi0_min >= 0.0 and all(
            math.isfinite(x) for x in self.h2_norms.values()
        )

    @property
    def h3_ok(self) -> bool:
        """Finite decay constant and weighted G0 norm."""
        return math.isfinite(self.k0) and self.g0_tail_margin > 0.0

    @property
    def h4_ok(self) -> bool:
        """Integrable density and pressure, quadratic-decay lower bound."""
        return (
            math.isfinite(self.rho0_l1)
            and math.isfinite(self.pi0_l1)
            and self.a0 > 0.0
        )

    @property
    def all_ok(self) -> bool:
        """All four hypotheses hold."""
        return self.h1_ok and self.h2_ok and self.h3_ok and self.h4_ok


def japanese_bracket(y: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Returns <y> = (1 + y^2)^(1/2)."""
    arr = np.asarray(y, dtype=np.float64)
    return np.sqrt(1.0 + arr * arr)


def power_law_profile(k_rho: float, ell_rho: float, y: npt.ArrayLike) -> Any:
    """Evaluates K / <y>^ell at arbitrary points.

    Example:
    >>> round(float(power_law_profile(1.0, 2.0, 3.0**0.5)), 12)
    0.25
    """
    return k_rho / japanese_bracket(y) ** ell_rho


def power_law_density(
    k_rho: float, ell_rho: float, g: Grid1D
) -> tuple[CellField, NodeField]:
    """Samples rho0 = K / <y>^ell at the cells and the nodes.

    Raises ValueError for K <= 0 or ell < 0.

    Example:
    >>> from grid_state import build_grid
    >>> cell, node = power_law_density(2.0, 0.0, build_grid(1.0, 4))
    >>> cell.tolist(), node.tolist()
    ([2.0, 2.0, 2.0, 2.0], [2.0, 2.0, 2.0, 2.0, 2.0])
    """
    if not k_rho > 0.0:
        raise ValueError("K_rho must be positive")
    if ell_rho < 0.0:
        raise ValueError("ell_rho must be nonnegative")
    return (
        power_law_profile(k_rho, ell_rho, g.cells),
        power_law_profile(k_rho, ell_rho, g.nodes),
    )


def isentropic_pressure(
    rho0: npt.ArrayLike, s0: float, c: GasConstants
) -> CellField:
    """Returns pi0 = A exp(s0/c_v) rho0^gamma.

    Example:
    >>> c = GasConstants(gamma=1.4, entropy_constant=1.0, gas_constant=1.0)
    >>> round(float(isentropic_pressure([1.0], 1.0, c)[0]), 6)
    1.491825
    """
    rho = np.asarray(rho0, dtype=np.float64)
    if not np.all(rho > 0.0):
        raise ValueError("isentropic pressure needs rho0 > 0")
    result: CellField = c.entropy_constant * np.exp(s0 / c.c_v) * rho**c.gamma
    return result


def bump_profile(bump: BumpVelocity, y: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Evaluates the mollifier bump a*exp(1 - 1/(1 - z^2)), z = (y - c)/w."""
    z = (np.asarray(y, dtype=np.float64) - bump.center) / bump.width
    inside = np.abs(z) < 1.0
    out = np.zeros_like(z)
    zi = z[inside]
    out[inside] = bump.amplitude * np.exp(1.0 - 1.0 / (1.0 - zi * zi))
    return out


def bump_velocity(
    amplitude: float, center: float, width: float, g: Grid1D
) -> NodeField:
    """Samples the C_c^inf bump at the nodes.

    Raises ValueError unless the support [c - w, c + w] lies strictly inside
    (-L, L).

    Example:
    >>> from grid_state import build_grid
    >>> v = bump_velocity(1.0, 0.0, 1.0, build_grid(2.0, 8))
    >>> [round(float(x), 6) for x in v[3:6]]
    [0.716531, 1.0, 0.716531]
    """
    if not width > 0.0:
        raise ValueError("bump width must be positive")
    if not (-g.half_width < center - width and center + width < g.half_width):
        raise ValueError(
            f"bump support [{center - width}, {center + width}] must lie strictly "
            f"inside (-{g.half_width}, {g.half_width})"
        )
    bump = BumpVelocity(amplitude=amplitude, center=center, width=width)
    return bump_profile(bump, g.nodes)


def power_law_l1(k_rho: float, ell_rho: float) -> float:
    """Returns the whole-line integral of K / <y>^ell, infinite for ell <= 1.

    Uses int (1 + y^2)^(-a) dy = B(1/2, a - 1/2).

    Example:
    >>> round(power_law_l1(1.0, 2.0), 12) == round(math.pi, 12)
    True
    >>> power_law_l1(1.0, 0.5)
    inf
    """
    if ell_rho <= 1.0:
        return math.inf
    return float(k_rho * special.beta(0.5, 0.5 * (ell_rho - 1.0)))


def k0_bound(family: PowerLawFamily) -> float:
    """Returns K0 = 2 sup |(1/sqrt(rho0))'| for the power-law family.

    |(1/sqrt(rho0))'| = (ell/2)|y|<y>^(ell/2 - 2)/sqrt(K); for ell < 2 the
    supremum sits at y^2 = 2/(2 - ell), for ell = 2 it is the limit 1/sqrt(K)
    at infinity, for ell > 2 it is infinite.

    Example:
    >>> k0_bound(PowerLawFamily(k_rho=1.0, ell_rho=2.0))
    2.0
    >>> k0_bound(PowerLawFamily(k_rho=3.0, ell_rho=0.0))
    0.0
    >>> k0_bound(PowerLawFamily(k_rho=1.0, ell_rho=3.0))
    inf
    """
    ell = family.ell_rho
    if ell > ELL_MAX:
        return math.inf
    if ell == 0.0:
        return 0.0
    if ell == ELL_MAX:
        sup = 1.0
    else:
        y2 = 2.0 / (2.0 - ell)
        sup = math.sqrt(y2) * (1.0 + y2) ** (0.25 * ell - 1.0)
    return ell * sup / math.sqrt(family.k_rho)


def discrete_k0_bound(rho0_cell: npt.ArrayLike, g: Grid1D) -> float:
    """Returns 2 max |delta(1/sqrt(rho0))|/h over the interior cell interfaces."""
    rho = check_cell_field(rho0_cell, g, "rho0")
    if not np.all(rho > 0.0):
        raise ValueError("K0 needs rho0 > 0")
    return float(2.0 * np.max(np.abs(np.diff(1.0 / np.sqrt(rho)))) / g.h)


def power_law_initial_data(
    g: Grid1D, constants: GasConstants, family: PowerLawFamily
) -> InitialData:
    """Builds the family data: power-law rho0, J0 = 1, bump v0, isentropic pi0."""
    rho0_cell, rho0_node = power_law_density(family.k_rho, family.ell_rho, g)
    if family.bump is None:
        v0 = np.zeros(g.num_nodes)
    else:
        v0 = bump_velocity(
            family.bump.amplitude, family.bump.center, family.bump.width, g
        )
    return InitialData(
        grid=g,
        rho0_cell=rho0_cell,
        rho0_node=rho0_node,
        v0=v0,
        pi0=isentropic_pressure(rho0_cell, family.s0, constants),
        j0=np.ones(g.num_cells),
        constants=constants,
        family=family,
    )


def raw_initial_data(
    g: Grid1D,
    constants: GasConstants,
    rho0_node: npt.ArrayLike,
    v0: npt.ArrayLike,
    pi0: npt.ArrayLike,
    j0: npt.ArrayLike | None = None,
) -> InitialData:
    """Builds discrete data from arrays; cell density averages the nodes."""
    rho_node = check_node_field(rho0_node, g, "rho0")
    return InitialData(
        grid=g,
        rho0_cell=0.5 * (rho_node[:-1] + rho_node[1:]),
        rho0_node=rho_node,
        v0=v0,
        pi0=pi0,
        j0=np.ones(g.num_cells) if j0 is None else j0,
        constants=constants,
    )


def density_l1(d: InitialData) -> float:
    """Returns ||rho0||_1, analytic for family data and grid quadrature otherwise."""
    if d.family is not None:
        return power_law_l1(d.family.k_rho, d.family.ell_rho)
    return grid_integrate(d.rho0_cell, d.grid)


def pressure_l1(d: InitialData) -> float:
    """Returns ||pi0||_1, analytic for the isentropic family."""
    if d.family is not None:
        c = d.constants
        k_pi = c.entropy_constant * math.exp(d.family.s0 / c.c_v)
        return power_law_l1(
            k_pi * d.family.k_rho**c.gamma, c.gamma * d.family.ell_rho
        )
    return grid_integrate(d.pi0, d.grid)


def initial_energy(d: InitialData) -> float:
    """Returns E0 = int (rho0 v0^2/2 + pi0/(gamma - 1)) dy.

    Family data integrates the kinetic part over the bump support with
    scipy quad and the internal part in closed form; raw data uses the grid.
    """
    internal = pressure_l1(d) / (d.constants.gamma - 1.0)
    fam = d.family
    if fam is None:
        kinetic = grid_integrate(0.5 * d.rho0_node * d.v0**2, d.grid)
        return kinetic + internal
    if fam.bump is None:
        return internal
    bump = fam.bump

    def density_kinetic(y: float) -> float:
        v = float(bump_profile(bump, np.array([y]))[0])
        return 0.5 * float(power_law_profile(fam.k_rho, fam.ell_rho, y)) * v * v

    kinetic, _ = integrate.quad(
        density_kinetic, bump.center - bump.width, bump.center + bump.width
    )
    return float(kinetic) + internal


def regime_tags(ell_rho: float, gamma: float) -> list[RegimeTag]:
    """Classifies the power-law family into the estimate regimes.

    Example:
    >>> RegimeTag.GLOBAL_DELTA_GAMMA in regime_tags(1.5, 1.4)
    True
    >>> RegimeTag.GLOBAL_DELTA_GAMMA in regime_tags(1.0, 1.4)
    False
    >>> regime_tags(3.0, 1.4)
    []
    """
    tags: list[RegimeTag] = []
    if ell_rho > ELL_MAX:
        return tags
    temperature = gamma > TEMPERATURE_GAMMA
    temp_floor = 1.0 / (2.0 * (gamma - 1.0)) if temperature else math.inf
    local_gamma = ell_rho > 1.0 / gamma
    global_gamma = ell_rho > max(1.0, 1.0 / gamma)
    local_temp = temperature and ell_rho > temp_floor
    global_temp = temperature and ell_rho > max(1.0, temp_floor)

    if ell_rho > 1.0 / (2.0 * gamma - 1.0):
        tags.append(RegimeTag.LOCAL_DELTA1)
    if local_gamma:
        tags.append(RegimeTag.LOCAL_DELTA_GAMMA)
    if ell_rho > 1.0:
        tags.append(RegimeTag.GLOBAL_DELTA1)
    if global_gamma:
        tags.append(RegimeTag.GLOBAL_DELTA_GAMMA)
    if local_temp:
        tags.append(RegimeTag.LOCAL_TEMPERATURE)
    if global_temp:
        tags.append(RegimeTag.GLOBAL_TEMPERATURE)
    if local_gamma and local_temp:
        tags.append(RegimeTag.LOCAL_COMBINED)
    if global_gamma and global_temp:
        tags.append(RegimeTag.GLOBAL_COMBINED)
    return tags


def _h2_norms(d: InitialData) -> dict[str, float]:
    g = d.grid
    # pi0' and J0' live on the interior nodes, weighted by the nodal density
    inv_rho_inner = 1.0 / d.rho0_node[1:-1]
    return {
        "sqrt_rho0_v0": weighted_l2(d.v0, d.rho0_node, g),
        "v0_prime": l2_norm(cell_derivative(d.v0, g), g),
        "pi0": l2_norm(d.pi0, g),
        "pi0_prime_over_sqrt_rho0": weighted_l2(
            np.diff(d.pi0) / g.h, inv_rho_inner, g
        ),
        "j0_prime_over_sqrt_rho0": weighted_l2(
            np.diff(d.j0) / g.h, inv_rho_inner, g
        ),
    }


def validate_hypotheses(d: InitialData, delta: float) -> HypothesisReport:
    """Checks (H1)-(H4) for weight exponent delta and tags the regime.

    Family data is judged on the whole line from its closed forms; raw data
    gets the grid values only and no regime tags. Failures are report
    entries, never exceptions.
    """
    g = d.grid
    c = d.constants
    g0 = c.viscosity * cell_derivative(d.v0, g) / d.j0 - d.pi0
    g0_weighted = weighted_l2(g0, d.rho0_cell ** (-delta), g)
    k0_grid = discrete_k0_bound(d.rho0_cell, g)
    a0_grid = float(np.min(d.rho0_cell * (1.0 + np.abs(g.cells)) ** 2))
    rho0_l1_grid = grid_integrate(d.rho0_cell, g)
    pi0_l1_grid = grid_integrate(d.pi0, g)

    fam = d.family
    if fam is None:
        return HypothesisReport(
            delta=delta,
            analytic=False,
            rho0_max=float(np.max(d.rho0_cell)),
            rho0_min=float(np.min(d.rho0_cell)),
            pi0_min=float(np.min(d.pi0)),
            h2_norms=_h2_norms(d),
            k0=k0_grid,
            k0_discrete=k0_grid,
            g0_weighted_l2=g0_weighted,
            g0_tail_margin=math.inf if math.isfinite(g0_weighted) else -math.inf,
            rho0_l1=rho0_l1_grid,
            rho0_l1_grid=rho0_l1_grid,
            pi0_l1=pi0_l1_grid,
            pi0_l1_grid=pi0_l1_grid,
            a0=a0_grid,
            a0_grid=a0_grid,
            tags=[],
        )

    ell = fam.ell_rho
    # far field G0 = -pi0 ~ <y>^(-ell*gamma), so rho0^(-delta/2) G0 is
    # square integrable iff ell*(2*gamma - delta) > 1
    tail = ell * (2.0 * c.gamma - delta) - 1.0
    h2 = _h2_norms(d)
    # pi0 in L2 iff 2*ell*gamma > 1 on the whole line
    if 2.0 * ell * c.gamma <= 1.0:
        h2["pi0"] = math.inf
    return HypothesisReport(
        delta=delta,
        analytic=True,
        rho0_max=fam.k_rho,
        rho0_min=float(np.min(d.rho0_cell)),
        pi0_min=float(np.min(d.pi0)),
        h2_norms=h2,
        k0=k0_bound(fam),
        k0_discrete=k0_grid,
        g0_weighted_l2=g0_weighted if tail > 0.0 else math.inf,
        g0_tail_margin=tail,
        rho0_l1=density_l1(d),
        rho0_l1_grid=rho0_l1_grid,
        pi0_l1=pressure_l1(d),
        pi0_l1_grid=pi0_l1_grid,
        a0=fam.k_rho if ell <= ELL_MAX else 0.0,
        a0_grid=a0_grid,
        tags=regime_tags(ell, c.gamma),
    )
