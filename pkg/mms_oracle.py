"""Manufactured solutions, forced runs and convergence-order studies."""

__copyright__ = """
Copyright (c) 2024 The vacuum-cns contributors.
All rights reserved.
"""

import concurrent.futures
import logging
import math
from enum import Enum, auto
from typing import Callable

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict

from grid_state import Grid1D, build_grid, l2_norm, sup_norm
from init_families import GasConstants, InitialData, raw_initial_data
from lag_state import LagState, initial_state
from stepper import BoundaryMode, StepperConfig, picard_step

logger = logging.getLogger(__name__)

Array = npt.NDArray[np.float64]

# errors below this are rounding, not discretization
ERROR_FLOOR = 1e-12
MIN_LEVELS = 3


class CaseEnum(Enum):
    """Built-in manufactured solutions."""

    GAUSS_PULSE = auto()
    STATIONARY = auto()


class ManufacturedCase(BaseModel):
    """Represents an exact solution (J*, v*, pi*) of the forced system.

    Subclasses supply the closed forms and their derivatives; the forcing
    follows from them:
        f_v = rho0 v*_t - mu (v*_y/J*)_y + pi*_y,
        f_pi = pi*_t + gamma (v*_y/J*) pi* - (gamma - 1) mu (v*_y/J*)^2.
    """

    model_config = ConfigDict(frozen=True)

    constants: GasConstants = GasConstants()

    def rho0(self, y: Array) -> Array:
        """Reference density."""
        return np.ones_like(y)

    def v(self, y: Array, t: float) -> Array:
        """Velocity."""
        raise NotImplementedError

    def v_t(self, y: Array, t: float) -> Array:
        """Time derivative of the velocity."""
        raise NotImplementedError

    def v_y(self, y: Array, t: float) -> Array:
        """First space derivative of the velocity."""
        raise NotImplementedError

    def v_yy(self, y: Array, t: float) -> Array:
        """Second space derivative of the velocity."""
        raise NotImplementedError

    def j(self, y: Array, t: float) -> Array:
        """Jacobian, J0 + int_0^t v*_y."""
        raise NotImplementedError

    def j_y(self, y: Array, t: float) -> Array:
        """Space derivative of the Jacobian."""
        raise NotImplementedError

    def pi(self, y: Array, t: float) -> Array:
        """Pressure."""
        raise NotImplementedError

    def pi_t(self, y: Array, t: float) -> Array:
        """Time derivative of the pressure."""
        raise NotImplementedError

    def pi_y(self, y: Array, t: float) -> Array:
        """Space derivative of the pressure."""
        raise NotImplementedError

    def strain(self, y: Array, t: float) -> Array:
        """Returns b* = v*_y/J*."""
        return self.v_y(y, t) / self.j(y, t)

    def strain_y(self, y: Array, t: float) -> Array:
        """Returns (v*_y/J*)_y by the quotient rule."""
        jv = self.j(y, t)
        return (self.v_yy(y, t) * jv - self.v_y(y, t) * self.j_y(y, t)) / (jv * jv)

    def source_v(self, y: Array, t: float) -> Array:
        """Momentum forcing f_v."""
        return (
            self.rho0(y) * self.v_t(y, t)
            - self.constants.viscosity * self.strain_y(y, t)
            + self.pi_y(y, t)
        )

    def source_pi(self, y: Array, t: float) -> Array:
        """Pressure forcing f_pi."""
        c = self.constants
        b = self.strain(y, t)
        return (
            self.pi_t(y, t)
            + c.gamma * b * self.pi(y, t)
            - (c.gamma - 1.0) * c.viscosity * b * b
        )


class StationaryCase(ManufacturedCase):
    """Represents the rest state v* = 0, J* = 1, pi* = 1 with zero forcing."""

    def v(self, y: Array, t: float) -> Array:
        return np.zeros_like(y)

    def v_t(self, y: Array, t: float) -> Array:
        return np.zeros_like(y)

    def v_y(self, y: Array, t: float) -> Array:
        return np.zeros_like(y)

    def v_yy(self, y: Array, t: float) -> Array:
        return np.zeros_like(y)

    def j(self, y: Array, t: float) -> Array:
        return np.ones_like(y)

    def j_y(self, y: Array, t: float) -> Array:
        return np.zeros_like(y)

    def pi(self, y: Array, t: float) -> Array:
        return np.ones_like(y)

    def pi_t(self, y: Array, t: float) -> Array:
        return np.zeros_like(y)

    def pi_y(self, y: Array, t: float) -> Array:
        return np.zeros_like(y)


class GaussPulseCase(ManufacturedCase):
    """Represents a Gaussian velocity pulse on a uniform reference density.

    v* = a exp(-y^2) sin t,
    J* = 1 - 2 a y exp(-y^2) (1 - cos t),
    pi* = 1 + c exp(-y^2/2) sin t.

    Example:
    >>> case = GaussPulseCase()
    >>> y = np.array([0.0])
    >>> float(case.v(y, math.pi / 2)[0]), float(case.j(y, math.pi / 2)[0])
    (0.1, 1.0)
    """

    amplitude: float = 0.1
    pressure_amplitude: float = 0.1

    def _gauss(self, y: Array) -> Array:
        return np.exp(-y * y)

    def v(self, y: Array, t: float) -> Array:
        return self.amplitude * self._gauss(y) * math.sin(t)

    def v_t(self, y: Array, t: float) -> Array:
        return self.amplitude * self._gauss(y) * math.cos(t)

    def v_y(self, y: Array, t: float) -> Array:
        return -2.0 * self.amplitude * y * self._gauss(y) * math.sin(t)

    def v_yy(self, y: Array, t: float) -> Array:
        return self.amplitude * (4.0 * y * y - 2.0) * self._gauss(y) * math.sin(t)

    def j(self, y: Array, t: float) -> Array:
        return 1.0 - 2.0 * self.amplitude * y * self._gauss(y) * (1.0 - math.cos(t))

    def j_y(self, y: Array, t: float) -> Array:
        return (
            self.amplitude * (4.0 * y * y - 2.0) * self._gauss(y) * (1.0 - math.cos(t))
        )

    def pi(self, y: Array, t: float) -> Array:
        return 1.0 + self.pressure_amplitude * np.exp(-0.5 * y * y) * math.sin(t)

    def pi_t(self, y: Array, t: float) -> Array:
        return self.pressure_amplitude * np.exp(-0.5 * y * y) * math.cos(t)

    def pi_y(self, y: Array, t: float) -> Array:
        return -self.pressure_amplitude * y * np.exp(-0.5 * y * y) * math.sin(t)


class CaseForcing(BaseModel):
    """Binds a manufactured case to a domain, giving the stepper its forcing."""

    model_config = ConfigDict(frozen=True)

    case: ManufacturedCase
    half_width: float

    def source_v(self, y: Array, t: float) -> Array:
        """Momentum forcing at the nodes."""
        return self.case.source_v(y, t)

    def source_pi(self, y: Array, t: float) -> Array:
        """Pressure forcing at the cells."""
        return self.case.source_pi(y, t)

    def boundary_v(self, t: float) -> tuple[float, float]:
        """Traces of v* at y = -L and y = +L."""
        ends = self.case.v(np.array([-self.half_width, self.half_width]), t)
        return float(ends[0]), float(ends[1])


def builtin_case(
    case_id: CaseEnum, constants: GasConstants | None = None
) -> ManufacturedCase:
    """Returns the built-in case for case_id.

    Example:
    >>> builtin_case(CaseEnum.STATIONARY).source_v(np.zeros(3), 1.0).tolist()
    [0.0, 0.0, 0.0]
    """
    gas = constants or GasConstants()
    if case_id == CaseEnum.STATIONARY:
        return StationaryCase(constants=gas)
    if case_id == CaseEnum.GAUSS_PULSE:
        return GaussPulseCase(constants=gas)
    raise NotImplementedError


def case_initial_data(case: ManufacturedCase, g: Grid1D) -> InitialData:
    """Samples (rho0, v*, pi*, J*) at t = 0 on the grid."""
    return raw_initial_data(
        g,
        case.constants,
        case.rho0(g.nodes),
        case.v(g.nodes, 0.0),
        case.pi(g.cells, 0.0),
        case.j(g.cells, 0.0),
    )


Closed = Callable[[Array, float], Array]


def _central_dy(f: Closed, y: float, t: float, step: float) -> float:
    return float((f(np.array([y + step]), t) - f(np.array([y - step]), t))[0]) / (
        2.0 * step
    )


def _central_dt(f: Closed, y: float, t: float, step: float) -> float:
    pt = np.array([y])
    return float((f(pt, t + step) - f(pt, t - step))[0]) / (2.0 * step)


def _strain_fd(case: ManufacturedCase, y: float, t: float, step: float) -> float:
    return _central_dy(case.v, y, t, step) / float(case.j(np.array([y]), t)[0])


def forcing_consistency(
    case: ManufacturedCase,
    y: Array,
    t: Array,
    step: float = 1e-4,
) -> float:
    """Compares the closed-form forcing against central differences.

    Differentiates v*, J* and pi* numerically at the points (y_k, t_k),
    assembles f_v, f_pi and J*_t - v*_y from them and returns the worst
    error relative to max(1, |closed form|).
    """
    c = case.constants
    worst = 0.0
    ys = np.asarray(y, dtype=np.float64)
    ts = np.asarray(t, dtype=np.float64)
    for yk, tk in zip(ys.tolist(), ts.tolist()):
        pt = np.array([yk])
        b = _strain_fd(case, yk, tk, step)
        b_y = (
            _strain_fd(case, yk + step, tk, step)
            - _strain_fd(case, yk - step, tk, step)
        ) / (2.0 * step)
        rho = float(case.rho0(pt)[0])
        pi = float(case.pi(pt, tk)[0])
        f_v = (
            rho * _central_dt(case.v, yk, tk, step)
            - c.viscosity * b_y
            + _central_dy(case.pi, yk, tk, step)
        )
        f_pi = (
            _central_dt(case.pi, yk, tk, step)
            + c.gamma * b * pi
            - (c.gamma - 1.0) * c.viscosity * b * b
        )
        j_rate = _central_dt(case.j, yk, tk, step) - _central_dy(
            case.v, yk, tk, step
        )
        for approx, exact in (
            (f_v, float(case.source_v(pt, tk)[0])),
            (f_pi, float(case.source_pi(pt, tk)[0])),
            (j_rate, 0.0),
        ):
            worst = max(worst, abs(approx - exact) / max(1.0, abs(exact)))
    return worst


class ErrorTable(BaseModel):
    """Represents the errors of a forced run against the exact solution at t."""

    model_config = ConfigDict(frozen=True)

    num_cells: int
    h: float
    dt: float
    t: float
    steps: int
    e_j_l2: float
    e_v_l2: float
    e_pi_l2: float
    e_j_sup: float
    e_v_sup: float
    e_pi_sup: float


def solution_errors(
    state: LagState, case: ManufacturedCase, g: Grid1D
) -> dict[str, float]:
    """Returns the L2 and sup errors of (J, v, pi) against the exact solution."""
    err_j = state.j - case.j(g.cells, state.t)
    err_v = state.v - case.v(g.nodes, state.t)
    err_pi = state.pi - case.pi(g.cells, state.t)
    return {
        "e_j_l2": l2_norm(err_j, g),
        "e_v_l2": l2_norm(err_v, g),
        "e_pi_l2": l2_norm(err_pi, g),
        "e_j_sup": sup_norm(err_j),
        "e_v_sup": sup_norm(err_v),
        "e_pi_sup": sup_norm(err_pi),
    }


def run_forced(
    case: ManufacturedCase, g: Grid1D, cfg: StepperConfig, t_final: float
) -> ErrorTable:
    """Runs the forced stepper from the exact data to t_final.

    cfg must use DIRICHLET_V; the boundary nodes follow the traces of v*.
    """
    if cfg.bc_mode != BoundaryMode.DIRICHLET_V:
        raise ValueError("forced runs need bc_mode DIRICHLET_V")
    if not t_final > 0.0:
        raise ValueError("final time must be positive")
    d = case_initial_data(case, g)
    forcing = CaseForcing(case=case, half_width=g.half_width)
    state = initial_state(d)
    steps = 0
    while t_final - state.t > 1e-12 * t_final:
        state, _ = picard_step(
            state, d, cfg, dt=min(cfg.dt, t_final - state.t), forcing=forcing
        )
        steps += 1
    errors = solution_errors(state, case, g)
    logger.info(
        "forced run N=%d dt=%.3e: e_v=%.3e e_pi=%.3e",
        g.num_cells,
        cfg.dt,
        errors["e_v_l2"],
        errors["e_pi_l2"],
    )
    return ErrorTable(
        num_cells=g.num_cells,
        h=g.h,
        dt=cfg.dt,
        t=state.t,
        steps=steps,
        **errors,
    )


class AxisOrder(BaseModel):
    """Represents one refinement axis of a study.

    axis: "space" (step h) or "time" (step dt).
    slopes: least-squares slope of log error against log step, per field;
        nan when the errors sit at the rounding floor.
    pairwise: orders between consecutive levels, per field.
    non_monotone: fields whose error did not decrease at every refinement.
    """

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    axis: str
    levels: list[ErrorTable]
    slopes: dict[str, float]
    pairwise: dict[str, list[float]]
    non_monotone: list[str]
    at_floor: bool


class OrderReport(BaseModel):
    """Represents the outcome of a convergence study."""

    model_config = ConfigDict(frozen=True)

    case: CaseEnum | None
    axes: list[AxisOrder]

    def axis(self, name: str) -> AxisOrder:
        """Returns the study along the named axis."""
        for a in self.axes:
            if a.axis == name:
                return a
        raise KeyError(name)


ORDER_FIELDS = ("e_j_l2", "e_v_l2", "e_pi_l2")


def _fit_orders(axis: str, levels: list[ErrorTable]) -> AxisOrder:
    steps = np.array([lv.h if axis == "space" else lv.dt for lv in levels])
    slopes: dict[str, float] = {}
    pairwise: dict[str, list[float]] = {}
    non_monotone: list[str] = []
    at_floor = all(getattr(lv, f) <= ERROR_FLOOR for lv in levels for f in ORDER_FIELDS)
    for name in ORDER_FIELDS:
        errs = np.array([getattr(lv, name) for lv in levels])
        if np.any(errs <= ERROR_FLOOR):
            slopes[name] = math.nan
            pairwise[name] = [math.nan] * (len(levels) - 1)
            continue
        slopes[name] = float(np.polyfit(np.log(steps), np.log(errs), 1)[0])
        pairwise[name] = [
            float(np.log(errs[i] / errs[i + 1]) / np.log(steps[i] / steps[i + 1]))
            for i in range(len(levels) - 1)
        ]
        if np.any(np.diff(errs) >= 0.0):
            non_monotone.append(name)
    if non_monotone:
        logger.warning("%s study: non-monotone errors in %s", axis, non_monotone)
    return AxisOrder(
        axis=axis,
        levels=levels,
        slopes=slopes,
        pairwise=pairwise,
        non_monotone=non_monotone,
        at_floor=at_floor,
    )


def _run_levels(
    case: ManufacturedCase,
    points: list[tuple[int, float]],
    half_width: float,
    cfg: StepperConfig,
    t_final: float,
    workers: int,
) -> list[ErrorTable]:
    def one(point: tuple[int, float]) -> ErrorTable:
        n, dt = point
        level_cfg = cfg.model_copy(
            update={"dt": dt, "bc_mode": BoundaryMode.DIRICHLET_V}
        )
        return run_forced(case, build_grid(half_width, n), level_cfg, t_final)

    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(one, points))


def convergence_study(
    case: ManufacturedCase,
    grids: list[int],
    dts: list[float],
    half_width: float,
    cfg: StepperConfig,
    t_final: float,
    workers: int = 1,
    case_id: CaseEnum | None = None,
) -> OrderReport:
    """Measures convergence orders along each refined axis.

    An axis with one value is held fixed; an axis with at least three values
    is refined, the other held at its finest value. Levels run in parallel
    up to workers.

    Raises ValueError when an axis has exactly two values or none is refined.
    """
    for name, values in (("grids", grids), ("dts", dts)):
        if not values or 1 < len(values) < MIN_LEVELS:
            raise ValueError(
                f"{name} needs one value or at least {MIN_LEVELS} refinement levels"
            )
    if len(grids) == 1 and len(dts) == 1:
        raise ValueError("nothing to refine: give at least three grids or dts")
    axes: list[AxisOrder] = []
    if len(grids) >= MIN_LEVELS:
        dt_fixed = min(dts)
        points = [(n, dt_fixed) for n in sorted(grids)]
        levels = _run_levels(case, points, half_width, cfg, t_final, workers)
        axes.append(_fit_orders("space", levels))
    if len(dts) >= MIN_LEVELS:
        n_fixed = max(grids)
        points = [(n_fixed, dt) for dt in sorted(dts, reverse=True)]
        levels = _run_levels(case, points, half_width, cfg, t_final, workers)
        axes.append(_fit_orders("time", levels))
    return OrderReport(case=case_id, axes=axes)
