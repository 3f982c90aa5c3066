"""Picard time stepper for the Lagrangian system (J, v, pi)."""

__copyright__ = """
Copyright (c) 2024 The vacuum-cns contributors.
All rights reserved.
"""

import logging
import math
from enum import Enum, auto
from typing import Protocol

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import linalg

from diagnostics import (
    DiagnosticsRecord,
    RunningIntegrals,
    j_lower_bound_reference,
    sample_record,
)
from grid_state import CellField, NodeField, cell_derivative, sup_norm
from init_families import GasConstants, InitialData
from lag_state import LagState, compute_G, floor_product, initial_state

logger = logging.getLogger(__name__)

# nextafter passes allowed to restore J^gamma pi >= floor after rounding
MAX_FLOOR_LIFT = 64


class BoundaryMode(Enum):
    """Closures at y = -L and y = +L."""

    ZERO_STRESS = auto()
    DIRICHLET_V = auto()


class FreezeMode(Enum):
    """Which velocity supplies the frozen strain rate b = v_y/J."""

    PREVIOUS_ITERATE = auto()
    STEP_START = auto()


class StepperConfig(BaseModel):
    """Represents the time-stepping knobs.

    dt: base time step.
    eps: density regularization, rho0 + eps in the momentum equation.
    picard_tol: sup-norm tolerance between successive velocity iterates.
    picard_max: inner iterations allowed before dt is shrunk.
    dt_shrink: factor applied to dt after a failed step.
    dt_min: smallest dt tried before the step is abandoned.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    dt: float
    eps: float = 0.0
    picard_tol: float = 1e-12
    picard_max: int = 50
    dt_shrink: float = 0.5
    dt_min: float = 1e-10
    bc_mode: BoundaryMode = BoundaryMode.ZERO_STRESS
    freeze: FreezeMode = FreezeMode.PREVIOUS_ITERATE

    @model_validator(mode="after")
    def _check_knobs(self) -> "StepperConfig":
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if self.eps < 0.0:
            raise ValueError("eps must be nonnegative")
        if not self.picard_tol > 0.0:
            raise ValueError("picard_tol must be positive")
        if self.picard_max < 1:
            raise ValueError("picard_max must be at least 1")
        if not 0.0 < self.dt_shrink < 1.0:
            raise ValueError("dt_shrink must lie in (0, 1)")
        if not self.dt_min > 0.0:
            raise ValueError("dt_min must be positive")
        return self


class StepStats(BaseModel):
    """Represents how one accepted step converged."""

    model_config = ConfigDict(frozen=True)

    iterations: int
    residual: float
    contraction: float
    dt: float
    retries: int = 0
    residual_history: list[float] = Field(default_factory=list)
    boundary_flux: float = 0.0


class PivotError(ArithmeticError):
    """The velocity system lost positive definiteness."""


class DtUnderflowError(RuntimeError):
    """A step failed to converge even at dt_min.

    residuals: Picard residual history of the last attempt.
    state: last accepted state.
    records: diagnostics gathered before the failure.
    """

    def __init__(
        self,
        message: str,
        dt: float,
        residuals: list[float],
        state: LagState | None = None,
        records: list[DiagnosticsRecord] | None = None,
    ) -> None:
        """Initialize class."""
        super().__init__(message)
        self.dt = dt
        self.residuals = residuals
        self.state = state
        self.records = records or []


class Forcing(Protocol):
    """Source terms and boundary traces of a forced (manufactured) run."""

    def source_v(self, y: NodeField, t: float) -> NodeField:
        """Momentum source at the nodes."""

    def source_pi(self, y: CellField, t: float) -> CellField:
        """Pressure source at the cells."""

    def boundary_v(self, t: float) -> tuple[float, float]:
        """Velocity at y = -L and y = +L."""


def update_J(  # noqa: N802
    j: npt.NDArray[np.float64], b: npt.NDArray[np.float64], dt: float
) -> CellField:
    """Advances J_t = b J exactly for frozen b; positive for any finite b.

    Example:
    >>> round(float(update_J(np.array([2.0]), np.array([0.5]), 0.1)[0]), 6)
    2.102542
    """
    result: CellField = j * np.exp(b * dt)
    return result


def update_pi(
    pi: npt.NDArray[np.float64],
    b: npt.NDArray[np.float64],
    dt: float,
    c: GasConstants,
) -> CellField:
    """Advances pi_t + gamma b pi = (gamma - 1) mu b^2 exactly for frozen b.

    pi' = exp(-gamma b dt) pi + (gamma - 1) mu b (1 - exp(-gamma b dt))/gamma.
    Both terms are nonnegative for either sign of b; expm1 keeps the second
    one free of cancellation as b dt -> 0.

    Example:
    >>> c = GasConstants(gamma=1.4, viscosity=1.0)
    >>> round(float(update_pi(np.array([0.0]), np.array([1.0]), 0.1, c)[0]), 6)
    0.037325
    >>> round(float(update_pi(np.array([1.0]), np.array([-1.0]), 0.1, c)[0]), 6)
    1.193209
    """
    gamma = c.gamma
    x = -gamma * b * dt
    heat = (gamma - 1.0) * c.viscosity * b * (-np.expm1(x)) / gamma
    result: CellField = np.exp(x) * pi + heat
    return result


def _velocity_bands(
    v_old: NodeField,
    j_new: CellField,
    pi_new: CellField,
    d: InitialData,
    cfg: StepperConfig,
    dt: float,
    source: NodeField | None,
) -> tuple[NodeField, CellField, NodeField]:
    """Assembles diagonal, superdiagonal and right-hand side on all nodes.

    The boundary rows carry the zero-stress closure: G = 0 in the ghost flux.
    """
    g = d.grid
    h = g.h
    mass = d.rho0_node + cfg.eps
    if not np.all(mass > 0.0):
        raise ValueError("rho0 + eps must be positive at every node")
    coupling = dt * d.constants.viscosity / (h * h * j_new)

    diag = mass.copy()
    diag[:-1] += coupling
    diag[1:] += coupling

    rhs = mass * v_old
    rhs[1:-1] -= dt * np.diff(pi_new) / h
    rhs[0] -= dt * pi_new[0] / h
    rhs[-1] += dt * pi_new[-1] / h
    if source is not None:
        rhs += dt * source
    return diag, -coupling, rhs


def _solve_spd(diag: NodeField, upper: CellField, rhs: NodeField) -> NodeField:
    bands = np.zeros((2, diag.size))
    bands[0, 1:] = upper
    bands[1, :] = diag
    try:
        result: NodeField = linalg.solveh_banded(bands, rhs, lower=False)
    except (linalg.LinAlgError, ValueError) as err:
        raise PivotError(f"velocity system not positive definite: {err}") from err
    return result


def solve_velocity(
    v_old: NodeField,
    j_new: CellField,
    pi_new: CellField,
    d: InitialData,
    cfg: StepperConfig,
    dt: float | None = None,
    boundary: tuple[float, float] | None = None,
    source: NodeField | None = None,
) -> NodeField:
    """Solves the backward-Euler momentum equation for the new velocity.

    (rho0 + eps)_i (v_i - v_old_i)/dt = (G_{i+1/2} - G_{i-1/2})/h [+ source_i]
    with G = mu v_y/J_new - pi_new; the system is symmetric positive definite
    and tridiagonal. ZERO_STRESS solves on every node with G = 0 beyond the
    walls; DIRICHLET_V pins the end nodes to `boundary` (default v0(+-L)).

    Raises PivotError when the factorization meets a non-positive pivot.
    """
    step = cfg.dt if dt is None else dt
    diag, upper, rhs = _velocity_bands(v_old, j_new, pi_new, d, cfg, step, source)
    if cfg.bc_mode == BoundaryMode.ZERO_STRESS:
        return _solve_spd(diag, upper, rhs)
    if cfg.bc_mode == BoundaryMode.DIRICHLET_V:
        if boundary is None:
            boundary = (float(d.v0[0]), float(d.v0[-1]))
        left, right = boundary
        inner_rhs = rhs[1:-1].copy()
        inner_rhs[0] -= upper[0] * left
        inner_rhs[-1] -= upper[-1] * right
        v = np.empty_like(v_old)
        v[0] = left
        v[-1] = right
        v[1:-1] = _solve_spd(diag[1:-1], upper[1:-1], inner_rhs)
        return v
    raise NotImplementedError


def _lift_to_floor(
    pi: CellField, j: CellField, floor: CellField, gamma: float, strict: bool
) -> CellField:
    """Nudges pi up by ulps where rounding left J^gamma pi below the floor.

    The exact update never decreases J^gamma pi, so any shortfall is a few
    ulps at most. A forced run may sit below the floor for real; with
    strict=False pi is then returned untouched.
    """
    lifted = pi.copy()
    for _ in range(MAX_FLOOR_LIFT):
        short = floor_product(j, lifted, gamma) < floor
        if not np.any(short):
            return lifted
        lifted[short] = np.nextafter(lifted[short], np.inf)
    if strict:
        raise AssertionError("entropy floor shortfall exceeds rounding")
    return pi


def _check_positivity(state: LagState, forced: bool) -> None:
    min_j = float(np.min(state.j))
    min_pi = float(np.min(state.pi))
    if min_j > 0.0 and min_pi >= 0.0:
        return
    message = f"positivity lost at t={state.t}: min J = {min_j}, min pi = {min_pi}"
    if forced:
        logger.warning("%s (forced run, continuing)", message)
        return
    raise AssertionError(message)


def _attempt_step(
    state: LagState,
    d: InitialData,
    cfg: StepperConfig,
    dt: float,
    forcing: Forcing | None,
) -> tuple[LagState | None, list[float]]:
    """Runs the Picard loop at a fixed dt.

    Returns the advanced state (None on failure) and the residual history.
    """
    g = d.grid
    c = d.constants
    t_new = state.t + dt
    if forcing is None:
        boundary = None
        src_v = None
        src_pi = None
    else:
        boundary = forcing.boundary_v(t_new)
        src_v = forcing.source_v(g.nodes, t_new)
        src_pi = dt * forcing.source_pi(g.cells, t_new)

    residuals: list[float] = []
    v_k = state.v
    j_k = state.j
    b_lagged = cell_derivative(state.v, g) / state.j
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        for _ in range(cfg.picard_max):
            if cfg.freeze == FreezeMode.STEP_START:
                b = b_lagged
            else:
                b = cell_derivative(v_k, g) / j_k
            j_next = update_J(state.j, b, dt)
            pi_next = update_pi(state.pi, b, dt, c)
            if src_pi is not None:
                pi_next = pi_next + src_pi
            if not (
                np.all(np.isfinite(j_next))
                and np.all(np.isfinite(pi_next))
                and np.all(j_next > 0.0)
            ):
                return None, residuals
            try:
                v_next = solve_velocity(
                    state.v, j_next, pi_next, d, cfg, dt, boundary, src_v
                )
            except PivotError:
                return None, residuals
            if not np.all(np.isfinite(v_next)):
                return None, residuals

            residual = sup_norm(v_next - v_k)
            residuals.append(residual)
            v_k, j_k = v_next, j_next
            if residual <= cfg.picard_tol:
                pi_next = _lift_to_floor(
                    pi_next,
                    j_next,
                    floor_product(state.j, state.pi, c.gamma),
                    c.gamma,
                    strict=forcing is None,
                )
                advanced = LagState(
                    t=t_new,
                    j=j_next,
                    v=v_next,
                    pi=pi_next,
                    anchor_shift=state.anchor_shift + dt * float(v_next[0]),
                )
                return advanced, residuals
    return None, residuals


def picard_step(
    state: LagState,
    d: InitialData,
    cfg: StepperConfig,
    dt: float | None = None,
    forcing: Forcing | None = None,
) -> tuple[LagState, StepStats]:
    """Advances one step by iterating the solution mapping v -> V to a fixed point.

    Each sweep freezes b = v_y/J from the previous iterate, updates J and pi
    with their exact ODE solutions, then solves the implicit velocity system.
    On non-convergence dt is multiplied by dt_shrink and the step retried.

    Raises DtUnderflowError when dt would drop below dt_min.
    """
    step_dt = cfg.dt if dt is None else dt
    retries = 0
    while True:
        advanced, residuals = _attempt_step(state, d, cfg, step_dt, forcing)
        if advanced is not None:
            break
        retries += 1
        shrunk = step_dt * cfg.dt_shrink
        logger.warning(
            "step at t=%.6g failed with dt=%.3e after %d iterations, retry dt=%.3e",
            state.t,
            step_dt,
            len(residuals),
            shrunk,
        )
        if shrunk < cfg.dt_min:
            raise DtUnderflowError(
                f"dt underflow at t={state.t}: {shrunk:.3e} < dt_min={cfg.dt_min:.3e}",
                dt=shrunk,
                residuals=residuals,
                state=state,
            )
        step_dt = shrunk

    _check_positivity(advanced, forced=forcing is not None)
    contraction = (
        residuals[1] / residuals[0] if len(residuals) > 1 and residuals[0] > 0 else 0.0
    )
    boundary_flux = 0.0
    if cfg.bc_mode == BoundaryMode.DIRICHLET_V:
        flux = compute_G(advanced, d)
        boundary_flux = step_dt * float(flux[-1] - flux[0])
    stats = StepStats(
        iterations=len(residuals),
        residual=residuals[-1],
        contraction=contraction,
        dt=step_dt,
        retries=retries,
        residual_history=residuals,
        boundary_flux=boundary_flux,
    )
    logger.debug(
        "t=%.6g dt=%.3e iters=%d res=%.2e",
        advanced.t,
        step_dt,
        stats.iterations,
        stats.residual,
    )
    return advanced, stats


def run(
    d: InitialData,
    cfg: StepperConfig,
    t_final: float,
    sample_every: int,
    delta: float,
    s_threshold: float = 0.0,
) -> tuple[LagState, list[DiagnosticsRecord]]:
    """Continues local steps from (J0, v0, pi0) at t = 0 up to t_final.

    Diagnostics are sampled at t = 0, every sample_every steps and at
    t_final; the running integrals and minima see every step.

    Raises DtUnderflowError with the partial trajectory attached.
    """
    if not t_final > 0.0:
        raise ValueError("final time must be positive")
    if sample_every < 1:
        raise ValueError("sample_every must be at least 1")
    try:
        c0 = j_lower_bound_reference(d)
    except ValueError as err:
        logger.warning("no J lower-bound reference: %s", err)
        c0 = math.nan

    state = initial_state(d)
    running = RunningIntegrals.start(state, d)
    records = [
        sample_record(state, d, delta, running, None, c0, s_threshold, cfg.eps)
    ]
    dt_next = cfg.dt
    step = 0
    while t_final - state.t > 1e-12 * t_final:
        try:
            state, stats = picard_step(
                state, d, cfg, dt=min(dt_next, t_final - state.t)
            )
        except DtUnderflowError as err:
            err.records = records
            raise
        step += 1
        running = running.accumulate(state, d, delta, stats)
        # regrow by 1/dt_shrink per accepted step after a shrink
        dt_next = min(cfg.dt, stats.dt / cfg.dt_shrink)
        finished = t_final - state.t <= 1e-12 * t_final
        if step % sample_every == 0 or finished:
            records.append(
                sample_record(
                    state, d, delta, running, stats, c0, s_threshold, cfg.eps
                )
            )
    logger.info("reached t=%.6g after %d steps", state.t, step)
    return state, records
