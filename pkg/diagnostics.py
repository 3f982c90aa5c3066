"""Conserved quantities, a-priori bounds and weighted flux norms of a trajectory."""

__copyright__ = """
Copyright (c) 2024 The vacuum-cns contributors.
All rights reserved.
"""

import logging
import math
from typing import TYPE_CHECKING

import numpy as np
from pydantic import BaseModel, ConfigDict

from grid_state import (
    CellField,
    cell_derivative,
    l2_norm,
    node_divergence,
    node_to_cell,
    sup_norm,
    weighted_l2,
)
from init_families import InitialData, density_l1, initial_energy
from lag_state import LagState, compute_G, floor_product

if TYPE_CHECKING:
    from stepper import StepStats

logger = logging.getLogger(__name__)


class DerivedFields(BaseModel):
    """Represents the cell quantities derived from a state.

    g: effective viscous flux.
    rho: density rho0/J.
    theta: temperature pi J/(R rho0).
    s: entropy, -inf where pi = 0.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    g: CellField
    rho: CellField
    theta: CellField
    s: CellField


def energy(state: LagState, d: InitialData) -> float:
    """Returns h sum rho0 v^2/2 over the nodes plus h sum J pi/(gamma - 1).

    Example:
    >>> from grid_state import build_grid
    >>> from init_families import GasConstants, raw_initial_data
    >>> g = build_grid(1.0, 4)
    >>> d = raw_initial_data(g, GasConstants(gamma=1.4), [1.0] * 5,
    ...                      [0.0] * 5, [1.0] * 4)
    >>> round(energy(LagState(t=0.0, j=d.j0, v=d.v0, pi=d.pi0), d), 12)
    5.0
    """
    h = d.grid.h
    kinetic = 0.5 * h * float(np.sum(d.rho0_node * state.v * state.v))
    internal = h * float(np.sum(state.j * state.pi)) / (d.constants.gamma - 1.0)
    return kinetic + internal


def momentum(state: LagState, d: InitialData, eps: float = 0.0) -> float:
    """Returns h sum (rho0 + eps) v over the nodes, conserved by the scheme."""
    return d.grid.h * float(np.sum((d.rho0_node + eps) * state.v))


def j_lower_bound_reference(d: InitialData) -> float:
    """Returns c0 = exp(-(2 sqrt 2/mu) sqrt(E0) ||rho0||_1).

    Raises ValueError when ||rho0||_1 is infinite.

    Example:
    >>> from grid_state import build_grid
    >>> from init_families import GasConstants, raw_initial_data
    >>> g = build_grid(1.0, 4)
    >>> d = raw_initial_data(g, GasConstants(), [1.0] * 5, [0.0] * 5, [0.0] * 4)
    >>> j_lower_bound_reference(d)
    1.0
    """
    l1 = density_l1(d)
    if not math.isfinite(l1):
        raise ValueError("||rho0||_1 is infinite, (H4) fails")
    e0 = initial_energy(d)
    rate = 2.0 * math.sqrt(2.0) / d.constants.viscosity
    return math.exp(-rate * math.sqrt(e0) * l1)


def entropy_field(state: LagState, d: InitialData) -> CellField:
    """Returns s = c_v log(pi J^gamma/(A rho0^gamma)) per cell.

    Cells with pi = 0 report -inf.
    """
    c = d.constants
    q = floor_product(state.j, state.pi, c.gamma)
    with np.errstate(divide="ignore"):
        result: CellField = c.c_v * np.log(
            q / (c.entropy_constant * d.rho0_cell**c.gamma)
        )
    return result


def temperature_field(state: LagState, d: InitialData) -> CellField:
    """Returns theta = pi J/(R rho0) per cell."""
    result: CellField = state.pi * state.j / (d.constants.gas_constant * d.rho0_cell)
    return result


def derive_fields(state: LagState, d: InitialData) -> DerivedFields:
    """Evaluates G, rho, theta and s on the cells."""
    return DerivedFields(
        g=compute_G(state, d),
        rho=d.rho0_cell / state.j,
        theta=temperature_field(state, d),
        s=entropy_field(state, d),
    )


def flux_gradient(state: LagState, d: InitialData) -> CellField:
    """Returns G_y at the cells: divergence onto the nodes, averaged back."""
    g = d.grid
    return node_to_cell(node_divergence(compute_G(state, d), g), g)


def weighted_flux_norms(
    state: LagState, d: InitialData, delta: float
) -> tuple[float, float]:
    """Returns (||G/rho0^(delta/2)||_2, ||G_y/rho0^((delta+1)/2)||_2)."""
    g = d.grid
    rho = d.rho0_cell
    flux = compute_G(state, d)
    return (
        weighted_l2(flux, rho ** (-delta), g),
        weighted_l2(flux_gradient(state, d), rho ** (-(delta + 1.0)), g),
    )


def weighted_flux_sup(state: LagState, d: InitialData, delta: float) -> float:
    """Returns ||G/rho0^(delta/2)||_inf."""
    return sup_norm(compute_G(state, d) * d.rho0_cell ** (-0.5 * delta))


def floor_margin(state: LagState, d: InitialData) -> float:
    """Returns min over cells of J^gamma pi - J0^gamma pi0."""
    gamma = d.constants.gamma
    return float(
        np.min(
            floor_product(state.j, state.pi, gamma)
            - floor_product(d.j0, d.pi0, gamma)
        )
    )


class RunningIntegrals(BaseModel):
    """Represents the time integrals and running minima seen by every step.

    gy_weighted_sq: int ||G_y/rho0^((delta+1)/2)||_2^2 dt.
    g_weighted_sup4: int ||G/rho0^(delta/2)||_inf^4 dt.
    boundary_flux: accumulated boundary stress flux.
    """

    model_config = ConfigDict(frozen=True)

    steps: int = 0
    gy_weighted_sq: float = 0.0
    g_weighted_sup4: float = 0.0
    min_j: float = math.inf
    min_pi: float = math.inf
    min_floor_margin: float = math.inf
    boundary_flux: float = 0.0

    @classmethod
    def start(cls, state: LagState, d: InitialData) -> "RunningIntegrals":
        """Returns the integrals at t = 0, minima seeded by the initial state."""
        return cls(
            min_j=float(np.min(state.j)),
            min_pi=float(np.min(state.pi)),
            min_floor_margin=floor_margin(state, d),
        )

    def accumulate(
        self,
        state: LagState,
        d: InitialData,
        delta: float,
        stats: "StepStats",
    ) -> "RunningIntegrals":
        """Returns the integrals advanced by one accepted step of length stats.dt."""
        _, gy = weighted_flux_norms(state, d, delta)
        sup = weighted_flux_sup(state, d, delta)
        return RunningIntegrals(
            steps=self.steps + 1,
            gy_weighted_sq=self.gy_weighted_sq + stats.dt * gy * gy,
            g_weighted_sup4=self.g_weighted_sup4 + stats.dt * sup**4,
            min_j=min(self.min_j, float(np.min(state.j))),
            min_pi=min(self.min_pi, float(np.min(state.pi))),
            min_floor_margin=min(self.min_floor_margin, floor_margin(state, d)),
            boundary_flux=self.boundary_flux + stats.boundary_flux,
        )


class DiagnosticsRecord(BaseModel):
    """Represents one sample of a trajectory.

    The *_run fields are minima over every accepted step up to t, the *_cum
    fields integrals in time; everything else is evaluated at t.
    """

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    step: int
    t: float
    energy: float
    momentum: float
    min_j: float
    min_j_run: float
    c0_ref: float
    s_min: float
    s_max: float
    g_weighted_l2: float
    gy_weighted_l2_cum: float
    g_weighted_sup4_cum: float
    g_l2: float
    g_sup: float
    vy_l2: float
    pi_max: float
    pi_min_run: float
    theta_max: float
    floor_margin: float
    floor_margin_run: float
    boundary_flux_cum: float
    picard_iters: int
    picard_res: float
    picard_contraction: float
    dt_used: float


def sample_record(
    state: LagState,
    d: InitialData,
    delta: float,
    running: RunningIntegrals,
    stats: "StepStats | None",
    c0_ref: float,
    s_threshold: float = 0.0,
    eps: float = 0.0,
) -> DiagnosticsRecord:
    """Evaluates every diagnostic of the state; stats is None at t = 0.

    Entropy extremes are taken over cells with rho0 > s_threshold.
    """
    g = d.grid
    fields = derive_fields(state, d)
    g_w, _ = weighted_flux_norms(state, d, delta)
    mask = d.rho0_cell > s_threshold
    s_vals = fields.s[mask]
    if s_vals.size:
        s_min, s_max = float(np.min(s_vals)), float(np.max(s_vals))
    else:
        s_min = s_max = math.nan
    return DiagnosticsRecord(
        step=running.steps,
        t=state.t,
        energy=energy(state, d),
        momentum=momentum(state, d, eps),
        min_j=float(np.min(state.j)),
        min_j_run=running.min_j,
        c0_ref=c0_ref,
        s_min=s_min,
        s_max=s_max,
        g_weighted_l2=g_w,
        gy_weighted_l2_cum=running.gy_weighted_sq,
        g_weighted_sup4_cum=running.g_weighted_sup4,
        g_l2=l2_norm(fields.g, g),
        g_sup=sup_norm(fields.g),
        vy_l2=l2_norm(cell_derivative(state.v, g), g),
        pi_max=float(np.max(state.pi)),
        pi_min_run=running.min_pi,
        theta_max=float(np.max(fields.theta)),
        floor_margin=floor_margin(state, d),
        floor_margin_run=running.min_floor_margin,
        boundary_flux_cum=running.boundary_flux,
        picard_iters=0 if stats is None else stats.iterations,
        picard_res=0.0 if stats is None else stats.residual,
        picard_contraction=0.0 if stats is None else stats.contraction,
        dt_used=0.0 if stats is None else stats.dt,
    )


class AuditTolerances(BaseModel):
    """Represents the pass/fail thresholds of the trajectory audit.

    energy_rel: allowed max |E - E0|/E0.
    momentum_factor: momentum drift allowed is
        momentum_factor * steps * picard_tol * h sum (rho0 + eps).
    j_allowance: minJ must stay above (1 - j_allowance) c0.
    growth: allowed sup_t ||G/rho0^(delta/2)||_2 over its initial value.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    energy_rel: float = 1e-3
    momentum_factor: float = 10.0
    picard_tol: float = 1e-12
    eps: float = 0.0
    j_allowance: float = 0.01
    growth: float = 1e3


class AuditCheck(BaseModel):
    """Represents one audited assertion with its worst observed value."""

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    name: str
    passed: bool
    worst: float
    limit: float
    detail: str = ""


class AuditReport(BaseModel):
    """Represents the pass/fail roll-up of a trajectory."""

    model_config = ConfigDict(frozen=True)

    checks: list[AuditCheck]

    @property
    def all_passed(self) -> bool:
        """Every check passed."""
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> AuditCheck:
        """Returns the check with the given name."""
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self) -> list[str]:
        """Renders one line per check plus a verdict."""
        out = [
            f"{'PASS' if c.passed else 'FAIL'} {c.name}: worst={c.worst:.6e} "
            f"limit={c.limit:.6e} {c.detail}".rstrip()
            for c in self.checks
        ]
        out.append("ALL PASS" if self.all_passed else "AUDIT FAILED")
        return out


def _energy_check(
    series: list[DiagnosticsRecord], tol: AuditTolerances
) -> AuditCheck:
    e0 = series[0].energy
    scale = abs(e0) if e0 != 0.0 else 1.0
    worst = max(abs(r.energy - e0) / scale for r in series)
    return AuditCheck(
        name="energy_drift",
        passed=worst <= tol.energy_rel,
        worst=worst,
        limit=tol.energy_rel,
        detail="max |E - E0|/E0",
    )


def _momentum_check(
    series: list[DiagnosticsRecord], d: InitialData, tol: AuditTolerances
) -> AuditCheck:
    m0 = series[0].momentum
    scale = d.grid.h * float(np.sum(d.rho0_node + tol.eps))
    steps = max(series[-1].step, 1)
    limit = tol.momentum_factor * steps * tol.picard_tol * scale
    # the boundary flux is zero under ZERO_STRESS
    worst = max(abs(r.momentum - m0 - r.boundary_flux_cum) for r in series)
    return AuditCheck(
        name="momentum_drift",
        passed=worst <= limit,
        worst=worst,
        limit=limit,
        detail="max |m - m0 - boundary flux|",
    )


def _j_bound_check(
    series: list[DiagnosticsRecord], tol: AuditTolerances
) -> AuditCheck:
    c0 = series[0].c0_ref
    worst = min(r.min_j_run for r in series)
    if math.isnan(c0):
        return AuditCheck(
            name="j_lower_bound",
            passed=True,
            worst=worst,
            limit=math.nan,
            detail="no c0 reference, skipped",
        )
    limit = (1.0 - tol.j_allowance) * c0
    return AuditCheck(
        name="j_lower_bound",
        passed=worst >= limit,
        worst=worst,
        limit=limit,
        detail=f"min J vs (1 - {tol.j_allowance}) c0",
    )


def _floor_check(series: list[DiagnosticsRecord]) -> AuditCheck:
    worst = min(r.floor_margin_run for r in series)
    return AuditCheck(
        name="entropy_floor",
        passed=worst >= 0.0,
        worst=worst,
        limit=0.0,
        detail="min (J^gamma pi - J0^gamma pi0)",
    )


def _positivity_check(series: list[DiagnosticsRecord]) -> AuditCheck:
    worst_pi = min(r.pi_min_run for r in series)
    worst_j = min(r.min_j_run for r in series)
    return AuditCheck(
        name="positivity",
        passed=worst_pi >= 0.0 and worst_j > 0.0,
        worst=worst_pi,
        limit=0.0,
        detail=f"min pi, min J = {worst_j:.6e}",
    )


def _boundedness_check(
    series: list[DiagnosticsRecord], tol: AuditTolerances
) -> AuditCheck:
    norms = [r.g_weighted_l2 for r in series]
    finite = all(
        math.isfinite(r.g_weighted_l2)
        and math.isfinite(r.gy_weighted_l2_cum)
        and math.isfinite(r.g_weighted_sup4_cum)
        for r in series
    )
    base = norms[0] if norms[0] > 0.0 else 1.0
    worst = max(norms) / base
    return AuditCheck(
        name="weighted_norms",
        passed=finite and worst <= tol.growth,
        worst=worst,
        limit=tol.growth,
        detail="sup_t ||G/rho0^(delta/2)||_2 over its initial value",
    )


def audit_trajectory(
    series: list[DiagnosticsRecord],
    d: InitialData,
    tolerances: AuditTolerances | None = None,
) -> AuditReport:
    """Rolls a sampled trajectory up into pass/fail checks.

    Energy drift, momentum drift, minJ >= c0, the entropy floor, positivity
    and weighted-norm boundedness are each checked independently so a
    corrupted field only fails the checks that read it.
    """
    if not series:
        raise ValueError("audit needs a nonempty series")
    tol = tolerances or AuditTolerances()
    report = AuditReport(
        checks=[
            _energy_check(series, tol),
            _momentum_check(series, d, tol),
            _j_bound_check(series, tol),
            _floor_check(series),
            _positivity_check(series),
            _boundedness_check(series, tol),
        ]
    )
    for c in report.checks:
        if not c.passed:
            logger.warning(
                "audit check %s failed: worst=%g limit=%g", c.name, c.worst, c.limit
            )
    return report
