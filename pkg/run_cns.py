"""Frontend to run, validate, sweep and verify the Lagrangian solver."""

__copyright__ = """
Copyright (c) 2024 The vacuum-cns contributors.
All rights reserved.
"""

import concurrent.futures
import logging
import math
import os
import sys
from pathlib import Path
from typing import Any, TypeVar

import click
import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from cns_config import (
    ConfigError,
    RunConfig,
    ScenarioEnum,
    SweepAxis,
    parse_config,
)
from csv_helper import (
    euler_lines,
    final_state_lines,
    order_report_lines,
    table_lines,
    timeseries_lines,
    write_lines,
)
from diagnostics import (
    AuditCheck,
    AuditReport,
    AuditTolerances,
    DiagnosticsRecord,
    audit_trajectory,
    j_lower_bound_reference,
)
from euler_map import euler_mass, to_euler
from grid_state import build_grid
from init_families import (
    HypothesisReport,
    InitialData,
    density_l1,
    initial_energy,
    power_law_initial_data,
    raw_initial_data,
    validate_hypotheses,
)
from lag_state import LagState, initial_state
from mms_oracle import OrderReport, builtin_case, convergence_study
from stepper import BoundaryMode, DtUnderflowError, run

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_AUDIT = 1
EXIT_UNDERFLOW = 2
EXIT_CONFIG = 3

# relative drift of the Euler-frame mass allowed over a run
EULER_MASS_RTOL = 1e-12


class RunMeta(BaseModel):
    """Represents run_meta.json."""

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    status: str
    config: RunConfig
    c0_ref: float
    initial_energy: float
    rho0_l1: float
    hypotheses: HypothesisReport
    steps: int
    audit_passed: bool | None = None


class RunOutcome(BaseModel):
    """Represents the result of one run, kept in memory for sweeps."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    status: int
    data: InitialData
    state: LagState | None
    records: list[DiagnosticsRecord]
    audit: AuditReport | None = None


def worker_cap(requested: int) -> int:
    """Caps the requested parallelism by the CNS_WORKERS environment variable."""
    env = os.environ.get("CNS_WORKERS")
    if not env:
        return requested
    try:
        cap = int(env)
    except ValueError as err:
        raise ConfigError(f"CNS_WORKERS: not an integer: {env!r}") from err
    return max(1, min(requested, cap))


def load_initial_data(cfg: RunConfig) -> InitialData:
    """Builds the initial data from the family or from raw-field files."""
    assert cfg.grid is not None
    g = build_grid(cfg.grid.half_width, cfg.grid.num_cells)
    fam = cfg.family
    try:
        if fam.raw:
            base = Path(cfg.base_dir)
            arrays = [
                np.loadtxt(base / str(name), dtype=np.float64, ndmin=1)
                for name in (fam.rho0_file, fam.v0_file, fam.pi0_file)
            ]
            return raw_initial_data(g, cfg.gas, *arrays)
        return power_law_initial_data(g, cfg.gas, fam.to_family())
    except (OSError, ValueError) as err:
        raise ConfigError(f"family: {err}") from err


def _c0_or_nan(d: InitialData) -> float:
    try:
        return j_lower_bound_reference(d)
    except ValueError:
        return math.nan


def _write_meta(
    out: Path,
    cfg: RunConfig,
    d: InitialData,
    status: str,
    steps: int,
    audit_passed: bool | None,
) -> None:
    meta = RunMeta(
        status=status,
        config=cfg,
        c0_ref=_c0_or_nan(d),
        initial_energy=initial_energy(d),
        rho0_l1=density_l1(d),
        hypotheses=validate_hypotheses(d, cfg.delta),
        steps=steps,
        audit_passed=audit_passed,
    )
    (out / "run_meta.json").write_text(
        meta.model_dump_json(indent=2) + "\n", encoding="utf-8"
    )


def _euler_mass_check(d: InitialData, state: LagState) -> AuditCheck:
    mass0 = euler_mass(to_euler(initial_state(d), d))
    drift = abs(euler_mass(to_euler(state, d)) - mass0) / mass0
    return AuditCheck(
        name="euler_mass",
        passed=drift <= EULER_MASS_RTOL,
        worst=drift,
        limit=EULER_MASS_RTOL,
        detail="|M(T) - M(0)|/M(0)",
    )


def execute_run(cfg: RunConfig, d: InitialData, out: Path) -> RunOutcome:
    """Runs one trajectory and writes its artifacts under out."""
    assert cfg.stepper is not None and cfg.run.t_final is not None
    out.mkdir(parents=True, exist_ok=True)
    try:
        state, records = run(
            d,
            cfg.stepper,
            cfg.run.t_final,
            cfg.run.sample_every,
            cfg.delta,
            cfg.run.s_threshold,
        )
    except DtUnderflowError as err:
        logger.error("run aborted: %s", err)
        write_lines(out / "timeseries.csv", timeseries_lines(err.records))
        if err.state is not None:
            write_lines(out / "final_state.csv", final_state_lines(err.state, d))
        steps = err.records[-1].step if err.records else 0
        _write_meta(out, cfg, d, "DT_UNDERFLOW", steps, None)
        return RunOutcome(
            status=EXIT_UNDERFLOW, data=d, state=err.state, records=err.records
        )

    audit = audit_trajectory(
        records,
        d,
        AuditTolerances(picard_tol=cfg.stepper.picard_tol, eps=cfg.stepper.eps),
    )
    audit = AuditReport(checks=audit.checks + [_euler_mass_check(d, state)])
    write_lines(out / "timeseries.csv", timeseries_lines(records))
    write_lines(out / "final_state.csv", final_state_lines(state, d))
    write_lines(
        out / "euler_final.csv",
        euler_lines(to_euler(state, d), d.grid.half_width, d.grid.num_cells),
    )
    write_lines(out / "audit.txt", audit.lines())
    status = EXIT_OK if audit.all_passed else EXIT_AUDIT
    _write_meta(
        out,
        cfg,
        d,
        "OK" if status == EXIT_OK else "AUDIT_FAILED",
        records[-1].step,
        audit.all_passed,
    )
    return RunOutcome(status=status, data=d, state=state, records=records, audit=audit)


ModelT = TypeVar("ModelT", bound=BaseModel)


def _revalidated(model: ModelT, **changes: Any) -> ModelT:
    try:
        return type(model).model_validate({**model.model_dump(), **changes})
    except ValidationError as err:
        raise ConfigError(f"sweep: {err}") from err


def point_config(cfg: RunConfig, axis: SweepAxis, value: float) -> RunConfig:
    """Returns cfg with the swept knob set to value.

    V0_PERTURBATION leaves cfg unchanged; it is applied to the data.
    """
    assert cfg.stepper is not None and cfg.grid is not None
    if axis == SweepAxis.EPS:
        return cfg.model_copy(update={"stepper": _revalidated(cfg.stepper, eps=value)})
    if axis == SweepAxis.DT:
        return cfg.model_copy(update={"stepper": _revalidated(cfg.stepper, dt=value)})
    if axis == SweepAxis.PICARD_TOL:
        return cfg.model_copy(
            update={"stepper": _revalidated(cfg.stepper, picard_tol=value)}
        )
    if axis == SweepAxis.N:
        return cfg.model_copy(
            update={"grid": _revalidated(cfg.grid, num_cells=round(value))}
        )
    if axis == SweepAxis.L:
        return cfg.model_copy(update={"grid": _revalidated(cfg.grid, half_width=value)})
    if axis == SweepAxis.V0_PERTURBATION:
        return cfg
    raise NotImplementedError


def _sweep_point(
    cfg: RunConfig, axis: SweepAxis, value: float, out: Path
) -> RunOutcome:
    point = point_config(cfg, axis, value)
    d = load_initial_data(point)
    if axis == SweepAxis.V0_PERTURBATION:
        d = d.model_copy(update={"v0": d.v0 + value})
    logger.info("sweep point %s = %g", axis.value, value)
    return execute_run(point, d, out)


def _window_sup_diff(prev: RunOutcome, cur: RunOutcome, window: float) -> float:
    """Returns sup |v_cur - v_prev| over |y| <= window.

    Both velocities are interpolated onto the nodes of the coarser grid, so N
    and L sweeps compare on a common set of points.
    """
    if prev.state is None or cur.state is None:
        return math.nan
    g_prev, g_cur = prev.data.grid, cur.data.grid
    coarse = g_prev if g_prev.h >= g_cur.h else g_cur
    reach = min(window, g_prev.half_width, g_cur.half_width)
    y = coarse.nodes[np.abs(coarse.nodes) <= reach]
    if y.size == 0:
        return math.nan
    v_prev = np.interp(y, g_prev.nodes, prev.state.v)
    v_cur = np.interp(y, g_cur.nodes, cur.state.v)
    return float(np.max(np.abs(v_cur - v_prev)))


def _rel_change(prev: float, cur: float) -> float:
    return abs(cur - prev) / abs(prev) if prev != 0.0 else math.nan


def sweep_summary_lines(
    axis: SweepAxis, values: list[float], outcomes: list[RunOutcome], window: float
) -> list[str]:
    """Tabulates each point and its Cauchy differences to the previous point."""
    header = [
        "index",
        axis.value,
        "status",
        "steps",
        "E_final",
        "energy_drift",
        "minJ_run",
        "audit_passed",
        "v_sup_diff_prev",
        "E_rel_diff_prev",
        "minJ_rel_diff_prev",
    ]
    rows: list[list[Any]] = []
    for k, (value, cur) in enumerate(zip(values, outcomes)):
        last = cur.records[-1] if cur.records else None
        first = cur.records[0] if cur.records else None
        row: list[Any] = [
            k,
            value,
            cur.status,
            None if last is None else last.step,
            None if last is None else last.energy,
            (
                None
                if last is None or first is None
                else _rel_change(first.energy, last.energy)
            ),
            None if last is None else last.min_j_run,
            None if cur.audit is None else cur.audit.all_passed,
        ]
        prev = outcomes[k - 1] if k else None
        if prev is None or not prev.records or last is None:
            row += [None, None, None]
        else:
            prev_last = prev.records[-1]
            row += [
                _window_sup_diff(prev, cur, window),
                _rel_change(prev_last.energy, last.energy),
                _rel_change(prev_last.min_j_run, last.min_j_run),
            ]
        rows.append(row)
    return table_lines(header, rows)


def execute_sweep(cfg: RunConfig, out: Path) -> int:
    """Runs every sweep point in its own directory and writes summary.csv."""
    sweep = cfg.sweep
    assert sweep is not None and cfg.grid is not None
    out.mkdir(parents=True, exist_ok=True)
    window = (
        sweep.cauchy_window
        if sweep.cauchy_window is not None
        else 0.5 * cfg.grid.half_width
    )
    dirs = [out / f"point_{k:02d}" for k in range(len(sweep.values))]
    with concurrent.futures.ThreadPoolExecutor(
        max_workers=worker_cap(sweep.workers)
    ) as executor:
        futures = [
            executor.submit(_sweep_point, cfg, sweep.axis, value, path)
            for value, path in zip(sweep.values, dirs)
        ]
        outcomes = [f.result() for f in futures]
    write_lines(
        out / "summary.csv",
        sweep_summary_lines(sweep.axis, sweep.values, outcomes, window),
    )
    return max(o.status for o in outcomes)


def _orders_met(cfg: RunConfig, report: OrderReport) -> bool:
    mms = cfg.mms
    assert mms is not None
    met = True
    for axis in report.axes:
        floor = mms.min_space_order if axis.axis == "space" else mms.min_time_order
        if floor is None or axis.at_floor:
            continue
        finest = axis.pairwise["e_v_l2"][-1]
        if not finest >= floor:
            logger.warning("%s order %.3f below %.3f", axis.axis, finest, floor)
            met = False
    return met


def execute_mms(cfg: RunConfig, out: Path) -> int:
    """Runs the convergence study and writes order_report.csv."""
    mms = cfg.mms
    assert mms is not None and cfg.stepper is not None and cfg.run.t_final
    out.mkdir(parents=True, exist_ok=True)
    case = builtin_case(mms.case, cfg.gas)
    stepper = cfg.stepper.model_copy(update={"bc_mode": BoundaryMode.DIRICHLET_V})
    try:
        report = convergence_study(
            case,
            mms.grids,
            mms.dts,
            mms.half_width,
            stepper,
            cfg.run.t_final,
            workers=worker_cap(mms.workers),
            case_id=mms.case,
        )
    except DtUnderflowError as err:
        logger.error("study aborted: %s", err)
        return EXIT_UNDERFLOW
    except ValueError as err:
        raise ConfigError(f"mms: {err}") from err
    write_lines(out / "order_report.csv", order_report_lines(report))
    (out / "order_report.json").write_text(
        report.model_dump_json(indent=2) + "\n", encoding="utf-8"
    )
    for axis in report.axes:
        click.echo(
            f"{axis.axis}: slopes "
            + ", ".join(f"{k}={v:.3f}" for k, v in axis.slopes.items())
            + (" (at floor)" if axis.at_floor else "")
        )
    return EXIT_OK if _orders_met(cfg, report) else EXIT_AUDIT


def execute_validate(cfg: RunConfig, out: Path) -> int:
    """Checks the hypotheses on the configured data and writes hypotheses.json."""
    out.mkdir(parents=True, exist_ok=True)
    d = load_initial_data(cfg)
    report = validate_hypotheses(d, cfg.delta)
    (out / "hypotheses.json").write_text(
        report.model_dump_json(indent=2) + "\n", encoding="utf-8"
    )
    for name in ("h1_ok", "h2_ok", "h3_ok", "h4_ok"):
        click.echo(f"{name[:2].upper()}: {'PASS' if getattr(report, name) else 'FAIL'}")
    click.echo("tags: " + ", ".join(t.value for t in report.tags))
    return EXIT_OK if report.all_ok else EXIT_AUDIT


def run_scenario(cfg: RunConfig, out: Path) -> int:
    """Dispatches the scenario and returns the exit status.

    Raises ConfigError for data that cannot be built from the configuration.
    """
    if cfg.scenario == ScenarioEnum.RUN:
        outcome = execute_run(cfg, load_initial_data(cfg), out)
        if outcome.audit is not None:
            for line in outcome.audit.lines():
                click.echo(line)
        return outcome.status
    if cfg.scenario == ScenarioEnum.VALIDATE:
        return execute_validate(cfg, out)
    if cfg.scenario == ScenarioEnum.SWEEP:
        return execute_sweep(cfg, out)
    if cfg.scenario == ScenarioEnum.MMS:
        return execute_mms(cfg, out)
    raise NotImplementedError


def _dispatch(scenario: ScenarioEnum, config: str, out: str | None) -> None:
    try:
        path = Path(config)
        cfg = parse_config(
            path.read_text(encoding="utf-8"), scenario, base_dir=str(path.parent)
        )
        status = run_scenario(cfg, Path(out or cfg.run.output_dir))
    except (OSError, ConfigError) as err:
        click.echo(f"config error: {err}", err=True)
        sys.exit(EXIT_CONFIG)
    sys.exit(status)


_config_option = click.option(
    "--config", required=True, help="Sectioned key = value configuration file."
)
_out_option = click.option(
    "--out", default=None, help="<Optional> Output directory, overrides [run]."
)


@click.group()
@click.option("--verbose", is_flag=True, help="Log progress at INFO level.")
def cli(verbose: bool) -> None:
    """Lagrangian compressible Navier-Stokes with far-field vacuum."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@cli.command(name="run")
@_config_option
@_out_option
def run_command(config: str, out: str | None) -> None:
    """Runs one trajectory and audits it."""
    _dispatch(ScenarioEnum.RUN, config, out)


@cli.command(name="validate")
@_config_option
@_out_option
def validate_command(config: str, out: str | None) -> None:
    """Checks the hypotheses on the initial data."""
    _dispatch(ScenarioEnum.VALIDATE, config, out)


@cli.command(name="sweep")
@_config_option
@_out_option
def sweep_command(config: str, out: str | None) -> None:
    """Runs a parameter sweep."""
    _dispatch(ScenarioEnum.SWEEP, config, out)


@cli.command(name="mms")
@_config_option
@_out_option
def mms_command(config: str, out: str | None) -> None:
    """Runs a manufactured-solution convergence study."""
    _dispatch(ScenarioEnum.MMS, config, out)


if __name__ == "__main__":
    cli()
