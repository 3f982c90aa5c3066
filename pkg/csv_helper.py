"""Helper functions to render diagnostics, states and reports as CSV lines."""

__copyright__ = """
Copyright (c) 2024 The vacuum-cns contributors.
All rights reserved.
"""

import csv
import io
from pathlib import Path
from typing import Any

from diagnostics import DiagnosticsRecord, derive_fields
from euler_map import EulerSnapshot
from init_families import InitialData
from lag_state import LagState
from mms_oracle import OrderReport

# column name -> DiagnosticsRecord attribute
TIMESERIES_COLUMNS: list[tuple[str, str]] = [
    ("t", "t"),
    ("E", "energy"),
    ("m", "momentum"),
    ("minJ", "min_j"),
    ("c0_ref", "c0_ref"),
    ("s_min", "s_min"),
    ("s_max", "s_max"),
    ("G_w_l2", "g_weighted_l2"),
    ("Gy_w_l2_cum", "gy_weighted_l2_cum"),
    ("G_l2", "g_l2"),
    ("G_sup", "g_sup"),
    ("vy_l2", "vy_l2"),
    ("picard_iters", "picard_iters"),
    ("picard_res", "picard_res"),
    ("dt_used", "dt_used"),
    ("step", "step"),
    ("minJ_run", "min_j_run"),
    ("pi_max", "pi_max"),
    ("pi_min_run", "pi_min_run"),
    ("theta_max", "theta_max"),
    ("floor_margin", "floor_margin"),
    ("floor_margin_run", "floor_margin_run"),
    ("G_w_sup4_cum", "g_weighted_sup4_cum"),
    ("boundary_flux_cum", "boundary_flux_cum"),
    ("picard_contraction", "picard_contraction"),
]


def fmt(value: Any) -> str:
    """Formats a number with 17 significant digits; None becomes empty.

    Strings pass through unchanged.

    Example:
    >>> fmt(0.1), fmt(3), fmt(None), fmt(float("inf")), fmt("eps")
    ('0.10000000000000001', '3', '', 'inf', 'eps')
    """
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    return f"{float(value):.17g}"


def csv_row(values: list[Any]) -> str:
    """Renders formatted values as one CSV line without its terminator.

    Example:
    >>> csv_row(["x", 1, None, 0.5])
    'x,1,,0.5'
    """
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow([fmt(v) for v in values])
    return buf.getvalue()[:-1]


def timeseries_lines(records: list[DiagnosticsRecord]) -> list[str]:
    """Renders one header line and one row per record."""
    lines = [csv_row([name for name, _ in TIMESERIES_COLUMNS])]
    for r in records:
        lines.append(csv_row([getattr(r, attr) for _, attr in TIMESERIES_COLUMNS]))
    return lines


def final_state_lines(state: LagState, d: InitialData) -> list[str]:
    """Renders the Lagrangian state, nodes and cells interleaved by y.

    Node rows carry v; cell rows carry J, pi, rho, theta, s and G.
    """
    g = d.grid
    fields = derive_fields(state, d)
    lines = [
        f"# t={fmt(state.t)}, L={fmt(g.half_width)}, N={g.num_cells}",
        "y,v,J,pi,rho,theta,s,G",
    ]
    nodes = g.nodes
    cells = g.cells
    for i in range(g.num_cells):
        lines.append(csv_row([nodes[i], state.v[i]] + [None] * 6))
        lines.append(
            csv_row(
                [
                    cells[i],
                    None,
                    state.j[i],
                    state.pi[i],
                    fields.rho[i],
                    fields.theta[i],
                    fields.s[i],
                    fields.g[i],
                ]
            )
        )
    lines.append(csv_row([nodes[-1], state.v[-1]] + [None] * 6))
    return lines


def euler_lines(snap: EulerSnapshot, half_width: float, num_cells: int) -> list[str]:
    """Renders an Euler snapshot as x,rho,u,p rows ordered by x.

    Node rows carry u, cell rows rho and p.
    """
    lines = [
        f"# t={fmt(snap.t)}, L={fmt(half_width)}, N={num_cells}",
        "x,rho,u,p",
    ]
    for i in range(num_cells):
        lines.append(csv_row([snap.x_nodes[i], None, snap.u[i], None]))
        lines.append(csv_row([snap.x_cells[i], snap.rho[i], None, snap.p[i]]))
    lines.append(csv_row([snap.x_nodes[-1], None, snap.u[-1], None]))
    return lines


def order_report_lines(report: OrderReport) -> list[str]:
    """Renders every study level with the order against the previous level."""
    lines = ["axis,level,N,h,dt,eJ,ev,epi,order_J,order_v,order_pi"]
    for axis in report.axes:
        for k, lv in enumerate(axis.levels):
            orders: list[Any] = (
                [None] * 3
                if k == 0
                else [
                    axis.pairwise[name][k - 1]
                    for name in ("e_j_l2", "e_v_l2", "e_pi_l2")
                ]
            )
            lines.append(
                csv_row(
                    [axis.axis, k, lv.num_cells, lv.h, lv.dt, lv.e_j_l2, lv.e_v_l2]
                    + [lv.e_pi_l2]
                    + orders
                )
            )
    return lines


def table_lines(header: list[str], rows: list[list[Any]]) -> list[str]:
    """Renders a header and rows of plain values."""
    return [csv_row(list(header))] + [csv_row(row) for row in rows]


def write_lines(path: Path, lines: list[str]) -> None:
    """Writes lines as UTF-8 with LF endings."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
