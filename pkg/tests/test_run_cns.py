"""End-to-end tests of the command-line frontend."""

__copyright__ = """
Copyright (c) 2024 The vacuum-cns contributors.
All rights reserved.
"""

import json
import math
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from cns_config import ConfigError
from run_cns import (
    EXIT_AUDIT,
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_UNDERFLOW,
    cli,
    worker_cap,
)

BASE = """
[run]
t_final = 0.1
sample_every = 5
[grid]
half_width = 10
num_cells = 100
[family]
k_rho = 1
ell_rho = 1.5
s0 = 1
bump_amplitude = 0.5
bump_width = 2
[stepper]
dt = 1e-2
"""


def _invoke(tmp_path: Path, command: str, text: str) -> tuple[int, str, Path]:
    config = tmp_path / f"{command}.ini"
    config.write_text(text, encoding="utf-8")
    out = tmp_path / f"out_{command}"
    result = CliRunner().invoke(
        cli, [command, "--config", str(config), "--out", str(out)]
    )
    return result.exit_code, result.output, out


def test_run_writes_artifacts(tmp_path: Path) -> None:
    """A clean run passes its audit and leaves every artifact behind."""
    code, output, out = _invoke(tmp_path, "run", BASE)
    assert code == EXIT_OK, output
    assert "ALL PASS" in output
    for name in (
        "timeseries.csv",
        "final_state.csv",
        "euler_final.csv",
        "audit.txt",
        "run_meta.json",
    ):
        assert (out / name).is_file(), name
    meta = json.loads((out / "run_meta.json").read_text(encoding="utf-8"))
    assert meta["status"] == "OK"
    assert meta["steps"] == 10
    assert meta["audit_passed"] is True
    audit = (out / "audit.txt").read_text(encoding="utf-8")
    assert "PASS euler_mass" in audit


def test_run_is_deterministic(tmp_path: Path) -> None:
    """The same configuration reproduces the time series byte for byte."""
    _, _, first = _invoke(tmp_path, "run", BASE)
    again = tmp_path / "again"
    again.mkdir()
    _, _, second = _invoke(again, "run", BASE)
    assert (first / "timeseries.csv").read_bytes() == (
        second / "timeseries.csv"
    ).read_bytes()


def test_run_underflow(tmp_path: Path) -> None:
    """A step that never converges exits with the underflow status."""
    text = BASE + "picard_max = 1\npicard_tol = 1e-300\ndt_min = 6e-3\n"
    code, _, out = _invoke(tmp_path, "run", text)
    assert code == EXIT_UNDERFLOW
    lines = (out / "timeseries.csv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    meta = json.loads((out / "run_meta.json").read_text(encoding="utf-8"))
    assert meta["status"] == "DT_UNDERFLOW"


def test_config_errors_exit_three(tmp_path: Path) -> None:
    """Bad keys and missing files are configuration errors."""
    code, output, _ = _invoke(tmp_path, "run", BASE + "[gas]\ngamma = 0.9\n")
    assert code == EXIT_CONFIG
    assert "gas.gamma" in output
    result = CliRunner().invoke(
        cli, ["run", "--config", str(tmp_path / "missing.ini")]
    )
    assert result.exit_code == EXIT_CONFIG


def test_validate_pass_and_fail(tmp_path: Path) -> None:
    """ell = 3/2 satisfies every hypothesis, ell = 3 breaks (H3)."""
    code, output, out = _invoke(tmp_path, "validate", BASE)
    assert code == EXIT_OK, output
    assert "H1: PASS" in output and "H4: PASS" in output
    assert "GLOBAL_δγ" in output
    report = json.loads((out / "hypotheses.json").read_text(encoding="utf-8"))
    assert report["analytic"] is True

    steep = tmp_path / "steep"
    steep.mkdir()
    code, output, _ = _invoke(
        steep, "validate", BASE.replace("ell_rho = 1.5", "ell_rho = 3")
    )
    assert code == EXIT_AUDIT
    assert "H3: FAIL" in output


def test_raw_fields(tmp_path: Path) -> None:
    """Whitespace-separated arrays replace the family."""
    np.savetxt(tmp_path / "rho0.txt", np.ones(9))
    np.savetxt(tmp_path / "v0.txt", np.zeros(9))
    np.savetxt(tmp_path / "pi0.txt", np.zeros(8))
    text = """
[run]
t_final = 0.1
[grid]
half_width = 1
num_cells = 8
[family]
rho0_file = rho0.txt
v0_file = v0.txt
pi0_file = pi0.txt
[stepper]
dt = 0.05
"""
    code, output, out = _invoke(tmp_path, "run", text)
    assert code == EXIT_OK, output
    meta = json.loads((out / "run_meta.json").read_text(encoding="utf-8"))
    assert meta["hypotheses"]["analytic"] is False

    (tmp_path / "pi0.txt").write_text("1 2 3\n", encoding="utf-8")
    code, output, _ = _invoke(tmp_path, "run", text)
    assert code == EXIT_CONFIG


def test_sweep_eps(tmp_path: Path) -> None:
    """Each sweep point gets its own directory and a summary row."""
    text = BASE + "[sweep]\naxis = eps\nvalues = 0, 1e-3, 1e-2\nworkers = 2\n"
    code, output, out = _invoke(tmp_path, "sweep", text)
    assert code == EXIT_OK, output
    for k in range(3):
        assert (out / f"point_{k:02d}" / "timeseries.csv").is_file()
    rows = (out / "summary.csv").read_text(encoding="utf-8").splitlines()
    assert rows[0].startswith("index,eps,status")
    assert len(rows) == 4
    # the first point has nothing to compare with
    assert rows[1].endswith(",,,")
    assert not rows[2].endswith(",,,")


def test_mms_stationary(tmp_path: Path) -> None:
    """The rest state converges at the rounding floor."""
    text = (
        "[run]\nt_final = 0.1\n"
        "[mms]\ncase = STATIONARY\ngrids = 8, 16, 32\ndts = 0.05\nhalf_width = 1\n"
    )
    code, output, out = _invoke(tmp_path, "mms", text)
    assert code == EXIT_OK, output
    assert "(at floor)" in output
    lines = (out / "order_report.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("axis,level,N")
    assert len(lines) == 4
    assert (out / "order_report.json").is_file()


def test_mms_two_levels_is_config_error(tmp_path: Path) -> None:
    """An order needs three levels."""
    text = "[run]\nt_final = 0.1\n[mms]\ncase = STATIONARY\ngrids = 8, 16\ndts = 0.05\n"
    code, _, _ = _invoke(tmp_path, "mms", text)
    assert code == EXIT_CONFIG


def test_worker_cap(monkeypatch: pytest.MonkeyPatch) -> None:
    """CNS_WORKERS caps the requested parallelism."""
    monkeypatch.delenv("CNS_WORKERS", raising=False)
    assert worker_cap(8) == 8
    monkeypatch.setenv("CNS_WORKERS", "2")
    assert worker_cap(8) == 2
    assert worker_cap(1) == 1
    monkeypatch.setenv("CNS_WORKERS", "many")
    with pytest.raises(ConfigError, match="CNS_WORKERS"):
        worker_cap(4)


def test_sweep_v0_perturbation(tmp_path: Path) -> None:
    """Velocity data perturbed by 1e-10 stay close up to the final time."""
    text = BASE + "[sweep]\naxis = v0_perturbation\nvalues = -1e-10, 1e-10\n"
    code, output, out = _invoke(tmp_path, "sweep", text)
    assert code == EXIT_OK, output
    rows = (out / "summary.csv").read_text(encoding="utf-8").splitlines()
    header = rows[0].split(",")
    diff = float(rows[2].split(",")[header.index("v_sup_diff_prev")])
    assert 0.0 < diff <= 1e-6


def _summary_column(out: Path, name: str) -> list[float]:
    rows = (out / "summary.csv").read_text(encoding="utf-8").splitlines()
    index = rows[0].split(",").index(name)
    return [float(row.split(",")[index]) for row in rows[2:]]


@pytest.mark.parametrize(("axis", "values"), [("L", "10, 20"), ("N", "100, 200")])
def test_sweep_grid_axes_report_cauchy_differences(
    tmp_path: Path, axis: str, values: str
) -> None:
    """Points on different grids are compared on the coarser nodes."""
    text = BASE + f"[sweep]\naxis = {axis}\nvalues = {values}\ncauchy_window = 5\n"
    code, output, out = _invoke(tmp_path, "sweep", text)
    assert code == EXIT_OK, output
    (diff,) = _summary_column(out, "v_sup_diff_prev")
    assert math.isfinite(diff)
    assert 0.0 < diff < 1.0


FLAGSHIP = """
[run]
t_final = 1.0
sample_every = 50
[grid]
half_width = 50
num_cells = 2000
[family]
k_rho = 1
ell_rho = 1.5
s0 = 1
bump_amplitude = 0.5
bump_width = 2
[stepper]
dt = 1e-2
"""


def test_sweep_eps_is_cauchy(tmp_path: Path) -> None:
    """Velocity differences shrink with eps; E and min J move by under 1%."""
    text = FLAGSHIP + "[sweep]\naxis = eps\nvalues = 1e-3, 1e-4, 1e-5\nworkers = 3\n"
    code, output, out = _invoke(tmp_path, "sweep", text)
    # the energy audit weighs kinetic energy by rho0 alone
    assert code in (EXIT_OK, EXIT_AUDIT), output
    diffs = _summary_column(out, "v_sup_diff_prev")
    assert 0.0 < diffs[1] < diffs[0]
    assert max(_summary_column(out, "E_rel_diff_prev")) < 1e-2
    assert max(_summary_column(out, "minJ_rel_diff_prev")) < 1e-2
