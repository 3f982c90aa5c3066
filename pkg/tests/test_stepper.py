"""Tests for the Picard stepper."""

__copyright__ = """
Copyright (c) 2024 The vacuum-cns contributors.
All rights reserved.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from diagnostics import audit_trajectory, j_lower_bound_reference, momentum
from grid_state import build_grid, cell_derivative
from init_families import GasConstants, InitialData, raw_initial_data
from lag_state import LagState, floor_product, initial_state
from stepper import (
    BoundaryMode,
    DtUnderflowError,
    FreezeMode,
    PivotError,
    StepperConfig,
    picard_step,
    run,
    solve_velocity,
    update_J,
    update_pi,
)


@pytest.fixture(name="small_data")
def fixture_small_data(gas: GasConstants) -> InitialData:
    """Unit density on [-1, 1] with 4 cells, rest velocity and zero pressure."""
    g = build_grid(1.0, 4)
    return raw_initial_data(g, gas, [1.0] * 5, [0.0] * 5, [0.0] * 4)


def test_config_rejects_bad_knobs() -> None:
    """Non-positive dt and shrink factors outside (0, 1) are refused."""
    with pytest.raises(ValidationError, match="dt must be positive"):
        StepperConfig(dt=0.0)
    with pytest.raises(ValidationError, match="dt_shrink"):
        StepperConfig(dt=1e-3, dt_shrink=1.0)
    with pytest.raises(ValidationError):
        StepperConfig(dt=1e-3, bogus=1)  # type: ignore[call-arg]


def test_update_J_stays_positive() -> None:  # noqa: N802
    """J' > 0 for any finite strain rate, J' = J at b = 0."""
    j = np.array([1.0, 0.5, 2.0])
    b = np.array([-50.0, 0.0, 30.0])
    out = update_J(j, b, 0.1)
    assert np.all(out > 0.0)
    assert out[1] == 0.5


def test_update_pi_identity_and_semigroup(gas: GasConstants) -> None:
    """b = 0 leaves pi alone; two half steps equal one full step."""
    pi = np.array([0.0, 1.0, 3.0])
    assert np.array_equal(update_pi(pi, np.zeros(3), 0.1, gas), pi)
    b = np.array([0.7, -0.4, 2.0])
    once = update_pi(pi, b, 0.2, gas)
    twice = update_pi(update_pi(pi, b, 0.1, gas), b, 0.1, gas)
    np.testing.assert_allclose(once, twice, rtol=1e-13)


def test_exact_updates_raise_the_floor(gas: GasConstants) -> None:
    """J^gamma pi never decreases under the exact ODE solutions."""
    rng = np.random.default_rng(3)
    j = rng.uniform(0.2, 3.0, size=200)
    pi = rng.uniform(0.0, 2.0, size=200)
    b = rng.normal(scale=5.0, size=200)
    before = floor_product(j, pi, gas.gamma)
    after = floor_product(update_J(j, b, 0.05), update_pi(pi, b, 0.05, gas), gas.gamma)
    assert np.all(after >= before * (1.0 - 1e-14))


def _momentum_residual(
    v: np.ndarray, v_old: np.ndarray, j: np.ndarray, pi: np.ndarray, d: InitialData
) -> np.ndarray:
    """m (v - v_old) - dt/h (G_right - G_left) with zero stress past the walls."""
    g = d.grid
    flux = d.constants.viscosity * cell_derivative(v, g) / j - pi
    padded = np.concatenate([[0.0], flux, [0.0]])
    return d.rho0_node * (v - v_old) - 0.1 / g.h * np.diff(padded)


def test_solve_velocity_zero_stress(small_data: InitialData) -> None:
    """Every node row balances inertia against the flux jump."""
    cfg = StepperConfig(dt=0.1)
    v_old = np.array([0.0, 1.0, 0.0, -1.0, 0.5])
    j = np.array([1.0, 0.8, 1.2, 1.0])
    pi = np.array([1.0, 2.0, 3.0, 4.0])
    v = solve_velocity(v_old, j, pi, small_data, cfg)
    np.testing.assert_allclose(
        _momentum_residual(v, v_old, j, pi, small_data), 0.0, atol=1e-13
    )


def test_solve_velocity_dirichlet(small_data: InitialData) -> None:
    """The walls are pinned; the interior rows still balance."""
    cfg = StepperConfig(dt=0.1, bc_mode=BoundaryMode.DIRICHLET_V)
    v_old = np.array([0.0, 1.0, 0.0, -1.0, 0.0])
    j = np.ones(4)
    pi = np.array([1.0, 2.0, 3.0, 4.0])
    v = solve_velocity(v_old, j, pi, small_data, cfg, boundary=(0.25, -0.5))
    assert v[0] == 0.25
    assert v[-1] == -0.5
    residual = _momentum_residual(v, v_old, j, pi, small_data)
    np.testing.assert_allclose(residual[1:-1], 0.0, atol=1e-13)


def test_solve_velocity_pivot_error(small_data: InitialData) -> None:
    """A negative Jacobian destroys positive definiteness."""
    cfg = StepperConfig(dt=0.1)
    with pytest.raises(PivotError):
        solve_velocity(
            np.zeros(5), np.full(4, -0.01), np.zeros(4), small_data, cfg
        )


def test_stationary_state_is_kept(uniform_data: InitialData) -> None:
    """Uniform pressure at rest with pinned walls stays put bit for bit."""
    cfg = StepperConfig(dt=0.1, bc_mode=BoundaryMode.DIRICHLET_V)
    state = initial_state(uniform_data)
    new, stats = picard_step(state, uniform_data, cfg)
    assert stats.iterations == 1
    assert stats.residual == 0.0
    assert new.t == pytest.approx(0.1)
    assert np.array_equal(new.j, state.j)
    assert np.array_equal(new.v, state.v)
    assert np.array_equal(new.pi, state.pi)


def test_zero_stress_rest_state(small_data: InitialData) -> None:
    """Zero pressure at rest is a fixed point under free walls."""
    cfg = StepperConfig(dt=0.1)
    new, stats = picard_step(initial_state(small_data), small_data, cfg)
    assert stats.iterations == 1
    assert np.array_equal(new.v, np.zeros(5))
    assert np.array_equal(new.j, np.ones(4))


def test_zero_stress_walls_expand(uniform_data: InitialData) -> None:
    """Pressure against free walls pushes the gas outwards."""
    cfg = StepperConfig(dt=0.05)
    new, _ = picard_step(initial_state(uniform_data), uniform_data, cfg)
    assert new.v[0] < 0.0 < new.v[-1]
    assert new.anchor_shift < 0.0
    assert momentum(new, uniform_data) == pytest.approx(0.0, abs=1e-14)


def test_contraction_improves_with_dt(bump_data: InitialData) -> None:
    """The Picard map contracts harder for smaller steps."""
    state = initial_state(bump_data)
    cfg = StepperConfig(dt=1e-2)
    _, coarse = picard_step(state, bump_data, cfg, dt=1e-2)
    _, fine = picard_step(state, bump_data, cfg, dt=2.5e-3)
    assert 0.0 < fine.contraction < coarse.contraction < 1.0


def test_freeze_step_start_needs_two_sweeps(bump_data: InitialData) -> None:
    """A strain rate frozen at the step start gives the same J and pi twice."""
    cfg = StepperConfig(dt=1e-2, freeze=FreezeMode.STEP_START)
    _, stats = picard_step(initial_state(bump_data), bump_data, cfg)
    assert stats.iterations == 2
    assert stats.residual == 0.0


def test_step_floor_and_positivity(bump_data: InitialData) -> None:
    """An accepted step keeps J > 0, pi >= 0 and J^gamma pi nondecreasing."""
    cfg = StepperConfig(dt=1e-2)
    state = initial_state(bump_data)
    gamma = bump_data.constants.gamma
    for _ in range(5):
        new, _ = picard_step(state, bump_data, cfg)
        assert np.all(new.j > 0.0)
        assert np.all(new.pi >= 0.0)
        assert np.all(
            floor_product(new.j, new.pi, gamma)
            >= floor_product(state.j, state.pi, gamma)
        )
        state = new


def test_huge_dt_is_retried(bump_data: InitialData) -> None:
    """Overflowing attempts shrink dt instead of failing the run."""
    cfg = StepperConfig(dt=1e4, picard_max=20)
    state = initial_state(bump_data)
    try:
        new, stats = picard_step(state, bump_data, cfg)
    except DtUnderflowError as err:
        assert err.state is state
    else:
        assert stats.retries >= 1
        assert stats.dt < 1e4
        assert new.t == pytest.approx(stats.dt)


def test_dt_underflow(bump_data: InitialData) -> None:
    """A step that cannot converge above dt_min is abandoned."""
    cfg = StepperConfig(dt=1e-2, dt_min=6e-3, picard_max=1, picard_tol=1e-300)
    state = initial_state(bump_data)
    with pytest.raises(DtUnderflowError) as info:
        picard_step(state, bump_data, cfg)
    assert info.value.state is state
    assert len(info.value.residuals) == 1
    assert info.value.dt == pytest.approx(5e-3)


def test_dirichlet_momentum_follows_boundary_flux(gas: GasConstants) -> None:
    """With pinned walls momentum changes by dt (G_right - G_left) per step."""
    g = build_grid(1.0, 8)
    pi0 = np.linspace(1.0, 2.0, 8)
    d = raw_initial_data(g, gas, [1.0] * 9, [0.0] * 9, pi0)
    cfg = StepperConfig(dt=0.02, bc_mode=BoundaryMode.DIRICHLET_V)
    state = initial_state(d)
    m0 = momentum(state, d)
    flux = 0.0
    for _ in range(10):
        state, stats = picard_step(state, d, cfg)
        flux += stats.boundary_flux
    assert flux < 0.0
    assert momentum(state, d) - m0 == pytest.approx(flux, abs=1e-12)


def test_run_samples_and_audits(bump_data: InitialData) -> None:
    """A short free-wall run samples on schedule and passes every audit check."""
    cfg = StepperConfig(dt=1e-2)
    final, records = run(bump_data, cfg, 0.2, sample_every=5, delta=1.4)
    assert [r.step for r in records] == [0, 5, 10, 15, 20]
    assert records[-1].t == pytest.approx(0.2)
    assert final.t == records[-1].t
    assert records[0].picard_iters == 0
    assert all(r.picard_iters >= 1 for r in records[1:])
    report = audit_trajectory(records, bump_data)
    assert report.all_passed, report.lines()
    assert report.check("entropy_floor").worst >= 0.0


def test_run_rejects_bad_arguments(bump_data: InitialData) -> None:
    """Final time and sampling period must be positive."""
    cfg = StepperConfig(dt=1e-2)
    with pytest.raises(ValueError, match="final time"):
        run(bump_data, cfg, 0.0, sample_every=1, delta=1.4)
    with pytest.raises(ValueError, match="sample_every"):
        run(bump_data, cfg, 0.1, sample_every=0, delta=1.4)


def test_run_underflow_keeps_records(bump_data: InitialData) -> None:
    """The partial trajectory travels with the underflow error."""
    cfg = StepperConfig(dt=1e-2, dt_min=6e-3, picard_max=1, picard_tol=1e-300)
    with pytest.raises(DtUnderflowError) as info:
        run(bump_data, cfg, 0.1, sample_every=1, delta=1.4)
    assert len(info.value.records) == 1
    assert info.value.records[0].t == 0.0


def test_state_layout_is_checked() -> None:
    """v has one more entry than J and pi."""
    with pytest.raises(ValidationError, match="inconsistent layout"):
        LagState(t=0.0, j=[1.0] * 4, v=[0.0] * 4, pi=[0.0] * 4)


def test_energy_drift_is_first_order(flagship_data: InitialData) -> None:
    """Halving dt halves the relative energy drift."""
    drifts = []
    for dt in (2e-2, 1e-2):
        _, records = run(
            flagship_data, StepperConfig(dt=dt), 1.0, sample_every=1000, delta=1.4
        )
        e0 = records[0].energy
        drifts.append(abs(records[-1].energy - e0) / e0)
    assert 1.7 <= drifts[0] / drifts[1] <= 2.3


def test_j_stays_above_reference_bound(flagship_data: InitialData) -> None:
    """min J over the whole run stays above 0.99 c0 and s >= s0 holds exactly."""
    _, records = run(
        flagship_data, StepperConfig(dt=1e-2), 5.0, sample_every=100, delta=1.4
    )
    c0 = j_lower_bound_reference(flagship_data)
    assert 0.0 < c0 < 1.0
    assert records[-1].min_j_run >= 0.99 * c0
    assert records[-1].floor_margin_run >= 0.0
    assert records[-1].pi_min_run >= 0.0
    report = audit_trajectory(records, flagship_data)
    assert report.check("j_lower_bound").passed
    assert report.check("entropy_floor").passed
