import numpy as np
import pytest

import hbvkit as hk
from hbvkit.integrate import TERMINAL_EVENT_KINDS

DFE2 = np.array([4.90675, 0.0, 0.0])


def test_exact_fixed_point_stays_put(clearing_params, clearing_forcing):
    traj = hk.integrate(
        clearing_params, clearing_forcing, DFE2, 0.0, 10.0, hk.StepControl.fixed(h=0.01)
    )
    assert np.max(np.abs(traj.states - DFE2)) <= 1e-12
    assert traj.events == ()


def test_adaptive_run_reaches_infection_free_state(clearing_params, clearing_forcing, tight_ctl):
    traj = hk.integrate(clearing_params, clearing_forcing, (1.0, 1.0, 1.0), 0.0, 15.0, tight_ctl)
    assert np.max(np.abs(traj.final_state - DFE2)) <= 1e-5
    assert traj.events == ()
    assert np.all(np.diff(traj.times) > 0.0)


def test_oversized_fixed_step_blows_up(clearing_params, clearing_forcing):
    # |h*lambda| ~ 8 is far outside the RK4 stability region, so the numerical
    # solution diverges even though the true one is bounded
    traj = hk.integrate(
        clearing_params, clearing_forcing, (1.0, 1.0, 1.0), 0.0, 15.0, hk.StepControl.fixed(h=1.0)
    )
    assert traj.terminated
    terminal = [e for e in traj.events if e.kind in ("blow_up", "nonfinite")]
    assert terminal
    assert traj.final_time < 15.0
    # the terminating record is the last one
    assert terminal[0].time == traj.final_time

    # fine-step oracle on the same problem stays bounded
    oracle = hk.integrate(
        clearing_params, clearing_forcing, (1.0, 1.0, 1.0), 0.0, 15.0, hk.StepControl.fixed(h=0.001)
    )
    assert not oracle.terminated
    assert np.max(oracle.states) < 10.0


def test_richardson_order_nonlinear(clearing_params, clearing_forcing):
    order = hk.richardson_order(clearing_params, clearing_forcing, (1.0, 1.0, 1.0), 0.0, 2.0, 0.05)
    assert 3.7 <= order <= 4.3


def test_richardson_order_linear_regime(clearing_params, clearing_forcing):
    u0 = DFE2 + 1e-6
    order = hk.richardson_order(clearing_params, clearing_forcing, u0, 0.0, 2.0, 0.05)
    assert 3.7 <= order <= 4.3


def test_richardson_propagates_instability(clearing_params, clearing_forcing):
    with pytest.raises(RuntimeError):
        hk.richardson_order(clearing_params, clearing_forcing, (1.0, 1.0, 1.0), 0.0, 15.0, 1.0)


def test_adaptive_agrees_with_fine_fixed_reference():
    # shared output time = span end; compare against h=1e-4 RK4 on a span
    # prefix so the check stays at desk scale for the long scenario
    for sid, scenario in sorted(hk.SCENARIOS.items()):
        t0 = scenario.t_span[0]
        t_end = min(scenario.t_span[1], t0 + 5.0)
        adaptive = hk.integrate(
            scenario.params, scenario.forcing, scenario.u0, t0, t_end, scenario.control
        )
        fixed = hk.integrate(
            scenario.params, scenario.forcing, scenario.u0, t0, t_end, hk.StepControl.fixed(h=1e-4)
        )
        band = 10.0 * (
            scenario.control.abs_tol + scenario.control.rel_tol * np.abs(fixed.final_state)
        )
        gap = np.abs(adaptive.final_state - fixed.final_state)
        assert np.all(gap <= band), f"{sid}: gap {gap} outside band {band}"


def test_monitors_silent_on_all_benchmarks():
    for sid, scenario in sorted(hk.SCENARIOS.items()):
        traj = hk.integrate(
            scenario.params, scenario.forcing, scenario.u0, *scenario.t_span, scenario.control
        )
        kinds = {e.kind for e in traj.events}
        assert "positivity_violation" not in kinds, sid
        assert "bound_violation" not in kinds, sid
        assert not traj.terminated, sid


def test_analytic_ceilings_hold_on_all_benchmarks():
    for sid, scenario in sorted(hk.SCENARIOS.items()):
        traj = hk.integrate(
            scenario.params, scenario.forcing, scenario.u0, *scenario.t_span, scenario.control
        )
        xy = traj.states[:, 0] + traj.states[:, 1]
        assert np.all(xy <= traj.bounds.M * (1.0 + 1e-6)), sid
        assert np.all(traj.states[:, 2] <= traj.bounds.z_ceiling * (1.0 + 1e-3)), sid


def test_step_floor_terminates(clearing_params, clearing_forcing):
    ctl = hk.StepControl.adaptive(
        abs_tol=1e-14, rel_tol=1e-14, h_init=0.25, h_min=0.25, h_max=0.25
    )
    traj = hk.integrate(clearing_params, clearing_forcing, (1.0, 1.0, 1.0), 0.0, 5.0, ctl)
    assert traj.terminated
    assert traj.events[-1].kind == "step_floor"


def test_dense_output_matches_fine_reference(clearing_params, clearing_forcing, tight_ctl):
    adaptive = hk.integrate(clearing_params, clearing_forcing, (1.0, 1.0, 1.0), 0.0, 5.0, tight_ctl)
    fixed = hk.integrate(
        clearing_params, clearing_forcing, (1.0, 1.0, 1.0), 0.0, 5.0, hk.StepControl.fixed(h=1e-4)
    )
    rng = np.random.default_rng(3)
    for idx in rng.integers(0, len(fixed.times), 50):
        t = float(fixed.times[idx])
        assert np.max(np.abs(adaptive.sample(t) - fixed.states[idx])) <= 1e-6


def test_sample_outside_range_raises(clearing_params, clearing_forcing, tight_ctl):
    traj = hk.integrate(clearing_params, clearing_forcing, (1.0, 1.0, 1.0), 0.0, 1.0, tight_ctl)
    with pytest.raises(ValueError):
        traj.sample(-0.5)
    with pytest.raises(ValueError):
        traj.sample(1.5)


def test_csv_round_trips_full_precision(tmp_path, clearing_params, clearing_forcing, tight_ctl):
    traj = hk.integrate(clearing_params, clearing_forcing, (1.0, 1.0, 1.0), 0.0, 1.0, tight_ctl)
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x,y,z"
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    assert np.array_equal(data[:, 0], traj.times)
    assert np.array_equal(data[:, 1:], traj.states)


def test_max_steps_truncates(clearing_params, clearing_forcing, tight_ctl):
    traj = hk.integrate(
        clearing_params, clearing_forcing, (1.0, 1.0, 1.0), 0.0, 15.0, tight_ctl, max_steps=20
    )
    assert traj.final_time < 15.0
    assert not traj.terminated  # truncation is not a numerical event


def test_terminal_event_kinds_are_final_only(clearing_params, clearing_forcing):
    traj = hk.integrate(
        clearing_params, clearing_forcing, (1.0, 1.0, 1.0), 0.0, 15.0, hk.StepControl.fixed(h=1.0)
    )
    for event in traj.events:
        if event.kind in TERMINAL_EVENT_KINDS:
            assert event.time == traj.final_time


def test_integrate_validates_inputs(clearing_params, clearing_forcing, tight_ctl):
    with pytest.raises(ValueError):
        hk.integrate(clearing_params, clearing_forcing, (1.0, 1.0, 1.0), 1.0, 1.0, tight_ctl)
    with pytest.raises(ValueError):
        hk.integrate(clearing_params, clearing_forcing, (-1.0, 1.0, 1.0), 0.0, 1.0, tight_ctl)


def test_step_control_validation():
    with pytest.raises(ValueError):
        hk.StepControl.fixed(h=-0.1)
    with pytest.raises(ValueError):
        hk.StepControl.adaptive(abs_tol=-1e-10)
    with pytest.raises(ValueError):
        hk.StepControl.adaptive(h_init=1e-3, h_min=1e-2)
    with pytest.raises(ValueError):
        hk.StepControl(mode="other")
