import math
from dataclasses import replace

import numpy as np
import pytest

from conftest import CW_GAMMAS
from spinbarrier.errors import ConfigError
from spinbarrier.experiments import (
    DEFAULT_RABI,
    SCENARIOS,
    FidelityTrace,
    default_pulse_study,
    default_scenario,
    fast_pulse_phase,
    fit_decay_trend,
    free_precession_frequency,
    ideal_state,
    pulse_train_study,
    rms_distance,
    run_scenario,
    scenario_from_dict,
    scenario_to_dict,
    three_site_decoupling,
)
from spinbarrier.model import ChainSpec, DecayConfig, DriveSchedule
from spinbarrier.solvers import IntegratorConfig, TrajectoryConfig

SQ2 = math.sqrt(2)


def test_ideal_state_examples():
    np.testing.assert_allclose(ideal_state(100.0, 0.0), [1 / SQ2, 1 / SQ2], atol=1e-15)
    np.testing.assert_allclose(ideal_state(100.0, math.pi / 100), [1 / SQ2, -1 / SQ2], atol=1e-15)
    np.testing.assert_allclose(ideal_state(100.0, 2 * math.pi / 100), [1 / SQ2, 1 / SQ2], atol=1e-15)


def test_free_precession_is_signed_splitting():
    chain = ChainSpec.barrier_qubit(omega_01=100.0)
    # sigma^Z |0> = +|0>, so |1> lies omega_01 below |0>
    assert free_precession_frequency(chain, 1) == pytest.approx(-100.0)


def test_zero_coupling_keeps_fidelity_one():
    chain = ChainSpec.barrier_qubit(j_xy=0.0)
    off = run_scenario(default_scenario("laser_off_baseline", chain=chain))
    assert np.max(np.abs(off.trace.fidelity - 1)) < 1e-9
    cw = default_scenario("cw_decoupling", t_max=2.0, chain=chain,
                          integrator=IntegratorConfig.default("rwa", 2.0))
    assert np.max(np.abs(run_scenario(cw).trace.fidelity - 1)) < 1e-9


def test_baseline_matches_swap_oracle(baseline_run):
    # |10> and |01> swap with amplitude cos(2 J t); |11> is stationary
    t = baseline_run.trace.times
    np.testing.assert_allclose(baseline_run.trace.fidelity, 0.5 * (1 + np.cos(2 * t)), atol=1e-9)


def test_baseline_first_minimum(baseline_run):
    t, f = baseline_run.trace.times, baseline_run.trace.fidelity
    i = next(k for k in range(1, len(f) - 1) if f[k] <= f[k - 1] and f[k] < f[k + 1])
    assert t[i] == pytest.approx(math.pi / 4, rel=0.02)
    assert f[i] == pytest.approx(0.5, abs=0.02)


def test_cw_drive_keeps_fidelity(cw_runs):
    assert np.min(cw_runs[0.0].trace.fidelity) >= 0.95


def test_laser_off_equals_cw_with_drive_off():
    off = run_scenario(default_scenario("laser_off_baseline", t_max=2.0))
    cw = run_scenario(default_scenario("cw_decoupling", t_max=2.0, drive=DriveSchedule.off()))
    np.testing.assert_array_equal(off.trace.times, cw.trace.times)
    np.testing.assert_allclose(off.trace.fidelity, cw.trace.fidelity, atol=1e-6)
    np.testing.assert_allclose(off.result.density_matrices(), cw.result.states, atol=1e-6)


def test_scenario_chain_mismatch_raises():
    three = ChainSpec.qubit_barrier_qubit()
    with pytest.raises(ConfigError):
        run_scenario(default_scenario("cw_decoupling", t_max=0.1, chain=three))
    with pytest.raises(ConfigError):
        run_scenario(default_scenario("three_site_gate", t_max=0.1, chain=ChainSpec.barrier_qubit()))
    with pytest.raises(ConfigError):
        run_scenario(default_scenario("pulsed_decoupling", t_max=0.1, drive=DriveSchedule.continuous(40.0)))
    with pytest.raises(ConfigError):
        run_scenario(default_scenario("jump_crosscheck", t_max=0.1, trajectories=None))
    with pytest.raises(ConfigError):
        default_scenario("strobe")


def test_manifest_contents(cw_runs):
    m = cw_runs[DEFAULT_RABI].manifest
    for key in ("schema_version", "config", "solver", "seeds", "drive_average_amplitude",
                "drive_average_intensity", "diagnostics", "wall_clock_seconds", "decay_fit"):
        assert key in m
    assert m["drive_average_amplitude"] == pytest.approx(DEFAULT_RABI)
    assert m["diagnostics"]["trace_drift"] < 1e-6


def test_three_site_gate_scenario():
    run = run_scenario(default_scenario("three_site_gate", t_max=2.0))
    assert run.gate_report.barrier_revival_population > 1 - 1e-6
    assert run.gate_report.gate_fidelity > 1 - 1e-5
    assert run.manifest["gate"]["flagged"] is False


# -- decay trend ------------------------------------------------------------

def synthetic_trace(k, sign=-1):
    t = np.linspace(0, 10, 501)
    f = 0.5 * (1 + np.exp(sign * t / k))
    return FidelityTrace(t, f, 0 * t, 0 * t + 1, 0 * t)


def test_fit_recovers_synthetic_k():
    fit = fit_decay_trend(synthetic_trace(5.0), 40.0, 4.0)
    assert fit.k_fit == pytest.approx(5.0, abs=1e-6)
    assert fit.k_paper == pytest.approx(200.0)
    assert fit.residual < 1e-9 and not fit.failed


def test_fit_flags_non_positive_k():
    assert fit_decay_trend(synthetic_trace(5.0, sign=1), 40.0, 4.0).failed


def test_fit_needs_positive_gamma():
    with pytest.raises(ValueError):
        fit_decay_trend(synthetic_trace(5.0), 40.0, 0.0)


@pytest.mark.parametrize("gamma", [DEFAULT_RABI / 10, DEFAULT_RABI])
def test_cw_decay_fit_within_factor_two(cw_runs, gamma):
    fit = cw_runs[gamma].decay_fit
    assert not fit.failed
    assert 0.5 <= fit.ratio <= 2.0


# -- pulses -------------------------------------------------------------------

@pytest.fixture(scope="module")
def pulse_traces():
    return pulse_train_study(default_pulse_study())


def test_four_pi_train_has_no_effect(pulse_traces, baseline_run):
    dev = np.max(np.abs(pulse_traces[4 * math.pi].fidelity - baseline_run.trace.fidelity))
    assert dev <= 0.05


@pytest.mark.parametrize("turns", [1, 2])
def test_pi_and_two_pi_trains_keep_fidelity(pulse_traces, turns):
    assert np.min(pulse_traces[turns * math.pi].fidelity) >= 0.9


def test_trains_share_average_amplitude():
    cfg = default_pulse_study(t_max=1.0)
    avg = cfg.drive.pulse_area / cfg.drive.repetition_period
    assert avg == pytest.approx(DEFAULT_RABI)
    for area in (math.pi, 4 * math.pi):
        d = DriveSchedule.pulsed(area, cfg.drive.pulse_duration, average_rabi=avg)
        assert d.pulse_area / d.repetition_period == pytest.approx(DEFAULT_RABI)


def test_pulse_train_study_needs_pulsed_drive():
    with pytest.raises(ConfigError):
        pulse_train_study(default_scenario("cw_decoupling", t_max=0.1))


def test_fast_two_pi_pulse_phase():
    r = fast_pulse_phase()
    assert abs(r["swapped_ratio"] - (-1)) < 1e-3
    # the barrier-|1> component is not driven
    assert abs(r["unswapped_ratio"] - 1) < 1e-3
    assert r["swapped_amplitude"] > 0.05


def test_fast_four_pi_pulse_is_identity():
    assert abs(fast_pulse_phase(area=4 * math.pi)["swapped_ratio"] - 1) < 1e-3


def test_pi_pulse_train_suppresses_swap(pulse_traces, baseline_run):
    # barrier-|0> amplitude parked in |T> cannot swap back into the qubit
    assert np.min(pulse_traces[math.pi].fidelity) > np.min(baseline_run.trace.fidelity) + 0.5


# -- three-site chain ------------------------------------------------------------

def test_three_site_decoupling_both_qubits():
    traces = three_site_decoupling()
    assert set(traces) == {0, 2}
    for trace in traces.values():
        assert np.min(trace.fidelity) >= 0.95
    off = three_site_decoupling(drive=DriveSchedule.off())
    assert min(np.min(t.fidelity) for t in off.values()) < 0.6


# -- Zeno regime -------------------------------------------------------------------

ZENO_FACTORS = (1, 3, 10, 30, 100)


@pytest.fixture(scope="module")
def zeno_distances():
    base = run_scenario(default_scenario("laser_off_baseline", t_max=5.0,
                                         integrator=IntegratorConfig.default("rwa", 5.0)))
    out = []
    for factor in ZENO_FACTORS:
        cfg = default_scenario("zeno", t_max=5.0, decay=DecayConfig(factor * DEFAULT_RABI),
                               integrator=IntegratorConfig.default("rwa", 5.0))
        out.append(rms_distance(run_scenario(cfg).trace, base.trace))
    return out


def test_zeno_crossover_exists(zeno_distances):
    d = zeno_distances
    assert any(d[i] > d[i - 1] and d[i] >= d[i + 1] for i in range(1, len(d) - 1))


def test_zeno_distance_shrinks_with_gamma(zeno_distances):
    assert all(b < a for a, b in zip(zeno_distances, zeno_distances[1:]))


def test_zeno_scenario_matches_baseline(baseline_run):
    run = run_scenario(default_scenario("zeno"))
    assert np.max(np.abs(run.trace.fidelity - baseline_run.trace.fidelity)) <= 0.05


# -- trace invariants and orderings ----------------------------------------------------

def test_trace_invariants(cw_runs, baseline_run):
    for run in [baseline_run, *cw_runs.values()]:
        tr = run.trace
        assert np.all(tr.fidelity >= 0) and np.all(tr.fidelity <= 1 + 1e-9)
        assert tr.fidelity[0] == pytest.approx(1.0, abs=1e-12)
        assert np.max(np.abs(tr.p0 + tr.p1 + tr.pT - 1)) < 1e-6


def test_monotone_damage_ordering(cw_runs):
    fids = [cw_runs[g].trace.fidelity for g in CW_GAMMAS]
    for lower, higher in zip(fids, fids[1:]):
        assert np.all(higher <= lower + 0.01)


def test_jump_and_lindblad_agree_in_fidelity():
    n = 200
    integ = IntegratorConfig.default("rwa", 2.0, n_snapshots=100)
    cfg = default_scenario("jump_crosscheck", t_max=2.0, integrator=integ,
                           trajectories=TrajectoryConfig(n_traj=n, master_seed=7))
    jump = run_scenario(cfg)
    lind = run_scenario(replace(cfg, scenario="cw_decoupling"))
    dev = np.max(np.abs(jump.trace.fidelity - lind.trace.fidelity))
    assert dev <= max(0.02, 5 / math.sqrt(n))
    assert "fidelity" in jump.trace.stderr


@pytest.mark.parametrize("scenario", SCENARIOS)
def test_scenario_dict_round_trip(scenario):
    cfg = default_scenario(scenario)
    assert scenario_from_dict(scenario_to_dict(cfg)) == cfg
