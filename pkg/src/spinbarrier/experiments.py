"""Decoupling experiments on the barrier-qubit and qubit-barrier-qubit chains.

Parameter defaults (J_XY = 1): omega_01 = 100, omega_0T = 1000, Omega = 40.
The barrier starts in |1> and every qubit in (|0> + |1>)/sqrt(2).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import curve_fit

from .errors import ConfigError
from .gates import GateReport, extract_gate
from .model import (
    ChainSpec,
    DecayConfig,
    DriveSchedule,
    build_collapse,
    build_static_hamiltonian,
    driven_hamiltonian,
)
from .solvers import (
    EvolutionResult,
    IntegratorConfig,
    TrajectoryConfig,
    evolve_lindblad,
    evolve_schrodinger,
    evolve_trajectories,
    evolve_unitary_static,
)
from .tensor import (
    LEVEL_0,
    LEVEL_1,
    LEVEL_T,
    embed,
    ket,
    partial_trace,
    product_state,
    projector,
    transition,
)

SCHEMA_VERSION = "1.0"
SCENARIOS = (
    "cw_decoupling",
    "pulsed_decoupling",
    "zeno",
    "jump_crosscheck",
    "three_site_gate",
    "laser_off_baseline",
)
TWO_SITE_SCENARIOS = ("cw_decoupling", "pulsed_decoupling", "zeno", "jump_crosscheck", "laser_off_baseline")

DEFAULT_OMEGA_01 = 100.0
DEFAULT_OMEGA_0T = 1000.0
DEFAULT_RABI = 40.0
DEFAULT_PULSE_DURATION = 0.1
DEFAULT_T_MAX = 10.0
PLUS = np.array([1.0, 1.0]) / math.sqrt(2)


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    chain: ChainSpec
    drive: DriveSchedule
    decay: DecayConfig
    integrator: IntegratorConfig
    trajectories: Optional[TrajectoryConfig] = None
    label: str = ""
    crosscheck_lindblad: bool = True

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}", key="run.scenario")


@dataclass
class FidelityTrace:
    times: np.ndarray
    fidelity: np.ndarray
    p0: np.ndarray
    p1: np.ndarray
    pT: np.ndarray
    stderr: dict = field(default_factory=dict)
    label: str = ""


@dataclass(frozen=True)
class DecayFit:
    k_fit: float
    k_paper: float
    residual: float
    failed: bool = False

    @property
    def ratio(self) -> float:
        return self.k_fit / self.k_paper


@dataclass
class ScenarioRun:
    config: ScenarioConfig
    trace: FidelityTrace
    result: EvolutionResult
    manifest: dict
    gate_report: Optional[GateReport] = None
    decay_fit: Optional[DecayFit] = None


def default_scenario(scenario: str, t_max: float = DEFAULT_T_MAX, **changes) -> ScenarioConfig:
    """Scenario with the standard parameter set."""
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}", key="run.scenario")
    chain = ChainSpec.barrier_qubit(DEFAULT_OMEGA_01, DEFAULT_OMEGA_0T)
    drive = DriveSchedule.continuous(DEFAULT_RABI)
    decay = DecayConfig(0.0)
    frame = "lab"
    trajectories = None
    if scenario == "pulsed_decoupling":
        frame = "rwa"
        drive = DriveSchedule.pulsed(2 * math.pi, DEFAULT_PULSE_DURATION, average_rabi=DEFAULT_RABI)
    elif scenario == "zeno":
        decay = DecayConfig(100 * DEFAULT_RABI)
    elif scenario == "jump_crosscheck":
        decay = DecayConfig(DEFAULT_RABI / 10)
        trajectories = TrajectoryConfig()
    elif scenario == "laser_off_baseline":
        drive = DriveSchedule.off()
    elif scenario == "three_site_gate":
        chain = ChainSpec.qubit_barrier_qubit(DEFAULT_OMEGA_01, DEFAULT_OMEGA_0T)
        drive = DriveSchedule.off()
    integrator = IntegratorConfig.default(frame, t_max, chain.omega_0T)
    cfg = ScenarioConfig(scenario, chain, drive, decay, integrator, trajectories, label=scenario)
    return replace(cfg, **changes) if changes else cfg


def initial_state(chain: ChainSpec) -> np.ndarray:
    """Barrier in |1>, every qubit in (|0> + |1>)/sqrt(2)."""
    factors = []
    for site, d in enumerate(chain.layout.site_dims):
        factors.append(ket(LEVEL_1, d) if site == chain.barrier_site else PLUS)
    return product_state(factors)


def ideal_state(omega_01: float, t: float) -> np.ndarray:
    """(|0> + exp(-i omega_01 t)|1>)/sqrt(2)."""
    return np.array([1.0, np.exp(-1j * omega_01 * t)]) / math.sqrt(2)


def free_precession_frequency(chain: ChainSpec, site: int) -> float:
    """E(|1>) - E(|0>) for a qubit site: -2 E_j with sigma^Z = diag(1, -1)."""
    return chain.level_energy_1(site) - chain.level_energy_0(site)


def _default_qubit(chain: ChainSpec) -> int:
    if not chain.qubit_sites:
        raise ValueError("chain has no qubit site")
    return chain.qubit_sites[0]


def decoupling_fidelity(result: EvolutionResult, chain: ChainSpec, qubit_site: Optional[int] = None,
                        label: str = "") -> FidelityTrace:
    """F(t) = <ideal(t)| rho_Q(t) |ideal(t)> plus barrier level populations."""
    q = _default_qubit(chain) if qubit_site is None else qubit_site
    omega = free_precession_frequency(chain, q)
    rhos = result.density_matrices()
    fid = np.empty(len(result.times))
    pops = np.zeros((3, len(result.times)))
    for i, (t, rho) in enumerate(zip(result.times, rhos)):
        rq = partial_trace(rho, q, chain.layout)
        ideal = ideal_state(omega, t)
        fid[i] = np.real(ideal.conj() @ rq @ ideal)
        if chain.barrier_site is not None:
            rb = partial_trace(rho, chain.barrier_site, chain.layout)
            pops[:, i] = np.real(np.diag(rb))
    stderr = {}
    for name in ("fidelity", "p0", "p1", "pT"):
        if name in result.observable_stderr:
            stderr[name] = result.observable_stderr[name]
    return FidelityTrace(result.times, fid, pops[0], pops[1], pops[2], stderr, label)


class QubitFidelityObservable:
    """Operator (ideal(t) projector on the qubit site) for per-trajectory statistics."""

    def __init__(self, chain: ChainSpec, site: int):
        self.layout = chain.layout
        self.site = site
        self.omega = free_precession_frequency(chain, site)

    def __call__(self, t):
        return embed(projector(ideal_state(self.omega, t)), self.site, self.layout)


class ConstantObservable:
    def __init__(self, op):
        self.op = op

    def __call__(self, t):
        return self.op


def trajectory_observables(chain: ChainSpec) -> dict:
    b = chain.barrier_site
    return {
        "fidelity": QubitFidelityObservable(chain, _default_qubit(chain)),
        "p0": ConstantObservable(embed(transition(LEVEL_0, LEVEL_0), b, chain.layout)),
        "p1": ConstantObservable(embed(transition(LEVEL_1, LEVEL_1), b, chain.layout)),
        "pT": ConstantObservable(embed(transition(LEVEL_T, LEVEL_T), b, chain.layout)),
    }


def _check_chain(cfg: ScenarioConfig):
    dims = cfg.chain.layout.site_dims
    if cfg.scenario in TWO_SITE_SCENARIOS:
        if len(dims) != 2 or cfg.chain.barrier_site is None:
            raise ConfigError(f"scenario {cfg.scenario} needs the two-site barrier+qubit chain", key="chain.sites")
    elif len(dims) != 3:
        raise ConfigError(f"scenario {cfg.scenario} needs the three-site chain", key="chain.sites")
    if cfg.scenario == "pulsed_decoupling" and cfg.drive.mode != "pulsed":
        raise ConfigError("pulsed_decoupling needs drive mode 'pulsed'", key="drive.mode")
    if cfg.scenario in ("zeno", "jump_crosscheck") and cfg.drive.mode == "pulsed":
        raise ConfigError(f"scenario {cfg.scenario} uses a continuous drive", key="drive.mode")
    if cfg.scenario == "jump_crosscheck" and cfg.trajectories is None:
        raise ConfigError("jump_crosscheck needs a trajectories section", key="trajectories")


def _solve(cfg: ScenarioConfig):
    chain, decay, integ = cfg.chain, cfg.decay, cfg.integrator
    psi0 = initial_state(chain)
    extra = {}
    if cfg.scenario in ("three_site_gate", "laser_off_baseline"):
        result = evolve_unitary_static(build_static_hamiltonian(chain), psi0, integ)
        return result, extra
    h = driven_hamiltonian(chain, cfg.drive, integ.frame)
    c = build_collapse(chain, decay)
    if cfg.scenario == "jump_crosscheck":
        result = evolve_trajectories(h, c, psi0, integ, cfg.trajectories, trajectory_observables(chain))
        if cfg.crosscheck_lindblad:
            ref = evolve_lindblad(h, c, projector(psi0), integ)
            extra["lindblad_max_deviation"] = float(np.max(np.abs(result.states - ref.states)))
            extra["lindblad_trace_drift"] = ref.diagnostics["trace_drift"]
        return result, extra
    return evolve_lindblad(h, c, projector(psi0), integ), extra


def run_scenario(cfg: ScenarioConfig) -> ScenarioRun:
    """Run one scenario and assemble its trace, result and manifest."""
    _check_chain(cfg)
    start = time.perf_counter()
    result, extra = _solve(cfg)
    gate = None
    if cfg.scenario == "three_site_gate":
        gate = extract_gate(cfg.chain, cfg.integrator)
    trace = decoupling_fidelity(result, cfg.chain, label=cfg.label or cfg.scenario)
    fit = None
    if cfg.scenario == "cw_decoupling" and cfg.decay.gamma > 0 and cfg.drive.mode == "continuous":
        fit = fit_decay_trend(trace, cfg.drive.rabi, cfg.decay.gamma)
    elapsed = time.perf_counter() - start

    t_max = cfg.integrator.t_max
    diagnostics = dict(result.diagnostics)
    diagnostics.update(extra)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "scenario": cfg.scenario,
        "label": cfg.label,
        "config": scenario_to_dict(cfg),
        "solver": diagnostics.pop("solver"),
        "seeds": _seeds(cfg),
        "drive_average_amplitude": cfg.drive.average_amplitude(0.0, t_max),
        "drive_average_intensity": cfg.drive.average_intensity(0.0, t_max),
        "diagnostics": diagnostics,
        "wall_clock_seconds": elapsed,
        "outputs": [],
    }
    if fit is not None:
        manifest["decay_fit"] = {"k_fit": fit.k_fit, "k_paper": fit.k_paper,
                                 "residual": fit.residual, "failed": fit.failed}
    if gate is not None:
        manifest["gate"] = {"fidelity": gate.gate_fidelity,
                            "fidelity_unframed": gate.gate_fidelity_unframed,
                            "revival_population": gate.barrier_revival_population,
                            "flagged": gate.flagged}
    return ScenarioRun(cfg, trace, result, manifest, gate, fit)


def _seeds(cfg: ScenarioConfig) -> dict:
    if cfg.scenario != "jump_crosscheck" or cfg.trajectories is None:
        return {}
    return {"master_seed": cfg.trajectories.master_seed, "n_traj": cfg.trajectories.n_traj,
            "derivation": "SeedSequence(master_seed, spawn_key=(trajectory_index,))"}


def _trend_rate(t, rate):
    with np.errstate(over="ignore"):  # trial rate < 0 during the search
        return 0.5 * (1 + np.exp(-rate * t))


def fit_decay_trend(trace: FidelityTrace, omega: float, gamma: float) -> DecayFit:
    """Least-squares fit of F(t) = (1 + exp(-t/k))/2 over the whole trace.

    The fit runs on the rate 1/k so a growing trace lands on k < 0 (flagged)
    instead of wandering off to k = inf.
    """
    if not gamma > 0:
        raise ValueError("decay fit needs gamma > 0")
    k_paper = 20 * omega / gamma
    t, f = np.asarray(trace.times), np.asarray(trace.fidelity)
    try:
        (rate,), _ = curve_fit(_trend_rate, t, f, p0=[1 / k_paper], maxfev=10000)
    except (RuntimeError, ValueError):
        return DecayFit(float("nan"), k_paper, float("nan"), failed=True)
    k = float(1 / rate) if rate != 0 else math.inf
    residual = float(np.sqrt(np.mean((_trend_rate(t, rate) - f) ** 2)))
    return DecayFit(k, k_paper, residual, failed=not (k > 0 and math.isfinite(k)))


def pulse_train_study(cfg: ScenarioConfig, areas=(math.pi, 2 * math.pi, 4 * math.pi)) -> dict:
    """Pulse trains of each area at the configured duration, all with the same
    time-averaged envelope as the configured train."""
    if cfg.drive.mode != "pulsed":
        raise ConfigError("pulse_train_study needs a pulsed drive", key="drive.mode")
    average = cfg.drive.pulse_area / cfg.drive.repetition_period
    traces = {}
    for area in areas:
        drive = DriveSchedule.pulsed(area, cfg.drive.pulse_duration, average_rabi=average,
                                     carrier=cfg.drive.carrier, offset=cfg.drive.pulse_offset,
                                     gate_windows=cfg.drive.gate_windows)
        run = run_scenario(replace(cfg, drive=drive, label=f"{area / math.pi:g}pi"))
        traces[area] = run.trace
    return traces


def default_pulse_study(t_max: float = DEFAULT_T_MAX, pulse_duration: float = 1e-3) -> ScenarioConfig:
    """Short pulses (small duty cycle) at the continuous-wave average amplitude."""
    cfg = default_scenario("pulsed_decoupling", t_max)
    drive = DriveSchedule.pulsed(2 * math.pi, pulse_duration, average_rabi=DEFAULT_RABI)
    return replace(cfg, drive=drive)


def fast_pulse_phase(area: float = 2 * math.pi, duration: float = 1e-5, delay: float = 0.05,
                     chain: Optional[ChainSpec] = None) -> dict:
    """Amplitude ratio, pulse vs free evolution, for each exchange component
    after a single fast pulse applied `delay` after preparing |1>_B |0>_q.

    The barrier-|0> component is the one the pulse cycles through |T>.
    """
    chain = chain or ChainSpec.barrier_qubit(DEFAULT_OMEGA_01, DEFAULT_OMEGA_0T)
    layout = chain.layout
    b, q = chain.barrier_site, _default_qubit(chain)
    levels = [0] * layout.n_sites
    levels[b], levels[q] = LEVEL_1, LEVEL_0
    start = product_state([ket(l, d) for l, d in zip(levels, layout.site_dims)])
    static = build_static_hamiltonian(chain, "rwa")
    n_delay = max(1, math.ceil(delay / 1e-3))
    pre = evolve_unitary_static(static, start, IntegratorConfig(delay / n_delay, delay, n_delay))
    psi = pre.states[-1]

    cfg = IntegratorConfig(duration, duration, 1, "rwa")
    pulse = DriveSchedule.pulsed(area, duration, period=2 * duration)
    kicked = evolve_schrodinger(driven_hamiltonian(chain, pulse, "rwa"), psi, cfg).states[-1]
    free = evolve_unitary_static(static, psi, cfg).states[-1]

    def index(barrier_level, qubit_level):
        lv = [0] * layout.n_sites
        lv[b], lv[q] = barrier_level, qubit_level
        return int(np.ravel_multi_index(tuple(lv), layout.site_dims))

    swapped = index(LEVEL_0, LEVEL_1)
    kept = index(LEVEL_1, LEVEL_0)
    return {
        "swapped_ratio": complex(kicked[swapped] / free[swapped]),
        "unswapped_ratio": complex(kicked[kept] / free[kept]),
        "swapped_amplitude": float(abs(free[swapped])),
    }


def three_site_decoupling(drive: Optional[DriveSchedule] = None, decay: Optional[DecayConfig] = None,
                          integrator: Optional[IntegratorConfig] = None, j_z: float = 0.0) -> dict:
    """Both qubits of the qubit-barrier-qubit chain under the barrier laser.
    Returns {site: FidelityTrace}."""
    chain = ChainSpec.qubit_barrier_qubit(DEFAULT_OMEGA_01, DEFAULT_OMEGA_0T, j_z=j_z)
    drive = drive or DriveSchedule.continuous(DEFAULT_RABI)
    decay = decay or DecayConfig(0.0)
    integrator = integrator or IntegratorConfig.default("rwa")
    h = driven_hamiltonian(chain, drive, integrator.frame)
    result = evolve_lindblad(h, build_collapse(chain, decay), projector(initial_state(chain)), integrator)
    return {q: decoupling_fidelity(result, chain, q, label=f"qubit {q}") for q in chain.qubit_sites}


def rms_distance(a: FidelityTrace, b: FidelityTrace) -> float:
    return float(np.sqrt(np.mean((np.asarray(a.fidelity) - np.asarray(b.fidelity)) ** 2)))


# -- plain-dict form of a scenario (manifests, round trips) ------------------

def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    ch, dr, de, ig = cfg.chain, cfg.drive, cfg.decay, cfg.integrator
    out = {
        "run": {"scenario": cfg.scenario, "label": cfg.label},
        "chain": {
            "sites": ch.layout.n_sites,
            "omega_01": ch.omega_01,
            "omega_0T": ch.omega_0T,
            "j_xy": ch.j_xy,
            "j_z": ch.j_z,
        },
        "drive": {
            "mode": dr.mode,
            "rabi": dr.rabi,
            "carrier": ch.omega_0T if dr.carrier is None else dr.carrier,
            "pulse_area": dr.pulse_area,
            "pulse_duration": dr.pulse_duration,
            "repetition_period": dr.repetition_period,
            "pulse_offset": dr.pulse_offset,
            "gate_windows": [list(w) for w in dr.gate_windows],
        },
        "decay": {"gamma": de.gamma},
        "integrator": {
            "frame": ig.frame,
            "dt": ig.dt,
            "t_max": ig.t_max,
            "snapshot_stride": ig.snapshot_stride,
            "max_drive_phase": ig.max_drive_phase,
            "max_carrier_phase": ig.max_carrier_phase,
            "max_decay_step": ig.max_decay_step,
        },
    }
    if cfg.trajectories is not None:
        tr = cfg.trajectories
        out["trajectories"] = {
            "n_traj": tr.n_traj,
            "master_seed": tr.master_seed,
            "chunk_size": tr.chunk_size,
            "workers": tr.workers,
            "crosscheck_lindblad": cfg.crosscheck_lindblad,
        }
    return out


def scenario_from_dict(d: dict) -> ScenarioConfig:
    ch, dr, ig = d["chain"], d["drive"], d["integrator"]
    sites = int(ch["sites"])
    if sites == 2:
        chain = ChainSpec.barrier_qubit(ch["omega_01"], ch["omega_0T"], ch["j_xy"], ch["j_z"])
    elif sites == 3:
        chain = ChainSpec.qubit_barrier_qubit(ch["omega_01"], ch["omega_0T"], ch["j_xy"], ch["j_z"])
    else:
        raise ConfigError(f"chain.sites must be 2 or 3, got {sites}", key="chain.sites")
    carrier = dr.get("carrier")
    if carrier is not None and carrier == chain.omega_0T:
        carrier = None
    drive = DriveSchedule(
        dr["mode"], dr["rabi"], carrier, dr["pulse_area"], dr["pulse_duration"],
        dr["repetition_period"], dr.get("pulse_offset", 0.0),
        tuple(tuple(w) for w in dr.get("gate_windows", ())),
    )
    integ = IntegratorConfig(ig["dt"], ig["t_max"], int(ig["snapshot_stride"]), ig["frame"],
                             ig["max_drive_phase"], ig["max_carrier_phase"], ig["max_decay_step"])
    trajectories = None
    crosscheck = True
    if "trajectories" in d:
        tr = d["trajectories"]
        trajectories = TrajectoryConfig(int(tr["n_traj"]), int(tr["master_seed"]),
                                        int(tr["chunk_size"]), int(tr["workers"]))
        crosscheck = bool(tr.get("crosscheck_lindblad", True))
    run = d["run"]
    return ScenarioConfig(run["scenario"], chain, drive, DecayConfig(d["decay"]["gamma"]), integ,
                          trajectories, run.get("label", ""), crosscheck)
