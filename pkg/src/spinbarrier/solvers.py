"""Time evolution: exact static propagation, RK4 Schrodinger and Lindblad
integration, and a Monte Carlo wave-function trajectory ensemble.

The RK4 integrators work in the interaction picture of the static
Hamiltonian, whose eigendecomposition is exact, so only the drive and the
dissipator are integrated numerically. Each base step of length `dt` is split
at drive-envelope discontinuities and subdivided when the drive or the decay
rate would otherwise advance too far in one step.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from .errors import DriftError
from .model import FRAMES, DrivenHamiltonian
from .tensor import check_density_matrix, check_state, matrix_exp, projector

log = logging.getLogger(__name__)

NORM_DRIFT_LIMIT = 1e-4
RWA_MAX_DT = 0.01
LAB_STEPS_PER_CARRIER_PERIOD = 20
_TINY = 1e-13


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    t_max: float = 10.0
    snapshot_stride: int = 20
    frame: str = "rwa"
    # substep limits: |drive coupling| * h, lab carrier phase omega * h, gamma * h
    max_drive_phase: float = 0.02
    max_carrier_phase: float = 0.16
    max_decay_step: float = 0.25

    def __post_init__(self):
        if self.frame not in FRAMES:
            raise ValueError(f"frame must be one of {FRAMES}, got {self.frame!r}")
        if not self.dt > 0 or not self.t_max > 0:
            raise ValueError("dt and t_max must be positive")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be a positive integer")
        n = self.t_max / self.dt
        if abs(n - round(n)) > 1e-6 * max(1.0, n):
            raise ValueError(f"t_max {self.t_max} is not a whole number of steps dt={self.dt}")
        if self.n_steps % self.snapshot_stride:
            raise ValueError("the number of steps must be a multiple of snapshot_stride")
        if min(self.max_drive_phase, self.max_carrier_phase, self.max_decay_step) <= 0:
            raise ValueError("substep limits must be positive")

    @classmethod
    def default(cls, frame: str = "rwa", t_max: float = 10.0, omega_0T: float = 1000.0,
                n_snapshots: int = 500):
        """Largest admissible step giving `n_snapshots` equal intervals."""
        if frame == "lab":
            dt_max = max_lab_dt(omega_0T)
        else:
            dt_max = 1e-3
        stride = math.ceil(t_max / (n_snapshots * dt_max) - 1e-9)
        return cls(t_max / (n_snapshots * stride), t_max, stride, frame)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))

    @property
    def times(self) -> np.ndarray:
        n_snap = self.n_steps // self.snapshot_stride
        return np.arange(n_snap + 1) * (self.snapshot_stride * self.dt)

    def check(self, omega_0T: Optional[float] = None) -> None:
        """Enforce the step-size ceiling of the frame."""
        if self.frame == "rwa":
            if self.dt > RWA_MAX_DT * (1 + 1e-12):
                raise ValueError(f"rotating-frame dt must be <= {RWA_MAX_DT}, got {self.dt}")
        elif omega_0T is not None and self.dt > max_lab_dt(omega_0T) * (1 + 1e-12):
            raise ValueError(
                f"lab-frame dt {self.dt} does not resolve the carrier: need <= {max_lab_dt(omega_0T):.6g}"
            )

    def halved(self) -> "IntegratorConfig":
        return IntegratorConfig(self.dt / 2, self.t_max, self.snapshot_stride * 2, self.frame,
                                self.max_drive_phase, self.max_carrier_phase, self.max_decay_step)


def max_lab_dt(omega_0T: float) -> float:
    return 2 * math.pi / omega_0T / LAB_STEPS_PER_CARRIER_PERIOD


@dataclass(frozen=True)
class TrajectoryConfig:
    n_traj: int = 5000
    master_seed: int = 20040901
    chunk_size: int = 500
    workers: int = 1

    def __post_init__(self):
        if self.n_traj < 1 or self.chunk_size < 1 or self.workers < 1:
            raise ValueError("n_traj, chunk_size and workers must be positive")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")

    def rng(self, index: int) -> np.random.Generator:
        """Independent stream for one trajectory, fixed by (master_seed, index)."""
        return np.random.default_rng(np.random.SeedSequence(self.master_seed, spawn_key=(index,)))


@dataclass
class EvolutionResult:
    times: np.ndarray
    states: np.ndarray  # (n, d) state vectors or (n, d, d) density matrices
    kind: str  # "pure" or "mixed"
    observables: dict = field(default_factory=dict)
    observable_stderr: dict = field(default_factory=dict)
    state_stderr: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    def density_matrices(self) -> np.ndarray:
        if self.kind == "mixed":
            return self.states
        return np.einsum("ti,tj->tij", self.states, self.states.conj())


def as_source(h) -> DrivenHamiltonian:
    if isinstance(h, DrivenHamiltonian):
        return h
    return DrivenHamiltonian(np.asarray(h, dtype=complex))


class _InteractionFrame:
    """Eigenbasis of the static Hamiltonian; carries operators into the
    interaction picture by elementwise phases."""

    def __init__(self, source: DrivenHamiltonian, collapse=None):
        self.source = source
        energies, vecs = np.linalg.eigh(source.static)
        self.energies = energies
        self.vecs = vecs
        self.freq = energies[:, None] - energies[None, :]
        self.drive = None
        self.drive_norm = 0.0
        if source.driven:
            self.drive = vecs.conj().T @ source.drive_op @ vecs
            self.drive_norm = float(np.linalg.norm(source.drive_op, 2))
        self.collapse = None
        self.decay_rate = 0.0
        if collapse is not None and np.any(collapse):
            c = vecs.conj().T @ np.asarray(collapse, dtype=complex) @ vecs
            self.collapse = c
            self.loss = c.conj().T @ c
            self.decay_rate = float(np.linalg.norm(self.loss, 2))

    def phases(self, t):
        return np.exp(1j * self.freq * t)

    def state_in(self, psi, t):
        return np.exp(1j * self.energies * t) * (psi @ self.vecs.conj())

    def state_out(self, c, t):
        return (np.exp(-1j * self.energies * t) * c) @ self.vecs.T

    def rho_in(self, rho, t):
        return self.phases(t) * (self.vecs.conj().T @ rho @ self.vecs)

    def rho_out(self, rho_i, t):
        return self.vecs @ (rho_i * self.phases(-t)) @ self.vecs.conj().T

    def pieces(self, t0, t1, cfg: IntegratorConfig):
        """Yield (start, substep, count, envelope) covering [t0, t1]."""
        edges = [t0, *(p for p in self.source.breakpoints(t0, t1) if t0 + _TINY < p < t1 - _TINY), t1]
        for a, b in zip(edges, edges[1:]):
            width = b - a
            env = self.source.envelope(0.5 * (a + b))
            h_max = cfg.dt
            coupling = abs(env) * self.drive_norm
            if coupling:
                h_max = min(h_max, cfg.max_drive_phase / coupling)
                if self.source.frame == "lab" and self.source.carrier_omega:
                    h_max = min(h_max, cfg.max_carrier_phase / abs(self.source.carrier_omega))
            if self.decay_rate:
                h_max = min(h_max, cfg.max_decay_step / self.decay_rate)
            n = max(1, math.ceil(width / h_max - 1e-9))
            yield a, width / n, n, env


def _rk4(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + (h / 2) * k1)
    k3 = f(t + h / 2, y + (h / 2) * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def _check_lab_dt(source: DrivenHamiltonian, cfg: IntegratorConfig):
    if source.frame != cfg.frame and source.driven:
        raise ValueError(f"Hamiltonian frame {source.frame!r} differs from integrator frame {cfg.frame!r}")
    cfg.check(source.carrier_omega if (source.driven and cfg.frame == "lab") else None)


def evolve_unitary_static(h, psi0, cfg: IntegratorConfig) -> EvolutionResult:
    """Exact snapshots exp(-i H t) psi0 for a time-independent Hamiltonian."""
    h = as_source(h).static
    psi0 = check_state(psi0)
    times = cfg.times
    states = np.array([matrix_exp(h, t) @ psi0 for t in times])
    drift = float(np.max(np.abs(np.linalg.norm(states, axis=1) - 1)))
    return EvolutionResult(times, states, "pure", diagnostics={"solver": "unitary_static", "norm_drift": drift})


def evolve_schrodinger(h_of_t, psi0, cfg: IntegratorConfig) -> EvolutionResult:
    """Fixed-step RK4 for i d/dt psi = H(t) psi."""
    source = as_source(h_of_t)
    _check_lab_dt(source, cfg)
    psi0 = check_state(psi0)
    frame = _InteractionFrame(source)
    c = frame.state_in(psi0, 0.0)

    def rhs(env):
        def f(t, y):
            a = (env * source.carrier(t)) * (frame.drive * frame.phases(t))
            return -1j * (a @ y)
        return f

    times = cfg.times
    states = [psi0.copy()]
    t = 0.0
    for step in range(cfg.n_steps):
        t_next = (step + 1) * cfg.dt
        for start, h, n, env in frame.pieces(t, t_next, cfg):
            if env == 0.0 or frame.drive is None:
                continue
            f = rhs(env)
            for k in range(n):
                c = _rk4(f, start + k * h, c, h)
        t = t_next
        if (step + 1) % cfg.snapshot_stride == 0:
            states.append(frame.state_out(c, times[len(states)]))
    states = np.array(states)
    drift = float(np.max(np.abs(np.linalg.norm(states, axis=1) - 1)))
    if not drift <= NORM_DRIFT_LIMIT:  # also catches nan from a blown-up step
        raise DriftError(f"norm drift {drift:.3g} exceeds {NORM_DRIFT_LIMIT:g}; reduce dt")
    return EvolutionResult(times, states, "pure", diagnostics={"solver": "rk4_schrodinger", "norm_drift": drift})


def evolve_lindblad(h_of_t, c, rho0, cfg: IntegratorConfig) -> EvolutionResult:
    """Fixed-step RK4 for the master equation with a single collapse operator c
    (which already carries the sqrt(gamma) factor)."""
    source = as_source(h_of_t)
    _check_lab_dt(source, cfg)
    rho0 = check_density_matrix(rho0)
    frame = _InteractionFrame(source, c)
    r = frame.rho_in(rho0, 0.0)
    has_decay = frame.collapse is not None

    def rhs(env):
        def f(t, y):
            ph = frame.phases(t)
            out = np.zeros_like(y)
            if env and frame.drive is not None:
                a = (env * source.carrier(t)) * (frame.drive * ph)
                out = -1j * (a @ y - y @ a)
            if has_decay:
                ct = frame.collapse * ph
                lt = frame.loss * ph
                out = out + ct @ y @ ct.conj().T - 0.5 * (lt @ y + y @ lt)
            return out
        return f

    times = cfg.times
    snaps = [rho0.copy()]
    t = 0.0
    for step in range(cfg.n_steps):
        t_next = (step + 1) * cfg.dt
        for start, h, n, env in frame.pieces(t, t_next, cfg):
            if (env == 0.0 or frame.drive is None) and not has_decay:
                continue
            f = rhs(env)
            for k in range(n):
                r = _rk4(f, start + k * h, r, h)
                r = 0.5 * (r + r.conj().T)
        t = t_next
        if (step + 1) % cfg.snapshot_stride == 0:
            snaps.append(frame.rho_out(r, times[len(snaps)]))
    snaps = np.array(snaps)
    traces = np.real(np.einsum("tii->t", snaps))
    drift = float(np.max(np.abs(traces - 1)))
    min_eig = float(min(np.linalg.eigvalsh(s).min() for s in snaps))
    if not drift <= NORM_DRIFT_LIMIT:  # also catches nan from a blown-up step
        raise DriftError(f"trace drift {drift:.3g} exceeds {NORM_DRIFT_LIMIT:g}; reduce dt")
    if min_eig < -1e-6:
        log.warning("density matrix eigenvalue %.3g below -1e-6", min_eig)
    return EvolutionResult(times, snaps, "mixed",
                           diagnostics={"solver": "rk4_lindblad", "trace_drift": drift, "min_eigenvalue": min_eig})


@dataclass
class _ChunkSums:
    rho: np.ndarray
    rho_sq: np.ndarray  # sums of Re^2 and Im^2 per element, stacked
    obs: dict
    obs_sq: dict
    jumps: int


def _run_chunk(source, collapse, psi0, cfg, tcfg, indices, observables):
    frame = _InteractionFrame(source, collapse)
    n = len(indices)
    rngs = [tcfg.rng(i) for i in indices]
    c = np.tile(frame.state_in(psi0, 0.0), (n, 1))
    has_decay = frame.collapse is not None
    thresholds = np.array([g.random() for g in rngs]) if has_decay else None
    times = cfg.times
    d = len(psi0)
    n_snap = len(times)
    rho = np.zeros((n_snap, d, d), dtype=complex)
    rho_sq = np.zeros((n_snap, 2, d, d))
    obs = {k: np.zeros(n_snap) for k in observables}
    obs_sq = {k: np.zeros(n_snap) for k in observables}
    jumps = 0

    def record(slot, t):
        psi = frame.state_out(c, t)
        psi = psi / np.linalg.norm(psi, axis=1, keepdims=True)
        outer = psi[:, :, None] * psi[:, None, :].conj()
        rho[slot] = outer.sum(axis=0)
        rho_sq[slot, 0] = (outer.real**2).sum(axis=0)
        rho_sq[slot, 1] = (outer.imag**2).sum(axis=0)
        for name, op_of_t in observables.items():
            vals = np.real(np.einsum("ni,ij,nj->n", psi.conj(), op_of_t(t), psi))
            obs[name][slot] = vals.sum()
            obs_sq[name][slot] = (vals**2).sum()

    def rhs(env):
        def f(t, y):
            ph = frame.phases(t)
            gen = np.zeros((d, d), dtype=complex)
            if env and frame.drive is not None:
                gen = (-1j * env * source.carrier(t)) * (frame.drive * ph)
            if has_decay:
                gen = gen - 0.5 * (frame.loss * ph)
            return y @ gen.T
        return f

    record(0, 0.0)
    slot = 1
    t = 0.0
    for step in range(cfg.n_steps):
        t_next = (step + 1) * cfg.dt
        for start, h, m, env in frame.pieces(t, t_next, cfg):
            if (env == 0.0 or frame.drive is None) and not has_decay:
                continue
            f = rhs(env)
            for k in range(m):
                t_end = start + (k + 1) * h
                c = _rk4(f, start + k * h, c, h)
                if has_decay:
                    norms = np.einsum("ni,ni->n", c.conj(), c).real
                    for i in np.flatnonzero(norms < thresholds):
                        ct = frame.collapse * frame.phases(t_end)
                        jumped = ct @ c[i]
                        nrm = np.linalg.norm(jumped)
                        if nrm > 0:
                            c[i] = jumped / nrm
                            jumps += 1
                        else:
                            c[i] = c[i] / math.sqrt(norms[i])
                        thresholds[i] = rngs[i].random()
        t = t_next
        if (step + 1) % cfg.snapshot_stride == 0:
            record(slot, times[slot])
            slot += 1
    return _ChunkSums(rho, rho_sq, obs, obs_sq, jumps)


def _chunk_job(args):
    return _run_chunk(*args)


def evolve_trajectories(h_of_t, c, psi0, cfg: IntegratorConfig, tcfg: TrajectoryConfig,
                        observables: Optional[Mapping[str, Callable[[float], np.ndarray]]] = None
                        ) -> EvolutionResult:
    """Monte Carlo wave-function ensemble.

    Each trajectory follows H - (i/2) C^dag C until its squared norm falls
    below a uniform random threshold, then jumps (psi -> C psi, renormalised)
    and draws a new threshold. Returns the ensemble density matrix at every
    snapshot with per-element standard errors, plus the mean and standard
    error of each named observable (a callable t -> Hermitian operator).
    """
    source = as_source(h_of_t)
    _check_lab_dt(source, cfg)
    psi0 = check_state(psi0)
    observables = dict(observables or {})
    chunks = [
        range(lo, min(lo + tcfg.chunk_size, tcfg.n_traj))
        for lo in range(0, tcfg.n_traj, tcfg.chunk_size)
    ]
    jobs = [(source, c, psi0, cfg, tcfg, list(ch), observables) for ch in chunks]
    if tcfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=tcfg.workers) as pool:
            parts = list(pool.map(_chunk_job, jobs))
    else:
        parts = [_chunk_job(job) for job in jobs]

    # ordered reduction over chunks: independent of completion order
    n = tcfg.n_traj
    rho = sum((p.rho for p in parts[1:]), parts[0].rho.copy()) / n
    sq = sum((p.rho_sq for p in parts[1:]), parts[0].rho_sq.copy()) / n
    denom = max(n - 1, 1)
    var_re = np.clip(sq[:, 0] - rho.real**2, 0, None) * n / denom
    var_im = np.clip(sq[:, 1] - rho.imag**2, 0, None) * n / denom
    rho_se = np.sqrt((var_re + var_im) / n)
    means, errs = {}, {}
    for name in observables:
        s = sum((p.obs[name] for p in parts[1:]), parts[0].obs[name].copy()) / n
        s2 = sum((p.obs_sq[name] for p in parts[1:]), parts[0].obs_sq[name].copy()) / n
        means[name] = s
        errs[name] = np.sqrt(np.clip(s2 - s**2, 0, None) * n / denom / n)
    jumps = sum(p.jumps for p in parts)
    traces = np.real(np.einsum("tii->t", rho))
    return EvolutionResult(
        cfg.times, rho, "mixed", means, errs, rho_se,
        diagnostics={"solver": "mcwf", "n_traj": n, "master_seed": tcfg.master_seed,
                     "jumps": int(jumps), "trace_drift": float(np.max(np.abs(traces - 1)))},
    )


def pure_to_density(psi) -> np.ndarray:
    return projector(psi)
