"""Chain Hamiltonians, laser drive and barrier decay.

Energies are in units of the exchange coupling J_XY and times in 1/J_XY
(hbar = 1). Spin operators are Pauli matrices, so sigma^Z|0> = +|0>.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .tensor import (
    LEVEL_0,
    LEVEL_T,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    SiteLayout,
    embed,
    transition,
)

FRAMES = ("lab", "rwa")
DRIVE_MODES = ("off", "continuous", "pulsed")


@dataclass(frozen=True)
class ChainSpec:
    """A 1-3 site chain with at most one three-level barrier site."""

    layout: SiteLayout
    zeeman: tuple[float, ...]
    j_xy: float = 1.0
    j_z: float = 0.0
    barrier_site: Optional[int] = None
    omega_0T: float = 1000.0

    def __post_init__(self):
        if not isinstance(self.layout, SiteLayout):
            object.__setattr__(self, "layout", SiteLayout(tuple(self.layout)))
        object.__setattr__(self, "zeeman", tuple(float(e) for e in self.zeeman))
        n = self.layout.n_sites
        if len(self.zeeman) != n:
            raise ValueError(f"need {n} Zeeman energies, got {len(self.zeeman)}")
        if not all(math.isfinite(e) for e in self.zeeman):
            raise ValueError("Zeeman energies must be finite")
        if not (math.isfinite(self.j_xy) and self.j_xy >= 0):
            raise ValueError(f"j_xy must be finite and non-negative, got {self.j_xy}")
        if not math.isfinite(self.j_z):
            raise ValueError("j_z must be finite")
        if not (math.isfinite(self.omega_0T) and self.omega_0T > 0):
            raise ValueError(f"omega_0T must be positive, got {self.omega_0T}")
        three_level = [i for i, d in enumerate(self.layout.site_dims) if d == 3]
        if self.barrier_site is None:
            if three_level:
                raise ValueError("three-level site present but barrier_site not set")
            if n > 1:
                raise ValueError("chains of 2 or 3 sites need exactly one barrier site")
        else:
            site = self.layout.check_site(self.barrier_site)
            if three_level != [site]:
                raise ValueError("the barrier must be the only three-level site")
            if n == 3 and site != 1:
                raise ValueError("a 3-site chain must have its barrier in the center")

    @classmethod
    def single_barrier(cls, omega_01=100.0, omega_0T=1000.0, **kw):
        return cls(SiteLayout((3,)), (omega_01 / 2,), barrier_site=0, omega_0T=omega_0T, **kw)

    @classmethod
    def single_qubit(cls, omega_01=100.0, **kw):
        return cls(SiteLayout((2,)), (omega_01 / 2,), **kw)

    @classmethod
    def barrier_qubit(cls, omega_01=100.0, omega_0T=1000.0, j_xy=1.0, j_z=0.0):
        """Barrier on site 0, qubit on site 1; both share the Zeeman splitting."""
        e = omega_01 / 2
        return cls(SiteLayout((3, 2)), (e, e), j_xy, j_z, barrier_site=0, omega_0T=omega_0T)

    @classmethod
    def qubit_barrier_qubit(cls, omega_01=100.0, omega_0T=1000.0, j_xy=1.0, j_z=0.0):
        e = omega_01 / 2
        return cls(SiteLayout((2, 3, 2)), (e, e, e), j_xy, j_z, barrier_site=1, omega_0T=omega_0T)

    @property
    def qubit_sites(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.layout.n_sites) if i != self.barrier_site)

    @property
    def omega_01(self) -> float:
        """Qubit splitting 2*E_j of the first qubit site (of the barrier if there is none)."""
        sites = self.qubit_sites or (self.barrier_site,)
        return 2 * self.zeeman[sites[0]]

    def level_energy_0(self, site: int) -> float:
        return self.zeeman[site]

    def level_energy_1(self, site: int) -> float:
        return -self.zeeman[site]


@dataclass(frozen=True)
class DriveSchedule:
    """Laser envelope on the barrier's |0> <-> |T> transition.

    `rabi` is the peak Rabi frequency. Pulses are square, start at
    `pulse_offset + k * repetition_period` and last `pulse_duration`. The drive
    is forced off inside every gate window.
    """

    mode: str = "off"
    rabi: float = 0.0
    carrier: Optional[float] = None
    pulse_area: float = 0.0
    pulse_duration: float = 0.0
    repetition_period: float = 0.0
    pulse_offset: float = 0.0
    gate_windows: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.mode not in DRIVE_MODES:
            raise ValueError(f"drive mode must be one of {DRIVE_MODES}, got {self.mode!r}")
        windows = tuple((float(a), float(b)) for a, b in self.gate_windows)
        object.__setattr__(self, "gate_windows", windows)
        for a, b in windows:
            if not b > a:
                raise ValueError(f"gate window ({a}, {b}) is empty")
        for (_, b0), (a1, _) in zip(windows, windows[1:]):
            if a1 < b0:
                raise ValueError("gate windows must be ordered and pairwise disjoint")
        if self.rabi < 0 or not math.isfinite(self.rabi):
            raise ValueError(f"rabi must be finite and non-negative, got {self.rabi}")
        if self.mode == "pulsed":
            tau, period = self.pulse_duration, self.repetition_period
            if not tau > 0:
                raise ValueError("pulse_duration must be positive")
            if not period >= tau:
                raise ValueError(
                    f"repetition_period {period} must be at least pulse_duration {tau}"
                )
            if not math.isclose(self.rabi, self.pulse_area / tau, rel_tol=1e-12):
                raise ValueError("pulsed drive requires rabi == pulse_area / pulse_duration")

    @classmethod
    def off(cls):
        return cls()

    @classmethod
    def continuous(cls, rabi, carrier=None, gate_windows=()):
        return cls("continuous", float(rabi), carrier, gate_windows=tuple(gate_windows))

    @classmethod
    def pulsed(cls, area, duration, period=None, average_rabi=None, carrier=None,
               offset=0.0, gate_windows=()):
        """Square pulse train. Without an explicit period, the period is chosen
        so the time-averaged envelope equals `average_rabi`."""
        if period is None:
            if not average_rabi:
                raise ValueError("give either a repetition period or a target average_rabi")
            period = area / average_rabi
        return cls("pulsed", area / duration, carrier, float(area), float(duration),
                   float(period), float(offset), tuple(gate_windows))

    def in_gate_window(self, t: float) -> bool:
        return any(a <= t < b for a, b in self.gate_windows)

    def envelope(self, t: float) -> float:
        """Rabi envelope at time t (the cos carrier is not included)."""
        if self.mode == "off" or self.in_gate_window(t):
            return 0.0
        if self.mode == "continuous":
            return self.rabi
        s = t - self.pulse_offset
        if s < 0:
            return 0.0
        phase = s - math.floor(s / self.repetition_period) * self.repetition_period
        return self.rabi if phase < self.pulse_duration else 0.0

    def breakpoints(self, t0: float, t1: float) -> list[float]:
        """Envelope discontinuities strictly inside (t0, t1)."""
        points = []
        for a, b in self.gate_windows:
            points += [a, b]
        if self.mode == "pulsed":
            period, tau, off = self.repetition_period, self.pulse_duration, self.pulse_offset
            k0 = max(0, math.floor((t0 - off) / period))
            k = k0
            while off + k * period < t1:
                start = off + k * period
                points += [start, start + tau]
                k += 1
        return sorted(p for p in set(points) if t0 < p < t1)

    def _segments(self, t0, t1):
        edges = [t0, *self.breakpoints(t0, t1), t1]
        for a, b in zip(edges, edges[1:]):
            yield b - a, self.envelope(0.5 * (a + b))

    def average_amplitude(self, t0: float, t1: float) -> float:
        return sum(w * env for w, env in self._segments(t0, t1)) / (t1 - t0)

    def average_intensity(self, t0: float, t1: float) -> float:
        """Time average of the squared envelope."""
        return sum(w * env**2 for w, env in self._segments(t0, t1)) / (t1 - t0)

    def max_envelope(self) -> float:
        return 0.0 if self.mode == "off" else self.rabi


@dataclass(frozen=True)
class DecayConfig:
    """Spontaneous decay |T> -> |0> of the barrier at rate gamma."""

    gamma: float = 0.0
    decay_from: int = LEVEL_T
    decay_to: int = LEVEL_0

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError(f"gamma must be finite and non-negative, got {self.gamma}")


def _require_barrier(spec: ChainSpec) -> int:
    if spec.barrier_site is None:
        raise ValueError("this chain has no barrier site")
    return spec.barrier_site


def t_level_energy(spec: ChainSpec, frame: str = "lab", carrier: Optional[float] = None) -> float:
    """Energy of |T>: omega_0T above the barrier's |0>; shifted down by the
    carrier in the rotating frame."""
    b = _require_barrier(spec)
    e_t = spec.level_energy_0(b) + spec.omega_0T
    if frame == "rwa":
        e_t -= spec.omega_0T if carrier is None else carrier
    return e_t


def build_static_hamiltonian(spec: ChainSpec, frame: str = "lab",
                             carrier: Optional[float] = None) -> np.ndarray:
    """Zeeman + nearest-neighbour exchange + barrier |T> level energy."""
    if frame not in FRAMES:
        raise ValueError(f"frame must be one of {FRAMES}, got {frame!r}")
    layout = spec.layout
    h = np.zeros((layout.dim, layout.dim), dtype=complex)
    for j, e in enumerate(spec.zeeman):
        if e:
            h += e * embed(SIGMA_Z, j, layout)
    for j in range(layout.n_sites - 1):
        if spec.j_z:
            h += spec.j_z * embed(SIGMA_Z, j, layout) @ embed(SIGMA_Z, j + 1, layout)
        if spec.j_xy:
            h += spec.j_xy * (
                embed(SIGMA_X, j, layout) @ embed(SIGMA_X, j + 1, layout)
                + embed(SIGMA_Y, j, layout) @ embed(SIGMA_Y, j + 1, layout)
            )
    if spec.barrier_site is not None:
        h += t_level_energy(spec, frame, carrier) * embed(
            transition(LEVEL_T, LEVEL_T), spec.barrier_site, layout
        )
    return h


def drive_operator(spec: ChainSpec) -> np.ndarray:
    """|T><0| + |0><T| on the barrier site."""
    b = _require_barrier(spec)
    x = transition(LEVEL_T, LEVEL_0) + transition(LEVEL_0, LEVEL_T)
    return embed(x, b, spec.layout)


def carrier_frequency(spec: ChainSpec, sched: DriveSchedule) -> float:
    return spec.omega_0T if sched.carrier is None else sched.carrier


def build_drive(spec: ChainSpec, sched: DriveSchedule, t: float) -> np.ndarray:
    """Lab-frame laser term envelope(t) * cos(w t) * (|T><0| + |0><T|)."""
    amp = sched.envelope(t) * math.cos(carrier_frequency(spec, sched) * t)
    return amp * drive_operator(spec)


def build_rwa_drive(spec: ChainSpec, sched: DriveSchedule, t: float) -> np.ndarray:
    """Resonant rotating-frame drive (envelope(t)/2) (|T><0| + |0><T|)."""
    if not math.isclose(carrier_frequency(spec, sched), spec.omega_0T, rel_tol=1e-12):
        raise ValueError("rotating-wave drive is only supported on resonance")
    return 0.5 * sched.envelope(t) * drive_operator(spec)


def build_collapse(spec: ChainSpec, decay: DecayConfig) -> np.ndarray:
    """sqrt(gamma) |0><T| on the barrier site."""
    b = _require_barrier(spec)
    lowering = transition(decay.decay_to, decay.decay_from)
    return math.sqrt(decay.gamma) * embed(lowering, b, spec.layout)


@dataclass(frozen=True)
class DrivenHamiltonian:
    """H(t) = static + envelope(t) * carrier(t) * drive_op.

    Solvers hold the envelope fixed over each integration piece (pieces are
    split at `breakpoints`) and evaluate the carrier at every stage time.
    """

    static: np.ndarray
    drive_op: Optional[np.ndarray] = None
    schedule: DriveSchedule = field(default_factory=DriveSchedule)
    frame: str = "lab"
    carrier_omega: float = 0.0

    def __post_init__(self):
        if self.frame not in FRAMES:
            raise ValueError(f"frame must be one of {FRAMES}, got {self.frame!r}")

    @property
    def dim(self) -> int:
        return self.static.shape[0]

    @property
    def driven(self) -> bool:
        return self.drive_op is not None and self.schedule.mode != "off"

    def envelope(self, t: float) -> float:
        if not self.driven:
            return 0.0
        env = self.schedule.envelope(t)
        return 0.5 * env if self.frame == "rwa" else env

    def carrier(self, t: float) -> float:
        return 1.0 if self.frame == "rwa" else math.cos(self.carrier_omega * t)

    def breakpoints(self, t0: float, t1: float) -> list[float]:
        return self.schedule.breakpoints(t0, t1) if self.driven else []

    def max_coupling(self) -> float:
        if not self.driven:
            return 0.0
        env = self.schedule.max_envelope()
        return 0.5 * env if self.frame == "rwa" else env

    def __call__(self, t: float) -> np.ndarray:
        if not self.driven:
            return self.static
        return self.static + self.envelope(t) * self.carrier(t) * self.drive_op


def driven_hamiltonian(spec: ChainSpec, sched: DriveSchedule, frame: str = "lab") -> DrivenHamiltonian:
    carrier = carrier_frequency(spec, sched) if spec.barrier_site is not None else 0.0
    if frame == "rwa" and sched.mode != "off" and not math.isclose(carrier, spec.omega_0T, rel_tol=1e-12):
        raise ValueError("rotating-wave drive is only supported on resonance")
    static = build_static_hamiltonian(spec, frame, carrier if spec.barrier_site is not None else None)
    op = drive_operator(spec) if spec.barrier_site is not None else None
    return DrivenHamiltonian(static, op, sched, frame, carrier)
