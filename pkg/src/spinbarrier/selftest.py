"""Quick end-to-end invariant checks for `spinbarrier selftest` (a few seconds)."""
from __future__ import annotations

import math

import numpy as np

from .experiments import fast_pulse_phase, ideal_state
from .gates import analytic_gate, extract_gate
from .model import ChainSpec, DecayConfig, DriveSchedule, build_collapse, build_static_hamiltonian, driven_hamiltonian
from .solvers import IntegratorConfig, evolve_lindblad, evolve_schrodinger
from .tensor import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    SiteLayout,
    is_hermitian,
    matrix_exp,
    partial_trace,
    projector,
)


def _pauli():
    dev = np.max(np.abs(SIGMA_X @ SIGMA_Y - 1j * SIGMA_Z))
    return dev < 1e-15, f"max|XY - iZ| = {dev:.1e}"


def _partial_trace():
    rng = np.random.default_rng(1)
    layout = SiteLayout((2, 3, 2))
    a = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    t = rho.reshape(2, 3, 2, 2, 3, 2)
    ref = np.zeros((3, 3), dtype=complex)
    for i in range(2):
        for k in range(2):
            ref += t[i, :, k, i, :, k]
    dev = np.max(np.abs(partial_trace(rho, 1, layout) - ref))
    return dev < 1e-12, f"deviation from index-sum oracle {dev:.1e}"


def _hamiltonian():
    h = build_static_hamiltonian(ChainSpec.qubit_barrier_qubit(j_z=0.7))
    u = matrix_exp(h, 0.3) @ matrix_exp(h, 0.4)
    dev = np.max(np.abs(u - matrix_exp(h, 0.7)))
    return is_hermitian(h) and dev < 1e-10, f"Hermitian, group-law deviation {dev:.1e}"


def _gate():
    worst = 1.0
    for jz in (0.0, 0.5, 1.0, 2.0):
        r = extract_gate(ChainSpec.qubit_barrier_qubit(j_z=jz))
        worst = min(worst, r.gate_fidelity, r.barrier_revival_population)
    return worst > 1 - 1e-6, f"worst revival/fidelity over J_Z in {{0, 0.5, 1, 2}}: 1 - {1 - worst:.1e}"


def _gate_unitary():
    dev = max(np.max(np.abs(u.conj().T @ u - np.eye(4)))
              for u in (analytic_gate(1.0, jz).matrix for jz in np.linspace(0, 3, 7)))
    return dev < 1e-12, f"analytic gate unitarity deviation {dev:.1e}"


def _solvers():
    chain = ChainSpec.barrier_qubit()
    h = driven_hamiltonian(chain, DriveSchedule.continuous(40.0), "rwa")
    cfg = IntegratorConfig(1e-3, 0.5, 10, "rwa")
    psi0 = np.kron([0, 1, 0], np.array([1, 1]) / math.sqrt(2)).astype(complex)
    pure = evolve_schrodinger(h, psi0, cfg)
    mixed = evolve_lindblad(h, build_collapse(chain, DecayConfig(0.0)), projector(psi0), cfg)
    dev = np.max(np.abs(pure.density_matrices() - mixed.states))
    return dev < 1e-6, f"Lindblad (gamma=0) vs Schroedinger {dev:.1e}"


def _ideal():
    a, b = ideal_state(100.0, 2 * math.pi / 100), ideal_state(100.0, 0.0)
    return np.allclose(a, b, atol=1e-12), "ideal state is periodic in omega_01 t"


def _pulse_phase():
    r = fast_pulse_phase()["swapped_ratio"]
    return abs(r + 1) < 1e-3, f"fast 2pi pulse amplitude ratio {r.real:+.6f}{r.imag:+.1e}j"


CHECKS = (
    ("pauli algebra", _pauli),
    ("partial trace", _partial_trace),
    ("hamiltonian", _hamiltonian),
    ("analytic gate unitary", _gate_unitary),
    ("gate oracle", _gate),
    ("solver agreement", _solvers),
    ("ideal state", _ideal),
    ("fast pulse phase", _pulse_phase),
)


def run_checks():
    results = []
    for name, check in CHECKS:
        try:
            ok, detail = check()
        except Exception as exc:  # report, keep checking
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results
