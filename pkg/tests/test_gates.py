import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinbarrier.gates import (
    REVIVAL_THRESHOLD,
    analytic_gate,
    extract_gate,
    gate_fidelity,
    gate_phase,
    revival_time,
)
from spinbarrier.model import ChainSpec
from spinbarrier.tensor import partial_trace, purity, SiteLayout


def test_heisenberg_parameters():
    p = analytic_gate(1.0, 1.0)
    assert p.phi == pytest.approx(math.pi / 6)
    assert p.s == pytest.approx(0.5)
    assert p.c == pytest.approx(math.sqrt(3) / 2)
    assert p.q == pytest.approx(-cmath.exp(1j * math.pi / 6))
    assert p.w == pytest.approx(-cmath.exp(-1j * math.pi / 3))


def test_xy_limit_gate():
    p = analytic_gate(1.0, 0.0)
    assert p.phi == 0.0
    expected = np.array([[1, 0, 0, 0], [0, 0, -1, 0], [0, -1, 0, 0], [0, 0, 0, -1]])
    np.testing.assert_allclose(p.matrix, expected, atol=1e-15)
    assert p.t_r == pytest.approx(math.pi / math.sqrt(8))
    assert p.t_r == pytest.approx(1.1107, abs=1e-4)


def test_revival_time_formula():
    assert revival_time(1.0, 1.0) == pytest.approx(math.pi / 3)
    assert gate_phase(1.0, 0.0) == 0.0


def test_analytic_gate_rejects_bad_couplings():
    with pytest.raises(ValueError):
        analytic_gate(0.0, 1.0)
    with pytest.raises(ValueError):
        analytic_gate(1.0, -0.5)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 50.0), st.floats(0.1, 5.0))
def test_analytic_gate_unitary_and_unimodular_entries(j_z, j_xy):
    p = analytic_gate(j_xy, j_z)
    u = p.matrix
    assert np.max(np.abs(u.conj().T @ u - np.eye(4))) < 1e-12
    assert abs(abs(p.q) - 1) < 1e-12 and abs(abs(p.w) - 1) < 1e-12
    assert abs(p.s**2 + p.c**2 - 1) < 1e-12


def test_gate_fidelity_examples():
    u = analytic_gate(1.0, 1.0).matrix
    assert gate_fidelity(u, u) == pytest.approx(1.0)
    assert gate_fidelity(u, cmath.exp(0.7j) * u) == pytest.approx(1.0)
    assert gate_fidelity(np.eye(4), np.diag([1, 1, 1, -1])) == pytest.approx(0.25)


def test_gate_fidelity_rejects_non_unitary():
    with pytest.raises(ValueError):
        gate_fidelity(np.eye(4), 1.1 * np.eye(4))
    with pytest.raises(ValueError):
        gate_fidelity(np.eye(4), np.eye(2))


def test_xy_limit_extraction_zero_zeeman():
    r = extract_gate(ChainSpec.qubit_barrier_qubit(omega_01=0.0))
    assert r.gate_fidelity > 1 - 1e-8
    assert r.barrier_revival_population > 1 - 1e-9


def test_heisenberg_extraction():
    r = extract_gate(ChainSpec.qubit_barrier_qubit(j_z=1.0))
    assert r.gate_fidelity > 1 - 1e-6
    assert not r.flagged


@pytest.mark.parametrize("j_z", [0.0, 0.5, 1.0])
def test_two_periods_match_matrix_square(j_z):
    spec = ChainSpec.qubit_barrier_qubit(j_z=j_z)
    one = extract_gate(spec)
    two = extract_gate(spec, periods=2)
    square = one.u_framed @ one.u_framed
    ref = square * abs(square[0, 0]) / square[0, 0]
    np.testing.assert_allclose(two.u_framed, ref, atol=1e-6)
    assert two.gate_fidelity > 1 - 1e-6


def test_off_revival_time_is_flagged():
    spec = ChainSpec.qubit_barrier_qubit()
    r = extract_gate(spec, t=0.5 * revival_time(1.0, 0.0))
    assert r.barrier_revival_population < REVIVAL_THRESHOLD
    assert r.flagged


def test_extract_gate_needs_three_site_chain():
    with pytest.raises(ValueError):
        extract_gate(ChainSpec.barrier_qubit())


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.0, 2.0), st.floats(0.0, 200.0))
def test_random_couplings_extraction(j_xy, ratio, omega_01):
    spec = ChainSpec.qubit_barrier_qubit(omega_01=omega_01, j_xy=j_xy, j_z=ratio * j_xy)
    r = extract_gate(spec)
    assert r.gate_fidelity > 1 - 1e-5
    assert r.barrier_revival_population > 1 - 1e-6


def reduced_purity(u, psi):
    out = u @ psi
    return purity(partial_trace(np.outer(out, out.conj()), 0, SiteLayout((2, 2))))


PLUS = np.array([1, 1]) / math.sqrt(2)


@pytest.mark.parametrize("j_z", [0.0, 0.5, 1.0, 2.0])
def test_extracted_gate_entangles_zero_plus(j_z):
    # fails at j_z = 0: there U|0>|+> = |->|0> is a product state
    r = extract_gate(ChainSpec.qubit_barrier_qubit(j_z=j_z))
    assert reduced_purity(r.u_extracted, np.kron([1, 0], PLUS)) <= 1 - 1e-6


PLUS_I = np.array([1, 1j]) / math.sqrt(2)


@pytest.mark.parametrize("j_z", [0.0, 0.5, 1.0, 2.0])
def test_extracted_gate_entangles_plus_plus_i(j_z):
    r = extract_gate(ChainSpec.qubit_barrier_qubit(j_z=j_z))
    assert reduced_purity(r.u_extracted, np.kron(PLUS, PLUS_I)) <= 1 - 1e-6


def test_xy_gate_keeps_zero_plus_product():
    u = analytic_gate(1.0, 0.0).matrix
    out = u @ np.kron([1, 0], PLUS)
    np.testing.assert_allclose(out, np.kron([1, -1], [1, 0]) / math.sqrt(2), atol=1e-15)
