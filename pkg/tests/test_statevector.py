from functools import reduce

import numpy as np
import pytest
from conftest import random_model

from qseg.circuits import build_trotter_step
from qseg.operators import sector_basis
from qseg.statevector import (
    Circuit,
    Gate,
    SectorCircuit,
    StateVector,
    apply_circuit,
    estimate_fidelity,
    inner_product,
    run_circuit_inplace,
)


def full_matrix(gate: Gate, n: int) -> np.ndarray:
    """Dense operator of a gate on ``n`` qubits built from Kronecker products (big-endian)."""
    dim = 1 << n
    local = gate.matrix()
    if not gate.qubits:
        return local[0, 0] * np.eye(dim)
    out = np.zeros((dim, dim), complex)
    qs = gate.qubits
    for col in range(dim):
        bits = [(col >> (n - 1 - q)) & 1 for q in range(n)]
        sub = int("".join(str(bits[q]) for q in qs), 2)
        for row_sub in range(local.shape[0]):
            amp = local[row_sub, sub]
            if amp == 0:
                continue
            nb = list(bits)
            for k, q in enumerate(qs):
                nb[q] = (row_sub >> (len(qs) - 1 - k)) & 1
            out[int("".join(map(str, nb)), 2), col] += amp
    return out


GATES = [
    Gate("H", (1,)),
    Gate("X", (2,)),
    Gate("RY", (0,), 0.7),
    Gate("RZ", (3,), -1.1),
    Gate("CNOT", (3, 1)),
    Gate("CNOT", (0, 2)),
    Gate("ZZ", (1, 3), 0.4),
    Gate("GIVENS", (0, 3), 1.3),
    Gate("GIVENS", (2, 1), -0.5),
    Gate("GPHASE", (), 0.9),
]


@pytest.mark.parametrize("gate", GATES, ids=lambda g: g.kind)
def test_kernels_match_kronecker_matrices(gate, rng):
    n = 4
    v = rng.normal(size=16) + 1j * rng.normal(size=16)
    out = run_circuit_inplace(v.copy(), Circuit(n, [[gate]]))
    assert np.allclose(out, full_matrix(gate, n) @ v)


@pytest.mark.parametrize("gate", [g for g in GATES if g.kind in ("GIVENS", "ZZ")], ids=lambda g: g.kind)
def test_decomposition_is_exact(gate):
    n = 4
    direct = full_matrix(gate, n)
    parts = [full_matrix(g, n) for g in gate.decompose()]
    assert np.allclose(reduce(lambda a, b: b @ a, parts), direct)


def test_givens_matrix_form():
    g = Gate("GIVENS", (0, 1), 2 * 0.3).matrix()
    c, s = np.cos(0.3), np.sin(0.3)
    assert np.allclose(g, [[1, 0, 0, 0], [0, c, s, 0], [0, -s, c, 0], [0, 0, 0, 1]])


def test_circuit_inverse(rng):
    c = Circuit.from_gates(4, GATES)
    v = rng.normal(size=16) + 0j
    v /= np.linalg.norm(v)
    w = run_circuit_inplace(run_circuit_inplace(v.copy(), c), c.inverse())
    assert np.allclose(w, v)


def test_layer_packing_and_depth():
    c = Circuit.from_gates(3, [Gate("CNOT", (0, 1)), Gate("H", (2,)), Gate("CNOT", (1, 2))])
    assert c.depth == 2
    assert c.cnot_layer_count == 2
    with pytest.raises(ValueError):
        Circuit(3, [[Gate("H", (0,)), Gate("X", (0,))]])


def test_text_round_trip():
    c = Circuit.from_gates(4, GATES)
    back = Circuit.from_text(c.to_text())
    assert back.layers == c.layers


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("CNOT", (1, 1))
    with pytest.raises(ValueError):
        Gate("FOO", (0,))
    with pytest.raises(ValueError):
        Gate("H", (0, 1))


def test_state_constructors():
    s = StateVector.from_bits([1, 0, 1])
    assert s.amplitudes[5] == 1
    with pytest.raises(ValueError):
        StateVector(np.ones(3))
    with pytest.raises(ValueError):
        apply_circuit(StateVector.zero(2), Circuit(3, []))


def test_sector_circuit_matches_full_emulation(rng):
    m = random_model(4, seed=7)
    step = build_trotter_step(m, 0.3)
    states = sector_basis(4, 2, 1)
    amps = rng.normal(size=states.size) + 1j * rng.normal(size=states.size)
    full = np.zeros(1 << 8, complex)
    full[states] = amps
    run_circuit_inplace(full, step)
    out = SectorCircuit(step, states).run(amps.copy())
    assert np.allclose(out, full[states])


def test_sector_circuit_rejects_non_conserving():
    with pytest.raises(ValueError):
        SectorCircuit(Circuit(2, [[Gate("H", (0,))]]), [1, 2])


def test_fidelity_exact_and_sampled():
    a = np.array([1, 0], complex)
    b = np.array([1, 1], complex) / np.sqrt(2)
    assert np.isclose(estimate_fidelity(a, b), 0.5)
    assert np.isclose(abs(inner_product(a, b)) ** 2, 0.5)
    x = estimate_fidelity(a, b, shots=10000, seed=3)
    assert x == estimate_fidelity(a, b, shots=10000, seed=3)
    assert abs(x - 0.5) < 0.03
    with pytest.raises(ValueError):
        estimate_fidelity(a, b, shots=0)
