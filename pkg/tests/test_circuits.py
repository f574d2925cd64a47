import numpy as np
import pytest
import scipy.linalg as sla
from conftest import random_model

from qseg.baths import reference_model
from qseg.circuits import (
    build_quadratic_evolution,
    build_reference_state,
    build_superposition_prep,
    build_trotter_step,
    decompose_quadratic,
    depth_report,
    orbital_rotation,
    reference_epsilon,
    reference_index,
)
from qseg.ed import exact_ground_state
from qseg.operators import AimModel, build_aim_hamiltonian, build_quadratic_hamiltonian
from qseg.statevector import run_circuit_inplace


def circuit_unitary(circuit) -> np.ndarray:
    dim = 1 << circuit.n_qubits
    cols = []
    for j in range(dim):
        v = np.zeros(dim, complex)
        v[j] = 1
        cols.append(run_circuit_inplace(v, circuit))
    return np.array(cols).T


@pytest.mark.parametrize("n", [2, 3, 4, 8])
def test_givens_network_reproduces_eigenvectors(n):
    rng = np.random.default_rng(n)
    a = rng.normal(size=(n, n))
    d = decompose_quadratic(a + a.T)
    assert np.allclose(d.single_particle_matrix(), d.orbitals)
    assert np.allclose(d.orbitals.T @ (a + a.T) @ d.orbitals, np.diag(d.eigenvalues))
    assert len(d.rotation_network) == n
    assert np.all(np.diff(d.eigenvalues) >= 0)


def test_diagonal_matrix_gives_trivial_rotations():
    d = decompose_quadratic(np.diag([0.3, -1.0, 2.0]))
    assert np.allclose(d.eigenvalues, [-1.0, 0.3, 2.0])
    assert np.allclose(np.abs(d.orbitals), np.abs(d.orbitals).round())


def test_decompose_rejects_asymmetric():
    with pytest.raises(ValueError):
        decompose_quadratic([[0, 1], [0, 0]])


def test_orbital_rotation_maps_creation_operators():
    # one particle in local mode j becomes sum_i Q_ij c_i^dagger |0>
    m = random_model(3, seed=4)
    d = decompose_quadratic(m.epsilon)
    u = circuit_unitary(orbital_rotation(d, 3))
    for j in range(3):
        col = u[:, 1 << (5 - j)]
        amps = np.array([col[1 << (5 - i)] for i in range(3)])
        assert np.allclose(amps, d.orbitals[:, j])


def test_quadratic_evolution_is_exact():
    m = random_model(3, seed=8)
    u = circuit_unitary(build_quadratic_evolution(m, 0.37))
    h0 = build_quadratic_hamiltonian(m).to_dense()
    assert np.allclose(u, sla.expm(-0.37j * h0), atol=1e-10)


def test_trotter_step_exact_without_interaction():
    m = AimModel.from_bath(0.0, [0.2, -0.5], [0.4, 0.3])
    u = circuit_unitary(build_trotter_step(m, 0.5))
    assert np.allclose(u, sla.expm(-0.5j * build_aim_hamiltonian(m).to_dense()), atol=1e-10)


def test_trotter_error_is_third_order():
    m = random_model(3, u=4.0, seed=11)
    h = build_aim_hamiltonian(m).to_dense()
    errs = []
    for dt in (0.1, 0.05):
        errs.append(np.linalg.norm(circuit_unitary(build_trotter_step(m, dt)) - sla.expm(-1j * dt * h), 2))
    assert 6.0 < errs[0] / errs[1] < 10.0


@pytest.mark.parametrize("orbitals", ["bare", "hartree"])
def test_reference_state_is_lowest_determinant(orbitals):
    m = random_model(3, seed=2, half_filled=True)
    v = np.zeros(1 << 6, complex)
    v[0] = 1
    run_circuit_inplace(v, build_reference_state(m, 2, 1, orbitals))
    eps = reference_epsilon(m, orbitals)
    e1 = np.linalg.eigvalsh(eps)
    # energy of the determinant under the reference one-body operator
    ref = AimModel(1, 2, eps, 0.0)
    h0 = build_quadratic_hamiltonian(ref).to_dense()
    assert np.isclose(np.vdot(v, h0 @ v).real, 2 * e1[0] + e1[1])
    assert np.isclose(np.linalg.norm(v), 1)


def test_hartree_reference_overlaps_better_at_large_u():
    m = reference_model("first", 8.0)
    _, gs = exact_ground_state(m, 4, 4, dense=False)
    ovl = {}
    for orbitals in ("bare", "hartree"):
        v = np.zeros(1 << 16, complex)
        v[0] = 1
        run_circuit_inplace(v, build_reference_state(m, 4, 4, orbitals))
        ovl[orbitals] = abs(np.vdot(gs.amplitudes, v))
    assert ovl["hartree"] > ovl["bare"]


@pytest.mark.parametrize("reference", ["zeros", "ones", "up", "down"])
@pytest.mark.parametrize("phase", [0.0, 1.1])
def test_superposition_prep(reference, phase):
    m = random_model(3, seed=6)
    ref_state = np.zeros(1 << 6, complex)
    ref_state[0] = 1
    phi0 = run_circuit_inplace(ref_state.copy(), build_reference_state(m, 1, 2))
    r = np.zeros(1 << 6, complex)
    r[reference_index(reference, 3)] = 1
    v = run_circuit_inplace(ref_state, build_superposition_prep(m, 1, 2, reference, phase))
    target = (phi0 + np.exp(1j * phase) * r) / np.sqrt(2)
    assert np.isclose(abs(np.vdot(target, v)), 1.0)


def test_superposition_needs_distinct_reference():
    m = random_model(2, seed=1)
    with pytest.raises(ValueError):
        build_superposition_prep(m, 0, 0, "zeros")


def test_depth_closed_form_values():
    m = reference_model("first", 8.0)
    r = depth_report(m, 4, 4, 0, 1)
    assert (r.d_v, r.d_0, r.d_max) == (36, 19, 254)
    assert r.d_v_synth == 36 and r.d_0_synth == 19
    assert depth_report(m, 4, 4, 7, 80, synthesize=False).d_max == 2 * (19 + 89 * 36)
    with pytest.raises(ValueError):
        depth_report(m, 4, 4, -1, 0)


@pytest.mark.parametrize("n", [2, 4, 8])
def test_trotter_step_depth_matches_formula(n):
    m = random_model(n, seed=n, half_filled=True)
    r = depth_report(m, n // 2, n // 2, 0, 1)
    assert r.d_v_synth == r.d_v == 4 * n + 4
