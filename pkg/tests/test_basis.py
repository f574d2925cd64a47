import numpy as np
import pytest
from conftest import random_model

from qseg.basis import BasisLabel, BasisSpec, basis_size, enumerate_labels, generate_basis, prepare_basis_state
from qseg.circuits import build_reference_state
from qseg.ed import exact_time_evolution
from qseg.operators import sector_basis
from qseg.statevector import run_circuit_inplace


@pytest.mark.parametrize("n_l,n_k", [(0, 0), (1, 1), (7, 3), (25, 0), (0, 59)])
def test_label_count(n_l, n_k):
    labels = enumerate_labels(n_l, n_k)
    assert len(labels) == basis_size(n_l, n_k) == len(set(labels))


def test_labels_small_case():
    assert enumerate_labels(1, 1) == [
        BasisLabel(-1, -1), BasisLabel(-1, 0),
        BasisLabel(0, -1), BasisLabel(0, 0), BasisLabel(0, 1),
        BasisLabel(1, 0), BasisLabel(1, 1),
    ]


def test_trotter_step_count_of_label():
    assert BasisLabel(-3, 0).trotter_steps == 3
    assert BasisLabel(2, 1).trotter_steps == 3
    assert BasisSpec(0.1, 7, 3).max_trotter_steps == 8
    assert BasisSpec(0.1, 80, 0).max_trotter_steps == 80


def test_spec_validation():
    with pytest.raises(ValueError):
        BasisSpec(0.0, 1, 1)
    with pytest.raises(ValueError):
        BasisSpec(0.1, -1, 0)
    with pytest.raises(ValueError):
        BasisSpec(0.1, 1, 0, role="other")
    s = BasisSpec(0.1, 3, 2, "krylov")
    assert BasisSpec.from_dict(s.to_dict()) == s
    assert np.isclose(s.coarse_dt, 0.3)


def _origin(m, nu, nd):
    v = np.zeros(1 << m.n_qubits, complex)
    v[0] = 1
    return run_circuit_inplace(v, build_reference_state(m, nu, nd))


def test_generate_basis_matches_label_by_label():
    m = random_model(3, seed=9)
    spec = BasisSpec(0.2, 2, 2)
    v0 = _origin(m, 1, 2)
    rows = generate_basis(spec, m, v0)
    for i, lab in enumerate(spec.labels):
        assert np.allclose(rows[i], prepare_basis_state(lab, spec, m, v0).amplitudes)


def test_sector_restricted_generation_agrees():
    m = random_model(4, seed=10)
    spec = BasisSpec(0.15, 2, 1)
    v0 = _origin(m, 2, 1)
    keep = sector_basis(4, 2, 1)
    full = generate_basis(spec, m, v0)
    assert np.allclose(generate_basis(spec, m, v0, keep=keep), full[:, keep])
    assert np.allclose(np.linalg.norm(full[:, keep], axis=1), 1.0)


def test_basis_states_approximate_time_evolution():
    m = random_model(3, u=2.0, seed=12)
    spec = BasisSpec(0.05, 2, 1)
    v0 = _origin(m, 1, 1)
    psi = prepare_basis_state(BasisLabel(-2, -1), spec, m, v0)
    exact = exact_time_evolution(m, v0, -0.05 * 5)
    assert abs(abs(np.vdot(exact.amplitudes, psi.amplitudes)) - 1) < 1e-4


def test_unknown_label_rejected():
    m = random_model(2, seed=1)
    with pytest.raises(ValueError):
        prepare_basis_state(BasisLabel(1, -1), BasisSpec(0.1, 1, 1), m, _origin(m, 1, 1))
