import numpy as np
import pytest
from conftest import random_model

from qseg.basis import BasisSpec
from qseg.ed import exact_ground_state
from qseg.ground import (
    DegenerateBasisError,
    GroundSolution,
    pruned_metric,
    pseudo_inverse,
    solve_generalized_eigenproblem,
)
from qseg.matrix_elements import PrimitiveContext, assemble_gs_matrices


def test_orthonormal_basis_reduces_to_standard_problem(rng):
    a = rng.normal(size=(5, 5))
    h = a + a.T
    sol = solve_generalized_eigenproblem(h, np.eye(5))
    assert np.isclose(sol.energy, np.linalg.eigvalsh(h)[0])
    assert sol.discarded == 0
    assert np.isclose(np.vdot(sol.coefficients, sol.coefficients).real, 1.0)


def test_duplicated_vector_is_pruned(rng):
    v = rng.normal(size=(3, 6))
    v = np.vstack([v, v[0]])
    hfull = np.diag(np.arange(6.0))
    s = v @ v.T
    h = v @ hfull @ v.T
    sol = solve_generalized_eigenproblem(h, s)
    assert sol.discarded == 1
    c = sol.coefficients
    assert np.isclose(np.vdot(c, s @ c).real, 1.0)
    # Rayleigh quotient of the returned vector equals the energy
    assert np.isclose(np.vdot(c, h @ c).real, sol.energy)


def test_pseudo_inverse_on_retained_space(rng):
    v = rng.normal(size=(4, 3))
    s = v @ v.T  # rank 3
    p = pseudo_inverse(s)
    assert np.allclose(s @ p @ s, s, atol=1e-10)
    w, x, disc = pruned_metric(s)
    assert disc == 1
    assert np.allclose(x.T @ s @ x, np.eye(3), atol=1e-10)


def test_degenerate_and_invalid_inputs():
    with pytest.raises(DegenerateBasisError):
        solve_generalized_eigenproblem(np.zeros((2, 2)), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        solve_generalized_eigenproblem(np.eye(2), np.eye(3))
    with pytest.raises(ValueError):
        pruned_metric(np.eye(2), cutoff=-1)


def test_solution_json_round_trip():
    sol = solve_generalized_eigenproblem(np.diag([1.0, -2.0]), np.eye(2))
    back = GroundSolution.from_json(sol.to_json())
    assert back.energy == sol.energy
    assert np.allclose(back.coefficients, sol.coefficients)


def test_subspace_energy_is_variational_and_improves():
    m = random_model(4, u=4.0, seed=21, half_filled=True)
    e_exact, _ = exact_ground_state(m, 2, 2)
    errs = []
    for n_l in (0, 1, 3):
        ctx = PrimitiveContext(m, 2, 2, BasisSpec(0.2, n_l, 1))
        h, s = assemble_gs_matrices(ctx)
        errs.append(solve_generalized_eigenproblem(h, s).energy - e_exact)
    assert all(e > -1e-10 for e in errs)
    assert errs[0] >= errs[1] >= errs[2]
    assert errs[2] < 1e-3
