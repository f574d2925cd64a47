import numpy as np
import pytest
from conftest import random_model

from qseg.basis import BasisSpec
from qseg.ed import exact_greens_function
from qseg.ground import DegenerateBasisError, GroundSolution
from qseg.greens import (
    GreensFunctionResult,
    KrylovCoefficients,
    build_psi0_coefficients,
    combine_offdiagonal,
    continued_fraction,
    gf_from_coefficients,
    lanczos_in_subspace,
)
from qseg.matrix_elements import Excitation
from qseg.pipeline import QsegConfig, QsegSolver, compute_gf, off_diagonal_gf

# bases long enough to span the few-site sectors used below
SPANNING = QsegConfig(gs_spec=BasisSpec(0.3, 8, 1), gf_spec=BasisSpec(0.3, 12, 0, "krylov"), max_n=40)


def test_lanczos_trivial_two_level():
    c = lanczos_in_subspace(np.diag([1.0, 2.0]), np.eye(2), np.array([1.0, 0.0]))
    assert np.allclose(c.a, [1.0]) and c.b.size == 0
    assert c.terminated_reason == "b-small"


def test_lanczos_matches_standard_tridiagonalisation(rng):
    a = rng.normal(size=(6, 6))
    h = a + a.T
    v = rng.normal(size=6)
    c = lanczos_in_subspace(h, np.eye(6), v, max_n=6)
    t = c.tridiagonal()
    assert np.allclose(np.linalg.eigvalsh(t), np.linalg.eigvalsh(h), atol=1e-9)
    assert np.isclose(c.norm0, v @ v)


def test_lanczos_in_nonorthogonal_metric(rng):
    # basis vectors as rows of B, overlap S = B B^T, H_sub = B H B^T
    b = rng.normal(size=(5, 5))
    a = rng.normal(size=(5, 5))
    h = a + a.T
    s_psi, h_psi = b @ b.T, b @ h @ b.T
    x = rng.normal(size=5)
    c, q = lanczos_in_subspace(h_psi, s_psi, x, max_n=5, return_basis=True)
    assert np.allclose(q.conj().T @ s_psi @ q, np.eye(q.shape[1]), atol=1e-8)
    assert np.allclose(np.linalg.eigvalsh(c.tridiagonal()), np.linalg.eigvalsh(h), atol=1e-8)


def test_lanczos_zero_start():
    with pytest.raises(DegenerateBasisError):
        lanczos_in_subspace(np.eye(2), np.eye(2), np.zeros(2))


def test_continued_fraction_equals_resolvent(rng):
    c = KrylovCoefficients(rng.normal(size=4), np.abs(rng.normal(size=3)), "max-n", 0.7)
    z = np.array([0.3 + 0.1j, -1.2 + 0.05j])
    t = c.tridiagonal()
    ref = [0.7 * np.linalg.inv(zz * np.eye(4) - t)[0, 0] for zz in z]
    assert np.allclose(continued_fraction(c, z), ref)
    assert np.allclose(continued_fraction(KrylovCoefficients(np.zeros(0), np.zeros(0), "b-small", 0.0), z), 0)


def test_single_pole_greater_and_lesser():
    g = KrylovCoefficients(np.array([1.5]), np.zeros(0), "b-small", 0.4)
    z = np.array([0.2 + 0.1j])
    gr, le = gf_from_coefficients(g, g, -1.0, z)
    assert np.allclose(gr, 0.4 / (z - 1.5 - 1.0))
    assert np.allclose(le, -0.4 / (-1.0 - z - 1.5))


def test_psi0_from_identity_overlap():
    gs = GroundSolution(0.0, np.array([1.0, 0.0]), np.ones(2), 0)
    psi0, n0 = build_psi0_coefficients(np.eye(2), np.array([[0.6, 0.0], [0.8, 0.0]]), gs)
    assert np.allclose(psi0, [0.6, 0.8]) and np.isclose(n0, 1.0)


def test_offdiagonal_combination_identity():
    # for alpha == beta the composite GFs are 4 G and 2 G, which must give back G
    g = np.array([0.3 - 0.2j])
    assert np.allclose(combine_offdiagonal(4 * g, 2 * g, g, g), g)


def test_csv_round_trip():
    om = np.linspace(-1, 1, 5)
    r = GreensFunctionResult.from_parts(om, 0.1, 1 / (om + 0.1j - 0.5), 1 / (om + 0.1j + 0.5), -1.0)
    back = GreensFunctionResult.from_csv(r.to_csv(), 0.1)
    assert np.allclose(back.retarded, r.retarded) and np.allclose(back.dos, r.dos)


def test_noninteracting_gf_equals_one_body_resolvent():
    m = random_model(3, u=0.0, seed=31)
    om = np.linspace(-3, 3, 61)
    z = om + 0.2j
    ref = np.array([np.linalg.inv(zz * np.eye(3) - m.epsilon)[0, 0] for zz in z])
    res = compute_gf(m, SPANNING, omega=om, delta=0.2, sector=(1, 2))
    assert np.abs(res.retarded - ref).max() < 1e-8


@pytest.fixture(scope="module")
def three_site():
    m = random_model(3, u=3.0, seed=32, half_filled=True)
    om = np.linspace(-6, 6, 241)
    return m, om, compute_gf(m, SPANNING, omega=om, delta=0.1, sector=(1, 2)), exact_greens_function(
        m, om, 0.1, sector=(1, 2)
    )


def test_spanning_basis_reproduces_exact_dos(three_site):
    m, om, res, ex = three_site
    assert np.abs(res.dos - ex.dos).max() < 1e-6
    assert np.isclose(res.e_gs, ex.e_gs, atol=1e-9)


def test_spectral_weight_is_one(three_site):
    m, _, res, _ = three_site
    solver = QsegSolver(m, SPANNING, (1, 2))
    g = solver.krylov(Excitation.single(1))
    l = solver.krylov(Excitation.single(1, kind="lesser"))
    assert np.isclose(g.norm0 + l.norm0, 1.0, atol=1e-8)
    assert res.dos.min() > -1e-12


def test_offdiagonal_matches_exact():
    m = random_model(3, u=2.0, seed=33, half_filled=True)
    om = np.linspace(-4, 4, 81)
    res = off_diagonal_gf(m, 1, 2, SPANNING, omega=om, delta=0.1, sector=(1, 2))
    ex = exact_greens_function(m, om, 0.1, sector=(1, 2), pair=(1, 2))
    assert np.abs(res.retarded - ex.retarded).max() < 1e-6


def test_offdiagonal_needs_distinct_sites():
    with pytest.raises(ValueError):
        QsegSolver(random_model(2)).off_diagonal(1, 1, np.array([0.1j]))
