import numpy as np
import pytest
from scipy.integrate import quad

from qseg.dmft import (
    DmftConfig,
    DmftResult,
    Hybridization,
    MatsubaraGrid,
    bethe_initial_hybridization,
    discrete_hybridization,
    dmft_loop,
    fit_bath,
    oracle_matsubara_gf,
    restart,
    semicircle_density,
    semicircle_hilbert,
)


def one_body_solver(model, z):
    """Impurity GF of the quadratic part only; exact for ``U = 0``."""
    eye = np.eye(model.n_sites)
    g = np.array([np.linalg.inv(zz * eye - model.epsilon)[0, 0] for zz in z])
    return g, 0.0


def test_semicircle_density():
    assert np.isclose(semicircle_density(0.0), 1 / np.pi)
    assert semicircle_density(2.5) == 0.0
    assert np.isclose(quad(semicircle_density, -2, 2)[0], 1.0)


@pytest.mark.parametrize("z", [0.3j, 1.0 + 0.2j, -2.5 + 0.01j, 3.0 - 0.5j])
def test_hilbert_transform_closed_form(z):
    re = quad(lambda e: (semicircle_density(e) / (z - e)).real, -2, 2, epsabs=1e-13, limit=400)[0]
    im = quad(lambda e: (semicircle_density(e) / (z - e)).imag, -2, 2, epsabs=1e-13, limit=400)[0]
    assert abs(semicircle_hilbert(z) - (re + 1j * im)) < 1e-8


def test_grid_and_hybridization_validation():
    g = MatsubaraGrid(10.0, 4)
    assert np.allclose(g.frequencies, np.pi / 10 * np.array([1, 3, 5, 7]))
    with pytest.raises(ValueError):
        MatsubaraGrid(-1.0)
    with pytest.raises(ValueError):
        Hybridization(g, np.full(4, 0.1j))
    with pytest.raises(ValueError):
        Hybridization(g, np.full(3, -0.1j))


def test_fit_recovers_exact_poles():
    grid = MatsubaraGrid(50.0, 60)
    e, v = np.array([-1.0, 0.2, 1.5]), np.array([0.3, 0.5, 0.4])
    target = Hybridization(grid, discrete_hybridization(e, v, grid.points))
    fit = fit_bath(target, 3, restarts=8, seed=1)
    assert fit.residual < 1e-14
    assert np.allclose(fit.bath_onsite, e, atol=1e-6) and np.allclose(fit.bath_hopping, v, atol=1e-6)
    assert np.all(fit.bath_hopping >= 0)


def test_fit_is_reproducible():
    target = bethe_initial_hybridization(MatsubaraGrid())
    a = fit_bath(target, 4, restarts=4, seed=3)
    b = fit_bath(target, 4, restarts=4, seed=3)
    assert np.array_equal(a.bath_onsite, b.bath_onsite)


def test_noninteracting_start_is_a_fixed_point():
    # at U = 0 the semicircle solves Delta = G; one iteration changes Delta only by the fit error
    cfg = DmftConfig(u=0.0, restarts=8, max_iter=1)
    res = dmft_loop(cfg, solver=one_body_solver)
    it = res.history[0]
    assert it.change < 10 * np.sqrt(it.fit.residual) + 1e-6
    g, _ = oracle_matsubara_gf(it.fit.model(0.0), cfg.grid.points)
    assert np.abs(g - it.greens).max() < 1e-8


def test_history_round_trip_and_restart_is_bitwise():
    cfg = DmftConfig(u=0.0, n_b=3, restarts=3, max_iter=2, tol=0.0, grid=MatsubaraGrid(20.0, 30), mixing=0.3)
    first = dmft_loop(cfg, solver=one_body_solver)
    back = DmftResult.from_json(first.to_json())
    assert np.array_equal(back.hybridization.samples, first.hybridization.samples)
    assert back.config == first.config
    full = dmft_loop(DmftConfig(**{**cfg.__dict__, "max_iter": 4}), solver=one_body_solver)
    cont = dmft_loop(
        DmftConfig(**{**cfg.__dict__, "max_iter": 2}),
        start=back.hybridization,
        initial_fit=back.history[-1].fit,
        solver=one_body_solver,
    )
    assert np.array_equal(cont.hybridization.samples, full.hybridization.samples)


def test_restart_helper_uses_stored_state():
    cfg = DmftConfig(u=0.0, n_b=2, restarts=2, max_iter=1, tol=0.0, grid=MatsubaraGrid(20.0, 20))
    first = dmft_loop(cfg, solver=one_body_solver)
    again = restart(first, max_iter=1, restarts=2)
    assert again.config.max_iter == 1 and len(again.history) == 1


def test_config_validation():
    with pytest.raises(ValueError):
        DmftConfig(u=1.0, solver="magic")
    with pytest.raises(ValueError):
        DmftConfig(u=1.0, mixing=1.5)
