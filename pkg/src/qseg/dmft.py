"""Bethe-lattice DMFT: Matsubara bath fitting and the self-consistency loop.

The lattice has a semicircular density of half-bandwidth 2 (hopping 1), so
the self-consistency condition is simply ``Delta(z) = G(z)``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .operators import AimModel

log = logging.getLogger(__name__)


class FitError(RuntimeError):
    """Every local optimisation diverged; ``best`` holds the best parameters seen."""

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


@dataclass(frozen=True)
class MatsubaraGrid:
    """Fermionic frequencies ``(2n+1) pi / beta`` for ``n < n_matsubara``."""

    beta: float = 100.0
    n_matsubara: int = 100

    def __post_init__(self):
        if self.beta <= 0 or self.n_matsubara < 1:
            raise ValueError("need beta > 0 and at least one frequency")

    @property
    def frequencies(self) -> np.ndarray:
        return (2 * np.arange(self.n_matsubara) + 1) * np.pi / self.beta

    @property
    def points(self) -> np.ndarray:
        return 1j * self.frequencies


@dataclass(frozen=True, eq=False)
class Hybridization:
    """Hybridization sampled on a Matsubara grid."""

    grid: MatsubaraGrid
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.shape != (self.grid.n_matsubara,):
            raise ValueError("one sample per Matsubara frequency expected")
        if np.any(s.imag >= 0):
            raise ValueError("Im Delta(i w_n) must be negative")
        object.__setattr__(self, "samples", s)

    def distance(self, other: "Hybridization", n: int | None = None) -> float:
        """Max-norm difference over the first ``n`` samples (all by default)."""
        return float(np.abs(self.samples[:n] - other.samples[:n]).max())

    def to_dict(self) -> dict:
        return {"re": self.samples.real.tolist(), "im": self.samples.imag.tolist()}

    @classmethod
    def from_dict(cls, grid: MatsubaraGrid, d: dict) -> "Hybridization":
        return cls(grid, np.array(d["re"]) + 1j * np.array(d["im"]))


def semicircle_density(omega) -> np.ndarray:
    """Bethe-lattice density ``sqrt(4 - w^2) / (2 pi)`` on ``|w| < 2``, zero outside."""
    w = np.asarray(omega, dtype=float)
    return np.sqrt(np.clip(4.0 - w**2, 0.0, None)) / (2 * np.pi)


def semicircle_hilbert(z) -> np.ndarray:
    """``(z - sqrt(z^2 - 4)) / 2`` on the branch that decays like ``1/z``.

    Writing the root as ``sqrt(z - 2) sqrt(z + 2)`` keeps the cut on
    ``[-2, 2]`` so the formula holds anywhere off the real segment.
    """
    z = np.asarray(z, dtype=complex)
    return (z - np.sqrt(z - 2) * np.sqrt(z + 2)) / 2


def bethe_initial_hybridization(grid: MatsubaraGrid) -> Hybridization:
    return Hybridization(grid, semicircle_hilbert(grid.points))


# ---------------------------------------------------------------------------
# bath fitting


@dataclass(frozen=True, eq=False)
class BathFitResult:
    """Pole positions ``bath_onsite`` and couplings ``bath_hopping`` of a discretised bath."""

    bath_onsite: np.ndarray
    bath_hopping: np.ndarray
    residual: float

    def hybridization(self, z) -> np.ndarray:
        return discrete_hybridization(self.bath_onsite, self.bath_hopping, z)

    def model(self, u: float) -> AimModel:
        """Half-filled impurity model with impurity level ``-u/2``."""
        return AimModel.from_bath(u, self.bath_onsite, self.bath_hopping)

    def to_dict(self) -> dict:
        return {
            "bath_onsite": self.bath_onsite.tolist(),
            "bath_hopping": self.bath_hopping.tolist(),
            "residual": self.residual,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BathFitResult":
        return cls(np.array(d["bath_onsite"], float), np.array(d["bath_hopping"], float), float(d["residual"]))


def discrete_hybridization(onsite, hopping, z) -> np.ndarray:
    """``sum_i |v_i|^2 / (z - e_i)``."""
    z = np.asarray(z, dtype=complex)
    e, v = np.asarray(onsite, float), np.asarray(hopping, float)
    return (v**2 / (z[..., None] - e)).sum(axis=-1)


def fit_distance(onsite, hopping, target: Hybridization) -> float:
    r = discrete_hybridization(onsite, hopping, target.grid.points) - target.samples
    return float(np.vdot(r, r).real)


def _objective(x, z, target):
    n = x.size // 2
    e, v = x[:n], x[n:]
    g = 1.0 / (z[:, None] - e)
    r = (v**2 * g).sum(axis=1) - target
    rc = np.conj(r)[:, None]
    grad_e = 2 * (rc * v**2 * g**2).real.sum(axis=0)
    grad_v = 2 * (rc * 2 * v * g).real.sum(axis=0)
    return float(np.vdot(r, r).real), np.concatenate([grad_e, grad_v])


def _canonical(x) -> tuple[np.ndarray, np.ndarray]:
    n = x.size // 2
    e, v = x[:n], np.abs(x[n:])
    order = np.lexsort((v, e))
    return e[order].copy(), v[order].copy()


def fit_bath(
    target: Hybridization,
    n_b: int = 7,
    restarts: int = 32,
    seed: int | None = 0,
    initial: BathFitResult | None = None,
    gtol: float = 1e-12,
    switch_margin: float = 0.5,
) -> BathFitResult:
    """Least-squares pole fit of ``target`` over the Matsubara samples.

    Multi-start BFGS with an analytic gradient; ``initial`` (for instance the
    previous DMFT iteration) is tried first and kept unless a random start
    beats its distance by more than the relative ``switch_margin``. The
    returned couplings are nonnegative and the poles ascending.

    Raises
    ------
    FitError
        If no start yields a finite objective.
    """
    if n_b < 1:
        raise ValueError("need at least one bath site")
    z = target.grid.points
    rng = np.random.default_rng(seed)
    # the spread of the target sets a natural energy scale for the initial poles
    scale = max(1.0, float(np.sqrt(np.abs(target.samples[-1] * z[-1]))))
    starts = []
    warm = initial is not None and initial.bath_onsite.size == n_b
    if warm:
        starts.append(np.concatenate([initial.bath_onsite, initial.bath_hopping]))
    for _ in range(restarts):
        e0 = np.sort(rng.uniform(-2 * scale, 2 * scale, n_b))
        v0 = rng.uniform(0.1, 1.0, n_b) * scale / np.sqrt(n_b)
        starts.append(np.concatenate([e0, v0]))
    results = []
    for x0 in starts:
        with np.errstate(all="ignore"):
            res = minimize(_objective, x0, args=(z, target.samples), jac=True, method="BFGS",
                           options={"gtol": gtol, "maxiter": 20000})
        if np.isfinite(res.fun):
            results.append((float(res.fun), res.x))
        else:
            results.append((np.inf, None))
    finite = [r for r in results if r[1] is not None]
    if not finite:
        raise FitError("bath fit diverged from every start")
    best_d, best = min(finite, key=lambda r: r[0])
    if warm and results[0][1] is not None and results[0][0] <= (1 + switch_margin) * best_d:
        # near-degenerate minima (mirror images of an asymmetric bath) would
        # otherwise make the loop hop between them
        best_d, best = results[0]
    e, v = _canonical(best)
    return BathFitResult(e, v, fit_distance(e, v, target))


# ---------------------------------------------------------------------------
# self-consistency


SOLVERS = ("oracle", "qseg")


@dataclass(frozen=True)
class DmftConfig:
    """Settings of one self-consistency run.

    ``qseg`` is a :class:`~qseg.pipeline.QsegConfig` used when
    ``solver == 'qseg'``.
    """

    u: float
    n_b: int = 7
    grid: MatsubaraGrid = field(default_factory=MatsubaraGrid)
    tol: float = 1e-4
    max_iter: int = 50
    mixing: float = 0.5
    solver: str = "oracle"
    restarts: int = 32
    seed: int = 0
    qseg: object = None

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}")
        if not 0.0 <= self.mixing <= 1.0:
            raise ValueError("mixing must lie in [0, 1]")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("u", "n_b", "tol", "max_iter", "mixing", "solver", "restarts", "seed")}
        d["beta"], d["n_matsubara"] = self.grid.beta, self.grid.n_matsubara
        d["qseg"] = None if self.qseg is None else self.qseg.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DmftConfig":
        from .pipeline import QsegConfig

        d = dict(d)
        d["grid"] = MatsubaraGrid(d.pop("beta"), d.pop("n_matsubara"))
        d["qseg"] = None if d.get("qseg") is None else QsegConfig.from_dict(d["qseg"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class DmftIteration:
    fit: BathFitResult
    e_gs: float
    hybridization: Hybridization
    greens: np.ndarray
    change: float

    def to_dict(self) -> dict:
        return {
            "fit": self.fit.to_dict(),
            "e_gs": self.e_gs,
            "hybridization": self.hybridization.to_dict(),
            "greens": {"re": self.greens.real.tolist(), "im": self.greens.imag.tolist()},
            "change": self.change,
        }

    @classmethod
    def from_dict(cls, grid, d) -> "DmftIteration":
        g = np.array(d["greens"]["re"]) + 1j * np.array(d["greens"]["im"])
        return cls(BathFitResult.from_dict(d["fit"]), float(d["e_gs"]),
                   Hybridization.from_dict(grid, d["hybridization"]), g, float(d["change"]))


@dataclass(frozen=True, eq=False)
class DmftResult:
    """Outcome of a loop; ``history[i].hybridization`` is the input of iteration ``i``."""

    config: DmftConfig
    hybridization: Hybridization
    history: list
    converged: bool

    @property
    def fit(self) -> BathFitResult:
        return self.history[-1].fit

    @property
    def model(self) -> AimModel:
        return self.fit.model(self.config.u)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "converged": self.converged,
            "hybridization": self.hybridization.to_dict(),
            "history": [it.to_dict() for it in self.history],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "DmftResult":
        cfg = DmftConfig.from_dict(d["config"])
        hist = [DmftIteration.from_dict(cfg.grid, it) for it in d["history"]]
        return cls(cfg, Hybridization.from_dict(cfg.grid, d["hybridization"]), hist, bool(d["converged"]))

    @classmethod
    def from_json(cls, text: str) -> "DmftResult":
        return cls.from_dict(json.loads(text))


def oracle_matsubara_gf(model: AimModel, z) -> tuple[np.ndarray, float]:
    """Impurity GF from exact diagonalisation at the points ``z``; also returns ``E_GS``."""
    from .ed import exact_greens_function

    r = exact_greens_function(model, None, 0.0, z=z, method="lanczos")
    return r.retarded, r.e_gs


def qseg_matsubara_gf(model: AimModel, z, config=None) -> tuple[np.ndarray, float]:
    """Impurity GF from the subspace-expansion solver at the points ``z``."""
    from .pipeline import QsegSolver

    solver = QsegSolver(model, config)
    g, l = solver.gf_parts(z)
    return g + l, solver.ground_state().energy


def impurity_solver(config: DmftConfig) -> Callable:
    if config.solver == "oracle":
        return oracle_matsubara_gf
    return lambda model, z: qseg_matsubara_gf(model, z, config.qseg)


def dmft_loop(
    config: DmftConfig,
    start: Hybridization | None = None,
    initial_fit: BathFitResult | None = None,
    solver: Callable | None = None,
) -> DmftResult:
    """Iterate fit, impurity solve and ``Delta_new = (1 - mixing) G + mixing Delta``.

    The loop starts from the semicircular hybridization unless ``start`` is
    given and stops once the max-norm change of the hybridization drops below
    ``config.tol``. A result with ``converged=False`` is returned when
    ``max_iter`` is exhausted.
    """
    grid = config.grid
    z = grid.points
    delta = start if start is not None else bethe_initial_hybridization(grid)
    solve = solver or impurity_solver(config)
    fit, history, converged = initial_fit, [], False
    for it in range(config.max_iter):
        fit = fit_bath(delta, config.n_b, config.restarts, config.seed, initial=fit)
        g, e_gs = solve(fit.model(config.u), z)
        new = (1 - config.mixing) * g + config.mixing * delta.samples
        change = float(np.abs(new - delta.samples).max())
        history.append(DmftIteration(fit, float(e_gs), delta, np.asarray(g), change))
        log.info("dmft iteration %d: D=%.3e change=%.3e E=%.6f", it, fit.residual, change, e_gs)
        delta = Hybridization(grid, new)
        if change < config.tol:
            converged = True
            break
    return DmftResult(config, delta, history, converged)


def restart(result: DmftResult, **overrides) -> DmftResult:
    """Continue a loop from the stored end point (same fit warm start)."""
    cfg = replace(result.config, **overrides)
    return dmft_loop(cfg, start=result.hybridization, initial_fit=result.history[-1].fit)
