"""End-to-end solver: ground state, Krylov bases and Green's functions."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .basis import BasisSpec
from .ground import DEFAULT_CUTOFF, GroundSolution, solve_generalized_eigenproblem
from .greens import (
    GreensFunctionResult,
    KrylovCoefficients,
    build_psi0_coefficients,
    combine_offdiagonal,
    default_omega,
    gf_from_coefficients,
    lanczos_in_subspace,
)
from .matrix_elements import (
    Excitation,
    PrimitiveCache,
    PrimitiveContext,
    assemble_gs_matrices,
    assemble_krylov_matrices,
)
from .operators import AimModel


@dataclass(frozen=True)
class QsegConfig:
    """Basis specs and numerical settings of one solve."""

    gs_spec: BasisSpec = field(default_factory=lambda: BasisSpec(0.1, 7, 3, "ground"))
    gf_spec: BasisSpec = field(default_factory=lambda: BasisSpec(0.1, 80, 0, "krylov"))
    mode: str = "direct"
    cutoff: float = DEFAULT_CUTOFF
    max_n: int = 50
    tol_b: float = 1e-8
    shots: int | None = None
    seed: int | None = None
    workers: int = 1
    orbitals: str = "hartree"

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("mode", "cutoff", "max_n", "tol_b", "shots", "seed", "workers", "orbitals")}
        d["gs_spec"] = self.gs_spec.to_dict()
        d["gf_spec"] = self.gf_spec.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "QsegConfig":
        d = dict(d)
        d["gs_spec"] = BasisSpec.from_dict(d["gs_spec"])
        d["gf_spec"] = BasisSpec.from_dict(d["gf_spec"])
        return cls(**d)

    @property
    def trotter_steps(self) -> int:
        """Trotter steps in the deepest matrix-element circuit (both sides counted)."""
        return 2 * (self.gs_spec.max_trotter_steps + self.gf_spec.max_trotter_steps)


class QsegSolver:
    """Impurity solver built on the subspace expansion.

    Results are cached per instance: the ground state once, Krylov
    coefficients once per excitation.
    """

    def __init__(self, model: AimModel, config: QsegConfig | None = None, sector=None, cache: PrimitiveCache | None = None):
        self.model = model
        self.config = config or QsegConfig()
        n = model.n_sites
        self.sector = tuple(sector) if sector is not None else (n // 2, n // 2)
        self.cache = cache
        gs_spec = replace(self.config.gs_spec, role="ground")
        gf_spec = replace(self.config.gf_spec, role="krylov")
        self.ctx = PrimitiveContext(model, *self.sector, gs_spec, gf_spec, self.config.orbitals)
        self._gs: GroundSolution | None = None
        self._krylov: dict = {}

    def _eval_kw(self):
        c = self.config
        return dict(mode=c.mode, shots=c.shots, seed=c.seed, workers=c.workers, cache=self.cache)

    def ground_state(self) -> GroundSolution:
        if self._gs is None:
            h, s = assemble_gs_matrices(self.ctx, **self._eval_kw())
            self._gs = solve_generalized_eigenproblem(h, s, self.config.cutoff)
        return self._gs

    def krylov(self, excitation: Excitation) -> KrylovCoefficients:
        key = (excitation.weights, excitation.spin, excitation.kind)
        if key not in self._krylov:
            gs = self.ground_state()
            mats = assemble_krylov_matrices(self.ctx, gs.coefficients, excitation, **self._eval_kw())
            psi0, norm0 = build_psi0_coefficients(mats.s, mats.t, gs, self.config.cutoff)
            if norm0 <= 1e-14:
                self._krylov[key] = KrylovCoefficients(np.zeros(0), np.zeros(0), "b-small", 0.0)
            else:
                self._krylov[key] = lanczos_in_subspace(
                    mats.h, mats.s, psi0, self.config.max_n, self.config.tol_b, self.config.cutoff, norm0
                )
        return self._krylov[key]

    def gf_parts(self, z, weights=((1, 1.0),), spin: str = "up"):
        """``(G^>(z), G^<(z))`` for the excitation ``sum_a w_a c_a^dagger``."""
        g = self.krylov(Excitation(tuple(weights), spin, "greater"))
        l = self.krylov(Excitation(tuple(weights), spin, "lesser"))
        return gf_from_coefficients(g, l, self.ground_state().energy, z)

    def greens_function(self, omega=None, delta: float = 0.1, site: int = 1, spin: str = "up") -> GreensFunctionResult:
        omega = default_omega() if omega is None else np.asarray(omega, float)
        g, l = self.gf_parts(omega + 1j * delta, ((site, 1.0),), spin)
        info = {"trotter_steps": self.config.trotter_steps, "ground_energy": self.ground_state().energy}
        return GreensFunctionResult.from_parts(omega, delta, g, l, self.ground_state().energy, info)

    def off_diagonal(self, alpha: int, beta: int, z, spin: str = "up"):
        """``(G^>_ab(z), G^<_ab(z))`` from two composite excitations and the diagonal GFs."""
        if alpha == beta:
            raise ValueError("off-diagonal element needs alpha != beta")
        parts = {
            tag: self.gf_parts(z, w, spin)
            for tag, w in (
                ("aa", ((alpha, 1.0),)),
                ("bb", ((beta, 1.0),)),
                ("1", ((alpha, 1.0), (beta, 1.0))),
                ("2", ((alpha, 1.0), (beta, 1j))),
            )
        }
        return tuple(combine_offdiagonal(parts["1"][i], parts["2"][i], parts["aa"][i], parts["bb"][i]) for i in (0, 1))


def compute_gf(
    model: AimModel,
    config: QsegConfig | None = None,
    site: int = 1,
    spin: str = "up",
    omega=None,
    delta: float = 0.1,
    sector=None,
    cache: PrimitiveCache | None = None,
) -> GreensFunctionResult:
    """Greater, lesser and retarded GF and DOS of one orbital on ``omega + i delta``."""
    return QsegSolver(model, config, sector, cache).greens_function(omega, delta, site, spin)


def off_diagonal_gf(
    model: AimModel,
    alpha: int,
    beta: int,
    config: QsegConfig | None = None,
    omega=None,
    delta: float = 0.1,
    spin: str = "up",
    sector=None,
) -> GreensFunctionResult:
    """Off-diagonal element ``G_ab`` packed like a diagonal result (``dos`` is ``-Im G_ab / pi``)."""
    omega = default_omega() if omega is None else np.asarray(omega, float)
    solver = QsegSolver(model, config, sector)
    g, l = solver.off_diagonal(alpha, beta, omega + 1j * delta, spin)
    return GreensFunctionResult.from_parts(omega, delta, g, l, solver.ground_state().energy)
