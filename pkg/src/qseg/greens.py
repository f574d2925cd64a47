"""Green's functions from a Lanczos recursion inside the Krylov subspace."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .ground import DEFAULT_CUTOFF, DegenerateBasisError, GroundSolution, pruned_metric, pseudo_inverse

TERMINATIONS = ("b-small", "max-n", "negative-b2")


@dataclass(frozen=True, eq=False)
class KrylovCoefficients:
    """Continued-fraction data: ``a_0..a_n``, ``b_1..b_n`` and the weight ``norm0``."""

    a: np.ndarray
    b: np.ndarray
    terminated_reason: str
    norm0: float

    def __post_init__(self):
        if self.terminated_reason not in TERMINATIONS:
            raise ValueError(f"unknown termination {self.terminated_reason!r}")
        if len(self.b) not in (len(self.a) - 1, 0) and len(self.a):
            raise ValueError("need one fewer b than a")

    def to_dict(self) -> dict:
        return {
            "a": list(map(float, self.a)),
            "b": list(map(float, self.b)),
            "norm0": self.norm0,
            "terminated_reason": self.terminated_reason,
        }

    @classmethod
    def from_dict(cls, d) -> "KrylovCoefficients":
        return cls(np.array(d["a"], float), np.array(d["b"], float), d["terminated_reason"], float(d["norm0"]))

    def tridiagonal(self) -> np.ndarray:
        return np.diag(self.a) + np.diag(self.b, 1) + np.diag(self.b, -1)


def build_psi0_coefficients(s_psi, t, gs: GroundSolution | np.ndarray, cutoff: float = DEFAULT_CUTOFF):
    """Expansion of ``E|GS>`` in the Krylov basis: ``psi0 = S_psi^+ T phi``.

    Returns ``(psi0, norm0)`` with ``norm0 = psi0^dagger S_psi psi0``; ``psi0``
    itself is not normalised.
    """
    phi = gs.coefficients if isinstance(gs, GroundSolution) else np.asarray(gs)
    psi0 = pseudo_inverse(s_psi, cutoff) @ (np.asarray(t) @ phi)
    norm0 = float(np.vdot(psi0, s_psi @ psi0).real)
    return psi0, norm0


def lanczos_in_subspace(
    h_psi,
    s_psi,
    psi0,
    max_n: int = 50,
    tol_b: float = 1e-8,
    cutoff: float = DEFAULT_CUTOFF,
    norm0: float | None = None,
    reorthogonalize: bool = True,
    return_basis: bool = False,
):
    """Lanczos recursion with ``S_psi^+ H_psi`` in the ``S_psi`` metric.

    ``psi^{n+1} b_{n+1} = S^+ H psi^n - a_n psi^n - b_n psi^{n-1}`` with
    ``a_n = psi^n† H psi^n`` and ``b_{n+1}^2`` the squared ``S``-norm of the
    right-hand side. The start vector is normalised here; ``norm0`` defaults
    to its squared norm. Full reorthogonalisation in the ``S`` metric is on by
    default since a plain three-term recursion loses orthogonality after a
    few dozen steps. With ``return_basis`` the Lanczos vectors (as columns in
    the subspace coordinates) are returned as well.
    """
    s_psi = np.asarray(s_psi)
    h_psi = np.asarray(h_psi)
    _, x, _ = pruned_metric(s_psi, cutoff)
    sinv = x @ x.conj().T
    # projector onto the retained directions; discarded near-null components
    # carry no S-norm but would otherwise be amplified when normalising
    proj = x @ (x.conj().T @ s_psi)
    v = proj @ np.asarray(psi0, dtype=complex)
    nrm2 = float(np.vdot(v, s_psi @ v).real)
    if nrm2 <= 0:
        raise DegenerateBasisError("start vector has zero norm in the overlap metric")
    v = v / np.sqrt(nrm2)
    norm0 = nrm2 if norm0 is None else norm0
    basis, a, b = [v], [], []
    reason = "max-n"
    prev = np.zeros_like(v)
    for n in range(max_n):
        hv = h_psi @ v
        a.append(float(np.vdot(v, hv).real))
        r = sinv @ hv - a[-1] * v - (b[-1] * prev if b else 0)
        if reorthogonalize:
            q = np.array(basis).T
            for _ in range(2):
                r = r - q @ (q.conj().T @ (s_psi @ r))
        r = proj @ r
        b2 = float(np.vdot(r, s_psi @ r).real)
        if n == max_n - 1:
            break
        if b2 < 0 and b2 < -tol_b:
            reason = "negative-b2"
            break
        if b2 < tol_b:
            reason = "b-small"
            break
        b.append(np.sqrt(b2))
        prev, v = v, r / b[-1]
        basis.append(v)
    coeffs = KrylovCoefficients(np.array(a), np.array(b), reason, norm0)
    return (coeffs, np.array(basis).T) if return_basis else coeffs


def continued_fraction(coeffs: KrylovCoefficients, z) -> np.ndarray:
    """``norm0 / (z - a_0 - b_1^2 / (z - a_1 - ...))`` by backward recurrence."""
    z = np.asarray(z, dtype=complex)
    a, b = coeffs.a, coeffs.b
    if a.size == 0:
        return np.zeros_like(z)
    g = z - a[-1]
    for n in range(a.size - 2, -1, -1):
        g = z - a[n] - b[n] ** 2 / g
    return coeffs.norm0 / g


def combine_offdiagonal(g1, g2, g_aa, g_bb):
    """Off-diagonal element from the two composite-operator GFs and the diagonal ones."""
    return 0.5 * (g1 - 1j * g2 + (1j - 1) * (g_aa + g_bb))


@dataclass(frozen=True, eq=False)
class GreensFunctionResult:
    """GF on ``z = omega + i delta``; ``retarded = greater + lesser``, ``dos = -Im(retarded)/pi``."""

    omega: np.ndarray
    delta: float
    greater: np.ndarray
    lesser: np.ndarray
    retarded: np.ndarray
    dos: np.ndarray
    e_gs: float
    info: dict = field(default_factory=dict)

    @classmethod
    def from_parts(cls, omega, delta, greater, lesser, e_gs, info=None) -> "GreensFunctionResult":
        retarded = np.asarray(greater) + np.asarray(lesser)
        return cls(np.asarray(omega, float), float(delta), np.asarray(greater), np.asarray(lesser), retarded,
                   -retarded.imag / np.pi, float(e_gs), dict(info or {}))

    @property
    def grid(self) -> np.ndarray:
        return self.omega + 1j * self.delta

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["omega", "dos", "re_retarded", "im_retarded", "re_greater", "im_greater", "re_lesser", "im_lesser"])
        for row in zip(self.omega, self.dos, self.retarded, self.greater, self.lesser):
            om, d, r, g, l = row
            w.writerow([repr(float(om)), repr(float(d)), *(repr(float(x)) for x in (r.real, r.imag, g.real, g.imag, l.real, l.imag))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, delta: float, e_gs: float = float("nan")) -> "GreensFunctionResult":
        rows = list(csv.DictReader(io.StringIO(text)))
        col = lambda k: np.array([float(r[k]) for r in rows])
        g = col("re_greater") + 1j * col("im_greater")
        l = col("re_lesser") + 1j * col("im_lesser")
        return cls.from_parts(col("omega"), delta, g, l, e_gs)


def default_omega(lo: float = -8.0, hi: float = 8.0, n: int = 801) -> np.ndarray:
    return np.linspace(lo, hi, n)


def gf_from_coefficients(greater: KrylovCoefficients | None, lesser: KrylovCoefficients | None, e_gs: float, z):
    """``(G^>(z), G^<(z))`` with ``G^>(z) = CF(z + E_GS)`` and ``G^<(z) = -CF(E_GS - z)``."""
    z = np.asarray(z, dtype=complex)
    g = continued_fraction(greater, z + e_gs) if greater is not None else np.zeros_like(z)
    l = -continued_fraction(lesser, e_gs - z) if lesser is not None else np.zeros_like(z)
    return g, l
