"""Pauli-string algebra, Jordan-Wigner operators and the Anderson impurity model.

Qubit ``q`` (0-based) carries spin-orbital ``alpha = q + 1``. Site ``i`` (1-based)
with spin up lives on qubit ``i - 1`` and with spin down on qubit ``N + i - 1``.
Computational basis indices are big-endian: qubit 0 is the most significant bit,
so sorting indices sorts occupation bitstrings lexicographically.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np
import scipy.sparse as sp

_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


class SectorError(ValueError):
    """Raised when an operator leaks out of a fixed particle-number sector."""


def _bit(n_qubits: int, q: int) -> int:
    return 1 << (n_qubits - 1 - q)


def _parity(a):
    return np.bitwise_count(a) & 1


@dataclass(frozen=True)
class PauliString:
    """Product of single-qubit Pauli letters with a complex coefficient.

    Attributes
    ----------
    letters : str
        One of ``IXYZ`` per qubit, qubit 0 first.
    coeff : complex
        Scalar prefactor.
    """

    letters: str
    coeff: complex = 1.0

    def __post_init__(self):
        if any(c not in _LETTER_BITS for c in self.letters):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def degree(self) -> int:
        """Number of X/Y letters, i.e. how many qubits get flipped."""
        return sum(c in "XY" for c in self.letters)

    @property
    def masks(self) -> tuple[int, int]:
        x = z = 0
        n = self.n_qubits
        for q, c in enumerate(self.letters):
            bx, bz = _LETTER_BITS[c]
            if bx:
                x |= _bit(n, q)
            if bz:
                z |= _bit(n, q)
        return x, z

    def unit(self) -> "PauliString":
        """The same letters with coefficient 1 (a Hermitian unitary)."""
        return PauliString(self.letters, 1.0)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """Return ``coeff * P @ vec`` for a dense vector of length ``2**n``."""
        x, z = self.masks
        ny = self.letters.count("Y")
        idx = np.arange(vec.shape[0])
        signed = np.where(_parity(idx & z), -1.0, 1.0) * vec
        return (self.coeff * 1j**ny) * signed[idx ^ x]

    def to_sparse(self) -> sp.csr_matrix:
        x, z = self.masks
        ny = self.letters.count("Y")
        dim = 1 << self.n_qubits
        cols = np.arange(dim)
        data = (self.coeff * 1j**ny) * np.where(_parity(cols & z), -1.0, 1.0)
        return sp.csr_matrix((data, (cols ^ x, cols)), shape=(dim, dim))

    def __str__(self):
        return f"({self.coeff:.6g}) {self.letters}"


class OperatorSum:
    """Weighted sum of Pauli strings on a fixed number of qubits.

    Terms are stored as ``{letters: coeff}``. Pauli strings are Hermitian, so the
    sum is Hermitian exactly when every coefficient is real.
    """

    def __init__(self, n_qubits: int, terms=None, hermitian: bool = False):
        self.n_qubits = n_qubits
        self.terms: dict[str, complex] = {}
        self.hermitian = hermitian
        for t in terms or ():
            if t.n_qubits != n_qubits:
                raise ValueError("Pauli string length does not match qubit count")
            self.terms[t.letters] = self.terms.get(t.letters, 0) + complex(t.coeff)

    @classmethod
    def identity(cls, n_qubits: int, coeff: complex = 1.0) -> "OperatorSum":
        return cls(n_qubits, [PauliString("I" * n_qubits, coeff)])

    @classmethod
    def single(cls, n_qubits: int, letters_at: dict[int, str], coeff: complex = 1.0):
        chars = ["I"] * n_qubits
        for q, c in letters_at.items():
            chars[q] = c
        return cls(n_qubits, [PauliString("".join(chars), coeff)])

    def strings(self) -> list[PauliString]:
        return [PauliString(k, v) for k, v in self.terms.items()]

    def __iter__(self):
        return iter(self.strings())

    def __len__(self):
        return len(self.terms)

    def simplify(self, tol: float = 1e-14) -> "OperatorSum":
        out = OperatorSum(self.n_qubits, hermitian=self.hermitian)
        out.terms = {k: v for k, v in self.terms.items() if abs(v) > tol}
        return out

    def __add__(self, other: "OperatorSum") -> "OperatorSum":
        out = OperatorSum(self.n_qubits)
        out.terms = dict(self.terms)
        for k, v in other.terms.items():
            out.terms[k] = out.terms.get(k, 0) + v
        return out.simplify()

    def __sub__(self, other):
        return self + other * -1.0

    def __mul__(self, other):
        if isinstance(other, OperatorSum):
            return self._product(other)
        out = OperatorSum(self.n_qubits)
        out.terms = {k: v * other for k, v in self.terms.items()}
        return out

    __rmul__ = __mul__

    def _product(self, other: "OperatorSum") -> "OperatorSum":
        acc: dict[str, complex] = {}
        for ka, va in self.terms.items():
            for kb, vb in other.terms.items():
                letters, phase = _multiply_letters(ka, kb)
                acc[letters] = acc.get(letters, 0) + phase * va * vb
        out = OperatorSum(self.n_qubits)
        out.terms = acc
        return out.simplify()

    def adjoint(self) -> "OperatorSum":
        out = OperatorSum(self.n_qubits, hermitian=self.hermitian)
        out.terms = {k: np.conj(v) for k, v in self.terms.items()}
        return out

    def constant(self) -> complex:
        """Coefficient of the identity string."""
        return self.terms.get("I" * self.n_qubits, 0.0)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        out = np.zeros(vec.shape[0], dtype=complex)
        for t in self.strings():
            out += t.apply(vec)
        return out

    def to_sparse(self) -> sp.csr_matrix:
        dim = 1 << self.n_qubits
        parts = [t.to_sparse().tocoo() for t in self.strings()]
        if not parts:
            return sp.csr_matrix((dim, dim), dtype=complex)
        rows = np.concatenate([m.row for m in parts])
        cols = np.concatenate([m.col for m in parts])
        data = np.concatenate([m.data for m in parts])
        return sp.csr_matrix((data, (rows, cols)), shape=(dim, dim))

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def commutator(self, other: "OperatorSum") -> "OperatorSum":
        return self * other - other * self

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return all(abs(v.imag) <= tol for v in self.terms.values())

    def __repr__(self):
        return f"OperatorSum(n_qubits={self.n_qubits}, terms={len(self.terms)})"


def _multiply_letters(a: str, b: str) -> tuple[str, complex]:
    phase = 1.0 + 0j
    out = []
    for ca, cb in zip(a, b):
        if ca == "I":
            out.append(cb)
        elif cb == "I":
            out.append(ca)
        elif ca == cb:
            out.append("I")
        else:
            # single-qubit products: XY = iZ, YZ = iX, ZX = iY
            third = ({"X", "Y", "Z"} - {ca, cb}).pop()
            cyclic = (ca, cb) in {("X", "Y"), ("Y", "Z"), ("Z", "X")}
            phase *= 1j if cyclic else -1j
            out.append(third)
    return "".join(out), phase


# ---------------------------------------------------------------------------
# Jordan-Wigner


def spin_orbital(site: int, spin: str, n_sites: int) -> int:
    """0-based qubit index of ``(site, spin)``; ``site`` is 1-based."""
    if not 1 <= site <= n_sites:
        raise ValueError(f"site {site} outside [1, {n_sites}]")
    if spin not in ("up", "down"):
        raise ValueError(f"spin must be 'up' or 'down', got {spin!r}")
    return site - 1 if spin == "up" else n_sites + site - 1


def _ladder(qubit: int, n_qubits: int, create: bool) -> OperatorSum:
    zs = "Z" * qubit
    rest = "I" * (n_qubits - qubit - 1)
    # c^dagger = (X - iY)/2 with a Z string on all lower qubits
    return OperatorSum(
        n_qubits,
        [PauliString(zs + "X" + rest, 0.5), PauliString(zs + "Y" + rest, -0.5j if create else 0.5j)],
    )


def jordan_wigner_creation(site: int, spin: str, n_sites: int) -> OperatorSum:
    """Creation operator of ``(site, spin)`` as a sum of two Pauli strings."""
    return _ladder(spin_orbital(site, spin, n_sites), 2 * n_sites, create=True)


def jordan_wigner_annihilation(site: int, spin: str, n_sites: int) -> OperatorSum:
    return _ladder(spin_orbital(site, spin, n_sites), 2 * n_sites, create=False)


def creation_on_qubit(qubit: int, n_qubits: int) -> OperatorSum:
    return _ladder(qubit, n_qubits, create=True)


def annihilation_on_qubit(qubit: int, n_qubits: int) -> OperatorSum:
    return _ladder(qubit, n_qubits, create=False)


def number_operator(n_qubits: int) -> OperatorSum:
    """Total particle number ``sum_q (1 - Z_q)/2``."""
    total = OperatorSum.identity(n_qubits, n_qubits / 2)
    for q in range(n_qubits):
        total = total + OperatorSum.single(n_qubits, {q: "Z"}, -0.5)
    return total


# ---------------------------------------------------------------------------
# Anderson impurity model


@dataclass(frozen=True, eq=False)
class AimModel:
    """Anderson impurity model with density-density interaction on the impurities.

    ``epsilon`` is the ``N x N`` one-body matrix (impurities first), ``u`` the
    on-site repulsion acting on every impurity site.
    """

    n_imp: int
    n_b: int
    epsilon: np.ndarray
    u: float

    def __post_init__(self):
        eps = np.asarray(self.epsilon, dtype=float)
        n = self.n_imp + self.n_b
        if eps.shape != (n, n):
            raise ValueError(f"epsilon must be {n}x{n}, got {eps.shape}")
        if not np.allclose(eps, eps.T, atol=1e-12, rtol=0):
            raise ValueError("epsilon must be symmetric")
        object.__setattr__(self, "epsilon", eps)

    @property
    def n_sites(self) -> int:
        return self.n_imp + self.n_b

    @property
    def n_qubits(self) -> int:
        return 2 * self.n_sites

    @classmethod
    def from_bath(cls, u, onsite, hopping, impurity_energy=None) -> "AimModel":
        """Single-impurity star geometry; impurity level defaults to ``-u/2``."""
        onsite = np.asarray(onsite, dtype=float)
        hopping = np.asarray(hopping, dtype=float)
        n = 1 + onsite.size
        eps = np.zeros((n, n))
        eps[0, 0] = -u / 2 if impurity_energy is None else impurity_energy
        eps[1:, 1:] = np.diag(onsite)
        eps[0, 1:] = eps[1:, 0] = hopping
        return cls(1, onsite.size, eps, float(u))

    def to_dict(self) -> dict:
        return {
            "n_imp": self.n_imp,
            "n_b": self.n_b,
            "u": self.u,
            "epsilon": self.epsilon.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AimModel":
        n = d["n_imp"] + d["n_b"]
        return cls(d["n_imp"], d["n_b"], np.array(d["epsilon"], dtype=float).reshape(n, n), d["u"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "AimModel":
        return cls.from_dict(json.loads(text))


def build_quadratic_hamiltonian(model: AimModel) -> OperatorSum:
    n = model.n_sites
    h0 = OperatorSum(2 * n)
    for spin in ("up", "down"):
        cdag = [jordan_wigner_creation(i, spin, n) for i in range(1, n + 1)]
        c = [jordan_wigner_annihilation(i, spin, n) for i in range(1, n + 1)]
        for i in range(n):
            for j in range(n):
                if model.epsilon[i, j] != 0.0:
                    h0 = h0 + (cdag[i] * c[j]) * model.epsilon[i, j]
    h0 = h0.simplify()
    h0.hermitian = True
    return h0


def build_interaction(model: AimModel) -> OperatorSum:
    n = model.n_sites
    hint = OperatorSum(2 * n)
    for i in range(1, model.n_imp + 1):
        nu = jordan_wigner_creation(i, "up", n) * jordan_wigner_annihilation(i, "up", n)
        nd = jordan_wigner_creation(i, "down", n) * jordan_wigner_annihilation(i, "down", n)
        hint = hint + (nu * nd) * model.u
    hint = hint.simplify()
    hint.hermitian = True
    return hint


def build_aim_hamiltonian(model: AimModel) -> OperatorSum:
    """Jordan-Wigner image of the AIM Hamiltonian.

    The identity string carries the constant generated by the mapping, so the
    spectrum coincides with the fermionic one.
    """
    h = build_quadratic_hamiltonian(model) + build_interaction(model)
    h.hermitian = True
    return h


# ---------------------------------------------------------------------------
# particle-number sectors


def sector_basis(n_sites: int, n_up: int, n_down: int) -> np.ndarray:
    """Basis indices of the ``(n_up, n_down)`` sector, ascending."""
    if not (0 <= n_up <= n_sites and 0 <= n_down <= n_sites):
        raise ValueError("occupations outside [0, N]")
    nq = 2 * n_sites
    ups = [sum(_bit(nq, q) for q in c) for c in combinations(range(n_sites), n_up)]
    downs = [sum(_bit(nq, n_sites + q) for q in c) for c in combinations(range(n_sites), n_down)]
    idx = np.array([u | d for u in ups for d in downs], dtype=np.int64)
    idx.sort()
    assert idx.size == comb(n_sites, n_up) * comb(n_sites, n_down)
    return idx


def occupations(n_sites: int, index) -> tuple:
    """Spin-up and spin-down particle counts of basis indices."""
    index = np.asarray(index, dtype=np.int64)
    up = np.bitwise_count(index >> n_sites).astype(np.int64)
    return up, np.bitwise_count(index & ((1 << n_sites) - 1)).astype(np.int64)


def operator_to_sector_matrix(op: OperatorSum, n_up: int, n_down: int) -> np.ndarray:
    """Dense matrix of ``op`` inside the fixed ``(n_up, n_down)`` sector.

    Raises
    ------
    SectorError
        If ``op`` maps a sector state outside the sector.
    """
    if op.n_qubits % 2:
        raise ValueError("sector extraction needs an even number of qubits")
    n = op.n_qubits // 2
    basis = sector_basis(n, n_up, n_down)
    cols = op.to_sparse()[:, basis].tocsr()
    inside = cols[basis, :].toarray()
    outside = np.ones(cols.shape[0], dtype=bool)
    outside[basis] = False
    leak = sp.linalg.norm(cols[outside, :]) if outside.any() else 0.0
    if leak > 1e-12 * (1.0 + np.linalg.norm(inside)):
        raise SectorError(f"operator does not preserve sector ({n_up}, {n_down})")
    return inside
