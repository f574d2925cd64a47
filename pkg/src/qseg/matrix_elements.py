"""Overlap primitives and assembly of the subspace matrices.

Every subspace matrix element is a linear combination of primitives

    <phi_0| A^dagger P_mid B |phi_0>,

where ``A`` (bra side) and ``B`` (ket side) are products of basis-state
circuits and Pauli strings coming from the Jordan-Wigner expansion of the
excitation operators, and ``P_mid`` is one Pauli string of ``H`` or absent.
Primitives are evaluated either directly on statevectors or through the
multi-fidelity protocol that only uses state fidelities. For large runs the
``direct`` assembly works with whole basis vectors instead, which gives the
same matrices because the primitive sum is linear.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .basis import BasisLabel, BasisSpec, StepCircuits, generate_basis
from .circuits import (
    REFERENCES,
    build_reference_state,
    build_superposition_prep,
    reference_index,
    reference_occupation,
)
from .operators import (
    AimModel,
    OperatorSum,
    PauliString,
    build_aim_hamiltonian,
    jordan_wigner_annihilation,
    jordan_wigner_creation,
    occupations,
    sector_basis,
)
from .statevector import estimate_fidelity, run_circuit_inplace

log = logging.getLogger(__name__)

CACHE_VERSION = 1
CONDITION_TOL = 1e-10
MODES = ("direct", "primitive", "fidelity")


class ConfigurationError(ValueError):
    """No reference state satisfies the protocol conditions."""


class ProtocolError(RuntimeError):
    """A protocol condition failed in exact emulation."""


# ---------------------------------------------------------------------------
# jobs


class Evolve(NamedTuple):
    role: str
    l: int
    k: int


class Pauli(NamedTuple):
    letters: str


@dataclass(frozen=True)
class PrimitiveJob:
    """One bracket ``<phi_0| A^dagger P_mid B |phi_0>``.

    ``bra`` and ``ket`` list the operators of ``A`` and ``B`` in the order
    they act on ``|phi_0>``.
    """

    bra: tuple = ()
    ket: tuple = ()
    middle: str | None = None

    def adjoint(self) -> "PrimitiveJob":
        return PrimitiveJob(self.ket, self.bra, self.middle)

    def pauli_strings(self) -> list[str]:
        out = [op.letters for op in self.bra + self.ket if isinstance(op, Pauli)]
        if self.middle is not None:
            out.append(self.middle)
        return out

    def degrees(self, n_sites: int) -> tuple[int, int]:
        """Number of X/Y letters on spin-up and on spin-down qubits."""
        up = down = 0
        for s in self.pauli_strings():
            up += sum(c in "XY" for c in s[:n_sites])
            down += sum(c in "XY" for c in s[n_sites:])
        return up, down

    def degree(self, n_sites: int) -> int:
        return sum(self.degrees(n_sites))

    @property
    def key(self) -> str:
        return json.dumps([list(map(list, self.bra)), list(map(list, self.ket)), self.middle])

    def canonical(self) -> tuple["PrimitiveJob", bool]:
        """Representative of ``{job, adjoint}`` and whether the value must be conjugated."""
        adj = self.adjoint()
        return (adj, True) if adj.key < self.key else (self, False)


# ---------------------------------------------------------------------------
# evaluation context


class PrimitiveContext:
    """Model, occupation and basis specs shared by all primitives of a run.

    Circuits and the origin state are built lazily and reused.
    """

    def __init__(
        self,
        model: AimModel,
        n_up: int,
        n_down: int,
        gs_spec: BasisSpec,
        gf_spec: BasisSpec | None = None,
        orbitals: str = "hartree",
    ):
        self.model, self.n_up, self.n_down, self.orbitals = model, n_up, n_down, orbitals
        self.specs = {"ground": gs_spec}
        if gf_spec is not None:
            self.specs["krylov"] = gf_spec
        self._steps = {}

    def __getstate__(self):
        return {"model": self.model, "n_up": self.n_up, "n_down": self.n_down, "specs": self.specs, "orbitals": self.orbitals}

    def __setstate__(self, d):
        self.__init__(d["model"], d["n_up"], d["n_down"], d["specs"]["ground"], d["specs"].get("krylov"), d["orbitals"])

    @property
    def n_sites(self) -> int:
        return self.model.n_sites

    def fingerprint(self) -> str:
        doc = {
            "model": self.model.to_dict(),
            "sector": [self.n_up, self.n_down],
            "orbitals": self.orbitals,
            "specs": {k: v.to_dict() for k, v in self.specs.items()},
        }
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]

    def steps(self, role: str) -> StepCircuits:
        if role not in self._steps:
            self._steps[role] = StepCircuits(self.model, self.specs[role])
        return self._steps[role]

    @cached_property
    def origin(self) -> np.ndarray:
        v = np.zeros(1 << self.model.n_qubits, dtype=complex)
        v[0] = 1.0
        return run_circuit_inplace(v, build_reference_state(self.model, self.n_up, self.n_down, self.orbitals))

    @cached_property
    def sector_states(self) -> np.ndarray:
        return sector_basis(self.n_sites, self.n_up, self.n_down)

    @cached_property
    def gs_sector_rows(self) -> np.ndarray:
        """Ground-state basis restricted to the origin's sector (computed once)."""
        keep = self.sector_states
        return generate_basis(self.specs["ground"], self.model, self.origin, keep=keep, steps=self.steps("ground"))

    @cached_property
    def hamiltonian(self) -> OperatorSum:
        return build_aim_hamiltonian(self.model)

    @cached_property
    def hamiltonian_sparse(self) -> sp.csr_matrix:
        return self.hamiltonian.to_sparse()

    def sector_hamiltonian(self, indices) -> sp.csr_matrix:
        return self.hamiltonian_sparse[indices][:, indices].tocsr()

    def apply_ops(self, ops: Sequence, vec: np.ndarray, inverse: bool = False) -> np.ndarray:
        """Apply ``ops`` in order (or their inverses in reverse order) to a copy of ``vec``."""
        v = np.array(vec, dtype=complex)
        seq = reversed(ops) if inverse else ops
        for op in seq:
            if isinstance(op, Pauli) or (len(op) == 1):
                v = PauliString(op[0]).apply(v)
            else:
                self.steps(op[0]).run_label(v, BasisLabel(op[1], op[2]), inverse)
        return v

    def middle(self, job: PrimitiveJob, v: np.ndarray) -> np.ndarray:
        return v if job.middle is None else PauliString(job.middle).apply(v)


def _as_ops(ops):
    out = []
    for op in ops:
        op = tuple(op)
        out.append(Pauli(*op) if len(op) == 1 else Evolve(*op))
    return tuple(out)


def primitive_overlap_direct(job: PrimitiveJob, ctx: PrimitiveContext) -> complex:
    """Evaluate the bracket by building both sides as statevectors."""
    bra = ctx.apply_ops(_as_ops(job.bra), ctx.origin)
    ket = ctx.middle(job, ctx.apply_ops(_as_ops(job.ket), ctx.origin))
    return complex(np.vdot(bra, ket))


# ---------------------------------------------------------------------------
# multi-fidelity protocol


@dataclass(frozen=True)
class ReferenceChoice:
    """Reference states of one primitive.

    ``r_state`` names the ket-side reference (a block-invariant state). When
    ``<R|W|R>`` vanishes, the bra side uses the computational basis state
    ``bra_index`` carrying the largest weight of ``W|R>``; ``r_r`` and
    ``theta_r`` describe ``<R_bra|W|R> = r_r exp(i theta_r)``.
    """

    r_state: str
    ket_index: int
    bra_index: int
    r_r: float
    theta_r: float

    @property
    def auxiliary(self) -> bool:
        return self.bra_index != self.ket_index


def _far_enough(occ, ref_occ, degrees, total_only: bool) -> bool:
    if total_only:
        return abs(sum(occ) - sum(ref_occ)) > sum(degrees)
    return abs(occ[0] - ref_occ[0]) > degrees[0] or abs(occ[1] - ref_occ[1]) > degrees[1]


def candidate_references(n_up: int, n_down: int, n_sites: int, degrees) -> list[str]:
    """References keeping ``<R|W|phi_0>`` and ``<phi_0|W|R>`` zero, preferred first.

    The total particle-number rule (empty state first, then the filled one) is
    tried before the spin-resolved rule, which also admits the two
    single-spin-filled states.
    """
    occ = (n_up, n_down)
    out = [r for r in ("zeros", "ones") if _far_enough(occ, reference_occupation(r, n_sites), degrees, True)]
    for r in REFERENCES:
        if r not in out and _far_enough(occ, reference_occupation(r, n_sites), degrees, False):
            out.append(r)
    return out


def choose_reference(job: PrimitiveJob, ctx: PrimitiveContext, min_overlap: float = 0.05) -> ReferenceChoice:
    n = ctx.n_sites
    degrees = job.degrees(n)
    cands = candidate_references(ctx.n_up, ctx.n_down, n, degrees)
    if not cands:
        raise ConfigurationError(
            f"no reference state separates sector ({ctx.n_up}, {ctx.n_down}) from a degree-{sum(degrees)} primitive on {n} sites"
        )
    bra_ops, ket_ops = _as_ops(job.bra), _as_ops(job.ket)
    dim = 1 << ctx.model.n_qubits
    best = None
    for name in cands:
        idx = reference_index(name, n)
        r = np.zeros(dim, dtype=complex)
        r[idx] = 1.0
        w_ket = ctx.middle(job, ctx.apply_ops(ket_ops, r))
        rho = complex(np.vdot(ctx.apply_ops(bra_ops, r), w_ket))
        if abs(rho) >= min_overlap:
            return ReferenceChoice(name, idx, idx, abs(rho), float(np.angle(rho)))
        # W|R> in the local basis; pick its largest component among allowed sectors
        w = ctx.apply_ops(bra_ops, w_ket, inverse=True)
        nu, nd = occupations(n, np.arange(dim))
        ok = (np.abs(nu - ctx.n_up) > degrees[0]) | (np.abs(nd - ctx.n_down) > degrees[1])
        mag = np.where(ok, np.abs(w), 0.0)
        j = int(np.argmax(mag))
        if best is None or mag[j] > best.r_r:
            best = ReferenceChoice(name, idx, j, float(abs(w[j])), float(np.angle(w[j])))
    if best is None or best.r_r < 1e-6:
        raise ConfigurationError(
            f"reference overlap vanishes for every admissible reference (sector ({ctx.n_up}, {ctx.n_down}), job {job.key})"
        )
    return best


@dataclass(frozen=True)
class FidelityEstimate:
    value: complex
    fidelities: tuple  # F1, F2, F3
    reference: ReferenceChoice
    degenerate: bool = False


def _superposition(ctx: PrimitiveContext, name: str, index: int, phase: float) -> np.ndarray:
    """``(|phi_0> + e^{i phase}|R>)/sqrt(2)``: by circuit for block references, else built directly."""
    if name is not None:
        v = np.zeros(1 << ctx.model.n_qubits, dtype=complex)
        v[0] = 1.0
        return run_circuit_inplace(v, build_superposition_prep(ctx.model, ctx.n_up, ctx.n_down, name, phase, ctx.orbitals))
    v = ctx.origin.copy()
    v[index] += np.exp(1j * phase)
    return v / np.sqrt(2)


def primitive_overlap_multifidelity(
    job: PrimitiveJob,
    ctx: PrimitiveContext,
    shots: int | None = None,
    seed=None,
    check: bool = True,
    degenerate_tol: float = 1e-24,
) -> FidelityEstimate:
    """Recover the bracket ``z`` from three fidelities.

    With ``rho = <R_a|W|R_b>``,

        F1 = |<+_a| W |+_b>|^2,   F2 = |z|^2,   F3 = |<+_a| W |+_b^i>|^2,

    where ``|+_b^i>`` carries the reference with phase ``i``. Then
    ``Re(z conj(rho)) = (4 F1 - F2 - |rho|^2)/2`` and the imaginary part
    follows from ``F3`` in the same way.
    """
    ref = choose_reference(job, ctx)
    bra_ops, ket_ops = _as_ops(job.bra), _as_ops(job.ket)
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2**63 - 1, size=3) if shots is not None else (None,) * 3

    def side(ops, v, mid=False):
        out = ctx.apply_ops(ops, v)
        return ctx.middle(job, out) if mid else out

    a_phi = side(bra_ops, ctx.origin)
    b_phi = side(ket_ops, ctx.origin, True)
    if check:
        dim = a_phi.size
        r_a = np.zeros(dim, dtype=complex)
        r_a[ref.bra_index] = 1.0
        r_b = np.zeros(dim, dtype=complex)
        r_b[ref.ket_index] = 1.0
        c1 = abs(np.vdot(side(bra_ops, r_a), b_phi))
        c2 = abs(np.vdot(a_phi, side(ket_ops, r_b, True)))
        if max(c1, c2) > CONDITION_TOL:
            raise ProtocolError(f"reference couples to phi_0 ({max(c1, c2):.2e})")
    bra_name = ref.r_state if not ref.auxiliary else None
    a_plus = side(bra_ops, _superposition(ctx, bra_name, ref.bra_index, 0.0))
    b_plus = side(ket_ops, _superposition(ctx, ref.r_state, ref.ket_index, 0.0), True)
    b_plus_i = side(ket_ops, _superposition(ctx, ref.r_state, ref.ket_index, np.pi / 2), True)
    f1 = estimate_fidelity(a_plus, b_plus, shots, seeds[0])
    f2 = estimate_fidelity(a_phi, b_phi, shots, seeds[1])
    f3 = estimate_fidelity(a_plus, b_plus_i, shots, seeds[2])
    r2 = ref.r_r**2
    if f2 < degenerate_tol:
        return FidelityEstimate(0j, (f1, f2, f3), ref, True)
    re = (4 * f1 - f2 - r2) / 2
    im = (4 * f3 - f2 - r2) / 2
    value = complex(re, im) * np.exp(1j * ref.theta_r) / ref.r_r
    return FidelityEstimate(value, (f1, f2, f3), ref)


# ---------------------------------------------------------------------------
# cache and parallel evaluation


class PrimitiveCache:
    """Append-only JSON-lines store of evaluated primitives.

    The first line is a header with the format version; each further line is
    ``{"key": ..., "re": ..., "im": ...}``. Keys include the run fingerprint.
    """

    def __init__(self, path):
        self.path = os.fspath(path)
        self.values: dict[str, complex] = {}
        if os.path.exists(self.path):
            with open(self.path) as fh:
                header = json.loads(fh.readline() or "{}")
                if header.get("version") != CACHE_VERSION:
                    raise ValueError(f"cache {self.path} has unsupported version {header.get('version')}")
                for line in fh:
                    if not line.strip():
                        continue
                    try:
                        rec = json.loads(line)
                    except json.JSONDecodeError:
                        # a partially written last record after an interrupt
                        log.warning("skipping malformed cache record in %s", self.path)
                        continue
                    self.values[rec["key"]] = complex(rec["re"], rec["im"])
        else:
            os.makedirs(os.path.dirname(self.path) or ".", exist_ok=True)
            with open(self.path, "w") as fh:
                fh.write(json.dumps({"format": "qseg-primitives", "version": CACHE_VERSION}) + "\n")

    def __contains__(self, key):
        return key in self.values

    def __getitem__(self, key):
        return self.values[key]

    def __len__(self):
        return len(self.values)

    def update(self, items: dict):
        with open(self.path, "a") as fh:
            for k, v in items.items():
                self.values[k] = v
                fh.write(json.dumps({"key": k, "re": v.real, "im": v.imag}) + "\n")


_WORKER_CTX = None


def _init_worker(ctx):
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _eval_one(args):
    job, method, shots, seed = args
    ctx = _WORKER_CTX
    if method == "primitive":
        return primitive_overlap_direct(job, ctx)
    return primitive_overlap_multifidelity(job, ctx, shots=shots, seed=seed, check=shots is None).value


def _job_seed(seed, key: str):
    if seed is None:
        return None
    return int(hashlib.sha256(f"{seed}:{key}".encode()).hexdigest()[:15], 16)


def evaluate_jobs(
    ctx: PrimitiveContext,
    jobs: Sequence[PrimitiveJob],
    method: str = "primitive",
    shots: int | None = None,
    seed=None,
    workers: int = 1,
    cache: PrimitiveCache | None = None,
) -> dict[str, complex]:
    """Values of all distinct primitives keyed by ``job.key``.

    Adjoint pairs are evaluated once. Each job is computed independently with a
    seed derived from its key, so results do not depend on ``workers``.
    """
    if method not in ("primitive", "fidelity"):
        raise ValueError("method must be 'primitive' or 'fidelity'")
    prefix = f"{ctx.fingerprint()}|{method}|{shots}|{seed}|"
    canon: dict[str, tuple] = {}
    for job in jobs:
        rep, conj = job.canonical()
        canon[job.key] = (rep, conj)
    todo = {}
    for rep, _ in canon.values():
        if rep.key not in todo and (cache is None or prefix + rep.key not in cache):
            todo[rep.key] = rep
    keys = sorted(todo)
    args = [(todo[k], method, shots, _job_seed(seed, k)) for k in keys]
    if workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(ctx,)) as pool:
            vals = list(pool.map(_eval_one, args, chunksize=max(1, len(args) // (8 * workers))))
    else:
        _init_worker(ctx)
        vals = [_eval_one(a) for a in args]
    fresh = dict(zip(keys, vals))
    if cache is not None and fresh:
        cache.update({prefix + k: v for k, v in fresh.items()})
    out = {}
    for key, (rep, conj) in canon.items():
        v = fresh[rep.key] if rep.key in fresh else cache[prefix + rep.key]
        out[key] = np.conj(v) if conj else v
    return out


# ---------------------------------------------------------------------------
# assembly


def _nontrivial_terms(op: OperatorSum):
    const, terms = 0j, []
    for letters, c in op.terms.items():
        if set(letters) == {"I"}:
            const += c
        else:
            terms.append((letters, c))
    return const, sorted(terms)


def _sector_of(n_sites: int, vec: np.ndarray, tol: float = 1e-14):
    idx = np.flatnonzero(np.abs(vec) > tol)
    nu, nd = occupations(n_sites, idx)
    if idx.size == 0 or np.unique(nu).size != 1 or np.unique(nd).size != 1:
        return None
    return int(nu[0]), int(nd[0])


def _direct_matrices(ctx: PrimitiveContext, vecs: np.ndarray, keep) -> tuple[np.ndarray, np.ndarray]:
    h = ctx.sector_hamiltonian(keep) if keep is not None else ctx.hamiltonian_sparse
    s = vecs.conj() @ vecs.T
    hm = vecs.conj() @ (h @ vecs.T)
    return _hermitize(hm), _hermitize(s)


def _hermitize(m):
    return (m + m.conj().T) / 2


def gs_basis_vectors(ctx: PrimitiveContext, keep=None) -> np.ndarray:
    """Ground-state basis rows, full length or restricted to ``keep``."""
    sector = ctx.sector_states
    rows = ctx.gs_sector_rows
    if keep is not None and np.array_equal(keep, sector):
        return rows
    full = np.zeros((rows.shape[0], 1 << ctx.model.n_qubits), dtype=complex)
    full[:, sector] = rows
    return full if keep is None else full[:, keep]


def assemble_gs_matrices(
    ctx: PrimitiveContext,
    mode: str = "direct",
    shots: int | None = None,
    seed=None,
    workers: int = 1,
    cache: PrimitiveCache | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """``(H, S)`` of the ground-state basis; both Hermitian, of size ``n_phi``."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    labels = ctx.specs["ground"].labels
    if mode == "direct":
        keep = sector_basis(ctx.n_sites, ctx.n_up, ctx.n_down)
        return _direct_matrices(ctx, gs_basis_vectors(ctx, keep), keep)
    const, terms = _nontrivial_terms(ctx.hamiltonian)
    n = len(labels)
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    jobs = {}
    for i, j in pairs:
        bra, ket = (Evolve("ground", *labels[i]),), (Evolve("ground", *labels[j]),)
        jobs[(i, j, None)] = PrimitiveJob(bra, ket)
        for letters, _ in terms:
            jobs[(i, j, letters)] = PrimitiveJob(bra, ket, letters)
    method = "primitive" if mode == "primitive" else "fidelity"
    vals = evaluate_jobs(ctx, list(jobs.values()), method, shots, seed, workers, cache)
    s = np.zeros((n, n), dtype=complex)
    h = np.zeros((n, n), dtype=complex)
    for i, j in pairs:
        s[i, j] = vals[jobs[(i, j, None)].key]
        h[i, j] = const * s[i, j] + sum(c * vals[jobs[(i, j, l)].key] for l, c in terms)
        s[j, i], h[j, i] = np.conj(s[i, j]), np.conj(h[i, j])
    return h, s


@dataclass(frozen=True, eq=False)
class Excitation:
    """A single-particle excitation ``sum_a w_a c_a^dagger`` or its adjoint.

    ``kind='greater'`` applies the creation form to the ground state,
    ``kind='lesser'`` the annihilation form.
    """

    weights: tuple  # ((site, weight), ...)
    spin: str = "up"
    kind: str = "greater"

    def __post_init__(self):
        if self.kind not in ("greater", "lesser"):
            raise ValueError("kind must be 'greater' or 'lesser'")

    @classmethod
    def single(cls, site: int, spin: str = "up", kind: str = "greater") -> "Excitation":
        return cls(((site, 1.0),), spin, kind)

    def operator(self, n_sites: int) -> OperatorSum:
        op = OperatorSum(2 * n_sites)
        for site, w in self.weights:
            if self.kind == "greater":
                op = op + jordan_wigner_creation(site, self.spin, n_sites) * w
            else:
                op = op + jordan_wigner_annihilation(site, self.spin, n_sites) * np.conj(w)
        return op.simplify()


@dataclass(frozen=True, eq=False)
class KrylovMatrices:
    h: np.ndarray
    s: np.ndarray
    t: np.ndarray  # <psi_i | E phi_b>, shape (n_psi, n_phi)


def assemble_krylov_matrices(
    ctx: PrimitiveContext,
    gs_coefficients: np.ndarray,
    excitation: Excitation,
    mode: str = "direct",
    shots: int | None = None,
    seed=None,
    workers: int = 1,
    cache: PrimitiveCache | None = None,
) -> KrylovMatrices:
    """``H_psi``, ``S_psi`` and the transition block for the excited basis.

    The basis is ``|psi_j> = V_j E |GS>`` with ``|GS> = sum_a phi_a |phi_a>``.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if "krylov" not in ctx.specs:
        raise ValueError("context has no Krylov spec")
    n = ctx.n_sites
    exc = excitation.operator(n)
    phi = np.asarray(gs_coefficients, dtype=complex)
    gs_labels = ctx.specs["ground"].labels
    kr_labels = ctx.specs["krylov"].labels
    if mode == "direct":
        gvecs = gs_basis_vectors(ctx)
        e_phi = np.array([exc.apply(v) for v in gvecs])
        chi0 = phi @ e_phi
        sector = _sector_of(n, chi0)
        keep = sector_basis(n, *sector) if sector is not None else None
        psi = generate_basis(ctx.specs["krylov"], ctx.model, chi0, keep=keep, steps=ctx.steps("krylov"))
        h, s = _direct_matrices(ctx, psi, keep)
        t = psi.conj() @ (e_phi[:, keep] if keep is not None else e_phi).T
        return KrylovMatrices(h, s, t)

    const, terms = _nontrivial_terms(ctx.hamiltonian)
    strings = sorted(exc.terms.items())
    nphi, npsi = len(gs_labels), len(kr_labels)

    def side(a, s_letters, i=None):
        ops = (Evolve("ground", *gs_labels[a]), Pauli(s_letters))
        return ops if i is None else ops + (Evolve("krylov", *kr_labels[i]),)

    jobs = []
    index = []
    for i in range(npsi):
        for j in range(i, npsi):
            for a in range(nphi):
                for b in range(nphi):
                    for s1, c1 in strings:
                        for s2, c2 in strings:
                            w = np.conj(c1) * c2
                            bra, ket = side(a, s1, i), side(b, s2, j)
                            jobs.append(PrimitiveJob(bra, ket))
                            index.append(("s", i, j, a, b, w, None))
                            for letters, hc in terms:
                                jobs.append(PrimitiveJob(bra, ket, letters))
                                index.append(("h", i, j, a, b, w * hc, None))
    for i in range(npsi):
        for a in range(nphi):
            for b in range(nphi):
                for s1, c1 in strings:
                    for s2, c2 in strings:
                        jobs.append(PrimitiveJob(side(a, s1, i), side(b, s2)))
                        index.append(("t", i, b, a, None, np.conj(c1) * c2, None))
    method = "primitive" if mode == "primitive" else "fidelity"
    vals = evaluate_jobs(ctx, jobs, method, shots, seed, workers, cache)
    s = np.zeros((npsi, npsi), dtype=complex)
    h = np.zeros((npsi, npsi), dtype=complex)
    t = np.zeros((npsi, nphi), dtype=complex)
    for job, (tag, i, j, a, b, w, _) in zip(jobs, index):
        v = vals[job.key]
        if tag == "s":
            contrib = np.conj(phi[a]) * phi[b] * w * v
            s[i, j] += contrib
            h[i, j] += const * contrib
        elif tag == "h":
            h[i, j] += np.conj(phi[a]) * phi[b] * w * v
        else:
            # here j is the GS label b of the transition element
            t[i, j] += np.conj(phi[a]) * w * v
    iu = np.triu_indices(npsi, 1)
    s[iu[::-1]] = np.conj(s[iu])
    h[iu[::-1]] = np.conj(h[iu])
    return KrylovMatrices(_hermitize(h), _hermitize(s), t)


def count_primitives(n_phi: int, n_psi: int) -> int:
    """Brackets needed per Krylov matrix family, counting the upper triangle only."""
    return (n_psi + 1) * n_psi // 2 * n_phi**2
