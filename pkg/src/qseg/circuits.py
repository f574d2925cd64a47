"""Circuit synthesis for the impurity model: orbital rotations, Trotter steps and state preparation."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .operators import AimModel
from .statevector import Circuit, Gate


@dataclass(frozen=True, eq=False)
class GivensDecomposition:
    """Eigen-decomposition of the one-body matrix as a Givens network.

    ``orbitals`` holds the eigenvectors (columns) with signs chosen so that
    ``orbitals == R_1 @ R_2 @ ... @ R_M`` exactly, where ``R_m`` rotates the
    adjacent modes ``(p, p + 1)`` by ``[[cos a, -sin a], [sin a, cos a]]``.
    The network lists those rotations in product order, grouped into ``N``
    brick-wall layers; a rotation by ``a`` is a ``GIVENS`` gate of angle ``2 a``.
    ``residual_phase`` is the global phase left over by the network; column
    signs are absorbed into ``orbitals`` so it is always zero here.
    """

    eigenvalues: np.ndarray
    orbitals: np.ndarray
    rotation_network: tuple  # layers of ((p, p + 1), a)
    residual_phase: float = 0.0

    @property
    def n_sites(self) -> int:
        return self.eigenvalues.size

    def rotations(self):
        return [r for layer in self.rotation_network for r in layer]

    def single_particle_matrix(self) -> np.ndarray:
        n = self.n_sites
        out = np.eye(n)
        for (p, q), a in self.rotations():
            out = out @ _rot(n, p, q, a)
        return out


def _rot(n, p, q, a):
    g = np.eye(n)
    g[p, p] = g[q, q] = np.cos(a)
    g[p, q] = -np.sin(a)
    g[q, p] = np.sin(a)
    return g


def _clements(u: np.ndarray):
    """Rectangular-mesh factorisation of a real orthogonal matrix.

    Returns ``(rotations, d)`` with ``u = R_1 ... R_M @ diag(d)`` and ``d``
    a vector of signs. Elements are nulled alternately from the right and the
    left so the rotations tile a brick wall of depth ``N``.
    """
    n = u.shape[0]
    u = u.copy()
    left, right = [], []
    for i in range(n - 1):
        if i % 2 == 0:
            for j in range(i + 1):
                row, col = n - 1 - j, i - j
                a = np.arctan2(-u[row, col], u[row, col + 1])
                u = u @ _rot(n, col, col + 1, a)
                right.append((col, a))
        else:
            for j in range(1, i + 2):
                row, col = n + j - i - 2, j - 1
                a = np.arctan2(-u[row, col], u[row - 1, col])
                u = _rot(n, row - 1, row, a) @ u
                left.append((row - 1, a))
    d = np.sign(np.diag(u))
    d[d == 0] = 1.0
    # u_orig = L_1^T ... L_m^T diag(d) R_k^T ... R_1^T, and diag(d) R(b) = R(d_p d_q b) diag(d)
    head = [(p, -a) for p, a in left]
    moved = [(p, -d[p] * d[p + 1] * a) for p, a in reversed(right)]
    return head + moved, d


def _pack_layers(rotations, n):
    """Group rotations (in product order) into brick-wall layers."""
    layers: list[list] = []
    frontier = [0] * n
    for p, a in rotations:
        pos = max(frontier[p], frontier[p + 1])
        if pos == len(layers):
            layers.append([])
        layers[pos].append(((p, p + 1), a))
        frontier[p] = frontier[p + 1] = pos + 1
    return layers


def decompose_quadratic(epsilon) -> GivensDecomposition:
    """Diagonalise ``epsilon`` and factor its eigenvectors into ``N`` Givens layers.

    Eigenvalues are ascending. Layers that the rectangular mesh leaves empty
    (only for ``N = 2``) are filled with an identity rotation on modes ``(0, 1)``
    so that every network has exactly ``N`` layers.
    """
    eps = np.asarray(epsilon, dtype=float)
    if eps.ndim != 2 or eps.shape[0] != eps.shape[1]:
        raise ValueError("epsilon must be square")
    if not np.allclose(eps, eps.T, atol=1e-12, rtol=0):
        raise ValueError("epsilon must be symmetric")
    n = eps.shape[0]
    evals, evecs = np.linalg.eigh(eps)
    if n == 1:
        return GivensDecomposition(evals, np.ones((1, 1)), tuple())
    rotations, d = _clements(evecs)
    evecs = evecs * d[None, :]
    layers = _pack_layers(rotations, n)
    while len(layers) < n:
        layers.append([((0, 1), 0.0)])
    decomp = GivensDecomposition(evals, evecs, tuple(tuple(l) for l in layers))
    if not np.allclose(decomp.single_particle_matrix(), evecs, atol=1e-10):
        raise RuntimeError("Givens factorisation failed to reproduce the eigenvectors")
    return decomp


# ---------------------------------------------------------------------------
# circuits


def orbital_rotation(decomp: GivensDecomposition, n_sites: int) -> Circuit:
    """Circuit of the many-body rotation taking local orbitals to eigen-orbitals.

    It maps ``c_j^dagger`` to ``sum_i Q_ij c_i^dagger`` on both spin blocks, i.e.
    this is the operator written ``C^dagger`` in the evolution formula.
    """
    nq = 2 * n_sites
    layers = []
    # the rightmost rotation acts first on a state
    for layer in reversed(decomp.rotation_network):
        gates = []
        for (p, q), a in layer:
            gates.append(Gate("GIVENS", (p, q), 2 * a))
            gates.append(Gate("GIVENS", (n_sites + p, n_sites + q), 2 * a))
        layers.append(gates)
    return Circuit(nq, layers)


def _interaction_half(model: AimModel, tau: float) -> Circuit:
    """``exp(-i tau U n_up n_down)`` on each impurity, exact including the phase."""
    n, u = model.n_sites, model.u
    gates = []
    for i in range(model.n_imp):
        a, b = i, n + i
        gates += [
            Gate("RZ", (a,), -tau * u / 2),
            Gate("RZ", (b,), -tau * u / 2),
            Gate("ZZ", (a, b), tau * u / 2),
            Gate("GPHASE", (), -tau * u / 4),
        ]
    return Circuit.from_gates(model.n_qubits, gates)


def _diagonal_phases(decomp: GivensDecomposition, n_sites: int, dt: float) -> Circuit:
    gates = []
    for j, e in enumerate(decomp.eigenvalues):
        for q in (j, n_sites + j):
            # diag(1, exp(-i dt e)) = exp(-i dt e / 2) RZ(-dt e)
            gates += [Gate("RZ", (q,), -dt * e), Gate("GPHASE", (), -dt * e / 2)]
    return Circuit.from_gates(2 * n_sites, gates)


@lru_cache(maxsize=64)
def _decomp_cached(key: bytes, n: int) -> GivensDecomposition:
    return decompose_quadratic(np.frombuffer(key).reshape(n, n))


def model_decomposition(model: AimModel) -> GivensDecomposition:
    return _decomp_cached(model.epsilon.tobytes(), model.n_sites)


def build_quadratic_evolution(model: AimModel, dt: float) -> Circuit:
    """Exact ``exp(-i dt H_0)`` through the eigen-orbital basis."""
    decomp = model_decomposition(model)
    rot = orbital_rotation(decomp, model.n_sites)
    return rot.inverse() + _diagonal_phases(decomp, model.n_sites, dt) + rot


def build_trotter_step(model: AimModel, dt: float) -> Circuit:
    """Symmetrised step ``exp(-i dt/2 H_int) exp(-i dt H_0) exp(-i dt/2 H_int)``."""
    half = _interaction_half(model, dt / 2)
    return half + build_quadratic_evolution(model, dt) + half


def _filled_qubits(n_sites, n_up, n_down):
    return list(range(n_up)) + [n_sites + j for j in range(n_down)]


ORBITALS = ("hartree", "bare")


def reference_epsilon(model: AimModel, orbitals: str = "hartree") -> np.ndarray:
    """One-body matrix whose Slater determinant serves as ``|phi_0>``.

    ``"bare"`` is the quadratic part of ``H`` itself. ``"hartree"`` adds the
    paramagnetic half-filling mean field ``U/2`` to each impurity level; for a
    particle-hole symmetric model this is the ground state of the ``U = 0``
    problem, which overlaps far better with the interacting ground state than
    the bare determinant (whose impurity level sits at ``-U/2``).
    """
    if orbitals == "bare":
        return model.epsilon
    if orbitals != "hartree":
        raise ValueError(f"orbitals must be one of {ORBITALS}")
    eps = model.epsilon.copy()
    idx = np.arange(model.n_imp)
    eps[idx, idx] += model.u / 2
    return eps


def reference_decomposition(model: AimModel, orbitals: str = "hartree") -> GivensDecomposition:
    eps = reference_epsilon(model, orbitals)
    return _decomp_cached(np.ascontiguousarray(eps).tobytes(), model.n_sites)


def build_reference_state(model: AimModel, n_up: int, n_down: int, orbitals: str = "hartree") -> Circuit:
    """Lowest-energy Slater determinant of the reference one-body matrix.

    The lowest ``n_up`` / ``n_down`` eigen-orbitals are filled and rotated to
    the local basis by one Givens network (``2N`` CNOT layers).
    """
    n = model.n_sites
    if not (0 <= n_up <= n and 0 <= n_down <= n):
        raise ValueError("occupations outside [0, N]")
    fill = Circuit.from_gates(model.n_qubits, [Gate("X", (q,)) for q in _filled_qubits(n, n_up, n_down)])
    return fill + orbital_rotation(reference_decomposition(model, orbitals), n)


def _fanout(root: int, targets: list[int]) -> list[Gate]:
    """CNOT tree copying ``root`` onto ``targets``; the holder set doubles each round."""
    have, todo, gates = [root], list(targets), []
    while todo:
        new = []
        for h in list(have):
            if not todo:
                break
            t = todo.pop(0)
            gates.append(Gate("CNOT", (h, t)))
            new.append(t)
        have += new
    return gates


REFERENCES = ("zeros", "ones", "up", "down")


def reference_occupation(reference: str, n_sites: int) -> tuple[int, int]:
    """Spin-resolved particle numbers of a block-invariant reference state.

    ``"up"`` fills every spin-up orbital and leaves spin down empty, ``"down"``
    the opposite. All four states are unchanged by the orbital rotation.
    """
    occ = {"zeros": (0, 0), "ones": (n_sites, n_sites), "up": (n_sites, 0), "down": (0, n_sites)}
    if reference not in occ:
        raise ValueError(f"reference must be one of {REFERENCES}")
    return occ[reference]


def reference_index(reference: str, n_sites: int) -> int:
    """Computational basis index of a reference state."""
    nu, nd = reference_occupation(reference, n_sites)
    up = ((1 << nu) - 1) << n_sites if nu else 0
    return up | ((1 << nd) - 1 if nd else 0)


def build_superposition_prep(
    model: AimModel, n_up: int, n_down: int, reference: str = "zeros", phase: float = 0.0, orbitals: str = "hartree"
) -> Circuit:
    """Prepare ``(|phi_0> + exp(i phase) |R>)/sqrt(2)`` up to a global phase.

    In the eigen-orbital frame ``|phi_0>`` and ``|R>`` differ on a set of
    qubits; a Hadamard on one of them plus a CNOT fan-out correlates that set,
    X gates fix the bits the two patterns share or that only ``R`` occupies,
    and the orbital rotation maps the result to the local basis while leaving
    ``|R>`` unchanged.
    """
    n = model.n_sites
    if not (0 <= n_up <= n and 0 <= n_down <= n):
        raise ValueError("occupations outside [0, N]")
    r_up, r_down = reference_occupation(reference, n)
    filled = set(_filled_qubits(n, n_up, n_down))
    r_occ = set(range(r_up)) | {n + j for j in range(r_down)}
    diff = sorted(filled ^ r_occ)
    if not diff:
        raise ValueError("the reference state coincides with phi_0; the superposition is undefined")
    # root bit 1 <-> phi_0 pattern, root bit 0 <-> reference pattern
    root = diff[0]
    gates = [Gate("X", (q,)) for q in sorted(filled & r_occ)]
    gates.append(Gate("H", (root,)))
    if phase:
        gates.append(Gate("RZ", (root,), -phase))
    gates += _fanout(root, diff[1:])
    gates += [Gate("X", (q,)) for q in diff if q in r_occ]
    prep = Circuit.from_gates(model.n_qubits, gates)
    return prep + orbital_rotation(reference_decomposition(model, orbitals), n)


# ---------------------------------------------------------------------------
# depth accounting


@dataclass(frozen=True)
class DepthReport:
    """CNOT-layer counts from the closed-form expressions.

    ``d_v`` per Trotter step, ``d_0`` for preparing ``|phi_0> + |0>``, and the
    maximum over all matrix-element circuits ``d_max = 2 (d_0 + (n_l + nt_l + 2) d_v)``.
    ``*_synth`` fields hold the counts measured on synthesised circuits.
    """

    d_v: int
    d_0: int
    d_max: int
    d_v_synth: int | None = None
    d_0_synth: int | None = None


def depth_report(
    model: AimModel, n_up: int, n_down: int, n_l: int, nt_l: int, synthesize: bool = True, orbitals: str = "hartree"
) -> DepthReport:
    if min(n_up, n_down, n_l, nt_l) < 0:
        raise ValueError("counts must be nonnegative")
    n = model.n_sites
    d_v = 4 * n + 4
    d_0 = 2 * n + max(n_up, n_down) - 1
    d_max = 2 * (d_0 + (n_l + nt_l + 2) * d_v)
    if not synthesize:
        return DepthReport(d_v, d_0, d_max)
    dv_s = build_trotter_step(model, 0.1).cnot_layer_count
    d0_s = build_superposition_prep(model, n_up, n_down, orbitals=orbitals).cnot_layer_count if n_up + n_down else None
    return DepthReport(d_v, d_0, d_max, dv_s, d0_s)
