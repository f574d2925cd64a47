"""Exact-diagonalisation reference for the impurity model.

Sector Hamiltonians are built from occupation-number bitstrings with explicit
fermionic signs; nothing here goes through the Pauli-string algebra, so the
results serve as an independent check of the circuit pipeline. Mode ``p`` is
qubit ``p`` (spin-up sites first), and basis indices use the same big-endian
convention as the statevector emulator.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .operators import AimModel
from .statevector import StateVector

MAX_DENSE_DIM = 20000


class CapabilityError(RuntimeError):
    """Requested sector is too large for dense diagonalisation."""


def _mode_bit(n_modes: int, p: int) -> int:
    return 1 << (n_modes - 1 - p)


def sector_states(n_sites: int, n_up: int, n_down: int) -> np.ndarray:
    """Ascending basis indices with ``n_up`` set bits among the up modes and ``n_down`` among the down modes."""
    if not (0 <= n_up <= n_sites and 0 <= n_down <= n_sites):
        raise ValueError("occupations outside [0, N]")
    m = 2 * n_sites
    out = []
    for ups in combinations(range(n_sites), n_up):
        u = sum(_mode_bit(m, p) for p in ups)
        for downs in combinations(range(n_sites, m), n_down):
            out.append(u + sum(_mode_bit(m, p) for p in downs))
    return np.array(sorted(out), dtype=np.int64)


def _key(model: AimModel):
    return (model.n_imp, model.n_b, model.epsilon.tobytes(), float(model.u))


def _sign_below(states: np.ndarray, bit: int, n_modes: int) -> np.ndarray:
    """``(-1)**(number of occupied modes ordered before the mode at ``bit``)``."""
    # modes with a smaller index sit at higher bit positions
    above = ((1 << n_modes) - 1) & ~((bit << 1) - 1)
    return 1 - 2 * (np.bitwise_count(states & above) & 1).astype(np.int64)


def sector_hamiltonian(model: AimModel, n_up: int, n_down: int) -> sp.csr_matrix:
    """Sparse ``H`` on the ``(n_up, n_down)`` sector in :func:`sector_states` order."""
    return _sector_h_cached(_key(model), n_up, n_down)


@lru_cache(maxsize=32)
def _sector_h_cached(key, n_up, n_down) -> sp.csr_matrix:
    n_imp, n_b, eps_bytes, u = key
    n = n_imp + n_b
    m = 2 * n
    eps = np.frombuffer(eps_bytes).reshape(n, n)
    states = sector_states(n, n_up, n_down)
    dim = states.size
    cols_all = np.arange(dim)
    diag = np.zeros(dim)
    rows, cols, vals = [], [], []
    for spin in (0, n):
        for a in range(n):
            bit_a = _mode_bit(m, spin + a)
            occ_a = (states & bit_a) != 0
            diag += eps[a, a] * occ_a
            for b in range(n):
                if a == b or eps[a, b] == 0.0:
                    continue
                bit_b = _mode_bit(m, spin + b)
                ok = ((states & bit_b) != 0) & ~occ_a
                src = states[ok]
                # c_a^dagger c_b: remove b first, then add a
                mid = src ^ bit_b
                sign = _sign_below(src, bit_b, m) * _sign_below(mid, bit_a, m)
                dst = np.searchsorted(states, mid | bit_a)
                rows.append(dst)
                cols.append(cols_all[ok])
                vals.append(sign * eps[a, b])
    for i in range(n_imp):
        both = ((states & _mode_bit(m, i)) != 0) & ((states & _mode_bit(m, n + i)) != 0)
        diag += u * both
    rows.append(cols_all)
    cols.append(cols_all)
    vals.append(diag)
    h = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))
    h.sum_duplicates()
    return h


@dataclass(frozen=True, eq=False)
class SectorEigenSolution:
    sector: tuple
    energies: np.ndarray
    vectors: np.ndarray
    states: np.ndarray


@lru_cache(maxsize=16)
def _solve_cached(key, n_up, n_down) -> SectorEigenSolution:
    n_imp, n_b, eps, u = key
    n = n_imp + n_b
    model = AimModel(n_imp, n_b, np.frombuffer(eps).reshape(n, n).copy(), u)
    h = sector_hamiltonian(model, n_up, n_down)
    if h.shape[0] > MAX_DENSE_DIM:
        raise CapabilityError(f"sector dimension {h.shape[0]} exceeds {MAX_DENSE_DIM}")
    e, v = sla.eigh(h.toarray())
    return SectorEigenSolution((n_up, n_down), e, v, sector_states(n, n_up, n_down))


def solve_sector(model: AimModel, n_up: int, n_down: int) -> SectorEigenSolution:
    """Full dense eigendecomposition of one sector (cached per model)."""
    return _solve_cached(_key(model), n_up, n_down)


def _embed(model: AimModel, states, amps) -> StateVector:
    full = np.zeros(1 << model.n_qubits, dtype=complex)
    full[states] = amps
    return StateVector(full, model.n_qubits)


def sector_ground_state(model: AimModel, n_up: int, n_down: int):
    """Lowest eigenpair of a sector by sparse Lanczos (ARPACK); ``(energy, vector, states)``."""
    h = sector_hamiltonian(model, n_up, n_down)
    states = sector_states(model.n_sites, n_up, n_down)
    if h.shape[0] <= 64:
        e, v = np.linalg.eigh(h.toarray())
        return float(e[0]), v[:, 0], states
    v0 = np.ones(h.shape[0]) / np.sqrt(h.shape[0])
    e, v = sp.linalg.eigsh(h, k=1, which="SA", v0=v0, tol=1e-13)
    return float(e[0]), v[:, 0], states


def exact_ground_state(model: AimModel, n_up: int, n_down: int, dense: bool = True):
    """``(E_GS, |GS>)`` of a sector, the state embedded in the full qubit space."""
    if dense:
        sol = solve_sector(model, n_up, n_down)
        return float(sol.energies[0]), _embed(model, sol.states, sol.vectors[:, 0])
    e, v, states = sector_ground_state(model, n_up, n_down)
    return e, _embed(model, states, v)


def split_sectors(n_sites: int, amplitudes: np.ndarray, tol: float = 0.0):
    """Map ``(n_up, n_down)`` to the basis indices where ``amplitudes`` is nonzero."""
    out = {}
    for nu in range(n_sites + 1):
        for nd in range(n_sites + 1):
            st = sector_states(n_sites, nu, nd)
            if np.any(np.abs(amplitudes[st]) > tol):
                out[(nu, nd)] = st
    return out


def exact_time_evolution(model: AimModel, state, t: float) -> StateVector:
    """``exp(-i H t) |state>`` through the eigendecomposition of every occupied sector."""
    amps = np.asarray(state.amplitudes if isinstance(state, StateVector) else state, dtype=complex)
    out = np.zeros_like(amps)
    for (nu, nd), st in split_sectors(model.n_sites, amps).items():
        sol = solve_sector(model, nu, nd)
        c = sol.vectors.T @ amps[st]
        out[st] = sol.vectors @ (np.exp(-1j * t * sol.energies) * c)
    return StateVector(out, model.n_qubits)


# ---------------------------------------------------------------------------
# excitations and Green's functions


def _apply_ladder(n_modes, mode, states_in, amps_in, states_out, create: bool) -> np.ndarray:
    b = _mode_bit(n_modes, mode)
    states_in = np.asarray(states_in, dtype=np.int64)
    ok = (states_in & b) == 0 if create else (states_in & b) != 0
    src = states_in[ok]
    sign = _sign_below(src, b, n_modes)
    dst = np.searchsorted(states_out, src ^ b)
    out = np.zeros(len(states_out), dtype=complex)
    np.add.at(out, dst, sign * np.asarray(amps_in)[ok])
    return out


def apply_creation(n_modes: int, mode: int, states_in, amps_in, states_out) -> np.ndarray:
    """Amplitudes of ``c_mode^dagger |v>`` on the target basis ``states_out``."""
    return _apply_ladder(n_modes, mode, states_in, amps_in, states_out, True)


def apply_annihilation(n_modes: int, mode: int, states_in, amps_in, states_out) -> np.ndarray:
    """Amplitudes of ``c_mode |v>`` on the target basis ``states_out``."""
    return _apply_ladder(n_modes, mode, states_in, amps_in, states_out, False)


def _mode(model: AimModel, site: int, spin: str) -> int:
    if not 1 <= site <= model.n_sites:
        raise ValueError("site index outside [1, N]")
    if spin not in ("up", "down"):
        raise ValueError("spin must be 'up' or 'down'")
    return site - 1 + (model.n_sites if spin == "down" else 0)


def _shifted(sector, spin, d):
    nu, nd = sector
    return (nu + d, nd) if spin == "up" else (nu, nd + d)


def excitation_vectors(model: AimModel, sector, weights, spin: str, gs_states, gs_amps, kind: str):
    """``sum_a w_a c_a^dagger |GS>`` (``kind='greater'``) or ``sum_a conj(w_a) c_a |GS>`` in the target sector.

    ``weights`` maps site index to complex coefficient. Returns ``(target_sector, vector)``.
    """
    m = model.n_qubits
    d = 1 if kind == "greater" else -1
    target = _shifted(sector, spin, d)
    if not (0 <= target[0] <= model.n_sites and 0 <= target[1] <= model.n_sites):
        return target, None
    st_out = sector_states(model.n_sites, *target)
    vec = np.zeros(st_out.size, dtype=complex)
    for site, w in weights.items():
        mode = _mode(model, site, spin)
        if kind == "greater":
            vec += w * apply_creation(m, mode, gs_states, gs_amps, st_out)
        else:
            vec += np.conj(w) * apply_annihilation(m, mode, gs_states, gs_amps, st_out)
    return target, vec


def lanczos_coefficients(h, v, max_n: int = 200, tol: float = 1e-12):
    """Hermitian Lanczos with full reorthogonalisation; ``(a, b, norm0)``.

    ``b`` holds ``b_1 ... b_n`` so that the tridiagonal matrix has ``a`` on the
    diagonal and ``b`` beside it.
    """
    norm0 = float(np.vdot(v, v).real)
    if norm0 == 0.0:
        return np.zeros(0), np.zeros(0), 0.0
    n_max = min(max_n, h.shape[0])
    if not np.iscomplexobj(h) and not np.any(np.imag(v)):
        v = np.real(v)
    q = np.zeros((n_max, v.size), dtype=np.result_type(v, h.dtype))
    q[0] = v / np.sqrt(norm0)
    a, b = [], []
    for n in range(n_max):
        w = h @ q[n]
        a.append(float(np.vdot(q[n], w).real))
        w = w - a[-1] * q[n] - (b[-1] * q[n - 1] if b else 0)
        for _ in range(2):
            w = w - q[: n + 1].T @ (q[: n + 1] @ w.conj()).conj()
        beta = float(np.linalg.norm(w))
        if beta < tol or n == n_max - 1:
            break
        b.append(beta)
        q[n + 1] = w / beta
    return np.array(a), np.array(b), norm0


def _cf(a, b, norm0, w):
    w = np.asarray(w, dtype=complex)
    if a.size == 0:
        return np.zeros_like(w)
    g = w - a[-1]
    for n in range(a.size - 2, -1, -1):
        g = w - a[n] - b[n] ** 2 / g
    return norm0 / g


def _lehmann(sol: SectorEigenSolution, vec, w, shift):
    amps = sol.vectors.T.conj() @ vec
    weights = np.abs(amps) ** 2
    return (weights[None, :] / (np.asarray(w)[:, None] - shift * sol.energies[None, :])).sum(axis=1)


def exact_greens_function(
    model: AimModel,
    omega,
    delta: float = 0.1,
    site: int = 1,
    spin: str = "up",
    sector=None,
    method: str = "lehmann",
    pair=None,
    max_n: int = 400,
    z=None,
):
    """Greater, lesser and retarded GF of one orbital from the exact ground state.

    ``method='lehmann'`` sums over all eigenstates of the neighbouring sectors;
    ``method='lanczos'`` uses a reorthogonalised Lanczos continued fraction on
    the same sectors. ``pair=(alpha, beta)`` gives the off-diagonal element
    between sites ``alpha`` and ``beta``. Frequencies are ``omega + i delta``
    unless complex points ``z`` are passed directly.
    """
    from .greens import GreensFunctionResult, combine_offdiagonal

    n = model.n_sites
    if sector is None:
        sector = (n // 2, n // 2)
    if pair is not None:
        alpha, beta = pair
        parts = {}
        for tag, w in (("aa", {alpha: 1.0}), ("bb", {beta: 1.0}), ("1", {alpha: 1.0, beta: 1.0}), ("2", {alpha: 1.0, beta: 1j})):
            parts[tag] = _exact_gf_weights(model, omega, delta, w, spin, sector, method, max_n, z)
        g = {}
        for kind in ("greater", "lesser"):
            g[kind] = combine_offdiagonal(parts["1"][kind], parts["2"][kind], parts["aa"][kind], parts["bb"][kind])
        e_gs = parts["aa"]["e_gs"]
    else:
        res = _exact_gf_weights(model, omega, delta, {site: 1.0}, spin, sector, method, max_n, z)
        g, e_gs = res, res["e_gs"]
    return GreensFunctionResult.from_parts(
        np.asarray(omega if z is None else np.real(z), dtype=float), delta, g["greater"], g["lesser"], e_gs
    )


def _exact_gf_weights(model, omega, delta, weights, spin, sector, method, max_n, z):
    z = np.asarray(omega, dtype=float) + 1j * delta if z is None else np.asarray(z, dtype=complex)
    if method == "lehmann":
        gs = solve_sector(model, *sector)
        e_gs, gs_states, gs_amps = float(gs.energies[0]), gs.states, gs.vectors[:, 0]
    elif method == "lanczos":
        e_gs, gs_amps, gs_states = sector_ground_state(model, *sector)
    else:
        raise ValueError("method must be 'lehmann' or 'lanczos'")
    out = {"e_gs": e_gs}
    for kind in ("greater", "lesser"):
        target, vec = excitation_vectors(model, sector, weights, spin, gs_states, gs_amps, kind)
        if vec is None or not np.any(vec):
            out[kind] = np.zeros(z.shape, dtype=complex)
            continue
        if method == "lehmann":
            sol = solve_sector(model, *target)
            if kind == "greater":
                out[kind] = _lehmann(sol, vec, z + e_gs, 1.0)
            else:
                # <c^dag (z + H - E)^-1 c> = sum |w|^2 / (z + E_m - E)
                out[kind] = _lehmann(sol, vec, z - e_gs, -1.0)
        else:
            h = sector_hamiltonian(model, *target)
            a, b, norm0 = lanczos_coefficients(h, vec, max_n=max_n)
            if kind == "greater":
                out[kind] = _cf(a, b, norm0, z + e_gs)
            else:
                out[kind] = -_cf(a, b, norm0, e_gs - z)
    return out
