"""Dense statevector emulator.

Amplitudes are stored big-endian (qubit 0 is the most significant bit). Gates
act in place on reshaped views of the amplitude array, so one gate costs a few
passes over ``2**n`` complex numbers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .operators import OperatorSum

KINDS = ("H", "X", "RY", "RZ", "CNOT", "ZZ", "GIVENS", "GPHASE")
_N_QUBITS = {"H": 1, "X": 1, "RY": 1, "RZ": 1, "CNOT": 2, "ZZ": 2, "GIVENS": 2, "GPHASE": 0}
_CNOT_DEPTH = {"CNOT": 1, "ZZ": 2, "GIVENS": 2}
_SELF_INVERSE = {"H", "X", "CNOT"}


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple = ()
    angle: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        qubits = tuple(int(q) for q in self.qubits)
        if len(qubits) != _N_QUBITS[self.kind]:
            raise ValueError(f"{self.kind} acts on {_N_QUBITS[self.kind]} qubits, got {qubits}")
        if len(set(qubits)) != len(qubits):
            raise ValueError("gate qubits must be distinct")
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "angle", float(self.angle))

    @property
    def cnot_depth(self) -> int:
        return _CNOT_DEPTH.get(self.kind, 0)

    def inverse(self) -> "Gate":
        if self.kind in _SELF_INVERSE:
            return self
        return Gate(self.kind, self.qubits, -self.angle)

    def matrix(self) -> np.ndarray:
        """Unitary on the gate's own qubits, first listed qubit most significant."""
        t = self.angle
        c, s = np.cos(t / 2), np.sin(t / 2)
        if self.kind == "H":
            return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
        if self.kind == "X":
            return np.array([[0, 1], [1, 0]], dtype=complex)
        if self.kind == "RY":
            return np.array([[c, -s], [s, c]], dtype=complex)
        if self.kind == "RZ":
            return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])
        if self.kind == "CNOT":
            return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
        if self.kind == "ZZ":
            return np.diag(np.exp(-0.5j * t * np.array([1, -1, -1, 1])))
        if self.kind == "GIVENS":
            return np.array([[1, 0, 0, 0], [0, c, s, 0], [0, -s, c, 0], [0, 0, 0, 1]], dtype=complex)
        return np.array([[np.exp(1j * t)]])

    def decompose(self) -> list["Gate"]:
        """Rewrite composite gates in terms of H, RY, RZ and CNOT."""
        if self.kind == "GIVENS":
            a, b = self.qubits
            return [
                Gate("H", (a,)),
                Gate("CNOT", (a, b)),
                Gate("RY", (a,), self.angle / 2),
                Gate("RY", (b,), self.angle / 2),
                Gate("CNOT", (a, b)),
                Gate("H", (a,)),
            ]
        if self.kind == "ZZ":
            a, b = self.qubits
            return [Gate("CNOT", (a, b)), Gate("RZ", (b,), self.angle), Gate("CNOT", (a, b))]
        return [self]

    def to_text(self) -> str:
        qs = ",".join(str(q) for q in self.qubits) or "-"
        return f"{self.kind} {qs} {self.angle!r}"

    @classmethod
    def from_text(cls, line: str) -> "Gate":
        kind, qs, angle = line.split()
        qubits = () if qs == "-" else tuple(int(q) for q in qs.split(","))
        return cls(kind, qubits, float(angle))


@dataclass
class Circuit:
    """Gates grouped into layers acting on disjoint qubits."""

    n_qubits: int
    layers: list = field(default_factory=list)

    def __post_init__(self):
        self.layers = [tuple(layer) for layer in self.layers]
        for layer in self.layers:
            seen: set = set()
            for g in layer:
                if seen & set(g.qubits):
                    raise ValueError("gates inside a layer must act on disjoint qubits")
                seen |= set(g.qubits)

    @classmethod
    def from_gates(cls, n_qubits: int, gates: Iterable[Gate]) -> "Circuit":
        """Greedy left packing: each gate lands right after the last layer touching its qubits."""
        layers: list[list[Gate]] = []
        frontier = [0] * n_qubits
        for g in gates:
            if g.qubits:
                pos = max(frontier[q] for q in g.qubits)
            else:
                pos = max(len(layers) - 1, 0)
            if pos == len(layers):
                layers.append([])
            layers[pos].append(g)
            for q in g.qubits:
                frontier[q] = pos + 1
        return cls(n_qubits, layers)

    @property
    def gates(self) -> list[Gate]:
        return [g for layer in self.layers for g in layer]

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit count mismatch")
        return Circuit(self.n_qubits, list(self.layers) + list(other.layers))

    def inverse(self) -> "Circuit":
        """Reversed gate order with negated rotation angles."""
        return Circuit(
            self.n_qubits,
            [tuple(g.inverse() for g in reversed(layer)) for layer in reversed(self.layers)],
        )

    def repeat(self, times: int) -> "Circuit":
        out = Circuit(self.n_qubits)
        for _ in range(times):
            out = out + self
        return out

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def cnot_layer_count(self) -> int:
        return sum(max((g.cnot_depth for g in layer), default=0) for layer in self.layers)

    def expand(self) -> "Circuit":
        """Decompose composite gates, keeping the original layer boundaries."""
        out = Circuit(self.n_qubits)
        for layer in self.layers:
            out = out + Circuit.from_gates(self.n_qubits, [p for g in layer for p in g.decompose()])
        return out

    def to_text(self) -> str:
        lines = [f"# qubits {self.n_qubits}"]
        for i, layer in enumerate(self.layers):
            lines.append(f"# layer {i}")
            lines.extend(g.to_text() for g in layer)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Circuit":
        n_qubits, layers = None, []
        for line in text.splitlines():
            line = line.strip()
            if line.startswith("# qubits"):
                n_qubits = int(line.split()[-1])
            elif line.startswith("# layer"):
                layers.append([])
            elif line:
                layers[-1].append(Gate.from_text(line))
        return cls(n_qubits, layers)


class StateVector:
    """Normalised complex amplitudes of an ``n_qubits`` register."""

    def __init__(self, amplitudes, n_qubits: int | None = None):
        amps = np.array(amplitudes, dtype=complex)
        n = int(round(np.log2(amps.size)))
        if amps.ndim != 1 or 1 << n != amps.size:
            raise ValueError("amplitude vector length must be a power of two")
        if n_qubits is not None and n_qubits != n:
            raise ValueError("n_qubits does not match amplitude count")
        self.n_qubits = n
        self.amplitudes = amps

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        return cls.basis(n_qubits, 0)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(amps)

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "StateVector":
        index = int("".join(str(int(b)) for b in bits), 2) if len(bits) else 0
        return cls.basis(len(bits), index)

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def __repr__(self):
        return f"StateVector(n_qubits={self.n_qubits})"


# ---------------------------------------------------------------------------
# in-place kernels on raw amplitude arrays


def _view1(v, n, q):
    return v.reshape(1 << q, 2, 1 << (n - q - 1))


def _view2(v, n, a, b):
    """5-index view and a function mapping (bit_a, bit_b) to an index tuple."""
    lo, hi = min(a, b), max(a, b)
    w = v.reshape(1 << lo, 2, 1 << (hi - lo - 1), 2, 1 << (n - hi - 1))

    def sl(ba, bb):
        blo, bhi = (ba, bb) if a < b else (bb, ba)
        return (slice(None), blo, slice(None), bhi, slice(None))

    return w, sl


def apply_gate_inplace(v: np.ndarray, n: int, g: Gate) -> None:
    k = g.kind
    if k == "GPHASE":
        v *= np.exp(1j * g.angle)
        return
    if any(q < 0 or q >= n for q in g.qubits):
        raise ValueError(f"gate {g} addresses a qubit outside [0, {n})")
    if k == "RZ":
        w = _view1(v, n, g.qubits[0])
        w[:, 0, :] *= np.exp(-0.5j * g.angle)
        w[:, 1, :] *= np.exp(0.5j * g.angle)
    elif k in ("H", "X", "RY"):
        m = g.matrix()
        w = _view1(v, n, g.qubits[0])
        a0 = w[:, 0, :].copy()
        a1 = w[:, 1, :]
        w[:, 0, :] = m[0, 0] * a0 + m[0, 1] * a1
        w[:, 1, :] = m[1, 0] * a0 + m[1, 1] * a1
    elif k == "CNOT":
        w, sl = _view2(v, n, *g.qubits)
        tmp = w[sl(1, 0)].copy()
        w[sl(1, 0)] = w[sl(1, 1)]
        w[sl(1, 1)] = tmp
    elif k == "ZZ":
        w, sl = _view2(v, n, *g.qubits)
        same, diff = np.exp(-0.5j * g.angle), np.exp(0.5j * g.angle)
        w[sl(0, 0)] *= same
        w[sl(1, 1)] *= same
        w[sl(0, 1)] *= diff
        w[sl(1, 0)] *= diff
    elif k == "GIVENS":
        w, sl = _view2(v, n, *g.qubits)
        c, s = np.cos(g.angle / 2), np.sin(g.angle / 2)
        x01 = w[sl(0, 1)].copy()
        x10 = w[sl(1, 0)]
        w[sl(0, 1)] = c * x01 + s * x10
        w[sl(1, 0)] = -s * x01 + c * x10


def run_circuit_inplace(v: np.ndarray, circuit: Circuit) -> np.ndarray:
    n = circuit.n_qubits
    for layer in circuit.layers:
        for g in layer:
            apply_gate_inplace(v, n, g)
    return v


_DIAGONAL = ("RZ", "ZZ", "GPHASE")


class SectorCircuit:
    """A number-conserving circuit compiled onto a fixed list of basis states.

    Only diagonal gates and Givens rotations are accepted. Runs of diagonal
    gates are fused into one phase vector, and each Givens rotation becomes a
    pair of index arrays. On a particle-number sector this is much cheaper
    than the full emulator and gives the same amplitudes.
    """

    def __init__(self, circuit: Circuit, states):
        n = circuit.n_qubits
        states = np.asarray(states, dtype=np.int64)
        if np.any(np.diff(states) <= 0):
            raise ValueError("states must be strictly increasing")
        self.n_qubits, self.size = n, states.size
        self.ops: list = []
        phase = None
        bit = lambda q: (states >> (n - 1 - q)) & 1
        for layer in circuit.layers:
            for g in layer:
                if g.kind in _DIAGONAL:
                    if g.kind == "GPHASE":
                        d = np.full(states.size, np.exp(1j * g.angle))
                    elif g.kind == "RZ":
                        d = np.exp(0.5j * g.angle * (2 * bit(g.qubits[0]) - 1))
                    else:
                        parity = bit(g.qubits[0]) ^ bit(g.qubits[1])
                        d = np.exp(0.5j * g.angle * (2 * parity - 1))
                    phase = d if phase is None else phase * d
                    continue
                if g.kind != "GIVENS":
                    raise ValueError(f"{g.kind} does not conserve particle number")
                if phase is not None:
                    self.ops.append(("diag", phase))
                    phase = None
                a, b = g.qubits
                src = np.flatnonzero((bit(a) == 0) & (bit(b) == 1))
                flipped = states[src] ^ ((1 << (n - 1 - a)) | (1 << (n - 1 - b)))
                dst = np.searchsorted(states, flipped)
                if np.any(dst >= states.size) or np.any(states[np.minimum(dst, states.size - 1)] != flipped):
                    raise ValueError("state list is not closed under the circuit")
                self.ops.append(("givens", src, dst, np.cos(g.angle / 2), np.sin(g.angle / 2)))
        if phase is not None:
            self.ops.append(("diag", phase))

    def run(self, v: np.ndarray) -> np.ndarray:
        """Apply in place to amplitudes ordered like ``states``."""
        if v.shape != (self.size,):
            raise ValueError("amplitude vector does not match the compiled states")
        for op in self.ops:
            if op[0] == "diag":
                v *= op[1]
            else:
                _, i01, i10, c, s = op
                x01 = v[i01]
                x10 = v[i10]
                v[i01] = c * x01 + s * x10
                v[i10] = c * x10 - s * x01
        return v


class FusedCircuit:
    """A circuit with its gates fused into blocks over a two-register split.

    Qubits ``[0, split)`` form register A and the rest register B. Gates
    confined to one register are multiplied into dense unitaries ``U_A`` and
    ``U_B``, applied as ``U_A M U_B^T`` to the amplitudes reshaped into a
    matrix ``M``. Diagonal gates coupling the registers are fused into phase
    vectors. Any other gate is applied as is. For spin-conserving fermionic
    circuits with one spin per register this replaces every Givens network
    by two small matrix products.
    """

    def __init__(self, circuit: Circuit, split: int | None = None):
        n = circuit.n_qubits
        split = n // 2 if split is None else split
        if not 0 < split < n:
            raise ValueError("split must leave qubits on both sides")
        self.n_qubits, self.split = n, split
        self.ops: list = []
        self.phase = 1.0 + 0j  # global phases commute with everything
        dims = (split, n - split)
        block = None  # ("diag", phases) or ("local", [U_A or None, U_B or None])

        def close():
            if block is not None:
                self.ops.append(block)

        for g in circuit.gates:
            side = None
            if g.qubits and all(q < split for q in g.qubits):
                side = 0
            elif g.qubits and all(q >= split for q in g.qubits):
                side = 1
            if g.kind == "GPHASE":
                self.phase *= np.exp(1j * g.angle)
            elif g.kind in _DIAGONAL and (side is None or block is None or block[0] == "diag"):
                if block is None or block[0] != "diag":
                    close()
                    block = ("diag", np.ones(1 << n, dtype=complex))
                apply_gate_inplace(block[1], n, g)
            elif side is not None:
                if block is None or block[0] != "local":
                    close()
                    block = ("local", [None, None])
                k = dims[side]
                u = block[1][side]
                if u is None:
                    u = block[1][side] = np.eye(1 << k, dtype=complex)
                # the flattened k x k matrix is a 2k-qubit register whose high half indexes rows
                shifted = Gate(g.kind, tuple(q - side * split for q in g.qubits), g.angle)
                apply_gate_inplace(u.reshape(-1), 2 * k, shifted)
            else:
                close()
                block = None
                self.ops.append(("gate", g))
        close()

    def run(self, v: np.ndarray) -> np.ndarray:
        """Apply in place to a full ``2**n_qubits`` amplitude vector."""
        m = v.reshape(1 << self.split, -1)
        for op in self.ops:
            if op[0] == "diag":
                v *= op[1]
            elif op[0] == "local":
                ua, ub = op[1]
                out = m if ua is None else ua @ m
                out = out if ub is None else out @ ub.T
                m[...] = out
            else:
                apply_gate_inplace(v, self.n_qubits, op[1])
        if self.phase != 1.0:
            v *= self.phase
        return v


def apply_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    """Return ``U_circuit |state>`` as a new state."""
    if state.n_qubits != circuit.n_qubits:
        raise ValueError("circuit and state have different qubit counts")
    out = state.copy()
    run_circuit_inplace(out.amplitudes, circuit)
    return out


def _amps(x):
    return x.amplitudes if isinstance(x, StateVector) else np.asarray(x)


def inner_product(bra, ket) -> complex:
    """``<bra|ket>``."""
    a, b = _amps(bra), _amps(ket)
    if a.shape != b.shape:
        raise ValueError("state sizes differ")
    return complex(np.vdot(a, b))


def expectation(state, op: OperatorSum) -> complex:
    """``<state| op |state>`` summed term by term."""
    a = _amps(state)
    if a.shape[0] != 1 << op.n_qubits:
        raise ValueError("operator and state sizes differ")
    return complex(np.vdot(a, op.apply(a)))


def estimate_fidelity(a, b, shots: int | None = None, seed=None) -> float:
    """``|<a|b>|^2``, exactly or as a binomial estimate from ``shots`` samples.

    In shot mode each shot is one Bernoulli trial succeeding with the exact
    fidelity, as for a swap or compute-uncompute test.
    """
    f = abs(inner_product(a, b)) ** 2
    if shots is None:
        return f
    if shots < 1:
        raise ValueError("shots must be a positive integer")
    rng = np.random.default_rng(seed)
    return rng.binomial(shots, min(f, 1.0)) / shots
