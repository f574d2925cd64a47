"""Two-level multigrid Trotter bases.

A basis state is labelled by ``(l, k)`` and reached from the origin by ``|l|``
coarse steps of size ``(n_k + 1) dt`` followed by one fine step of size
``k dt``. Negative indices use the time-reversed circuits.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import NamedTuple

import numpy as np

from .circuits import build_trotter_step
from .operators import AimModel, occupations
from .statevector import Circuit, FusedCircuit, SectorCircuit, StateVector, run_circuit_inplace

ROLES = ("ground", "krylov")


class BasisLabel(NamedTuple):
    l: int
    k: int

    @property
    def trotter_steps(self) -> int:
        return abs(self.l) + (self.k != 0)


def k_range(l: int, n_k: int) -> range:
    if l > 0:
        return range(0, n_k + 1)
    if l < 0:
        return range(-n_k, 1)
    return range(-n_k, n_k + 1)


def enumerate_labels(n_l: int, n_k: int) -> list[BasisLabel]:
    """All labels of the ``(n_l, n_k)`` basis, ordered by ``l`` then ``k``."""
    if n_l < 0 or n_k < 0:
        raise ValueError("n_l and n_k must be nonnegative")
    return [BasisLabel(l, k) for l in range(-n_l, n_l + 1) for k in k_range(l, n_k)]


def basis_size(n_l: int, n_k: int) -> int:
    return 2 * (n_l + 1) * (n_k + 1) - 1


@dataclass(frozen=True)
class BasisSpec:
    """Step size and extent of a multigrid basis.

    ``role`` is ``"ground"`` for the ground-state basis and ``"krylov"`` for the
    Green's function basis; it only tags the spec.
    """

    dt: float
    n_l: int
    n_k: int = 0
    role: str = "ground"

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError("dt must be positive")
        if self.n_l < 0 or self.n_k < 0:
            raise ValueError("n_l and n_k must be nonnegative")
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}")

    @property
    def coarse_dt(self) -> float:
        return (self.n_k + 1) * self.dt

    @property
    def labels(self) -> list[BasisLabel]:
        return enumerate_labels(self.n_l, self.n_k)

    @property
    def size(self) -> int:
        return basis_size(self.n_l, self.n_k)

    @property
    def max_trotter_steps(self) -> int:
        return self.n_l + (self.n_k > 0)

    def to_dict(self) -> dict:
        return {"dt": self.dt, "n_l": self.n_l, "n_k": self.n_k, "role": self.role}

    @classmethod
    def from_dict(cls, d: dict) -> "BasisSpec":
        return cls(float(d["dt"]), int(d["n_l"]), int(d["n_k"]), d.get("role", "ground"))


class StepCircuits:
    """Forward and reversed Trotter circuits of a spec, built on first use."""

    def __init__(self, model: AimModel, spec: BasisSpec):
        self.model, self.spec = model, spec
        self._cache: dict = {}

    def step(self, multiple: int) -> Circuit:
        """``V(multiple * dt)``; negative multiples give the reversed circuit."""
        if multiple not in self._cache:
            if multiple < 0:
                self._cache[multiple] = self.step(-multiple).inverse()
            else:
                self._cache[multiple] = build_trotter_step(self.model, multiple * self.spec.dt)
        return self._cache[multiple]

    def coarse(self, sign: int) -> Circuit:
        return self.step(sign * (self.spec.n_k + 1))

    def sector_step(self, multiple: int, states: np.ndarray) -> SectorCircuit:
        """``step(multiple)`` compiled onto a particle-number sector."""
        key = ("sector", multiple, states.size, hash(states.tobytes()))
        if key not in self._cache:
            self._cache[key] = SectorCircuit(self.step(multiple), states)
        return self._cache[key]

    def fused_step(self, multiple: int) -> FusedCircuit:
        """``step(multiple)`` fused over the spin-up/spin-down register split."""
        key = ("fused", multiple)
        if key not in self._cache:
            self._cache[key] = FusedCircuit(self.step(multiple), self.model.n_sites)
        return self._cache[key]

    def run_label(self, v: np.ndarray, label: BasisLabel, inverse: bool = False) -> np.ndarray:
        """Apply the label circuit (or its inverse) in place with fused steps."""
        l, k = label
        sign = -1 if inverse else 1
        seq = [sign * (1 if l > 0 else -1) * (self.spec.n_k + 1)] * abs(l) + ([sign * k] if k else [])
        for m in reversed(seq) if inverse else seq:
            self.fused_step(m).run(v)
        return v

    def label_circuit(self, label: BasisLabel) -> Circuit:
        """Circuit for ``V(k dt) V((n_k + 1) dt)^l``."""
        l, k = label
        out = Circuit(self.model.n_qubits, [])
        for _ in range(abs(l)):
            out = out + self.coarse(1 if l > 0 else -1)
        if k:
            out = out + self.step(k)
        return out


def prepare_basis_state(label: BasisLabel, spec: BasisSpec, model: AimModel, origin) -> StateVector:
    """``|phi_lk> = V(k dt) V((n_k + 1) dt)^l |origin>``."""
    l, k = label
    if k not in k_range(l, spec.n_k) or abs(l) > spec.n_l:
        raise ValueError(f"label {tuple(label)} is not part of the basis")
    v = np.array(origin.amplitudes if isinstance(origin, StateVector) else origin, dtype=complex)
    steps = StepCircuits(model, spec)
    run_circuit_inplace(v, steps.label_circuit(BasisLabel(l, k)))
    return StateVector(v, model.n_qubits)


def generate_basis(spec: BasisSpec, model: AimModel, origin, keep=None, steps: StepCircuits | None = None) -> np.ndarray:
    """All basis states as rows, in ``spec.labels`` order.

    Coarse chains are propagated once per sign of ``l`` and each fine step
    branches off them, so the cost is about ``n_phi`` Trotter steps. ``keep``
    optionally restricts each stored row to a subset of amplitudes; when it
    is a particle-number sector holding all of ``origin``, the circuits run
    on that sector only.
    """
    v0 = np.array(origin.amplitudes if isinstance(origin, StateVector) else origin, dtype=complex)
    steps = steps or StepCircuits(model, spec)
    in_sector = False
    if keep is not None:
        keep = np.asarray(keep, dtype=np.int64)
        outside = np.linalg.norm(v0) ** 2 - np.linalg.norm(v0[keep]) ** 2
        in_sector = outside <= 1e-24 * max(1.0, np.linalg.norm(v0) ** 2) and _is_sector(model.n_sites, keep)
    if in_sector:
        v0 = v0[keep]

        def run(v, multiple):
            steps.sector_step(multiple, keep).run(v)
    else:

        def run(v, multiple):
            run_circuit_inplace(v, steps.step(multiple))

    labels = spec.labels
    width = v0.size if keep is None or in_sector else len(keep)
    out = np.empty((len(labels), width), dtype=complex)
    row = {lab: i for i, lab in enumerate(labels)}
    coarse = spec.n_k + 1
    for sign in (1, -1):
        chain = v0.copy()
        for step in range(0, spec.n_l + 1):
            if step:
                run(chain, sign * coarse)
            l = sign * step
            if step == 0 and sign < 0:
                continue
            for k in k_range(l, spec.n_k):
                if k == 0:
                    w = chain
                else:
                    w = chain.copy()
                    run(w, k)
                out[row[BasisLabel(l, k)]] = w if keep is None or in_sector else w[keep]
    return out


def _is_sector(n_sites: int, states: np.ndarray) -> bool:
    nu, nd = occupations(n_sites, states)
    if states.size == 0 or np.unique(nu).size != 1 or np.unique(nd).size != 1:
        return False
    return states.size == comb(n_sites, int(nu[0])) * comb(n_sites, int(nd[0])) and bool(np.all(np.diff(states) > 0))
