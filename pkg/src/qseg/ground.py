"""Ground state from the generalized eigenproblem ``H c = E S c`` in a non-orthogonal basis."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

DEFAULT_CUTOFF = 1e-10


class DegenerateBasisError(ValueError):
    """Every overlap direction fell below the cutoff."""


def pruned_metric(s: np.ndarray, cutoff: float = DEFAULT_CUTOFF):
    """Eigen-decomposition of ``S`` restricted to directions above ``cutoff * max(eig)``.

    Returns ``(spectrum, X, discarded)`` where ``X = V_kept diag(s_kept)^(-1/2)``
    so that ``X^dagger S X = 1``.
    """
    if cutoff < 0:
        raise ValueError("cutoff must be nonnegative")
    w, v = sla.eigh(s)
    top = w.max() if w.size else 0.0
    keep = w > cutoff * top if cutoff > 0 else w > 0
    if top <= 0 or not keep.any():
        raise DegenerateBasisError("overlap matrix has no direction above the cutoff")
    x = v[:, keep] / np.sqrt(w[keep])
    return w, x, int((~keep).sum())


def pseudo_inverse(s: np.ndarray, cutoff: float = DEFAULT_CUTOFF) -> np.ndarray:
    """``S^+`` on the retained eigenspace."""
    _, x, _ = pruned_metric(s, cutoff)
    return x @ x.conj().T


@dataclass(frozen=True, eq=False)
class GroundSolution:
    energy: float
    coefficients: np.ndarray
    s_spectrum: np.ndarray
    discarded: int
    ritz_values: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "energy": self.energy,
            "coefficients": [[c.real, c.imag] for c in self.coefficients],
            "s_spectrum": list(map(float, self.s_spectrum)),
            "discarded": self.discarded,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundSolution":
        coeff = np.array([complex(a, b) for a, b in d["coefficients"]])
        return cls(float(d["energy"]), coeff, np.array(d["s_spectrum"]), int(d["discarded"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "GroundSolution":
        return cls.from_dict(json.loads(text))


def solve_generalized_eigenproblem(h: np.ndarray, s: np.ndarray, cutoff: float = DEFAULT_CUTOFF) -> GroundSolution:
    """Lowest Ritz pair of ``(H, S)`` after pruning near-null overlap directions.

    The coefficients are returned in the original basis and satisfy
    ``c^dagger S c = 1``.
    """
    h, s = np.asarray(h), np.asarray(s)
    if h.shape != s.shape or h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("H and S must be square matrices of equal size")
    spectrum, x, discarded = pruned_metric(s, cutoff)
    hp = x.conj().T @ h @ x
    e, y = sla.eigh((hp + hp.conj().T) / 2)
    return GroundSolution(float(e[0]), x @ y[:, 0], spectrum, discarded, e)
