"""Seven-pole bath discretisations used as reference impurity models.

``FIRST_ITERATION`` is the fit to the semicircular hybridization that starts
the self-consistency loop; ``SELF_CONSISTENT`` is the converged bath of an
insulating run. Each entry is ``(onsite energy, impurity hopping)``.
"""
from __future__ import annotations

import numpy as np

from .operators import AimModel

FIRST_ITERATION = (
    (-1.17300, -0.53714),
    (-0.37368, 0.38549),
    (-0.08996, -0.21964),
    (0.00000, 0.13394),
    (0.08996, -0.21964),
    (0.37368, 0.38549),
    (1.17300, 0.53714),
)

SELF_CONSISTENT = (
    (-4.78165, -0.52895),
    (-3.09398, 0.42680),
    (-2.17008, -0.19147),
    (-0.00103, 0.00418),
    (1.61650, -0.05916),
    (2.74851, 0.41342),
    (4.63114, -0.56915),
)

BATHS = {"first": FIRST_ITERATION, "converged": SELF_CONSISTENT}


def bath_arrays(name: str) -> tuple[np.ndarray, np.ndarray]:
    table = np.array(BATHS[name], dtype=float)
    return table[:, 0].copy(), table[:, 1].copy()


def reference_model(name: str, u: float) -> AimModel:
    """Half-filled single-impurity model with one of the tabulated baths."""
    onsite, hopping = bath_arrays(name)
    return AimModel.from_bath(u, onsite, hopping)
