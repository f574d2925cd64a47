"""Quantum subspace expansion for impurity Green's functions.

The package simulates, on an exact statevector, a subspace-expansion solver
for Anderson impurity models: Trotterised time-evolution bases for the
ground state, a Krylov basis for the Green's function built from a
continued fraction, an exact-diagonalisation oracle, and a Bethe-lattice
DMFT loop around either solver.
"""
__version__ = "0.1.0"

from .operators import AimModel, OperatorSum, PauliString, build_aim_hamiltonian
from .basis import BasisSpec
from .ground import GroundSolution, solve_generalized_eigenproblem
from .greens import GreensFunctionResult, KrylovCoefficients
from .pipeline import QsegConfig, QsegSolver, compute_gf, off_diagonal_gf
from .ed import exact_ground_state, exact_greens_function
from .dmft import DmftConfig, MatsubaraGrid, dmft_loop, fit_bath

__all__ = [
    "AimModel",
    "OperatorSum",
    "PauliString",
    "build_aim_hamiltonian",
    "BasisSpec",
    "GroundSolution",
    "solve_generalized_eigenproblem",
    "GreensFunctionResult",
    "KrylovCoefficients",
    "QsegConfig",
    "QsegSolver",
    "compute_gf",
    "off_diagonal_gf",
    "exact_ground_state",
    "exact_greens_function",
    "DmftConfig",
    "MatsubaraGrid",
    "dmft_loop",
    "fit_bath",
]
