"""Impurity spectral function from the Krylov continued fraction.

Uses the tabulated self-consistent bath at U=8 (an insulator) and compares
the subspace DOS with the exact Lanczos DOS on the same broadening.
"""
import numpy as np

from qseg import QsegConfig, QsegSolver, exact_greens_function
from qseg.baths import reference_model

omega = np.linspace(-8, 8, 401)
model = reference_model("converged", 8.0)

solver = QsegSolver(model, QsegConfig())  # GS basis (0.1, 7, 3), Krylov basis (0.1, 80, 0)
approx = solver.greens_function(omega, delta=0.1)
exact = exact_greens_function(model, omega, 0.1, method="lanczos")

print(f"ground energy  qseg {approx.e_gs:.6f}  exact {exact.e_gs:.6f}")
print(f"Linf DOS error {np.abs(approx.dos - exact.dos).max():.2e}")
print(f"dos(0)         qseg {approx.dos[200]:.4f}  exact {exact.dos[200]:.4f}")
print(f"sum rule       {np.trapezoid(approx.dos, omega):.4f} on [-8, 8]")

# a coarse text plot of both curves
for w, a, e in zip(omega[::16], approx.dos[::16], exact.dos[::16]):
    print(f"{w:6.2f} {'#' * int(120 * a):<40s}|{'.' * int(120 * e)}")
