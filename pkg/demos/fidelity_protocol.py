"""One bracket evaluated directly and through the multi-fidelity protocol.

The protocol never forms an overlap of two different states. It measures
three fidelities of superpositions with a reference state that lives in a
particle-number sector the bracket cannot reach, and reconstructs the
complex value from them.
"""
from qseg import BasisSpec
from qseg.baths import reference_model
from qseg.matrix_elements import (
    Evolve,
    Pauli,
    PrimitiveContext,
    PrimitiveJob,
    primitive_overlap_direct,
    primitive_overlap_multifidelity,
)

model = reference_model("first", 8.0)
ctx = PrimitiveContext(model, 4, 4, BasisSpec(0.1, 7, 3), BasisSpec(0.1, 80, 0, "krylov"))

# a Krylov-type bracket: time evolution, an inserted c-dagger Pauli string on
# the impurity, and a Hamiltonian hopping term in the middle
cdag = "X" + "I" * 15
job = PrimitiveJob(
    bra=(Evolve("ground", 1, 2), Pauli(cdag), Evolve("krylov", 1, 0)),
    ket=(Evolve("ground", -1, 0), Pauli(cdag), Evolve("krylov", 0, 0)),
    middle="XZZZZZZX" + "I" * 8,
)

direct = primitive_overlap_direct(job, ctx)
est = primitive_overlap_multifidelity(job, ctx)
ref = est.reference
print(f"direct     {direct:.12f}")
print(f"fidelity   {est.value:.12f}   (|diff| = {abs(direct - est.value):.1e})")
print(f"reference  {ref.r_state} state, auxiliary bra: {ref.auxiliary}, r_R = {ref.r_r:.4f}")
print("F1, F2, F3 =", ", ".join(f"{f:.6f}" for f in est.fidelities))

# with finite sampling the estimate scatters around the exact value
for shots in (10**3, 10**5):
    vals = [primitive_overlap_multifidelity(job, ctx, shots=shots, seed=s, check=False).value for s in range(5)]
    print(f"{shots:>7d} shots:", "  ".join(f"{v.real:+.4f}{v.imag:+.4f}j" for v in vals))
