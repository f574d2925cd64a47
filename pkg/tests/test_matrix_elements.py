import numpy as np
import pytest
from conftest import random_model

from qseg.basis import BasisSpec
from qseg.ground import solve_generalized_eigenproblem
from qseg.matrix_elements import (
    ConfigurationError,
    Evolve,
    Excitation,
    Pauli,
    PrimitiveCache,
    PrimitiveContext,
    PrimitiveJob,
    assemble_gs_matrices,
    assemble_krylov_matrices,
    candidate_references,
    choose_reference,
    count_primitives,
    evaluate_jobs,
    primitive_overlap_direct,
    primitive_overlap_multifidelity,
)


@pytest.fixture(scope="module")
def ctx():
    m = random_model(3, u=2.5, seed=50, half_filled=True)
    return PrimitiveContext(m, 1, 2, BasisSpec(0.2, 1, 1), BasisSpec(0.3, 1, 0, "krylov"))


def test_candidate_references_rules():
    assert candidate_references(4, 4, 8, (1, 1)) == ["zeros", "ones", "up", "down"]
    assert candidate_references(1, 1, 4, (2, 2)) == ["ones", "up", "down"]
    assert candidate_references(2, 2, 4, (2, 2)) == []
    # spin-resolved rule admits references the total-number rule rejects
    assert candidate_references(2, 0, 3, (0, 2)) == ["ones", "zeros", "up", "down"]


def test_job_adjoint_and_canonical():
    job = PrimitiveJob((Evolve("ground", 1, 0),), (Pauli("XYII"),), "ZZII")
    assert job.adjoint().adjoint() == job
    rep, conj = job.canonical()
    rep2, conj2 = job.adjoint().canonical()
    assert rep == rep2 and conj != conj2
    assert job.degrees(2) == (2, 0)


def test_no_reference_available_raises():
    m = random_model(4, seed=51, half_filled=True)
    c = PrimitiveContext(m, 2, 2, BasisSpec(0.1, 1, 0))
    job = PrimitiveJob((Pauli("XXIIIIII"),), (Pauli("IIIIXXII"),))
    with pytest.raises(ConfigurationError):
        choose_reference(job, c)


@pytest.mark.parametrize(
    "job",
    [
        PrimitiveJob((Evolve("ground", 1, 1),), (Evolve("ground", -1, 0),)),
        PrimitiveJob((Evolve("ground", 0, 0),), (Evolve("ground", 1, 0),), "ZIIIZI"),
        PrimitiveJob((Evolve("ground", 0, -1),), (Evolve("ground", 0, 1),), "XZYIII"),
        PrimitiveJob((Evolve("ground", 1, 0), Pauli("XIIIII"), Evolve("krylov", 1, 0)),
                     (Evolve("ground", 0, 0), Pauli("YIIIII"))),
    ],
)
def test_fidelity_protocol_recovers_bracket(ctx, job):
    ref = primitive_overlap_direct(job, ctx)
    est = primitive_overlap_multifidelity(job, ctx)
    assert abs(est.value - ref) < 1e-10


def test_sampled_fidelities_are_unbiased(ctx):
    job = PrimitiveJob((Evolve("ground", 1, 1),), (Evolve("ground", -1, 0),))
    ref = primitive_overlap_direct(job, ctx)
    vals = [primitive_overlap_multifidelity(job, ctx, shots=4000, seed=s, check=False).value for s in range(40)]
    assert abs(np.mean(vals) - ref) < 0.03
    again = primitive_overlap_multifidelity(job, ctx, shots=4000, seed=3, check=False).value
    assert again == vals[3]


@pytest.mark.parametrize("mode", ["primitive", "fidelity"])
def test_gs_matrices_agree_across_modes(ctx, mode):
    h0, s0 = assemble_gs_matrices(ctx, "direct")
    h1, s1 = assemble_gs_matrices(ctx, mode)
    assert np.abs(h1 - h0).max() < 1e-10 and np.abs(s1 - s0).max() < 1e-10


def test_overlap_matrix_hermitian_psd(ctx):
    _, s = assemble_gs_matrices(ctx)
    assert np.allclose(s, s.conj().T)
    assert np.linalg.eigvalsh(s).min() > -1e-12
    assert np.allclose(np.diag(s), 1.0)


def test_krylov_matrices_agree_across_modes(ctx):
    ctx = PrimitiveContext(ctx.model, 1, 2, BasisSpec(0.2, 1, 0), ctx.specs["krylov"])
    h, s = assemble_gs_matrices(ctx)
    phi = solve_generalized_eigenproblem(h, s).coefficients
    exc = Excitation.single(1, "up", "greater")
    a = assemble_krylov_matrices(ctx, phi, exc, "direct")
    b = assemble_krylov_matrices(ctx, phi, exc, "primitive")
    for x, y in ((a.h, b.h), (a.s, b.s), (a.t, b.t)):
        assert np.abs(x - y).max() < 1e-10


def test_worker_count_and_cache_do_not_change_values(ctx, tmp_path):
    labels = ctx.specs["ground"].labels
    jobs = [PrimitiveJob((Evolve("ground", *labels[i]),), (Evolve("ground", *labels[j]),)) for i in range(3) for j in range(3)]
    one = evaluate_jobs(ctx, jobs, "fidelity", shots=500, seed=7)
    two = evaluate_jobs(ctx, jobs, "fidelity", shots=500, seed=7, workers=2)
    assert one == two
    cache = PrimitiveCache(tmp_path / "c.jsonl")
    first = evaluate_jobs(ctx, jobs, "primitive", cache=cache)
    n = len(cache)
    assert n == 6  # adjoint pairs share one entry
    with open(tmp_path / "c.jsonl", "a") as fh:
        fh.write('{"key": "trunc')
    reloaded = PrimitiveCache(tmp_path / "c.jsonl")
    assert len(reloaded) == n
    assert evaluate_jobs(ctx, jobs, "primitive", cache=reloaded) == first


def test_cache_version_is_checked(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"format": "qseg-primitives", "version": 99}\n')
    with pytest.raises(ValueError):
        PrimitiveCache(p)


def test_primitive_count():
    assert count_primitives(1, 1) == 1
    assert count_primitives(31, 161) == 161 * 162 // 2 * 31**2


def test_invalid_mode(ctx):
    with pytest.raises(ValueError):
        assemble_gs_matrices(ctx, "bogus")
