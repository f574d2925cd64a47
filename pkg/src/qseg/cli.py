"""Command-line driver: convergence sweeps, spectra, DMFT, exact baselines and depth counts.

Every run writes ``manifest.json`` into ``--out`` with the fully resolved
arguments and a checksum of each output file. Passing that manifest back via
``--config`` reproduces the run; flags given on the command line override
the stored values.

Exit codes: 0 success, 2 usage error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .basis import BasisSpec
from .baths import BATHS, reference_model
from .circuits import ORBITALS, depth_report
from .dmft import DmftConfig, FitError, MatsubaraGrid, dmft_loop
from .ed import CapabilityError, exact_greens_function, sector_ground_state
from .greens import default_omega
from .ground import DegenerateBasisError
from .matrix_elements import ConfigurationError, PrimitiveCache, ProtocolError
from .operators import AimModel, SectorError
from .pipeline import QsegConfig, QsegSolver

log = logging.getLogger("qseg")

CACHE_ENV = "QSEG_CACHE_DIR"
COMMANDS = ("gs-converge", "greens", "dmft", "oracle", "depth")
NUMERICAL_ERRORS = (DegenerateBasisError, ProtocolError, CapabilityError, FitError, SectorError, np.linalg.LinAlgError)


class UsageError(ValueError):
    pass


def _int_list(text: str) -> list[int]:
    """``"7"``, ``"0,5,10"`` or an inclusive range ``"0:30"`` / ``"0:30:5"``."""
    out = []
    for part in str(text).split(","):
        if ":" in part:
            lo, hi, *step = (int(x) for x in part.split(":"))
            out.extend(range(lo, hi + 1, step[0] if step else 1))
        else:
            out.append(int(part))
    return out


def _float_list(text: str) -> list[float]:
    return [float(x) for x in str(text).split(",")]


def _add_model_args(p):
    p.add_argument("--u", default="8", help="interaction; gs-converge accepts a comma list")
    p.add_argument("--bath", choices=sorted(BATHS), default="first", help="tabulated seven-pole bath")
    p.add_argument("--model", help="model JSON (AimModel.to_json or a dmft result); overrides --bath")
    p.add_argument("--nup", type=int)
    p.add_argument("--ndown", type=int)


def _add_basis_args(p, sweep: bool = False):
    p.add_argument("--dt", default="0.1", help="ground-state time step" + (" (comma list)" if sweep else ""))
    p.add_argument("--nl", default="7", help="coarse steps n_l" + (" (list or range a:b)" if sweep else ""))
    p.add_argument("--nk", default="3", help="fine steps n_k" + (" (list or range a:b)" if sweep else ""))
    p.add_argument("--dtt", type=float, default=0.1, help="Krylov time step")
    p.add_argument("--ntl", type=int, default=80, help="Krylov coarse steps")
    p.add_argument("--ntk", type=int, default=0, help="Krylov fine steps")
    p.add_argument("--cutoff", type=float, default=1e-10, help="relative overlap-eigenvalue cutoff")
    p.add_argument("--maxn", type=int, default=50, help="Lanczos steps in the subspace")
    p.add_argument("--mode", choices=("direct", "primitive", "fidelity", "shots"), default="direct")
    p.add_argument("--shots", type=int, default=10000, help="shots per fidelity in --mode shots")
    p.add_argument("--orbitals", choices=ORBITALS, default="hartree")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qseg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qseg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="qseg-out", help="output directory")
    common.add_argument("--config", help="manifest to replay; explicit flags override it")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    spectra = argparse.ArgumentParser(add_help=False)
    spectra.add_argument("--delta", type=float, default=0.1, help="broadening")
    spectra.add_argument("--wmin", type=float, default=-8.0)
    spectra.add_argument("--wmax", type=float, default=8.0)
    spectra.add_argument("--nw", type=int, default=801)
    spectra.add_argument("--site", type=int, default=1)

    p = sub.add_parser("gs-converge", parents=[common], help="ground-state error over basis parameters")
    _add_model_args(p)
    _add_basis_args(p, sweep=True)

    p = sub.add_parser("greens", parents=[common, spectra], help="impurity spectral function")
    _add_model_args(p)
    _add_basis_args(p)

    p = sub.add_parser("dmft", parents=[common], help="Bethe-lattice self-consistency loop")
    _add_model_args(p)
    _add_basis_args(p)
    p.add_argument("--solver", choices=("oracle", "qseg"), default="oracle")
    p.add_argument("--beta", type=float, default=100.0)
    p.add_argument("--nmat", type=int, default=100, help="Matsubara samples in the fit")
    p.add_argument("--nb", type=int, default=7, help="bath sites")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--mixing", type=float, default=0.5)
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("--delta", type=float, default=0.1, help="broadening of the final spectrum")

    p = sub.add_parser("oracle", parents=[common, spectra], help="exact ground energy and spectrum")
    _add_model_args(p)

    p = sub.add_parser("depth", parents=[common], help="CNOT-layer counts")
    p.add_argument("--N", type=int, default=8, help="number of sites")
    p.add_argument("--nup", type=int)
    p.add_argument("--ndown", type=int)
    p.add_argument("--nl", type=int, default=7)
    p.add_argument("--ntl", type=int, default=80)
    p.add_argument("--u", type=float, default=8.0)
    p.add_argument("--no-synth", action="store_true", help="skip circuit synthesis")
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    """Parse ``argv`` with manifest values (``--config``) as defaults."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config) as fh:
            stored = json.load(fh)
        if stored.get("command") != args.command:
            parser.error(f"manifest is for {stored.get('command')!r}, not {args.command!r}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        defaults = {k: v for k, v in stored["args"].items() if k not in ("config", "out", "command")}
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


# ---------------------------------------------------------------------------
# helpers


def load_model(args, u: float) -> AimModel:
    if args.model:
        with open(args.model) as fh:
            d = json.load(fh)
        if "history" in d:  # a dmft result: take the converged bath
            fit = d["history"][-1]["fit"]
            return AimModel.from_bath(u, fit["bath_onsite"], fit["bath_hopping"])
        m = AimModel.from_dict(d)
        eps = m.epsilon.copy()
        if m.n_imp == 1 and np.isclose(eps[0, 0], -m.u / 2):
            # keep a half-filled model half filled at the new interaction
            eps[0, 0] = -u / 2
        return AimModel(m.n_imp, m.n_b, eps, u)
    return reference_model(args.bath, u)


def sector_of(args, model: AimModel) -> tuple[int, int]:
    n = model.n_sites
    nup = n // 2 if args.nup is None else args.nup
    ndown = n // 2 if args.ndown is None else args.ndown
    if not (0 <= nup <= n and 0 <= ndown <= n):
        raise UsageError(f"sector ({nup}, {ndown}) outside 0..{n}")
    return nup, ndown


def qseg_config(args, dt=None, n_l=None, n_k=None) -> QsegConfig:
    mode, shots = args.mode, None
    if mode == "shots":
        mode, shots = "fidelity", args.shots
    dt = float(_float_list(args.dt)[0]) if dt is None else dt
    n_l = _int_list(args.nl)[0] if n_l is None else n_l
    n_k = _int_list(args.nk)[0] if n_k is None else n_k
    if min(n_l, n_k, args.ntl, args.ntk) < 0 or dt <= 0 or args.dtt <= 0:
        raise UsageError("step counts must be nonnegative and time steps positive")
    return QsegConfig(
        gs_spec=BasisSpec(dt, n_l, n_k, "ground"),
        gf_spec=BasisSpec(args.dtt, args.ntl, args.ntk, "krylov"),
        mode=mode,
        cutoff=args.cutoff,
        max_n=args.maxn,
        shots=shots,
        seed=args.seed,
        workers=args.jobs,
        orbitals=args.orbitals,
    )


def primitive_cache(config: QsegConfig) -> PrimitiveCache | None:
    root = os.environ.get(CACHE_ENV)
    if not root or config.mode == "direct":
        return None
    return PrimitiveCache(os.path.join(root, "primitives.jsonl"))


def omega_grid(args) -> np.ndarray:
    if args.nw < 2 or args.wmax <= args.wmin:
        raise UsageError("need --nw >= 2 and --wmax > --wmin")
    return default_omega(args.wmin, args.wmax, args.nw)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r])


def _sha256(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def write_manifest(args, outputs: list[str], extra: dict | None = None) -> str:
    stored = {k: v for k, v in vars(args).items() if k not in ("config",)}
    doc = {
        "command": args.command,
        "version": __version__,
        "args": stored,
        "outputs": {os.path.basename(p): _sha256(p) for p in outputs},
    }
    doc.update(extra or {})
    path = os.path.join(args.out, "manifest.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# ---------------------------------------------------------------------------
# commands


def cmd_gs_converge(args) -> list[str]:
    rows = []
    for u in _float_list(args.u):
        model = load_model(args, u)
        sector = sector_of(args, model)
        exact = sector_ground_state(model, *sector)[0]
        for dt in _float_list(args.dt):
            for n_k in _int_list(args.nk):
                for n_l in _int_list(args.nl):
                    cfg = qseg_config(args, dt, n_l, n_k)
                    gs = QsegSolver(model, cfg, sector, primitive_cache(cfg)).ground_state()
                    rows.append([u, dt, n_l, n_k, cfg.gs_spec.size, gs.energy, exact, gs.energy - exact, gs.discarded])
                    log.info("U=%g dt=%g n_l=%d n_k=%d dE=%.3e", u, dt, n_l, n_k, gs.energy - exact)
    path = os.path.join(args.out, "gs_convergence.csv")
    _write_rows(path, ["u", "dt", "n_l", "n_k", "basis_size", "energy", "exact", "delta_e", "discarded"], rows)
    return [path]


def cmd_greens(args) -> list[str]:
    u = _float_list(args.u)[0]
    model = load_model(args, u)
    cfg = qseg_config(args)
    solver = QsegSolver(model, cfg, sector_of(args, model), primitive_cache(cfg))
    res = solver.greens_function(omega_grid(args), args.delta, args.site)
    path = os.path.join(args.out, "dos.csv")
    with open(path, "w") as fh:
        fh.write(res.to_csv())
    coeff = os.path.join(args.out, "krylov.json")
    from .matrix_elements import Excitation

    doc = {
        "ground": solver.ground_state().to_dict(),
        "trotter_steps": cfg.trotter_steps,
        "greater": solver.krylov(Excitation(((args.site, 1.0),), "up", "greater")).to_dict(),
        "lesser": solver.krylov(Excitation(((args.site, 1.0),), "up", "lesser")).to_dict(),
    }
    with open(coeff, "w") as fh:
        json.dump(doc, fh, indent=1)
    return [path, coeff]


def cmd_oracle(args) -> list[str]:
    u = _float_list(args.u)[0]
    model = load_model(args, u)
    sector = sector_of(args, model)
    res = exact_greens_function(model, omega_grid(args), args.delta, args.site, sector=sector, method="lanczos")
    path = os.path.join(args.out, "dos_exact.csv")
    with open(path, "w") as fh:
        fh.write(res.to_csv())
    epath = os.path.join(args.out, "ground_exact.json")
    with open(epath, "w") as fh:
        json.dump({"energy": res.e_gs, "sector": list(sector), "model": model.to_dict()}, fh, indent=1)
    return [path, epath]


def cmd_dmft(args) -> list[str]:
    u = _float_list(args.u)[0]
    if not 0.0 <= args.mixing <= 1.0:
        raise UsageError("--mixing must lie in [0, 1]")
    cfg = DmftConfig(
        u=u,
        n_b=args.nb,
        grid=MatsubaraGrid(args.beta, args.nmat),
        tol=args.tol,
        max_iter=args.max_iter,
        mixing=args.mixing,
        solver=args.solver,
        restarts=args.restarts,
        seed=args.seed,
        qseg=qseg_config(args) if args.solver == "qseg" else None,
    )
    res = dmft_loop(cfg)
    hist = os.path.join(args.out, "dmft.json")
    with open(hist, "w") as fh:
        fh.write(res.to_json())
    model = res.model
    omega = default_omega()
    if args.solver == "qseg":
        spec = QsegSolver(model, cfg.qseg).greens_function(omega, args.delta)
    else:
        spec = exact_greens_function(model, omega, args.delta, method="lanczos")
    dos = os.path.join(args.out, "dos.csv")
    with open(dos, "w") as fh:
        fh.write(spec.to_csv())
    if not res.converged:
        log.warning("dmft loop did not converge in %d iterations", cfg.max_iter)
    return [hist, dos]


def depth_model(n_sites: int, u: float) -> AimModel:
    """Tabulated bath for eight sites, an evenly spread bath otherwise."""
    if n_sites == 8:
        return reference_model("first", u)
    n_b = n_sites - 1
    onsite = np.linspace(-1.0, 1.0, n_b) if n_b > 1 else np.zeros(1)
    return AimModel.from_bath(u, onsite, np.full(n_b, 0.5))


def cmd_depth(args) -> list[str]:
    if args.N < 2:
        raise UsageError("--N must be at least 2")
    model = depth_model(args.N, args.u)
    nup, ndown = sector_of(args, model)
    rep = depth_report(model, nup, ndown, args.nl, args.ntl, synthesize=not args.no_synth)
    print(rep.d_max)
    path = os.path.join(args.out, "depth.json")
    with open(path, "w") as fh:
        json.dump(rep.__dict__, fh, indent=1)
    return [path]


HANDLERS = {
    "gs-converge": cmd_gs_converge,
    "greens": cmd_greens,
    "dmft": cmd_dmft,
    "oracle": cmd_oracle,
    "depth": cmd_depth,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    os.makedirs(args.out, exist_ok=True)
    try:
        outputs = HANDLERS[args.command](args)
    except NUMERICAL_ERRORS as exc:
        print(f"qseg {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (UsageError, ConfigurationError, ValueError) as exc:
        # ConfigurationError: the requested filling admits no reference state
        print(f"qseg {args.command}: error: {exc}", file=sys.stderr)
        return 2
    write_manifest(args, outputs)
    return 0


if __name__ == "__main__":
    sys.exit(main())
