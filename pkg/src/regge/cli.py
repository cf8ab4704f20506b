"""Command-line front end.

Subcommands: generate, validate, curvature, flow, einstein-check, secondvar.
Exit codes: 0 success, 2 usage or unreadable input, 3 invalid metric,
4 flow precondition (e.g. a vanishing denominator at t = 0), 5 numerical
failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .complex import ComplexError, check_pseudomanifold
from .curvature import BoundaryNotSupported, curvature_report, einstein_verdict
from .flows import FlowKind, StepControl, StopCriteria, integrate
from .generators import (GeneratedSpace, GeneratorError, barycentric_subdivision,
                         boundary_simplex, flat_torus, perturb)
from .io import FormatError, dumps, load_complex, load_metric, save_complex, save_metric
from .metric import MetricError, is_valid
from . import secondvar as sv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVALID_METRIC = 3
EXIT_PRECONDITION = 4
EXIT_NUMERICAL = 5


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    """Everything needed to reproduce a run."""
    command: str
    complex_path: str | None = None
    metric_path: str | None = None
    kind: str | None = None
    t_end: float | None = None
    tolerances: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _g6(x) -> str:
    return format(float(x), ".6g")


def _table(header, rows) -> str:
    cols = [header] + [[c if isinstance(c, str) else _g6(c) for c in r] for r in rows]
    width = [max(len(r[i]) for r in cols) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, width)) for r in cols]
    return "\n".join(lines)


def _load(args):
    try:
        K = load_complex(args.complex)
        z = load_metric(args.metric, K)
    except (OSError, FormatError, ComplexError) as exc:
        raise CliError(EXIT_USAGE, str(exc)) from exc
    return K, z


def _require_valid(K, z):
    if np.any(z <= 0):
        e = K.edges[int(np.flatnonzero(z <= 0)[0])]
        raise CliError(EXIT_INVALID_METRIC,
                       f"invalid metric: non-positive squared length on edge {_named(K, e)}")
    val = is_valid(K, z)
    if not val:
        raise CliError(EXIT_INVALID_METRIC,
                       f"invalid metric: simplex {_named(K, val.simplex)} is not realizable")
    return val


def _named(K, s):
    if s is None:
        return "?"
    return tuple(int(K.labels[v]) for v in s)


# -- generate ---------------------------------------------------------------

def cmd_generate(args) -> int:
    try:
        if args.kind == "boundary-simplex":
            space = boundary_simplex(args.n, args.a)
        elif args.kind == "torus":
            space = flat_torus(args.n, args.period)
        else:
            if not args.input:
                raise CliError(EXIT_USAGE, "barycentric needs --input COMPLEX METRIC")
            K = load_complex(args.input[0])
            z = load_metric(args.input[1], K)
            _require_valid(K, z)
            space, _ = barycentric_subdivision(GeneratedSpace(K, z, {"kind": "file"}))
        if args.perturb:
            space = perturb(space, args.perturb, args.constraint, seed=args.seed)
    except (GeneratorError, FormatError, ComplexError, OSError) as exc:
        raise CliError(EXIT_USAGE, str(exc)) from exc
    cpath = Path(f"{args.out}.complex.json")
    mpath = Path(f"{args.out}.metric.json")
    save_complex(cpath, space.K)
    save_metric(mpath, space.K, space.z)
    K = space.K
    print(f"wrote {cpath} and {mpath}")
    print("f-vector: " + " ".join(str(K.count(k)) for k in range(K.dim + 1)))
    return EXIT_OK


# -- validate ---------------------------------------------------------------

def cmd_validate(args) -> int:
    K, z = _load(args)
    cert = check_pseudomanifold(K)
    print(f"dim {K.dim}, f-vector " + " ".join(str(K.count(k)) for k in range(K.dim + 1)))
    print(f"pseudomanifold: {cert.is_pseudomanifold}"
          + (f" ({cert.violation})" if cert.violation else ""))
    print(f"boundary faces: {len(cert.boundary_faces)}")
    val = _require_valid(K, z)
    msg = "metric: valid"
    if val.near_degenerate:
        msg += f" ({len(val.near_degenerate)} near-degenerate simplexes)"
    print(msg)
    return EXIT_OK


# -- curvature --------------------------------------------------------------

def _report(K, z):
    _require_valid(K, z)
    try:
        return curvature_report(K, z)
    except BoundaryNotSupported as exc:
        raise CliError(EXIT_USAGE, str(exc)) from exc


def cmd_curvature(args) -> int:
    K, z = _load(args)
    r = _report(K, z)
    if args.out:
        Path(args.out).write_text(dumps(r.to_dict()) + "\n")
    print(f"R = {_g6(r.R)}  V = {_g6(r.V)}  |z|^2 = {_g6(r.norm_z_sq)}")
    rows = []
    for e, (i, j) in enumerate(K.edges):
        rows.append([f"{K.labels[i]}-{K.labels[j]}", z[e], r.Ein[e], r.v[e], r.ric_hat_I[e]])
    if args.max_rows is not None and len(rows) > args.max_rows:
        rows = rows[:args.max_rows]
    print(_table(["edge", "z_e", "Ein_e", "v_e", "ric_hat_I_e"], rows))
    return EXIT_OK


# -- einstein-check ---------------------------------------------------------

def cmd_einstein(args) -> int:
    K, z = _load(args)
    r = _report(K, z)
    v = einstein_verdict(K, z, tol=args.tol, report=r)
    print(dumps(v.to_dict()))
    return EXIT_OK


# -- flow -------------------------------------------------------------------

def _flow_job(job: dict) -> dict:
    """One integration; module-level so process pools can run it."""
    K = load_complex(job["complex"])
    z = load_metric(job["metric"], K)
    step = StepControl(h0=job["h0"], adaptive=not job["fixed_step"],
                       max_steps=job["max_steps"])
    stop = StopCriteria(residual_tol=job["tol"])
    traj = integrate(job["kind"], K, z, job["t_end"], step=step, stop=stop)
    traj.write_csv(job["out"])
    out = traj.summary()
    fam = traj.kind.family
    out["delta_final"] = out.get("delta_II1_final" if fam == "II" else "delta_I1_final")
    cfg = RunConfig("flow", job["complex"], job["metric"], job["kind"], job["t_end"],
                    {"residual_tol": job["tol"], "h0": job["h0"],
                     "fixed_step": job["fixed_step"], "max_steps": job["max_steps"]},
                    {"csv": job["out"], "sidecar": job["out"] + ".json"})
    Path(job["out"] + ".json").write_text(dumps({**out, "config": cfg.to_dict()}) + "\n")
    out["out"] = job["out"]
    return out


def _threads() -> int:
    env = os.environ.get("REGGE_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise CliError(EXIT_USAGE, f"REGGE_THREADS must be an integer, got {env!r}")
        if n < 1:
            raise CliError(EXIT_USAGE, "REGGE_THREADS must be at least 1")
        return n
    return os.cpu_count() or 1


def cmd_flow(args) -> int:
    K, z = _load(args)
    _require_valid(K, z)
    if args.sweep:
        names = [s.strip() for s in args.sweep.split(",") if s.strip()]
        if names == ["all"]:
            names = [k.value for k in FlowKind]
    else:
        if not args.kind:
            raise CliError(EXIT_USAGE, "flow needs --kind or --sweep")
        names = [args.kind]
    try:
        kinds = [FlowKind.parse(nm) for nm in names]
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from exc
    out = Path(args.out)
    jobs = []
    for k in kinds:
        path = out if len(kinds) == 1 else out.with_name(f"{out.stem}.{k.value}{out.suffix}")
        jobs.append({"kind": k.value, "complex": args.complex, "metric": args.metric,
                     "t_end": args.t_end, "tol": args.tol, "h0": args.h0,
                     "fixed_step": args.fixed_step, "max_steps": args.max_steps,
                     "out": str(path)})
    workers = min(_threads(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_flow_job, jobs))
    else:
        results = [_flow_job(j) for j in jobs]
    code = EXIT_OK
    for res in results:
        print(f"{res['kind']}: {res['termination']} at t = {_g6(res.get('t_final', 0.0))}, "
              f"R = {_g6(res['R_final'])}, Delta = {_g6(res['delta_final'])}, "
              f"steps = {res['steps']} -> {res['out']}")
        if res["termination"] == "DenominatorZero":
            print(f"  {res['message']}", file=sys.stderr)
            code = max(code, EXIT_PRECONDITION)
        elif res["termination"] == "StepUnderflow":
            code = max(code, EXIT_NUMERICAL)
    return code


# -- secondvar --------------------------------------------------------------

def _groups_text(groups) -> str:
    return ", ".join(f"{_g6(0.0 if abs(v) < 1e-9 else v)} (x{m})" for v, m in groups)


def cmd_secondvar(args) -> int:
    a = args.a
    if not a > 0:
        raise CliError(EXIT_USAGE, "--a must be positive")
    g1, _, _, g4 = sv.gammas(a)
    if args.constraint == "sphere":
        Q, raw = sv.second_variation_sphere(a)
        forms = [("derived", sv.second_variation_sphere(a, normalized=True)[1])]
        norm_name, norm = "gamma1", g1
    else:
        Q, raw = sv.second_variation_volume(a)
        forms = [("derived", sv.second_variation_volume(a, normalized=True)[1]),
                 ("printed", sv.second_variation_volume(a, normalized=True,
                                                        form="printed")[1])]
        norm_name, norm = "gamma4", g4
    print(f"second variation of R at the equilateral 4-simplex boundary, "
          f"constraint = {args.constraint}, a = {_g6(a)}")
    print("quadratic form Q:")
    for row in Q:
        print("  " + " ".join(f"{x:>12.6g}" for x in row))
    print(f"eigenvalues of Q: {_groups_text(raw.groups)}")
    print(f"normalization: Q / {norm_name}, {norm_name} = {_g6(norm)}")
    ref = sv.REFERENCE_SPECTRA[args.constraint]
    tol = sv.REFERENCE_TOL[args.constraint]
    for name, res in forms:
        c = res.coefficients
        print(f"[{name}] coefficients: H1 {_g6(c['H1'])}, H4 {_g6(c['H4'])}, H5 {_g6(c['H5'])}")
        print(f"[{name}] eigenvalues: {_groups_text(res.groups)}; "
              f"tangent space: {res.tangent_definiteness}")
        ok = sv.compare_spectrum(res, ref, tol)
        print(f"[{name}] reference {_groups_text(ref)} within {tol:g}: "
              f"{'PASS' if ok else 'FAIL'}")
    if args.constraint == "volume":
        cc = g1 / g4
        print(f"c = gamma1/gamma4 = {_g6(cc)}; derived form (13+5c) H4 + (34-10c) H5, "
              f"printed form (-11+5c) H4 + (46-10c) H5")
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="regge", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a complex and metric pair")
    g.add_argument("--kind", required=True, choices=["boundary-simplex", "torus", "barycentric"])
    g.add_argument("--n", type=int, default=3)
    g.add_argument("--a", type=float, default=1.0)
    g.add_argument("--period", type=int, default=3)
    g.add_argument("--input", nargs=2, metavar=("COMPLEX", "METRIC"))
    g.add_argument("--perturb", type=float, default=0.0, metavar="MAGNITUDE")
    g.add_argument("--constraint", choices=["none", "sphere", "volume"], default="none")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output prefix")
    g.set_defaults(func=cmd_generate)

    def io_args(sp):
        sp.add_argument("--complex", required=True)
        sp.add_argument("--metric", required=True)

    v = sub.add_parser("validate", help="check complex and metric")
    io_args(v)
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("curvature", help="curvature report")
    io_args(c)
    c.add_argument("--out", help="JSON report path")
    c.add_argument("--max-rows", type=int, default=None)
    c.set_defaults(func=cmd_curvature)

    e = sub.add_parser("einstein-check", help="Einstein verdict")
    io_args(e)
    e.add_argument("--tol", type=float, default=1e-8)
    e.set_defaults(func=cmd_einstein)

    f = sub.add_parser("flow", help="integrate an Einstein flow")
    io_args(f)
    f.add_argument("--kind", help="|".join(k.value for k in FlowKind))
    f.add_argument("--sweep", help="comma-separated kinds, or 'all', run in parallel")
    f.add_argument("--t-end", type=float, required=True)
    f.add_argument("--tol", type=float, default=1e-9, help="residual tolerance")
    f.add_argument("--h0", type=float, default=None)
    f.add_argument("--fixed-step", action="store_true")
    f.add_argument("--max-steps", type=int, default=1_000_000)
    f.add_argument("--out", required=True, help="CSV path")
    f.set_defaults(func=cmd_flow)

    s = sub.add_parser("secondvar", help="second variation at the 4-simplex boundary")
    s.add_argument("--constraint", required=True, choices=["sphere", "volume"])
    s.add_argument("--a", type=float, default=1.0)
    s.set_defaults(func=cmd_secondvar)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except MetricError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_METRIC
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
