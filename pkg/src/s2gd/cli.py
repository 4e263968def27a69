"""Command-line entry point: ``s2gd {plan,gen,run,compare,solve-ref}``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import harness, planner
from .dataio import (
    TRACE_HEADER,
    generate_least_squares,
    generate_logistic,
    parse_libsvm,
    write_libsvm,
    write_trace_csv,
)
from .objective import LOSSES, ObjectiveSpec, smoothness_constants


class UsageError(Exception):
    pass


def count(text: str) -> int:
    """Integer flag that also accepts scientific notation such as ``1e9``."""
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value.is_integer():
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    return int(value)


def _meta_path(data: Path) -> Path:
    return data.with_name(data.name + ".meta.json")


# ---------------------------------------------------------------- plan

def _plan_text(plan: planner.WorkPlan, n: int) -> str:
    return (f"j={plan.j} h={plan.h:.6g} (1/{1 / plan.h:.4g}) m={plan.m} c={plan.c:.6g} "
            f"nu_mode={plan.nu_mode} W={planner.format_workload(plan.W / n)}")


def cmd_plan(args, out) -> int:
    if args.table3:
        t0 = time.perf_counter()
        cells = planner.table3(args.n if args.n_given else planner.TABLE3_N)
        if args.json:
            json.dump([asdict(c) for c in cells], out, indent=1)
            out.write("\n")
            return 0
        out.write("kappa\tepsilon\tj\tnu_mode\tW\toptimal\n")
        for c in cells:
            out.write(f"{c.kappa:.0e}\t{c.epsilon:.0e}\t{c.j}\t{c.nu_mode}\t"
                      f"{planner.format_workload(c.W_over_n)}\t{'*' if c.optimal else ''}\n")
        out.write(f"# {len(cells)} cells in {time.perf_counter() - t0:.3f}s\n")
        return 0

    if args.mu is not None and args.kappa is not None:
        raise UsageError("give either --mu or --kappa, not both")
    if args.eps is None:
        raise UsageError("--eps is required")
    L = args.L
    n = args.n
    if args.convex:
        mu_pert, plan = planner.convex_plan(n, L, args.eps, args.rho or 1.0, args.nu_mode, args.j_max)
        record = {"mode": "convex", "n": n, "L": L, "perturbation_mu": mu_pert, **plan.as_dict()}
        text = f"perturbation mu={mu_pert:.6g} " + _plan_text(plan, n)
    else:
        if args.mu is None and args.kappa is None:
            raise UsageError("one of --mu or --kappa is required")
        mu = args.mu if args.mu is not None else L / args.kappa
        make = planner.numeric_plan if args.numeric else planner.optimal_plan
        plan = make(n, L, mu, args.eps, args.nu_mode, j_max=args.j_max)
        record = {"mode": "numeric" if args.numeric else "theory", "n": n, "L": L, "mu": mu,
                  **plan.as_dict()}
        text = _plan_text(plan, n)
        if args.rho is not None:
            j_hp = planner.epochs_for_confidence(plan.c, args.eps, args.rho)
            record["j_confidence"] = j_hp
            text += f" j(rho={args.rho:g})={j_hp}"
    if args.json:
        json.dump(record, out, indent=1)
        out.write("\n")
    else:
        out.write(text + "\n")
    return 0


# ---------------------------------------------------------------- gen

def cmd_gen(args, out) -> int:
    out_path = Path(args.out)
    if args.loss == "least_squares":
        if args.kappa is None:
            raise UsageError("--kappa is required for least squares data")
        data, lam = generate_least_squares(args.n, args.d, args.kappa, args.density, args.seed)
    else:
        data = generate_logistic(args.n, args.d, args.density, args.seed)
        lam = 1.0 / args.n if args.kappa is None else None
        if lam is None:
            L = 0.25 * float(data.row_sq_norms.max())
            lam = L / (args.kappa - 1.0)
    write_libsvm(data, out_path)
    meta = {"loss": args.loss, "lambda": lam, "n": data.n, "d": data.d, "kappa": args.kappa,
            "density": args.density, "seed": args.seed, "add_bias": False}
    _meta_path(out_path).write_text(json.dumps(meta, indent=1) + "\n")
    out.write(f"wrote {data.n}x{data.d} {args.loss} data to {out_path} (lambda={lam:.6g})\n")
    return 0


# ---------------------------------------------------------------- shared objective flags

def _load_objective(args) -> tuple[ObjectiveSpec, dict]:
    path = Path(args.data)
    meta = {}
    if _meta_path(path).exists():
        meta = json.loads(_meta_path(path).read_text())
    loss = args.loss or meta.get("loss")
    if loss is None:
        raise UsageError("--loss is required (no sidecar metadata found)")
    lam = args.lam if args.lam is not None else meta.get("lambda")
    if lam is None:
        raise UsageError("--lambda is required (no sidecar metadata found)")
    bias = args.bias if args.bias is not None else meta.get("add_bias", True)
    data = parse_libsvm(path, add_bias=bias, n_features=meta.get("d") if not bias else None)
    spec = ObjectiveSpec(data, loss, lam=float(lam))
    return spec, {"loss": loss, "lambda": float(lam), "add_bias": bias}


def _load_reference(path: Optional[str]) -> Optional[float]:
    if path is None:
        return None
    return float(json.loads(Path(path).read_text())["f_star"])


def _add_objective_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="LIBSVM file")
    p.add_argument("--loss", choices=LOSSES)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--bias", dest="bias", action="store_true", default=None,
                   help="append a constant feature")
    p.add_argument("--no-bias", dest="bias", action="store_false")
    p.add_argument("--ref", help="JSON file with f_star from solve-ref")


# ---------------------------------------------------------------- run

RUN_KEYS = ("solver", "data", "loss", "lam", "bias", "h", "m", "nu", "epochs", "passes", "seed",
            "alpha", "sgd_h", "trace_every", "auto", "eps", "nu_mode", "ref", "out", "manifest")


def _run_params(args, spec: ObjectiveSpec) -> tuple[harness.RunParams, Optional[dict]]:
    plan_info = None
    if args.auto:
        if args.eps is None:
            raise UsageError("--auto needs --eps")
        params, plan = harness.auto_params(spec, args.eps, args.nu_mode)
        plan_info = plan.as_dict()
        for key in ("h", "m", "nu", "epochs"):
            if getattr(args, key) is not None:
                setattr(params, key, getattr(args, key))
    else:
        params = harness.RunParams(h=args.h, m=args.m, nu=args.nu, epochs=args.epochs)
    params.passes = args.passes
    params.seed = args.seed
    params.alpha = args.alpha
    params.sgd_h = args.sgd_h
    params.trace_every = args.trace_every
    return params, plan_info


def cmd_run(args, out) -> int:
    if args.replay:
        manifest = json.loads(Path(args.replay).read_text())
        stored = manifest["args"]
        for key in RUN_KEYS:
            if key in ("out", "manifest") and getattr(args, key) is not None:
                continue
            setattr(args, key, stored.get(key))
        args.replay = None
    if args.solver is None:
        raise UsageError("--solver is required")
    t0 = time.perf_counter()
    spec, objective_info = _load_objective(args)
    params, plan_info = _run_params(args, spec)
    result = harness.run_named(spec, args.solver, params)
    trace = result.trace
    f_star = _load_reference(args.ref)
    if f_star is not None:
        trace = trace.attach_reference(f_star)
    wall = time.perf_counter() - t0

    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_trace_csv(trace, fh)
    else:
        write_trace_csv(trace, out)
    info = smoothness_constants(spec)
    manifest = {
        "command": "run",
        "args": {key: getattr(args, key) for key in RUN_KEYS},
        "solver": args.solver,
        "objective": {**objective_info, "n": spec.n, "d": spec.d, "L": info.L, "mu": info.mu},
        "config": asdict(params),
        "plan": plan_info,
        "seed": args.seed,
        "outputs": {"trace": args.out},
        "total_work": result.total_work,
        "epochs_run": result.epochs_run,
        "wall_time": wall,
    }
    if args.manifest:
        Path(args.manifest).write_text(json.dumps(manifest, indent=1) + "\n")
    if args.out:
        final = trace.points[-1]
        out.write(f"{args.solver}: work={result.total_work} f={final.objective:.12g}"
                  + (f" residual={final.residual:.3e}" if final.residual is not None else "") + "\n")
    return 0


# ---------------------------------------------------------------- compare

def cmd_compare(args, out) -> int:
    solvers = [s for s in (args.solvers or "").split(",") if s]
    if not solvers:
        raise UsageError("empty solver list")
    spec, _ = _load_objective(args)
    seeds = list(range(args.seed, args.seed + args.seeds))
    fixed = {}
    for item in args.h or []:
        name, _, value = item.partition("=")
        fixed[name] = float(value)
    cells = harness.compare(spec, solvers, args.passes, seeds, h=fixed,
                            f_star=_load_reference(args.ref), threads=args.threads)
    fh = open(args.out, "w", newline="") if args.out else out
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["solver", "seed", "h"] + TRACE_HEADER)
        for c in cells:
            for p in c.trace.points:
                writer.writerow([c.solver, c.seed, repr(c.h), p.work_units, p.epoch, p.objective,
                                 "" if p.residual is None else p.residual])
    finally:
        if args.out:
            fh.close()
    if args.out:
        budget = args.passes * spec.n
        for c in cells:
            p = c.trace.value_at(budget)
            out.write(f"{c.solver}\tseed={c.seed}\th={c.h:.4g}\tf={p.objective:.12g}\n")
    return 0


# ---------------------------------------------------------------- solve-ref

def cmd_solve_ref(args, out) -> int:
    spec, info = _load_objective(args)
    ref = harness.solve_reference(spec, args.eps, args.seed)
    record = {"f_star": ref.f_star, "grad_norm": ref.grad_norm, **info,
              "x_star": ref.x_star.tolist()}
    text = json.dumps(record, indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        out.write(f"f_star={ref.f_star!r} grad_norm={ref.grad_norm:.3e}\n")
    else:
        out.write(text)
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="s2gd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="choose epochs, stepsize and inner-loop bound")
    p.add_argument("--n", type=count, default=None, help="number of examples (default 1e9)")
    p.add_argument("--L", type=float, default=1.0)
    p.add_argument("--mu", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--nu-mode", choices=planner.NU_MODES, default="mu")
    p.add_argument("--rho", type=float, help="failure probability for the high-probability epoch count")
    p.add_argument("--j-max", type=count, default=100)
    p.add_argument("--table3", action="store_true", help="print the full workload comparison grid")
    p.add_argument("--convex", action="store_true", help="plan for a merely convex objective")
    p.add_argument("--numeric", action="store_true", help="tune h and m numerically instead of by formula")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("gen", help="write a synthetic dataset")
    p.add_argument("--loss", choices=LOSSES, default="least_squares")
    p.add_argument("--n", type=count, required=True)
    p.add_argument("--d", type=count, required=True)
    p.add_argument("--kappa", type=float)
    p.add_argument("--density", type=float, default=1.0)
    p.add_argument("--seed", type=count, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="run one solver and write its trace")
    p.add_argument("--solver", choices=harness.SOLVER_NAMES)
    p.add_argument("--data")
    p.add_argument("--loss", choices=LOSSES)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--bias", dest="bias", action="store_true", default=None)
    p.add_argument("--no-bias", dest="bias", action="store_false")
    p.add_argument("--ref")
    p.add_argument("--h", type=float)
    p.add_argument("--m", type=count)
    p.add_argument("--nu", type=float)
    p.add_argument("--epochs", type=count)
    p.add_argument("--passes", type=float, help="work budget in effective passes")
    p.add_argument("--seed", type=count, default=0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--sgd-h", dest="sgd_h", type=float, help="stepsize of the SGD warm start")
    p.add_argument("--trace-every", dest="trace_every", type=count)
    p.add_argument("--auto", action="store_true", help="take h, m and epochs from the planner")
    p.add_argument("--eps", type=float)
    p.add_argument("--nu-mode", dest="nu_mode", choices=planner.NU_MODES, default="mu")
    p.add_argument("--out", help="trace CSV (stdout if omitted)")
    p.add_argument("--manifest", help="JSON run manifest")
    p.add_argument("--replay", help="re-run the configuration stored in a manifest")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run several solvers over several seeds")
    _add_objective_flags(p)
    p.add_argument("--solvers", required=True, help="comma-separated solver names")
    p.add_argument("--passes", type=float, default=30.0)
    p.add_argument("--seeds", type=count, default=1, help="number of seeds")
    p.add_argument("--seed", type=count, default=0, help="first seed")
    p.add_argument("--h", action="append", metavar="SOLVER=H", help="fix a stepsize instead of grid search")
    p.add_argument("--threads", type=count)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("solve-ref", help="compute a high-accuracy optimum")
    _add_objective_flags(p)
    p.add_argument("--eps", type=float, default=1e-14)
    p.add_argument("--seed", type=count, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve_ref)
    return parser


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "plan":
        args.n_given = args.n is not None
        if args.n is None:
            args.n = planner.TABLE3_N
    try:
        return args.func(args, out)
    except (UsageError, harness.MissingParameter, planner.InfeasiblePlan) as exc:
        parser.exit(2, f"{parser.prog} {args.command}: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
