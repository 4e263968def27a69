"""Experiment plumbing shared by the command line and the acceptance tests:
named solver dispatch, hindsight stepsize search, reference optima and
multi-solver comparisons on a common work axis."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import planner
from .objective import ObjectiveSpec, full_gradient, objective_value, smoothness_constants
from .solvers import (
    DivergenceError,
    RunResult,
    SolverConfig,
    gd,
    s2gd,
    s2gd_plus,
    s2gd_sparse,
    sag,
    sgd,
)
from .trace import ConvergenceTrace

SOLVER_NAMES = ("s2gd", "svrg", "s2gd_sparse", "s2gd_plus", "s2gdcon", "gd", "sgd", "sag", "sag_plus")
STEP_GRID = tuple(range(-7, 4))  # h = 2^k / L


@dataclass
class RunParams:
    """Everything a named solver needs beyond the objective.

    ``passes`` is the work budget in effective passes (``n`` units each); it
    fixes the iteration count of GD/SGD/SAG and caps the S2GD epochs.
    """

    h: Optional[float] = None
    m: Optional[int] = None
    nu: Optional[float] = None
    epochs: Optional[int] = None
    passes: Optional[float] = None
    seed: int = 0
    alpha: float = 1.0
    sgd_h: Optional[float] = None
    trace_every: Optional[int] = None


class MissingParameter(ValueError):
    pass


def _need(params: RunParams, *names: str) -> None:
    missing = [name for name in names if getattr(params, name) is None]
    if missing:
        raise MissingParameter(f"missing required hyperparameters: {', '.join(missing)}")


def _budget(spec: ObjectiveSpec, params: RunParams) -> Optional[int]:
    return None if params.passes is None else int(round(params.passes * spec.n))


def _s2gd_config(spec: ObjectiveSpec, params: RunParams, nu: float) -> SolverConfig:
    budget = _budget(spec, params)
    epochs = params.epochs if params.epochs is not None else 10**9
    if params.epochs is None and budget is None:
        raise MissingParameter("missing required hyperparameters: epochs or passes")
    return SolverConfig(h=params.h, m=params.m or 1, nu=nu, epochs=epochs, seed=params.seed,
                        alpha=params.alpha, sgd_h=params.sgd_h, max_work=budget,
                        trace_every=params.trace_every)


def run_named(spec: ObjectiveSpec, name: str, params: RunParams, x0=None) -> RunResult:
    """Run solver ``name`` from ``x0`` (zeros by default)."""
    x0 = np.zeros(spec.d) if x0 is None else x0
    info = smoothness_constants(spec)
    if name in ("s2gd", "s2gd_sparse", "svrg"):
        _need(params, "h", "m")
        nu = 0.0 if name == "svrg" else (info.mu if params.nu is None else params.nu)
        config = _s2gd_config(spec, params, nu)
        return (s2gd_sparse if name == "s2gd_sparse" else s2gd)(spec, x0, config)
    if name == "s2gdcon":
        params = replace(params, h=1.0 / (10 * info.L), m=params.m or math.ceil(info.kappa))
        return s2gd(spec, x0, _s2gd_config(spec, params, info.mu))
    if name == "s2gd_plus":
        _need(params, "h")
        if params.epochs is None and params.passes is None:
            raise MissingParameter("missing required hyperparameters: epochs or passes")
        config = _s2gd_config(spec, params, info.mu if params.nu is None else params.nu)
        return s2gd_plus(spec, x0, config)
    if name in ("gd", "sgd", "sag", "sag_plus"):
        _need(params, "h", "passes")
        if name == "gd":
            return gd(spec, x0, params.h, int(round(params.passes)))
        iterations = _budget(spec, params)
        if name == "sgd":
            return sgd(spec, x0, params.h, iterations, params.seed, params.trace_every)
        return sag(spec, x0, params.h, iterations, params.seed, plus=name == "sag_plus",
                   trace_every=params.trace_every)
    raise ValueError(f"unknown solver {name!r}; expected one of {SOLVER_NAMES}")


def auto_params(spec: ObjectiveSpec, epsilon: float, nu_mode: str = "mu",
                j_max: int = 100) -> tuple[RunParams, planner.WorkPlan]:
    """Fill stepsize, inner-loop bound and epoch count from the work-optimal plan."""
    info = smoothness_constants(spec)
    if not info.mu > 0:
        raise ValueError("automatic parameters need a strongly convex objective (lambda > 0)")
    plan = planner.optimal_plan(spec.n, info.L, info.mu, epsilon, nu_mode, j_max)
    nu = info.mu if nu_mode == "mu" else 0.0
    return RunParams(h=plan.h, m=plan.m, nu=nu, epochs=plan.j), plan


@dataclass
class Reference:
    f_star: float
    x_star: np.ndarray
    grad_norm: float


def solve_reference(spec: ObjectiveSpec, epsilon: float = 1e-14, seed: int = 0,
                    max_extra_epochs: int = 50) -> Reference:
    """High-accuracy optimum: S2GD with planner parameters for ``epsilon``,
    continued while the objective keeps decreasing."""
    info = smoothness_constants(spec)
    x0 = np.zeros(spec.d)
    if info.mu > 0:
        params, plan = auto_params(spec, epsilon)
        config = SolverConfig(h=params.h, m=params.m, nu=params.nu, epochs=plan.j, seed=seed)
        x = s2gd(spec, x0, config).x_final
        f = objective_value(spec, x)
        for k in range(max_extra_epochs):
            nxt = s2gd(spec, x, replace(config, epochs=1, seed=seed + 1 + k)).x_final
            f_next = objective_value(spec, nxt)
            if not f_next < f:
                break
            x, f = nxt, f_next
    else:
        x = gd(spec, x0, 1.0 / info.L, 20000).x_final
        f = objective_value(spec, x)
    return Reference(f_star=f, x_star=x, grad_norm=float(np.linalg.norm(full_gradient(spec, x))))


def _threads() -> int:
    env = os.environ.get("S2GD_THREADS")
    return max(1, int(env)) if env else (os.cpu_count() or 1)


def _parallel_map(fn: Callable, items: Sequence, threads: Optional[int] = None) -> list:
    workers = min(threads or _threads(), max(len(items), 1))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))  # map keeps input order


def _final_objective(spec: ObjectiveSpec, name: str, params: RunParams, budget: float) -> float:
    try:
        res = run_named(spec, name, params)
    except DivergenceError:
        return math.inf
    return res.trace.value_at(budget).objective


def hindsight_stepsize(spec: ObjectiveSpec, name: str, base: RunParams, seeds: Sequence[int],
                       grid: Sequence[int] = STEP_GRID, threads: Optional[int] = None) -> float:
    """Grid stepsize ``2^k / L`` with the lowest mean final objective over ``seeds``."""
    L = smoothness_constants(spec).L
    budget = (base.passes or 0) * spec.n
    cells = [(k, s) for k in grid for s in seeds]

    def evaluate(cell):
        k, s = cell
        return _final_objective(spec, name, replace(base, h=2.0**k / L, seed=s), budget)

    finals = _parallel_map(evaluate, cells, threads)
    scores = {}
    for (k, _), value in zip(cells, finals):
        scores.setdefault(k, []).append(value)
    best_k = min(grid, key=lambda k: (np.mean(scores[k]), k))
    if not math.isfinite(np.mean(scores[best_k])):
        raise DivergenceError(f"{name}: every grid stepsize diverged")
    return 2.0**best_k / L


@dataclass
class CompareCell:
    solver: str
    seed: int
    h: float
    result: RunResult
    trace: ConvergenceTrace = field(init=False)

    def __post_init__(self):
        self.trace = self.result.trace


def default_params(spec: ObjectiveSpec, name: str, passes: float) -> RunParams:
    """Budgeted defaults used by comparisons: S2GD-type methods get ``m = 2n``."""
    params = RunParams(passes=passes)
    if name in ("s2gd", "s2gd_sparse", "svrg", "s2gd_plus"):
        params.m = 2 * spec.n
    return params


def compare(spec: ObjectiveSpec, solvers: Sequence[str], passes: float, seeds: Sequence[int],
            h: Optional[dict] = None, f_star: Optional[float] = None,
            threads: Optional[int] = None) -> list[CompareCell]:
    """One run per (solver, seed) under a common work budget.

    Solvers without an entry in ``h`` get the hindsight stepsize (chosen over
    all ``seeds``); ``s2gdcon`` uses its fixed conservative stepsize. For
    ``s2gd_plus`` the SGD warm-start stepsize is the hindsight one-pass SGD
    stepsize.
    """
    if not solvers:
        raise ValueError("solver list is empty")
    for name in solvers:
        if name not in SOLVER_NAMES:
            raise ValueError(f"unknown solver {name!r}; expected one of {SOLVER_NAMES}")
    h = dict(h or {})
    base = {name: default_params(spec, name, passes) for name in solvers}
    if "s2gd_plus" in solvers and base["s2gd_plus"].sgd_h is None:
        sgd_base = RunParams(passes=1.0)
        base["s2gd_plus"].sgd_h = h.get("sgd_plus_init") or hindsight_stepsize(
            spec, "sgd", sgd_base, seeds, threads=threads)
    for name in solvers:
        if name == "s2gdcon":
            h[name] = 1.0 / (10 * smoothness_constants(spec).L)
        elif name not in h:
            h[name] = hindsight_stepsize(spec, name, base[name], seeds, threads=threads)

    cells = [(name, s) for name in solvers for s in seeds]

    def run_cell(cell):
        name, s = cell
        res = run_named(spec, name, replace(base[name], h=h[name], seed=s))
        return CompareCell(name, s, h[name], res)

    out = _parallel_map(run_cell, cells, threads)
    if f_star is not None:
        for c in out:
            c.trace = c.trace.attach_reference(f_star)
    return out
