"""S2GD and its relatives, plus the GD/SGD/SAG baselines.

All solvers count work in stochastic-gradient evaluations: a full gradient
costs ``n`` units, an S2GD inner step 2 units, an SGD or SAG step 1 unit.

Random draws follow one fixed order per run, from a single PCG64 generator:
for each S2GD epoch, one uniform for the inner-loop length and then a block
of ``t_j`` example indices; baselines draw indices one pass (``n`` indices)
at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import _kernels
from .epoch_law import GeometricEpochLaw, make_rng
from .objective import (
    ObjectiveSpec,
    component_gradient,
    dphi,
    full_gradient,
    margins,
    objective_value,
)
from .trace import ConvergenceTrace

DIVERGENCE_FACTOR = 1e3


class DivergenceError(RuntimeError):
    """The objective became non-finite or grew far beyond its starting value."""


@dataclass(frozen=True)
class SolverConfig:
    h: float
    m: int = 1
    nu: float = 0.0
    epochs: int = 1
    seed: int = 0
    alpha: float = 1.0
    trace_every: Optional[int] = None
    fixed_inner: Optional[int] = None
    sgd_h: Optional[float] = None
    max_work: Optional[int] = None
    record_iterates: bool = False

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"stepsize h must be positive, got {self.h}")
        if self.m < 1:
            raise ValueError(f"m must be at least 1, got {self.m}")
        if self.nu < 0:
            raise ValueError(f"nu must be non-negative, got {self.nu}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be non-negative, got {self.epochs}")
        if self.alpha < 1:
            raise ValueError(f"alpha must be at least 1, got {self.alpha}")
        if self.nu * self.h >= 1:
            raise ValueError("nu * h must be below 1")
        if self.fixed_inner is not None and self.fixed_inner < 1:
            raise ValueError("fixed_inner must be at least 1")


@dataclass
class RunResult:
    x_final: np.ndarray
    trace: ConvergenceTrace
    total_work: int
    epochs_run: int
    inner_lengths: list[int] = field(default_factory=list)
    iterates: list[np.ndarray] = field(default_factory=list)


class _Monitor:
    """Trace recording plus the divergence guard."""

    def __init__(self, spec: ObjectiveSpec, x0: np.ndarray):
        self.spec = spec
        self.trace = ConvergenceTrace()
        self.f0 = objective_value(spec, x0)
        self._check(self.f0)
        self.trace.record(0, 0, self.f0)

    def _check(self, f: float) -> None:
        if not math.isfinite(f):
            raise DivergenceError(f"objective became non-finite ({f})")
        if self.f0 > 0 and f > DIVERGENCE_FACTOR * self.f0:
            raise DivergenceError(
                f"objective {f:.6g} exceeds {DIVERGENCE_FACTOR:g} x initial value {self.f0:.6g}"
            )

    def record(self, work: int, epoch: int, x: np.ndarray) -> float:
        f = objective_value(self.spec, x)
        self._check(f)
        self.trace.record(work, epoch, f)
        return f


def _start(spec: ObjectiveSpec, x0) -> np.ndarray:
    x = np.array(x0, dtype=np.float64)
    if x.shape != (spec.d,):
        raise ValueError(f"x0 must have dimension {spec.d}, got shape {x.shape}")
    return x


def _data(spec: ObjectiveSpec):
    ds = spec.dataset
    return ds.indptr, ds.indices, ds.values, ds.labels, spec.loss_code


def s2gd_direction(spec: ObjectiveSpec, i: int, y, x_anchor, g_anchor) -> np.ndarray:
    """Inner-step direction ``g_j + f_i'(y) - f_i'(x_j)``."""
    return g_anchor + component_gradient(spec, i, y) - component_gradient(spec, i, x_anchor)


def _trace_marks(start_work: int, steps: int, cost: int, every: Optional[int]) -> list[int]:
    """Step counts inside a block after which a trace point is due."""
    if not every:
        return []
    marks = []
    first = (start_work // every + 1) * every
    for w in range(first, start_work + steps * cost, every):
        k = -(-(w - start_work) // cost)
        if 0 < k < steps and (not marks or marks[-1] != k):
            marks.append(k)
    return marks


def _run_s2gd(
    spec: ObjectiveSpec,
    x0,
    config: SolverConfig,
    lazy: bool,
    rng: Optional[np.random.Generator] = None,
    monitor: Optional[_Monitor] = None,
    work: int = 0,
    fixed_inner: Optional[int] = None,
) -> RunResult:
    x = _start(spec, x0)
    rng = make_rng(config.seed) if rng is None else rng
    monitor = _Monitor(spec, x) if monitor is None else monitor
    indptr, indices, values, labels, loss = _data(spec)
    n, h, ridge = spec.n, config.h, spec.ridge
    q = 1.0 - h * ridge
    law = None if fixed_inner else GeometricEpochLaw.for_solver(config.m, config.nu, h)

    result = RunResult(x, monitor.trace, work, 0)
    for j in range(config.epochs):
        if config.max_work is not None and work >= config.max_work:
            break
        z = margins(spec, x)
        anchor_dphi = np.ascontiguousarray(dphi(spec.loss, z, labels))
        g = full_gradient(spec, x)
        hc = h * (g - ridge * x)
        t_j = fixed_inner if fixed_inner else law.sample(rng)
        idx = rng.integers(0, n, size=t_j)
        work += n

        y = x.copy()
        if lazy:
            chi = np.zeros(spec.d, dtype=np.int64)
            qpow, geo = _kernels.geometric_powers(q, t_j)
        done = 0
        for stop in _trace_marks(work, t_j, 2, config.trace_every) + [t_j]:
            seg = idx[done:stop]
            if lazy:
                _kernels.svrg_inner_lazy(indptr, indices, values, labels, loss, h, ridge, hc,
                                         anchor_dphi, y, seg, chi, done, qpow, geo)
            else:
                _kernels.svrg_inner_dense(indptr, indices, values, labels, loss, h, ridge, hc,
                                          anchor_dphi, y, seg)
            done = stop
            if stop < t_j:
                snap = y
                if lazy:
                    snap = y.copy()
                    _kernels.finish_lazy(snap, chi.copy(), stop, qpow, geo, hc)
                monitor.record(work + 2 * stop, j + 1, snap)
        if lazy:
            _kernels.finish_lazy(y, chi, t_j, qpow, geo, hc)

        x = y
        work += 2 * t_j
        monitor.record(work, j + 1, x)
        result.inner_lengths.append(int(t_j))
        result.epochs_run += 1
        if config.record_iterates:
            result.iterates.append(x.copy())

    result.x_final = x
    result.total_work = work
    return result


def s2gd(spec: ObjectiveSpec, x0, config: SolverConfig) -> RunResult:
    """Semi-stochastic gradient descent.

    Each epoch computes the full gradient ``g_j`` at ``x_j``, draws the
    inner-loop length ``t_j`` from the truncated geometric law with
    parameter ``nu*h``, and takes ``t_j`` steps along
    ``g_j + f_i'(y) - f_i'(x_j)`` with ``i`` uniform.
    ``nu = 0`` is SVRG.
    """
    if config.epochs < 1:
        raise ValueError("s2gd needs at least one epoch")
    return _run_s2gd(spec, x0, config, lazy=False, fixed_inner=config.fixed_inner)


def svrg(spec: ObjectiveSpec, x0, config: SolverConfig) -> RunResult:
    """S2GD with ``nu = 0`` (uniform inner-loop length)."""
    return s2gd(spec, x0, replace(config, nu=0.0))


def s2gd_sparse(spec: ObjectiveSpec, x0, config: SolverConfig) -> RunResult:
    """S2GD with lazy dense updates; an inner step costs O(nnz(a_i)).

    Iterates match ``s2gd`` under the same seed up to floating-point
    regrouping of the deferred updates.
    """
    if spec.loss_code not in (_kernels.LEAST_SQUARES, _kernels.LOGISTIC):
        raise ValueError("lazy updates need a loss of the form phi_i(a_i^T x)")
    if config.epochs < 1:
        raise ValueError("s2gd_sparse needs at least one epoch")
    return _run_s2gd(spec, x0, config, lazy=True, fixed_inner=config.fixed_inner)


def s2gd_plus(spec: ObjectiveSpec, x0, config: SolverConfig, lazy: bool = False) -> RunResult:
    """One SGD pass (stepsize ``sgd_h``, default ``h``), then S2GD epochs of
    exactly ``ceil(alpha * n)`` inner steps."""
    x = _start(spec, x0)
    rng = make_rng(config.seed)
    monitor = _Monitor(spec, x)
    sgd_h = config.h if config.sgd_h is None else config.sgd_h
    x = _sgd_pass(spec, x, sgd_h, rng)
    work = spec.n
    monitor.record(work, 0, x)
    t_fixed = config.fixed_inner or math.ceil(config.alpha * spec.n)
    result = _run_s2gd(spec, x, config, lazy=lazy, rng=rng, monitor=monitor, work=work,
                       fixed_inner=t_fixed)
    return result


def _sgd_pass(spec: ObjectiveSpec, x: np.ndarray, h: float, rng: np.random.Generator,
              steps: Optional[int] = None) -> np.ndarray:
    indptr, indices, values, labels, loss = _data(spec)
    idx = rng.integers(0, spec.n, size=spec.n if steps is None else steps)
    _kernels.sgd_steps(indptr, indices, values, labels, loss, h, spec.ridge, spec.anchor, x, idx)
    return x


def gd(spec: ObjectiveSpec, x0, h: float, iterations: int) -> RunResult:
    """Full-gradient descent ``x <- x - h f'(x)``; ``n`` work units per step."""
    if not h > 0:
        raise ValueError(f"stepsize h must be positive, got {h}")
    x = _start(spec, x0)
    monitor = _Monitor(spec, x)
    for k in range(iterations):
        x = x - h * full_gradient(spec, x)
        monitor.record((k + 1) * spec.n, k + 1, x)
    return RunResult(x, monitor.trace, iterations * spec.n, iterations)


def _stochastic_passes(spec, x, iterations, rng, monitor, trace_every, step_block):
    """Drive ``step_block(idx)`` one pass of indices at a time, tracing on the way."""
    n = spec.n
    every = trace_every or n
    done = 0
    while done < iterations:
        block = min(n, iterations - done)
        idx = rng.integers(0, n, size=block)
        lo = 0
        for stop in _trace_marks(done, block, 1, every) + [block]:
            step_block(idx[lo:stop])
            lo = stop
            if (done + stop) % every == 0 or done + stop == iterations:
                monitor.record(done + stop, (done + stop) // n, x)
        done += block
    return RunResult(x, monitor.trace, iterations, iterations // n)


def sgd(spec: ObjectiveSpec, x0, h: float, iterations: int, seed: int = 0,
        trace_every: Optional[int] = None) -> RunResult:
    """Constant-stepsize SGD ``x <- x - h f_i'(x)`` with ``i`` uniform."""
    if not h > 0:
        raise ValueError(f"stepsize h must be positive, got {h}")
    x = _start(spec, x0)
    monitor = _Monitor(spec, x)
    indptr, indices, values, labels, loss = _data(spec)
    ridge, anchor = spec.ridge, spec.anchor

    def step_block(idx):
        _kernels.sgd_steps(indptr, indices, values, labels, loss, h, ridge, anchor, x, idx)

    return _stochastic_passes(spec, x, iterations, make_rng(seed), monitor, trace_every, step_block)


def sag(spec: ObjectiveSpec, x0, h: float, iterations: int, seed: int = 0, plus: bool = False,
        trace_every: Optional[int] = None) -> RunResult:
    """Stochastic average gradient with a table of ``n`` scalar loss derivatives.

    ``plus=True`` averages over the examples seen so far instead of all ``n``.
    """
    if not h > 0:
        raise ValueError(f"stepsize h must be positive, got {h}")
    x = _start(spec, x0)
    monitor = _Monitor(spec, x)
    indptr, indices, values, labels, loss = _data(spec)
    ridge, anchor = spec.ridge, spec.anchor
    table = np.zeros(spec.n)
    seen = np.zeros(spec.n, dtype=np.bool_)
    grad_sum = np.zeros(spec.d)
    state = {"n_seen": 0}

    def step_block(idx):
        state["n_seen"] = _kernels.sag_steps(indptr, indices, values, labels, loss, h, ridge,
                                             anchor, x, idx, table, seen, grad_sum,
                                             state["n_seen"], plus)

    return _stochastic_passes(spec, x, iterations, make_rng(seed), monitor, trace_every,
                              step_block)
