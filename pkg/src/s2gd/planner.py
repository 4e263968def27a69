"""Convergence-rate formulas and parameter planning for S2GD.

Work is measured in stochastic-gradient evaluations. For ``j`` epochs of at
most ``m`` inner steps the work bound is ``W = j (n + 2m)``; the expected
work replaces ``m`` by the mean inner-loop length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from scipy.optimize import brentq, minimize_scalar

from .epoch_law import beta as _beta
from .epoch_law import expected_length

NU_MODES = ("mu", "zero")
_INFEASIBLE = 1e300
_ROUNDING_MARGIN = 1e-12


class InfeasiblePlan(ValueError):
    """No number of epochs in the scanned range yields a contraction below one."""


@dataclass(frozen=True)
class RateParams:
    n: int
    L: float
    mu: float
    nu_mode: str = "mu"

    def __post_init__(self):
        if not 0 < self.mu <= self.L:
            raise ValueError(f"need 0 < mu <= L, got mu={self.mu}, L={self.L}")
        _check_mode(self.nu_mode)

    @property
    def kappa(self) -> float:
        return self.L / self.mu

    @property
    def nu(self) -> float:
        return self.mu if self.nu_mode == "mu" else 0.0


@dataclass(frozen=True)
class WorkPlan:
    j: int
    delta: float
    h: float
    m: int
    c: float
    W: float
    nu_mode: str = "mu"
    m_real: Optional[float] = None

    def W_over_n(self, n: int) -> float:
        return self.W / n

    def as_dict(self) -> dict:
        return {
            "j": self.j,
            "delta": self.delta,
            "h": self.h,
            "m": self.m,
            "m_real": self.m_real,
            "c": self.c,
            "W": self.W,
            "nu_mode": self.nu_mode,
        }


def _check_mode(nu_mode: str) -> None:
    if nu_mode not in NU_MODES:
        raise ValueError(f"nu_mode must be one of {NU_MODES}, got {nu_mode!r}")


def _check_eps(epsilon: float) -> None:
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")


def convergence_factor(L: float, mu: float, nu: float, h: float, m: int) -> float:
    """Per-epoch contraction ``c`` of the expected residual.

    ``c = (1 - nu h)^m / (beta mu h (1 - 2Lh)) + 2 (L - mu) h / (1 - 2Lh)``.
    The value may exceed one; callers decide what to do with that.
    """
    if not 0 < h < 1 / (2 * L):
        raise ValueError(f"stepsize must lie in (0, 1/(2L)) = (0, {1 / (2 * L)}), got {h}")
    if not 0 <= nu <= mu:
        raise ValueError(f"need 0 <= nu <= mu, got nu={nu}, mu={mu}")
    q = nu * h
    shrink = math.exp(m * math.log1p(-q)) if q > 0 else 1.0
    denom = 1 - 2 * L * h
    return shrink / (_beta(m, q) * mu * h * denom) + 2 * (L - mu) * h / denom


def _delta(j: int, epsilon: float) -> float:
    if j < 1:
        raise ValueError(f"j must be at least 1, got {j}")
    _check_eps(epsilon)
    return epsilon ** (1.0 / j)


def stepsize_for_epochs(L: float, mu: float, j: int, epsilon: float, rule: str = "theory") -> float:
    """Stepsize ``1 / ((4/Delta)(L - mu) + 2L)`` with ``Delta = epsilon^(1/j)``.

    ``rule="mu_free"`` returns ``Delta / (6L)``, which needs no estimate of mu.
    When ``L == mu`` the formula hits the excluded boundary ``1/(2L)``; the
    result is pulled inside by a relative ``1e-6``.
    """
    delta = _delta(j, epsilon)
    if rule == "mu_free":
        return delta / (6 * L)
    if rule != "theory":
        raise ValueError(f"unknown stepsize rule {rule!r}")
    h = 1.0 / ((4.0 / delta) * (L - mu) + 2 * L)
    return min(h, (1 - 1e-6) / (2 * L))


def inner_steps_real(kappa: float, j: int, epsilon: float, nu_mode: str) -> float:
    """Unrounded inner-loop bound ``m(j)`` paired with the theory stepsize."""
    _check_mode(nu_mode)
    if not kappa > 1:
        raise ValueError(f"kappa must exceed 1, got {kappa}")
    D = _delta(j, epsilon)
    k = kappa
    if nu_mode == "mu":
        return (4 * (k - 1) / D + 2 * k) * math.log(2 / D + (2 * k - 1) / (k - 1))
    return 8 * (k - 1) / D**2 + 8 * k / D + 2 * k * k / (k - 1)


def inner_steps_for_epochs(kappa: float, j: int, epsilon: float, nu_mode: str) -> int:
    """Integer ``m(j)``. For ``nu = 0`` the bound is tight (``c == Delta``), so a
    relative margin of 1e-12 keeps ``c <= Delta`` true after rounding."""
    return math.ceil(inner_steps_real(kappa, j, epsilon, nu_mode) * (1 + _ROUNDING_MARGIN))


def simplified_inner_steps_real(kappa: float, j: int, epsilon: float, nu_mode: str) -> float:
    _check_mode(nu_mode)
    if kappa < 2:
        raise ValueError(f"the simplified bound needs kappa >= 2, got {kappa}")
    D = _delta(j, epsilon)
    if nu_mode == "mu":
        return (6 * kappa / D) * math.log(5 / D)
    return 20 * kappa / D**2


def simplified_inner_steps(kappa: float, j: int, epsilon: float, nu_mode: str) -> int:
    """Looser but simpler inner-loop bound, valid for ``kappa >= 2``."""
    return math.ceil(simplified_inner_steps_real(kappa, j, epsilon, nu_mode))


def closed_form_nu0(L: float, mu: float, j: int, epsilon: float) -> tuple[float, int]:
    """Work-optimal ``(h, m)`` for ``nu = 0`` at fixed ``j``.

    ``h`` is the vertex ``Delta / (4(Delta L + L - mu))`` of
    ``h -> h (Delta - 2 (Delta L + L - mu) h)``; ``m = 8(k-1)/Delta^2 + 8k/Delta``.
    """
    D = _delta(j, epsilon)
    k = L / mu
    h = 1.0 / ((4.0 / D) * (L - mu) + 4 * L)
    m = 8 * (k - 1) / D**2 + 8 * k / D
    return h, math.ceil(m)


def nu0_quadratic(L: float, mu: float, delta: float, h: float) -> float:
    """``h (Delta - 2 (Delta L + L - mu) h)``; the required ``m`` is ``1 / (mu * this)``."""
    return h * (delta - 2 * (delta * L + L - mu) * h)


def workload(j: int, n: int, m) -> float:
    """``W = j (n + 2m)``; exact for integer arguments."""
    return j * (n + 2 * m)


def expected_workload(j: int, n: int, m: int, q: float) -> float:
    """``j (n + 2 xi)`` with ``xi`` the mean inner-loop length for ``q = nu h``."""
    return j * (n + 2 * expected_length(m, q))


def epochs_for_confidence(c: float, epsilon: float, rho: float = 1.0) -> int:
    """Smallest ``j`` with ``j >= log(1/(epsilon rho)) / log(1/c)``.

    Then the relative residual is at most ``epsilon`` with probability at
    least ``1 - rho``; ``rho = 1`` gives the expectation-only count.
    """
    if not 0 < c < 1:
        raise ValueError(f"c must lie in (0, 1), got {c}")
    _check_eps(epsilon)
    if not 0 < rho <= 1:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    bound = math.log(1 / (epsilon * rho)) / math.log(1 / c)
    j = math.ceil(bound)
    # guard against ceil of a value like 3.0000000000000004
    if j - 1 >= bound * (1 - 1e-12) and j > 1:
        j -= 1
    return max(j, 1)


def _theory_plan(n: int, L: float, mu: float, j: int, epsilon: float, nu_mode: str) -> WorkPlan:
    kappa = L / mu
    h = stepsize_for_epochs(L, mu, j, epsilon)
    m_real = inner_steps_real(kappa, j, epsilon, nu_mode)
    m = inner_steps_for_epochs(kappa, j, epsilon, nu_mode)
    nu = mu if nu_mode == "mu" else 0.0
    c = convergence_factor(L, mu, nu, h, m)
    return WorkPlan(j=j, delta=_delta(j, epsilon), h=h, m=m, c=c, W=workload(j, n, m),
                    nu_mode=nu_mode, m_real=m_real)


def plan_for_epochs(n: int, L: float, mu: float, epsilon: float, nu_mode: str, j: int) -> WorkPlan:
    """Theory parameters (stepsize and inner-loop bound) for a fixed number of epochs."""
    _check_mode(nu_mode)
    return _theory_plan(n, L, mu, j, epsilon, nu_mode)


def optimal_plan(n: int, L: float, mu: float, epsilon: float, nu_mode: str = "mu",
                 j_max: int = 100) -> WorkPlan:
    """Minimize ``j (n + 2 m(j))`` over ``j = 1..j_max`` with the theory parameters.

    Ties go to the smaller ``j``.
    """
    _check_mode(nu_mode)
    if j_max < 1:
        raise ValueError("j_max must be at least 1")
    best = None
    for j in range(1, j_max + 1):
        plan = _theory_plan(n, L, mu, j, epsilon, nu_mode)
        if plan.c >= 1:
            continue
        if best is None or plan.W < best.W:
            best = plan
    if best is None:
        raise InfeasiblePlan(f"no j <= {j_max} gives c < 1")
    return best


def _min_inner_steps_real(L: float, mu: float, nu: float, h: float, delta: float) -> Optional[float]:
    """Real ``m`` solving ``convergence_factor = delta`` (``None`` if unreachable)."""
    c2 = 2 * (L - mu) * h / (1 - 2 * L * h)
    if c2 >= delta:
        return None
    if nu == 0:
        return max(1.0, 1 / (mu * h * (1 - 2 * L * h) * (delta - c2)))

    def gap(m):
        return convergence_factor(L, mu, nu, h, m) - delta

    if gap(1.0) <= 0:
        return 1.0
    hi = 2.0
    while gap(hi) > 0:
        hi *= 2
        if hi > 1e18:
            return None
    return brentq(gap, hi / 2, hi, xtol=1e-9, rtol=1e-14)


def _min_inner_steps(L: float, mu: float, nu: float, h: float, delta: float) -> Optional[int]:
    """Smallest integer ``m`` with ``convergence_factor <= delta``."""
    m_real = _min_inner_steps_real(L, mu, nu, h, delta)
    if m_real is None:
        return None
    # the real root is accurate to rounding; settle the integer by bisection
    lo = max(1, math.floor(m_real * (1 - 1e-9)) - 1)
    hi = max(lo, math.ceil(m_real * (1 + 1e-9)) + 1)
    while convergence_factor(L, mu, nu, h, hi) > delta:
        hi *= 2
        if hi > 1 << 62:
            return None
    if convergence_factor(L, mu, nu, h, lo) <= delta:
        lo, hi = 1, lo
    while lo < hi:
        mid = (lo + hi) // 2
        if convergence_factor(L, mu, nu, h, mid) <= delta:
            hi = mid
        else:
            lo = mid + 1
    return hi


def tune_for_epochs(n: int, L: float, mu: float, j: int, epsilon: float,
                    nu_mode: str) -> Optional[WorkPlan]:
    """Numerically minimize the expected epoch work over ``h`` at fixed ``j``.

    For each trial stepsize the smallest ``m`` meeting ``c <= Delta`` is
    taken from the exact contraction factor, and the objective is
    ``n + 2 xi(m, h)``. The theory stepsize and the ``nu = 0`` vertex seed
    the search, so the result never does worse than either.
    """
    delta = _delta(j, epsilon)
    nu = mu if nu_mode == "mu" else 0.0
    # c2 reaches delta at this stepsize
    h_max = min(delta / (2 * (L - mu) + 2 * L * delta), 1 / (2 * L)) * (1 - 1e-9)

    def cost(h: float) -> float:
        m = _min_inner_steps_real(L, mu, nu, h, delta)
        if m is None:
            return _INFEASIBLE  # finite, so the bounded search does no inf arithmetic
        return n + 2 * expected_length(m, nu * h)

    candidates = [stepsize_for_epochs(L, mu, j, epsilon),
                  1.0 / ((4.0 / delta) * (L - mu) + 4 * L)]
    res = minimize_scalar(lambda lh: cost(math.exp(lh)),
                          bounds=(math.log(h_max) - 12, math.log(h_max)),
                          method="bounded", options={"xatol": 1e-10})
    candidates.append(math.exp(res.x))

    best = None
    for h in candidates:
        m = _min_inner_steps(L, mu, nu, h, delta)
        if m is None:
            continue
        W = j * (n + 2 * expected_length(m, nu * h))
        if best is None or W < best.W:
            best = WorkPlan(j=j, delta=delta, h=h, m=m, c=convergence_factor(L, mu, nu, h, m),
                            W=W, nu_mode=nu_mode)
    return best


def numeric_plan(n: int, L: float, mu: float, epsilon: float, nu_mode: str = "mu",
                 j_max: int = 100) -> WorkPlan:
    """Like ``optimal_plan`` but with the stepsize tuned numerically for each ``j``
    and the exact contraction factor in place of the split bound."""
    _check_mode(nu_mode)
    best = None
    for j in range(1, j_max + 1):
        plan = tune_for_epochs(n, L, mu, j, epsilon, nu_mode)
        if plan is not None and (best is None or plan.W < best.W):
            best = plan
    if best is None:
        raise InfeasiblePlan(f"no j <= {j_max} gives a feasible stepsize")
    return best


def convex_plan(n: int, L: float, epsilon: float, rho: float = 1.0, nu_mode: str = "mu",
                j_max: int = 100) -> tuple[float, WorkPlan]:
    """Plan S2GD on ``f + (epsilon/2)||x - x0||^2`` for a merely convex ``f``.

    The perturbed problem has ``mu = epsilon`` and smoothness ``L + epsilon``.
    Stepsize and inner-loop length come from ``optimal_plan``; the epoch count
    is raised to the high-probability bound for confidence ``1 - rho``.
    """
    if not 0 < epsilon < L:
        raise ValueError(f"need 0 < epsilon < L, got epsilon={epsilon}, L={L}")
    mu_pert = epsilon
    L_hat = L + epsilon
    base = optimal_plan(n, L_hat, mu_pert, epsilon, nu_mode, j_max)
    nu = mu_pert if nu_mode == "mu" else 0.0
    c_hat = convergence_factor(L_hat, mu_pert, nu, base.h, base.m)
    j = epochs_for_confidence(c_hat, epsilon, rho)
    plan = WorkPlan(j=j, delta=base.delta, h=base.h, m=base.m, c=c_hat,
                    W=workload(j, n, base.m), nu_mode=nu_mode, m_real=base.m_real)
    return mu_pert, plan


# Layout of the published comparison grid: (kappa, epsilon) -> epoch counts shown.
TABLE3_ROWS = {
    (1e3, 1e-3): (1, 2, 3, 4, 5),
    (1e3, 1e-6): (1, 2, 3, 4, 5),
    (1e3, 1e-9): (2, 3, 4, 5, 6),
    (1e6, 1e-3): (2, 3, 4, 5, 6),
    (1e6, 1e-6): (4, 5, 6, 8, 10),
    (1e6, 1e-9): (5, 8, 10, 13, 20),
    (1e9, 1e-3): (6, 8, 11, 15, 20),
    (1e9, 1e-6): (13, 16, 19, 22, 30),
    (1e9, 1e-9): (15, 24, 30, 32, 40),
}
TABLE3_N = 10**9


@dataclass(frozen=True)
class Table3Cell:
    kappa: float
    epsilon: float
    j: int
    nu_mode: str
    W_over_n: float
    optimal: bool


def table3(n: int = TABLE3_N) -> list[Table3Cell]:
    """Workload ``j (n + 2 m(j)) / n`` for each cell of the comparison grid.

    ``m(j)`` is the unrounded theory bound; ``optimal`` marks the minimizing
    ``j`` over all epoch counts, not only the displayed ones.
    """
    cells = []
    for (kappa, eps), js in TABLE3_ROWS.items():
        for mode in NU_MODES:
            best = optimal_plan(n, kappa, 1.0, eps, mode, j_max=200).j
            for j in js:
                m = inner_steps_real(kappa, j, eps, mode)
                cells.append(Table3Cell(kappa, eps, j, mode, workload(j, n, m) / n, j == best))
    return cells


def truncate_sig(value: float, digits: int = 3) -> float:
    """Truncate (not round) ``value`` to ``digits`` significant figures.

    Integers of ``digits + 1`` or more digits keep all their integer digits.
    """
    if value == 0:
        return 0.0
    exp = math.floor(math.log10(abs(value)))
    keep = max(digits - 1 - exp, 0)
    scale = 10.0**keep
    return math.floor(value * scale * (1 + 1e-12)) / scale


def format_workload(value: float) -> str:
    """Presentation used by the comparison table: three truncated significant
    figures, plain integers from 1000 up, and ``10^k`` beyond 10^4."""
    if value >= 1e4:
        return f"10^{math.floor(math.log10(value))}n"
    t = truncate_sig(value)
    if value >= 100:
        return f"{int(t)}n"
    return f"{t:.{max(2 - math.floor(math.log10(value)), 0)}f}n"
