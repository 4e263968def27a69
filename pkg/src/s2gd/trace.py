"""Convergence traces recorded by the solvers."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional


@dataclass(frozen=True)
class TracePoint:
    work_units: int
    epoch: int
    objective: float
    residual: Optional[float] = None


@dataclass
class ConvergenceTrace:
    """Objective values against cumulative stochastic-gradient evaluations.

    ``work_units`` is strictly increasing, except that the starting point sits
    at zero work.
    """

    points: list[TracePoint] = field(default_factory=list)

    def record(self, work_units: int, epoch: int, objective: float) -> None:
        if self.points and work_units <= self.points[-1].work_units:
            return
        self.points.append(TracePoint(int(work_units), int(epoch), float(objective)))

    def attach_reference(self, f_star: float) -> "ConvergenceTrace":
        """Copy of the trace with ``residual = objective - f_star`` filled in."""
        return ConvergenceTrace([replace(p, residual=p.objective - f_star) for p in self.points])

    def value_at(self, work_units: float) -> TracePoint:
        """Last point recorded at or before ``work_units``."""
        best = None
        for p in self.points:
            if p.work_units > work_units:
                break
            best = p
        if best is None:
            raise ValueError(f"no trace point at or before work {work_units}")
        return best

    def __len__(self) -> int:
        return len(self.points)

    @property
    def work(self) -> list[int]:
        return [p.work_units for p in self.points]

    @property
    def objectives(self) -> list[float]:
        return [p.objective for p in self.points]
