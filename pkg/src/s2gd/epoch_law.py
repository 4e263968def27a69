"""Truncated geometric law of the inner-loop length.

``P(t) = (1 - q)^(m - t) / beta`` for ``t = 1..m``, where ``q = nu * h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _check(m: int, q: float) -> None:
    if m < 1:
        raise ValueError(f"m must be at least 1, got {m}")
    if not 0.0 <= q < 1.0:
        raise ValueError(f"q = nu*h must lie in [0, 1), got {q}")


def beta(m: int, q: float) -> float:
    """Normalizer ``sum_{t=1..m} (1-q)^(m-t) = (1 - (1-q)^m) / q``."""
    _check(m, q)
    if q == 0.0:
        return float(m)
    return -math.expm1(m * math.log1p(-q)) / q


def _bernoulli_tail(x: float) -> float:
    """``1/(e^x - 1) - 1/x + 1/2``, accurate for small ``x``."""
    if x < 1e-3:
        x2 = x * x
        return x / 12.0 - x * x2 / 720.0 + x * x2 * x2 / 30240.0
    if x > 700.0:  # 1/(e^x - 1) is below 1e-304
        return 0.5 - 1.0 / x
    return 1.0 / math.expm1(x) - 1.0 / x + 0.5


def expected_length(m: int, q: float) -> float:
    """Mean inner-loop length ``xi = sum_t t (1-q)^(m-t) / beta``.

    Written as ``(m+1)/2 - g(a) + m g(m a)`` with ``a = -log(1-q)`` and
    ``g`` the smooth remainder of ``1/(e^x - 1)``, which avoids the
    cancellation of the textbook closed form when ``q`` is tiny.
    """
    _check(m, q)
    if q == 0.0:
        return (m + 1) / 2.0
    a = -math.log1p(-q)
    return (m + 1) / 2.0 - _bernoulli_tail(a) + m * _bernoulli_tail(m * a)


@dataclass(frozen=True, eq=False)
class GeometricEpochLaw:
    m: int
    q: float
    beta: float
    cdf: np.ndarray

    @classmethod
    def create(cls, m: int, q: float) -> "GeometricEpochLaw":
        m = int(m)
        _check(m, q)
        t = np.arange(1, m + 1, dtype=np.float64)
        if q == 0.0:
            cdf = t / m
        else:
            # P(t_j > T) = (1 - (1-q)^(m-T)) / (1 - (1-q)^m)
            lq = math.log1p(-q)
            survival = np.expm1((m - t) * lq) / math.expm1(m * lq)
            cdf = 1.0 - survival
        cdf[-1] = 1.0
        cdf.setflags(write=False)
        return cls(m=m, q=float(q), beta=beta(m, q), cdf=cdf)

    @classmethod
    def for_solver(cls, m: int, nu: float, h: float) -> "GeometricEpochLaw":
        return cls.create(m, nu * h)

    def pmf(self) -> np.ndarray:
        return np.diff(self.cdf, prepend=0.0)

    @property
    def mean(self) -> float:
        return expected_length(self.m, self.q)

    def sample(self, rng: np.random.Generator) -> int:
        """Inverse-CDF draw; consumes exactly one uniform from ``rng``."""
        u = rng.random()
        return int(np.searchsorted(self.cdf, u, side="right")) + 1

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """``size`` draws; same values as ``size`` successive ``sample`` calls."""
        return np.searchsorted(self.cdf, rng.random(size), side="right") + 1


def sample_epoch_length(law: GeometricEpochLaw, rng: np.random.Generator) -> int:
    return law.sample(rng)


def make_rng(seed: int) -> np.random.Generator:
    """The package's reproducible generator: PCG64 seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(seed))
