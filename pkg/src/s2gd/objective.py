"""Regularized least-squares and logistic losses over a ``SparseDataset``.

Every component has the form

    f_i(x) = phi_i(a_i^T x) + (lam/2)||x||^2 [+ (mu_pert/2)||x - x0||^2]

with ``phi_i(z) = (z - b_i)^2 / 2`` for least squares and
``phi_i(z) = log(1 + exp(-l_i z))`` for logistic regression.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.special import expit

from . import _kernels
from .dataio import SparseDataset

LOSSES = ("least_squares", "logistic")
_LOSS_CODES = {"least_squares": _kernels.LEAST_SQUARES, "logistic": _kernels.LOGISTIC}
# second-derivative bound of phi: 1 for the square, 1/4 for the logistic loss
DEFAULT_CURVATURE = {"least_squares": 1.0, "logistic": 0.25}


@dataclass(frozen=True)
class Perturbation:
    center: np.ndarray
    mu: float


@dataclass(frozen=True, eq=False)
class ObjectiveSpec:
    dataset: SparseDataset
    loss: str
    lam: float = 0.0
    perturbation: Optional[Perturbation] = None
    curvature: Optional[float] = None

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}; expected one of {LOSSES}")
        if self.lam < 0:
            raise ValueError(f"lam must be non-negative, got {self.lam}")
        if self.perturbation is not None:
            if not self.perturbation.mu > 0:
                raise ValueError("perturbation mu must be positive")
            if self.perturbation.center.shape != (self.dataset.d,):
                raise ValueError("perturbation center has the wrong dimension")
        if self.curvature is None:
            object.__setattr__(self, "curvature", DEFAULT_CURVATURE[self.loss])

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def d(self) -> int:
        return self.dataset.d

    @property
    def loss_code(self) -> int:
        return _LOSS_CODES[self.loss]

    @property
    def ridge(self) -> float:
        """Coefficient of ``x`` in the dense part of every component gradient."""
        return self.lam + (self.perturbation.mu if self.perturbation else 0.0)

    @property
    def anchor(self) -> np.ndarray:
        """Constant in the dense gradient part: ``mu_pert * x0`` (zero if unperturbed)."""
        if self.perturbation is None:
            return np.zeros(self.d)
        return self.perturbation.mu * self.perturbation.center


@dataclass(frozen=True)
class SmoothnessInfo:
    L: float
    per_component: np.ndarray
    mu: float

    @property
    def kappa(self) -> float:
        return self.L / self.mu if self.mu > 0 else float("inf")


def _check_x(spec: ObjectiveSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.d,):
        raise ValueError(f"expected a vector of dimension {spec.d}, got shape {x.shape}")
    return x


def _check_i(spec: ObjectiveSpec, i: int) -> int:
    if not 0 <= i < spec.n:
        raise IndexError(f"component index {i} outside [0, {spec.n})")
    return int(i)


def phi(loss: str, z, label):
    z = np.asarray(z, dtype=np.float64)
    if loss == "least_squares":
        return 0.5 * (z - label) ** 2
    u = -label * z
    # log(1 + exp(u)) without overflow
    return np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))


def dphi(loss: str, z, label):
    z = np.asarray(z, dtype=np.float64)
    if loss == "least_squares":
        return z - label
    return -label * expit(-label * z)


def _regularizer_value(spec: ObjectiveSpec, x: np.ndarray) -> float:
    val = 0.5 * spec.lam * float(x @ x)
    if spec.perturbation is not None:
        r = x - spec.perturbation.center
        val += 0.5 * spec.perturbation.mu * float(r @ r)
    return val


def _regularizer_gradient(spec: ObjectiveSpec, x: np.ndarray) -> np.ndarray:
    return spec.ridge * x - spec.anchor


def margins(spec: ObjectiveSpec, x) -> np.ndarray:
    """All inner products ``a_i^T x``."""
    return spec.dataset.to_csr() @ _check_x(spec, x)


def component_value(spec: ObjectiveSpec, i: int, x) -> float:
    x = _check_x(spec, x)
    i = _check_i(spec, i)
    idx, val = spec.dataset.row(i)
    z = float(val @ x[idx])
    return float(phi(spec.loss, z, spec.dataset.labels[i])) + _regularizer_value(spec, x)


def component_gradient(spec: ObjectiveSpec, i: int, x) -> np.ndarray:
    x = _check_x(spec, x)
    i = _check_i(spec, i)
    idx, val = spec.dataset.row(i)
    z = float(val @ x[idx])
    g = _regularizer_gradient(spec, x)
    g[idx] += float(dphi(spec.loss, z, spec.dataset.labels[i])) * val
    return g


def objective_value(spec: ObjectiveSpec, x) -> float:
    x = _check_x(spec, x)
    z = margins(spec, x)
    return float(np.mean(phi(spec.loss, z, spec.dataset.labels))) + _regularizer_value(spec, x)


def full_gradient(spec: ObjectiveSpec, x) -> np.ndarray:
    """Mean of the component gradients; costs ``n`` stochastic-gradient units."""
    x = _check_x(spec, x)
    csr = spec.dataset.to_csr()
    s = dphi(spec.loss, csr @ x, spec.dataset.labels)
    return (csr.T @ s) / spec.n + _regularizer_gradient(spec, x)


def smoothness_constants(spec: ObjectiveSpec) -> SmoothnessInfo:
    """``L_i = curvature * ||a_i||^2 + ridge`` and ``mu = lam (+ mu_pert)``.

    The data-dependent part of the strong-convexity constant is ignored, so
    ``mu`` is a lower bound.
    """
    per = spec.curvature * spec.dataset.row_sq_norms + spec.ridge
    L = float(per.max()) if per.size else spec.ridge
    return SmoothnessInfo(L=L, per_component=per, mu=spec.ridge)


def perturb(spec: ObjectiveSpec, x0, mu: float) -> ObjectiveSpec:
    """Add ``(mu/2)||x - x0||^2``; the result is mu-strongly convex and (L+mu)-smooth."""
    if not mu > 0:
        raise ValueError(f"perturbation mu must be positive, got {mu}")
    if spec.perturbation is not None:
        raise ValueError("spec is already perturbed")
    center = _check_x(spec, x0).copy()
    center.setflags(write=False)
    return replace(spec, perturbation=Perturbation(center=center, mu=float(mu)))
