"""Dataset I/O: LIBSVM text format, synthetic problem generators, trace export.

Datasets are stored row-compressed (CSR-style ``indptr``/``indices``/``values``
arrays) because every solver in this package touches one example at a time.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from functools import cached_property
from typing import IO, Iterable, Optional, Union

import numpy as np
import scipy.sparse as sp

from .trace import ConvergenceTrace

PathOrFile = Union[str, os.PathLike, IO]


class LibsvmFormatError(ValueError):
    """Raised when a LIBSVM line cannot be parsed."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True, eq=False)
class SparseDataset:
    """``n`` sparse rows ``a_i`` of width ``d`` with one scalar label each.

    ``labels`` holds regression targets for least squares and signed class
    labels in {-1, +1} for logistic regression.
    """

    n: int
    d: int
    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    labels: np.ndarray
    row_sq_norms: np.ndarray

    def __post_init__(self):
        if self.indptr.shape != (self.n + 1,):
            raise ValueError("indptr must have length n + 1")
        if self.labels.shape != (self.n,):
            raise ValueError("labels must have length n")
        if self.indices.size:
            if self.indices.min() < 0 or self.indices.max() >= self.d:
                raise ValueError("feature index out of range [0, d)")
            nnz = self.indices.size
            continues_row = np.ones(nnz, dtype=bool)
            continues_row[self.indptr[:-1][self.indptr[:-1] < nnz]] = False
            if np.any(np.diff(self.indices)[continues_row[1:]] <= 0):
                raise ValueError("indices within a row must be strictly increasing")
        if np.any(self.values == 0.0):
            raise ValueError("explicit zeros must not be stored")
        for arr in (self.indptr, self.indices, self.values, self.labels, self.row_sq_norms):
            arr.setflags(write=False)

    @classmethod
    def from_arrays(cls, indptr, indices, values, labels, d: int) -> "SparseDataset":
        indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        indices = np.ascontiguousarray(indices, dtype=np.int64)
        values = np.ascontiguousarray(values, dtype=np.float64)
        labels = np.ascontiguousarray(labels, dtype=np.float64)
        n = indptr.size - 1
        row_ids = np.repeat(np.arange(n), np.diff(indptr))
        sq = np.zeros(n)
        np.add.at(sq, row_ids, values * values)
        return cls(n, int(d), indptr, indices, values, labels, sq)

    @classmethod
    def from_dense(cls, A: np.ndarray, labels) -> "SparseDataset":
        csr = sp.csr_matrix(np.asarray(A, dtype=np.float64))
        csr.eliminate_zeros()
        csr.sort_indices()
        return cls.from_arrays(csr.indptr, csr.indices, csr.data, labels, A.shape[1])

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.values[lo:hi]

    @property
    def rows(self) -> list[list[tuple[int, float]]]:
        return [list(zip(*(a.tolist() for a in self.row(i)))) for i in range(self.n)]

    @property
    def nnz_per_row(self) -> np.ndarray:
        return np.diff(self.indptr)

    @cached_property
    def _csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, self.indices, self.indptr), shape=(self.n, self.d))

    def to_csr(self) -> sp.csr_matrix:
        return self._csr

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()


def _open_text(source: PathOrFile) -> Iterable[str]:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="ascii") as fh:
            yield from fh
        return
    for line in source:
        yield line.decode("ascii") if isinstance(line, bytes) else line


def parse_libsvm(
    source: PathOrFile,
    add_bias: bool = True,
    n_features: Optional[int] = None,
    remap_binary: bool = True,
) -> SparseDataset:
    """Read ``label idx:val ...`` lines with 1-based, strictly increasing indices.

    ``n_features`` forces the feature count (before the bias column); otherwise
    it is the largest index seen. ``{0, 1}`` labels become ``{-1, +1}``.
    """
    indptr = [0]
    indices: list[int] = []
    values: list[float] = []
    labels: list[float] = []
    max_index = 0
    for lineno, raw in enumerate(_open_text(source), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            labels.append(float(tokens[0]))
        except ValueError:
            raise LibsvmFormatError(lineno, f"non-numeric label {tokens[0]!r}") from None
        prev = 0
        for tok in tokens[1:]:
            key, sep, val = tok.partition(":")
            if not sep:
                raise LibsvmFormatError(lineno, f"expected idx:val, got {tok!r}")
            if key == "qid":
                continue
            try:
                idx = int(key)
            except ValueError:
                raise LibsvmFormatError(lineno, f"non-integer index {key!r}") from None
            try:
                v = float(val)
            except ValueError:
                raise LibsvmFormatError(lineno, f"non-numeric value {val!r}") from None
            if idx < 1:
                raise LibsvmFormatError(lineno, f"index {idx} is not 1-based")
            if idx <= prev:
                raise LibsvmFormatError(lineno, f"index {idx} does not increase (previous {prev})")
            prev = idx
            if v != 0.0:
                indices.append(idx - 1)
                values.append(v)
        max_index = max(max_index, prev)
        if add_bias:
            indices.append(-1)  # patched once d is known
            values.append(1.0)
        indptr.append(len(indices))

    d = max_index if n_features is None else int(n_features)
    if max_index > d:
        raise ValueError(f"feature index {max_index} exceeds n_features={d}")
    idx_arr = np.asarray(indices, dtype=np.int64)
    if add_bias:
        idx_arr[idx_arr == -1] = d
        d += 1
    lab = np.asarray(labels, dtype=np.float64)
    if remap_binary and lab.size and np.all((lab == 0.0) | (lab == 1.0)) and np.any(lab == 0.0):
        lab = 2.0 * lab - 1.0
    return SparseDataset.from_arrays(np.asarray(indptr), idx_arr, values, lab, d)


def write_libsvm(dataset: SparseDataset, sink: PathOrFile) -> None:
    """Write ``dataset`` in LIBSVM format; floats use ``repr`` so parsing is lossless."""
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", encoding="ascii") as fh:
            write_libsvm(dataset, fh)
        return
    for i in range(dataset.n):
        idx, val = dataset.row(i)
        parts = [repr(float(dataset.labels[i]))]
        parts += [f"{j + 1}:{v!r}" for j, v in zip(idx.tolist(), val.tolist())]
        sink.write(" ".join(parts) + "\n")


def _random_rows(rng: np.random.Generator, n: int, d: int, density: float):
    if density == 1.0:
        counts = np.full(n, d, dtype=np.int64)
        indices = np.tile(np.arange(d, dtype=np.int64), n)
    else:
        counts = rng.binomial(d, density, size=n).astype(np.int64)
        indices = np.concatenate(
            [np.sort(rng.choice(d, size=k, replace=False)) for k in counts]
            or [np.empty(0, dtype=np.int64)]
        ).astype(np.int64)
    indptr = np.concatenate([[0], np.cumsum(counts)])
    values = rng.standard_normal(indices.size)
    return indptr, indices, values


def generate_least_squares(
    n: int,
    d: int,
    kappa: float,
    density: float = 1.0,
    seed: int = 0,
    noise: float = 0.1,
) -> tuple[SparseDataset, float]:
    """Synthetic ridge-regression instance whose condition number is exactly ``kappa``.

    Rows are rescaled so that ``max_i ||a_i||^2 = 1``; with ``lam = 1/(kappa-1)``
    the bounds ``L = 1 + lam`` and ``mu = lam`` give ``L/mu = kappa``.
    Targets are ``a_i^T x_true + noise * N(0, 1)``.
    """
    if not kappa > 1:
        raise ValueError(f"kappa must exceed 1, got {kappa}")
    if not 0.0 < density <= 1.0:
        raise ValueError(f"density must lie in (0, 1], got {density}")
    if not n >= d >= 1:
        raise ValueError("need n >= d >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    indptr, indices, values = _random_rows(rng, n, d, density)
    row_ids = np.repeat(np.arange(n), np.diff(indptr))
    sq = np.bincount(row_ids, weights=values * values, minlength=n)
    values = values / np.sqrt(sq.max())

    x_true = rng.standard_normal(d)
    Ax = np.bincount(row_ids, weights=values * x_true[indices], minlength=n)
    b = Ax + noise * rng.standard_normal(n)
    lam = 1.0 / (kappa - 1.0)
    return SparseDataset.from_arrays(indptr, indices, values, b, d), lam


def generate_logistic(
    n: int,
    d: int,
    density: float = 1.0,
    seed: int = 0,
    flip: float = 0.05,
) -> SparseDataset:
    """Synthetic binary classification data with unit-norm rows and labels in {-1, +1}.

    Labels follow ``sign(a_i^T w)`` for a random ``w``, each flipped with
    probability ``flip`` so the problem is not separable.
    """
    if not 0.0 < density <= 1.0:
        raise ValueError(f"density must lie in (0, 1], got {density}")
    rng = np.random.Generator(np.random.PCG64(seed))
    indptr, indices, values = _random_rows(rng, n, d, density)
    row_ids = np.repeat(np.arange(n), np.diff(indptr))
    sq = np.bincount(row_ids, weights=values * values, minlength=n)
    norms = np.sqrt(np.where(sq > 0, sq, 1.0))
    values = values / norms[row_ids]

    w = rng.standard_normal(d)
    margin = np.bincount(row_ids, weights=values * w[indices], minlength=n)
    labels = np.where(margin >= 0, 1.0, -1.0)
    labels[rng.random(n) < flip] *= -1.0
    return SparseDataset.from_arrays(indptr, indices, values, labels, d)


TRACE_HEADER = ["work_units", "epoch", "objective", "residual"]


def write_trace_csv(trace: ConvergenceTrace, sink: IO[str]) -> None:
    if not trace.points:
        raise ValueError("cannot write an empty trace")
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for p in trace.points:
        writer.writerow([p.work_units, p.epoch, p.objective, "" if p.residual is None else p.residual])


def trace_to_csv_string(trace: ConvergenceTrace) -> str:
    buf = io.StringIO()
    write_trace_csv(trace, buf)
    return buf.getvalue()
