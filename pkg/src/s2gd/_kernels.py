"""Compiled inner loops.

Every loop here consumes pre-drawn random numbers; the generators live in the
Python callers so the draw order stays in one place.
"""

import math

import numpy as np
from numba import njit

LEAST_SQUARES = 0
LOGISTIC = 1

_jit = dict(nogil=True, cache=True)


@njit(**_jit)
def dphi(loss, z, label):
    """Derivative of the univariate loss at margin ``z``."""
    if loss == LEAST_SQUARES:
        return z - label
    u = -label * z
    if u >= 0.0:
        s = 1.0 / (1.0 + math.exp(-u))
    else:
        e = math.exp(u)
        s = e / (1.0 + e)
    return -label * s


@njit(**_jit)
def sparse_dot(indptr, indices, values, i, x):
    acc = 0.0
    for k in range(indptr[i], indptr[i + 1]):
        acc += values[k] * x[indices[k]]
    return acc


@njit(**_jit)
def svrg_inner_dense(indptr, indices, values, labels, loss, h, ridge, hc, anchor_dphi, y, idx):
    """Inner loop of S2GD on the full vector.

    Each step applies ``y <- (1 - h*ridge) y - hc`` and then the sparse
    correction ``-h (dphi(a_i.y) - dphi(a_i.x_j)) a_i``; ``hc`` is
    ``h (g_j - ridge * x_j)`` and ``anchor_dphi[i]`` is ``dphi(a_i.x_j)``.
    """
    q = 1.0 - h * ridge
    d = y.shape[0]
    for t in range(idx.shape[0]):
        i = idx[t]
        z = sparse_dot(indptr, indices, values, i, y)
        coef = h * (dphi(loss, z, labels[i]) - anchor_dphi[i])
        for s in range(d):
            y[s] = q * y[s] - hc[s]
        for k in range(indptr[i], indptr[i + 1]):
            y[indices[k]] -= coef * values[k]


@njit(**_jit)
def _catch_up(y, s, k, qpow, geo, hc):
    if k == 1:
        y[s] = qpow[1] * y[s] - hc[s]
    elif k > 1:
        y[s] = qpow[k] * y[s] - geo[k] * hc[s]


@njit(**_jit)
def svrg_inner_lazy(indptr, indices, values, labels, loss, h, ridge, hc, anchor_dphi, y, idx,
                    chi, t0, qpow, geo):
    """Same iteration as ``svrg_inner_dense`` with the dense part deferred.

    ``chi[s]`` is the step index up to which coordinate ``s`` is current.
    ``k`` pending dense steps collapse to ``y <- qpow[k] y - geo[k] hc`` with
    ``qpow[k] = q**k`` and ``geo[k] = 1 + q + ... + q**(k-1)``.
    Steps are numbered from ``t0`` so a run can be split into segments.
    """
    for tt in range(idx.shape[0]):
        t = t0 + tt
        i = idx[tt]
        lo = indptr[i]
        hi = indptr[i + 1]
        for k in range(lo, hi):
            s = indices[k]
            _catch_up(y, s, t - chi[s], qpow, geo, hc)
            chi[s] = t
        z = 0.0
        for k in range(lo, hi):
            z += values[k] * y[indices[k]]
        coef = h * (dphi(loss, z, labels[i]) - anchor_dphi[i])
        for k in range(lo, hi):
            s = indices[k]
            # this step's dense part, then the sparse correction
            y[s] = qpow[1] * y[s] - hc[s]
            y[s] -= coef * values[k]
            chi[s] = t + 1


@njit(**_jit)
def finish_lazy(y, chi, t_end, qpow, geo, hc):
    for s in range(y.shape[0]):
        _catch_up(y, s, t_end - chi[s], qpow, geo, hc)
        chi[s] = t_end


@njit(**_jit)
def sgd_steps(indptr, indices, values, labels, loss, h, ridge, anchor, x, idx):
    """Plain SGD: ``x <- x - h (dphi(a_i.x) a_i + ridge x - anchor)``."""
    q = 1.0 - h * ridge
    d = x.shape[0]
    for t in range(idx.shape[0]):
        i = idx[t]
        z = sparse_dot(indptr, indices, values, i, x)
        coef = h * dphi(loss, z, labels[i])
        for s in range(d):
            x[s] = q * x[s] + h * anchor[s]
        for k in range(indptr[i], indptr[i + 1]):
            x[indices[k]] -= coef * values[k]


@njit(**_jit)
def sag_steps(indptr, indices, values, labels, loss, h, ridge, anchor, x, idx,
              table, seen, grad_sum, n_seen, plus):
    """SAG over scalar gradient memory ``table[i] = dphi(a_i.x)`` at last visit.

    ``grad_sum`` holds ``sum_i table[i] a_i``; the regularizer gradient is
    evaluated exactly at the current point. With ``plus`` the average divides
    by the number of distinct examples seen instead of ``n``.
    Returns the updated count of distinct examples seen.
    """
    n = table.shape[0]
    d = x.shape[0]
    for t in range(idx.shape[0]):
        i = idx[t]
        z = sparse_dot(indptr, indices, values, i, x)
        g_new = dphi(loss, z, labels[i])
        diff = g_new - table[i]
        table[i] = g_new
        if not seen[i]:
            seen[i] = True
            n_seen += 1
        for k in range(indptr[i], indptr[i + 1]):
            grad_sum[indices[k]] += diff * values[k]
        denom = n_seen if plus else n
        scale = h / denom
        for s in range(d):
            x[s] -= scale * grad_sum[s] + h * (ridge * x[s] - anchor[s])
    return n_seen


@njit(**_jit)
def geometric_powers(q, count):
    """``q**k`` and ``sum_{i<k} q**i`` for ``k = 0..count``."""
    qpow = np.empty(count + 1)
    geo = np.empty(count + 1)
    qpow[0] = 1.0
    geo[0] = 0.0
    for k in range(count):
        qpow[k + 1] = qpow[k] * q
        geo[k + 1] = geo[k] * q + 1.0
    return qpow, geo
