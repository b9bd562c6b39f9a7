"""Closed-form integrals of the logarithmic kernel.

Everything here is built from two antiderivatives:

    g(t) = t log|t| - t              (g' = log|t|)
    G(t) = t^2 log|t| / 2 - 3 t^2 / 4  (G'' = log|t|)

so integrals of ``log|x - y|`` over cells, and double integrals over pairs of
cells, are exact up to floating point.  All functions accept numpy arrays and
broadcast.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "xlogx_minus_x",
    "cell_log_integral",
    "cell_truncated_log_integral",
    "smoothing_kernel_H",
    "unit_cell_pair_mean",
    "interaction_matrix",
    "cell_mean_log",
    "cell_mean_log1m",
]


def xlogx_minus_x(t):
    """``g(t) = t log|t| - t`` with ``g(0) = 0``."""
    t = np.asarray(t, dtype=float)
    a = np.abs(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(a > 0, t * np.log(np.where(a > 0, a, 1.0)), 0.0) - t
    return out if out.ndim else float(out)


def cell_log_integral(x, a, b):
    """``int_a^b log|x - y| dy`` for ``a <= b``."""
    x = np.asarray(x, dtype=float)
    return xlogx_minus_x(x - a) - xlogx_minus_x(x - b)


def cell_truncated_log_integral(x, a, b, M):
    """``int_a^b log(max(|x - y|, 1/M)) dy``.

    The window ``|x - y| < 1/M`` contributes ``-log M`` per unit length, the
    remainder is integrated exactly.
    """
    r = 1.0 / M
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    lo = np.clip(x - r, a, b)
    hi = np.clip(x + r, a, b)
    inner = (hi - lo) * np.log(r)
    left = cell_log_integral(x, a, lo)
    right = cell_log_integral(x, hi, b)
    return left + inner + right


def smoothing_kernel_H(x, delta, eta):
    """Average of ``log|xi - eta|`` over ``xi`` in ``[x - delta, x + delta]``.

    Equals ``(F(x + delta) - F(x - delta)) / (2 delta)`` for the antiderivative
    ``F(s) = int_0^s log|xi - eta| d xi``; continuous in ``eta`` on the real line.
    """
    if not np.all(np.asarray(delta) > 0):
        raise ValueError("delta must be positive")
    eta = np.asarray(eta, dtype=float)
    a = np.asarray(x - eta, dtype=float)
    near = (xlogx_minus_x(a + delta) - xlogx_minus_x(a - delta)) / (2.0 * delta)
    # away from the window the antiderivative difference cancels; regroup with log1p
    far_mask = np.abs(a) > delta
    af = np.where(far_mask, np.abs(a), 2.0 * delta)
    with np.errstate(divide="ignore", invalid="ignore"):
        far = (
            af * np.log1p(2.0 * delta / (af - delta)) / (2.0 * delta)
            + 0.5 * (np.log(af + delta) + np.log(af - delta))
            - 1.0
        )
    out = np.where(far_mask, far, near)
    return out if out.ndim else float(out)


def unit_cell_pair_mean(k):
    """Mean of ``log|s - t|`` over ``s in [0,1]``, ``t in [k, k+1]`` for integer ``k >= 0``.

    The second difference ``G(k+1) - 2G(k) + G(k-1)`` is rewritten with
    ``log1p`` so the ``k^2 log k`` parts cancel analytically.
    """
    k = np.asarray(k, dtype=float)
    out = np.empty_like(k)
    zero = k == 0
    out[zero] = -1.5
    kk = k[~zero]
    one = kk == 1
    body = np.empty_like(kk)
    # k = 1: (4 log 2 + 0) / 2 - 3/2
    body[one] = 2.0 * np.log(2.0) - 1.5
    km = kk[~one]
    body[~one] = (
        np.log(km)
        + 0.5 * ((km + 1.0) ** 2 * np.log1p(1.0 / km) + (km - 1.0) ** 2 * np.log1p(-1.0 / km))
        - 1.5
    )
    out[~zero] = body
    return out if out.ndim else float(out)


def interaction_matrix(cells: int) -> np.ndarray:
    """Symmetric matrix of double cell averages of ``-log|x - y|`` on a uniform grid of ``[0,1]``.

    Diagonal entries are ``-log h + 3/2``.
    """
    h = 1.0 / cells
    band = -np.log(h) - unit_cell_pair_mean(np.arange(cells))
    idx = np.arange(cells)
    return band[np.abs(idx[:, None] - idx[None, :])]


def cell_mean_log(a, b):
    """Mean of ``log x`` over ``[a, b]`` with ``0 <= a < b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return (xlogx_minus_x(b) - xlogx_minus_x(a)) / (b - a)


def cell_mean_log1m(a, b):
    """Mean of ``log(1 - x)`` over ``[a, b]`` with ``a < b <= 1``."""
    return cell_mean_log(1.0 - np.asarray(b, dtype=float), 1.0 - np.asarray(a, dtype=float))
