"""Pure-Python twin of ``_kernels.pyx``.

Same arithmetic in the same order, so a chain driven by the same uniforms is
bit-identical to the compiled one (both call the C library ``log``).
"""

from __future__ import annotations

from math import fabs, inf, log

import numpy as np

BLOCK = 8


def _log(v: float) -> float:
    # libm returns -inf for log(0); the math module raises instead
    return log(v) if v > 0.0 else -inf


def _move_delta(x: list, n: int, i: int, y: float, kappa: float, lam: float) -> float:
    xi = x[i]
    d = 0.0
    prod = 1.0
    cnt = 0
    if kappa != 0.0:
        d += kappa * _log(y / xi)
    if lam != 0.0:
        d += lam * _log((1.0 - y) / (1.0 - xi))
    for j in range(n):
        if j == i:
            continue
        prod *= (y - x[j]) / (xi - x[j])
        cnt += 1
        if cnt == BLOCK:
            d += 2.0 * _log(fabs(prod))
            prod = 1.0
            cnt = 0
    if cnt:
        d += 2.0 * _log(fabs(prod))
    return d


def _reflect(y: float) -> float:
    while y < 0.0 or y > 1.0:
        if y < 0.0:
            y = -y
        if y > 1.0:
            y = 2.0 - y
    return y


def run_sweeps(x: np.ndarray, kappa: float, lam: float, step: float, u: np.ndarray, thin: int, out: np.ndarray):
    n = x.shape[0]
    moves = u.shape[0]
    sweeps = moves // n
    if moves != sweeps * n or u.shape[1] != 2:
        raise ValueError("uniform block must have shape (sweeps * n, 2)")
    if thin < 1:
        raise ValueError("thin must be positive")
    if out.shape[0] > sweeps // thin or (out.shape[0] and out.shape[1] != n):
        raise ValueError("output block does not match the sweep count")
    xs = x.tolist()
    ul = u.tolist()
    accepted = 0
    total = 0.0
    r = 0
    k = 0
    for s in range(sweeps):
        for i in range(n):
            prop, acc = ul[k]
            y = _reflect(xs[i] + step * (2.0 * prop - 1.0))
            if 0.0 < y < 1.0:
                d = _move_delta(xs, n, i, y, kappa, lam)
                if _log(acc) < d:
                    xs[i] = y
                    total += d
                    accepted += 1
            k += 1
        if (s + 1) % thin == 0 and r < out.shape[0]:
            out[r, :] = xs
            r += 1
    x[:] = xs
    return accepted, total
