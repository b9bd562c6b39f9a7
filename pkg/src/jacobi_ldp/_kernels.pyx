# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Metropolis sweeps for the Jacobi log-gas.

Mirrors ``_kernels_py`` operation for operation, so both backends produce
bit-identical chains from the same uniforms.
"""

from libc.math cimport log, fabs

# pair ratios are multiplied in blocks of this size before taking one log
cdef enum:
    BLOCK = 8


cdef inline double _move_delta(const double* x, Py_ssize_t n, Py_ssize_t i, double y,
                               double kappa, double lam) noexcept nogil:
    cdef double xi = x[i]
    cdef double d = 0.0
    cdef double prod = 1.0
    cdef Py_ssize_t j
    cdef int cnt = 0
    if kappa != 0.0:
        d += kappa * log(y / xi)
    if lam != 0.0:
        d += lam * log((1.0 - y) / (1.0 - xi))
    for j in range(n):
        if j == i:
            continue
        prod *= (y - x[j]) / (xi - x[j])
        cnt += 1
        if cnt == BLOCK:
            d += 2.0 * log(fabs(prod))
            prod = 1.0
            cnt = 0
    if cnt:
        d += 2.0 * log(fabs(prod))
    return d


cdef inline double _reflect(double y) noexcept nogil:
    while y < 0.0 or y > 1.0:
        if y < 0.0:
            y = -y
        if y > 1.0:
            y = 2.0 - y
    return y


def run_sweeps(double[::1] x, double kappa, double lam, double step,
               const double[:, ::1] u, Py_ssize_t thin, double[:, ::1] out):
    """Run ``u.shape[0] // n`` systematic-scan sweeps in place on ``x``.

    Row ``k`` of ``u`` holds the proposal and acceptance uniforms for move
    ``k``.  After every ``thin`` sweeps the state is copied into the next row of
    ``out`` (``out`` may have zero rows).  Returns ``(accepted, delta_logp)``.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t moves = u.shape[0]
    cdef Py_ssize_t sweeps = moves // n
    cdef Py_ssize_t s, i, k, r = 0, j
    cdef long accepted = 0
    cdef double total = 0.0
    cdef double y, d
    if moves != sweeps * n or u.shape[1] != 2:
        raise ValueError("uniform block must have shape (sweeps * n, 2)")
    if thin < 1:
        raise ValueError("thin must be positive")
    if out.shape[0] > sweeps // thin or (out.shape[0] and out.shape[1] != n):
        raise ValueError("output block does not match the sweep count")
    with nogil:
        k = 0
        for s in range(sweeps):
            for i in range(n):
                y = _reflect(x[i] + step * (2.0 * u[k, 0] - 1.0))
                if y > 0.0 and y < 1.0:
                    d = _move_delta(&x[0], n, i, y, kappa, lam)
                    # d is -inf on collisions, so the test rejects them
                    if log(u[k, 1]) < d:
                        x[i] = y
                        total += d
                        accepted += 1
                k += 1
            if (s + 1) % thin == 0 and r < out.shape[0]:
                for j in range(n):
                    out[r, j] = x[j]
                r += 1
    return accepted, total
