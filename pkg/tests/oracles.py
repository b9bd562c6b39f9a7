"""Independent reference values used only by the tests."""

import math

import numpy as np
from scipy.special import eval_jacobi, gammaln


def log_selberg(n, a, b):
    """log of int_[0,1]^n prod x^(a-1) (1-x)^(b-1) prod_{i<j} |x_i - x_j|^2 dx (Selberg, gamma=1)."""
    if n == 0:
        return 0.0
    j = np.arange(n)
    return float(np.sum(gammaln(a + j) + gammaln(b + j) + gammaln(2 + j) - gammaln(a + b + n + j - 1) - gammaln(2.0)))


def log_gamma_full_exact(n, kappaN, lambdaN):
    """log of Q_N[int exp(kappaN log x + lambdaN log(1-x) + 2 sum log|x - a|) dx] = log S_n / S_{n-1}."""
    a, b = kappaN + 1.0, lambdaN + 1.0
    return log_selberg(n, a, b) - log_selberg(n - 1, a, b)


def _orthonormal_jacobi(n, kappaN, lambdaN, x):
    """Rows k=0..n-1 of sqrt(w(x)) p_k(x) for weight x^kappaN (1-x)^lambdaN on [0,1]."""
    al, be = lambdaN, kappaN  # P^(al,be)(t), t = 2x-1, weight (1-t)^al (1+t)^be
    t = 2.0 * x - 1.0
    rows = []
    for k in range(n):
        logh = (
            (al + be + 1) * math.log(2.0)
            + gammaln(k + al + 1) + gammaln(k + be + 1)
            - math.log(2 * k + al + be + 1) - gammaln(k + al + be + 1) - gammaln(k + 1)
        )
        # change of variables x -> t contributes 2^-(al+be+1)
        logh -= (al + be + 1) * math.log(2.0)
        logw = kappaN * np.log(x) + lambdaN * np.log1p(-x)
        rows.append(eval_jacobi(k, al, be, t) * np.exp(0.5 * logw - 0.5 * logh))
    return np.array(rows)


def beta2_no_particle_prob(n, kappaN, lambdaN, a, b, order=200):
    """P(no particle in [a, b]) for the beta = 2 Jacobi ensemble via the Fredholm determinant."""
    g, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (b - a) * g + 0.5 * (b + a)
    w = 0.5 * (b - a) * w
    phi = _orthonormal_jacobi(n, kappaN, lambdaN, x)
    K = (phi.T @ phi) * np.sqrt(np.outer(w, w))
    return float(np.prod(1.0 - np.linalg.eigvalsh(K)))


def two_particle_mean_gap(kappaN, lambdaN, m=2000):
    """E|x1 - x2| for n=2 by midpoint tensor quadrature on an m x m grid."""
    x = (np.arange(m) + 0.5) / m
    f = x ** kappaN * (1.0 - x) ** lambdaN
    d = np.abs(x[:, None] - x[None, :])
    dens = f[:, None] * f[None, :] * d ** 2
    return float((dens * d).sum() / dens.sum())


def arcsine_cdf(x):
    return 2.0 / math.pi * np.arcsin(np.sqrt(np.clip(x, 0.0, 1.0)))
