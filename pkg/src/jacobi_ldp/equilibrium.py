"""Equilibrium measure of the Jacobi field, its constants and the effective potential.

The probability measure is discretized as piecewise-constant density on a
uniform grid of ``[0, 1]``.  All kernels are exact cell averages, so the
discrete energy

    E(w) = rho^2 w^T K w - rho w^T phi

(``K`` the double cell average of ``-log|x - y|``, ``phi`` the cell average of
``kappa log x + lambda log(1 - x)``) stays finite even when the field is
singular at an endpoint.  ``K`` is positive definite because ``[0, 1]`` has
logarithmic capacity ``1/4 < 1``, so the minimizer over the simplex is unique.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import LimitParams, field_log_weight, potential_V
from .logkernel import (
    cell_log_integral,
    cell_mean_log,
    cell_mean_log1m,
    cell_truncated_log_integral,
    interaction_matrix,
)

__all__ = [
    "GridMeasure",
    "EquilibriumSolution",
    "EquilibriumNotConverged",
    "log_potential",
    "energy_functional",
    "solve_equilibrium",
    "compute_constants",
    "rate_function",
    "effective_potential",
    "truncated_effective_potential",
    "refine_B",
]

log = logging.getLogger(__name__)

SUPPORT_FRACTION = 0.01


@dataclass(frozen=True)
class GridMeasure:
    """Probability weights on the midpoints of a uniform partition of ``[0, 1]``.

    Each weight is spread uniformly over its cell, so integrals against the
    measure are integrals against a step density.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty 1-D array")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def cells(self) -> int:
        return self.weights.size

    @property
    def cell_width(self) -> float:
        return 1.0 / self.cells

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.cells + 1)

    @property
    def nodes(self) -> np.ndarray:
        return (np.arange(self.cells) + 0.5) / self.cells

    @classmethod
    def from_cdf(cls, cells: int, cdf) -> "GridMeasure":
        """Discretize a continuous law by its distribution function at the cell edges."""
        F = np.asarray(cdf(np.linspace(0.0, 1.0, cells + 1)), dtype=float)
        w = np.clip(np.diff(F), 0.0, None)
        return cls(w / w.sum())

    @classmethod
    def uniform(cls, cells: int) -> "GridMeasure":
        return cls(np.full(cells, 1.0 / cells))

    def cdf(self, x) -> np.ndarray:
        """Distribution function of the step density, exact between nodes."""
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        F = np.concatenate(([0.0], np.cumsum(self.weights)))
        return np.interp(x, self.edges, F)


@dataclass(frozen=True)
class EquilibriumSolution:
    """Discrete equilibrium measure with ``B``, ``D`` and ``V_eff`` tabulated at the nodes."""

    mu0: GridMeasure
    B: float
    D: float
    limits: LimitParams
    veff: np.ndarray
    support_mask: np.ndarray
    kkt_residual: float
    converged: bool
    iterations: int
    energy_history: list = field(default_factory=list, repr=False)

    @property
    def nodes(self) -> np.ndarray:
        return self.mu0.nodes

    @property
    def veff_table(self) -> list[tuple[float, float]]:
        return list(zip(self.nodes.tolist(), self.veff.tolist()))

    def support_interval(self) -> tuple[float, float]:
        """Outer cell edges of the support nodes."""
        idx = np.flatnonzero(self.support_mask)
        h = self.mu0.cell_width
        return float(idx[0] * h), float((idx[-1] + 1) * h)


class EquilibriumNotConverged(RuntimeError):
    """Raised when the KKT residual stays above tolerance; carries the last solution."""

    def __init__(self, message: str, solution: EquilibriumSolution):
        super().__init__(message)
        self.solution = solution


def log_potential(mu: GridMeasure, x):
    """``int log|x - y| dmu(y)`` with each cell's weight times its exact cell-averaged kernel."""
    x = np.asarray(x, dtype=float)
    e = mu.edges
    h = mu.cell_width
    w = mu.weights
    nz = np.flatnonzero(w)
    vals = cell_log_integral(x[..., None], e[nz], e[nz + 1]) / h
    out = vals @ w[nz]
    return out if out.ndim else float(out)


def _field_cell_means(cells: int, kappa: float, lam: float) -> np.ndarray:
    e = np.linspace(0.0, 1.0, cells + 1)
    phi = np.zeros(cells)
    if kappa:
        phi += kappa * cell_mean_log(e[:-1], e[1:])
    if lam:
        phi += lam * cell_mean_log1m(e[:-1], e[1:])
    return phi


class _DiscreteProblem:
    """Cached matrices of the discrete energy for one ``(limits, cells)`` pair."""

    def __init__(self, lp: LimitParams, cells: int):
        self.lp = lp
        self.cells = cells
        self.K = interaction_matrix(cells)
        self.phi = _field_cell_means(cells, lp.kappa, lp.lam)
        self._collocation = None

    @property
    def collocation(self) -> np.ndarray:
        # C[i, j] = -(cell j average of log|x_i - y|), x_i the node of cell i
        if self._collocation is None:
            e = np.linspace(0.0, 1.0, self.cells + 1)
            x = 0.5 * (e[:-1] + e[1:])
            self._collocation = -cell_log_integral(x[:, None], e[None, :-1], e[None, 1:]) * self.cells
        return self._collocation

    @property
    def nodal_V(self) -> np.ndarray:
        x = (np.arange(self.cells) + 0.5) / self.cells
        return -field_log_weight(x, self.lp.kappa, self.lp.lam) / (2.0 * self.lp.rho)

    def energy(self, w: np.ndarray) -> float:
        rho = self.lp.rho
        return float(rho * rho * (w @ (self.K @ w)) - rho * (self.phi @ w))

    def gradient(self, w: np.ndarray) -> np.ndarray:
        rho = self.lp.rho
        return 2.0 * rho * rho * (self.K @ w) - rho * self.phi


def energy_functional(mu: GridMeasure, lp: LimitParams) -> float:
    """``-rho^2 iint log|x-y| + -rho int (kappa log x + lambda log(1-x))``, no ``rho^2 B`` term."""
    K = interaction_matrix(mu.cells)
    phi = _field_cell_means(mu.cells, lp.kappa, lp.lam)
    w = mu.weights
    return float(lp.rho ** 2 * (w @ (K @ w)) - lp.rho * (phi @ w))


def _interaction_and_field(mu: GridMeasure, lp: LimitParams) -> tuple[float, float]:
    K = interaction_matrix(mu.cells)
    w = mu.weights
    loglog = -float(w @ (K @ w))
    fld = float(_field_cell_means(mu.cells, lp.kappa, lp.lam) @ w)
    return loglog, fld


def compute_constants(mu0: GridMeasure, lp: LimitParams) -> tuple[float, float]:
    """``B`` from ``I(mu0) = 0`` and ``D = -B - int V dmu0``."""
    loglog, fld = _interaction_and_field(mu0, lp)
    B = loglog + fld / lp.rho
    int_V = -fld / (2.0 * lp.rho)
    return B, -B - int_V


def rate_function(mu: GridMeasure, sol: EquilibriumSolution, lp: LimitParams) -> float:
    """Rate ``I(mu) = energy_functional(mu) + rho^2 B``; zero at ``mu0``."""
    return energy_functional(mu, lp) + lp.rho ** 2 * sol.B


def _veff_from_measure(x, mu: GridMeasure, lp: LimitParams, D: float):
    x = np.asarray(x, dtype=float)
    V = -field_log_weight(x, lp.kappa, lp.lam) / (2.0 * lp.rho)
    U = log_potential(mu, x)
    return V - U - D


def effective_potential(x, sol: EquilibriumSolution, lp: LimitParams | None = None):
    """``V_eff(x) = V(x) - int log|x-y| dmu0(y) - D``; ``+inf`` at a singular endpoint."""
    lp = sol.limits if lp is None else lp
    if np.ndim(x) == 0:
        V = potential_V(x, lp)
        if V == math.inf:
            return math.inf
        return float(V - log_potential(sol.mu0, float(x)) - sol.D)
    return _veff_from_measure(x, sol.mu0, lp, sol.D)


def truncated_effective_potential(x, M: float, sol: EquilibriumSolution, lp: LimitParams | None = None):
    """``min(V, M) - int log(max(|x-y|, 1/M)) dmu0(y) - D``; finite and continuous on ``[0, 1]``."""
    if not M > 1:
        raise ValueError("M must exceed 1")
    lp = sol.limits if lp is None else lp
    x = np.asarray(x, dtype=float)
    V = -field_log_weight(x, lp.kappa, lp.lam) / (2.0 * lp.rho)
    mu = sol.mu0
    e = mu.edges
    nz = np.flatnonzero(mu.weights)
    vals = cell_truncated_log_integral(x[..., None], e[nz], e[nz + 1], M) / mu.cell_width
    out = np.minimum(V, M) - vals @ mu.weights[nz] - sol.D
    return out if out.ndim else float(out)


def _kkt_residual(veff: np.ndarray, support: np.ndarray) -> float:
    below = float(np.max(np.clip(-veff, 0.0, None)))
    on = float(np.max(np.abs(veff[support]))) if support.any() else math.inf
    return max(below, on)


def _frostman_collocation(prob: _DiscreteProblem, w0: np.ndarray, max_rounds: int = 200):
    """Weights whose log potential satisfies the Frostman equality at every support node.

    Active-set iteration on the nodal system ``V(x_i) - U(x_i) = const`` for
    ``i`` in the support, ``sum w = 1``: negative weights leave the support,
    nodes where ``V - U`` drops below the constant join it.  Point evaluation at
    the nodes is what makes hard edges (inverse square-root densities) come out
    right; the cell-averaged minimizer is off there by ``O(sqrt(h))``.
    Returns ``None`` if the active set does not settle.
    """
    m = prob.cells
    C = prob.collocation
    V = prob.nodal_V
    active = w0 > SUPPORT_FRACTION / m
    if not active.any():
        active[np.argmax(w0)] = True
    for _ in range(max_rounds):
        S = np.flatnonzero(active)
        k = S.size
        A = np.zeros((k + 1, k + 1))
        A[:k, :k] = C[np.ix_(S, S)]
        A[:k, k] = -1.0
        A[k, :k] = 1.0
        try:
            sol = np.linalg.solve(A, np.concatenate((-V[S], [1.0])))
        except np.linalg.LinAlgError:
            return None
        wS, nu = sol[:k], sol[k]
        neg = wS < 0
        if neg.any():
            if neg.all():
                neg[np.argmax(wS)] = False
            active[S[neg]] = False
            continue
        w = np.zeros(m)
        w[S] = wS
        slack = C @ w + V - nu
        slack[S] = 0.0
        viol = np.flatnonzero(slack < -1e-12 * max(1.0, abs(nu)))
        if viol.size == 0:
            return w / w.sum()
        active[viol] = True
    return None


def _mirror_descent(prob: _DiscreteProblem, w: np.ndarray, iters: int, history: list) -> np.ndarray:
    E = prob.energy(w)
    step = 1.0
    for _ in range(iters):
        g = prob.gradient(w)
        while True:
            z = -step * (g - g.min())
            cand = w * np.exp(z)
            cand /= cand.sum()
            Ec = prob.energy(cand)
            # Armijo on the KL geometry; the exponentiated step never leaves the simplex
            if Ec <= E - 1e-4 * (g @ (w - cand)) or step < 1e-12:
                break
            step *= 0.5
        if Ec > E:
            break
        w, E = cand, Ec
        history.append(E)
        step *= 1.5
    return w


def solve_equilibrium(
    lp: LimitParams,
    cells: int = 1024,
    tol: float = 1e-3,
    max_iters: int = 2000,
    strict: bool = True,
) -> EquilibriumSolution:
    """Minimize the discrete weighted log energy over the probability simplex.

    Multiplicative-weights (entropic mirror descent) iterations with
    backtracking on the cell-averaged energy locate the support; the nodal
    Frostman system is then solved on that support by an active-set loop.
    ``energy_history`` records the descent iterates only.

    Raises:
        EquilibriumNotConverged: the Frostman residual at the nodes exceeds ``tol``
            after ``max_iters`` iterations (only when ``strict``).
    """
    if cells < 64:
        raise ValueError("need at least 64 cells")
    prob = _DiscreteProblem(lp, cells)
    w = np.full(cells, 1.0 / cells)
    history = [prob.energy(w)]
    iters = 0
    sol = None
    rounds = max(1, max_iters // 100)
    for _ in range(rounds):
        chunk = min(100, max_iters - iters)
        if chunk <= 0:
            break
        w = _mirror_descent(prob, w, chunk, history)
        iters += chunk
        polished = _frostman_collocation(prob, w)
        sol = _finalize(w if polished is None else polished, lp, iters, history, tol)
        if sol.converged:
            break
    if not sol.converged:
        msg = f"equilibrium solve stopped with KKT residual {sol.kkt_residual:.3e} > tol {tol:.1e} at {cells} cells"
        if strict:
            raise EquilibriumNotConverged(msg, sol)
        log.warning(msg)
    return sol


def _finalize(w, lp, iters, history, tol) -> EquilibriumSolution:
    w = np.clip(w, 0.0, None)
    mu0 = GridMeasure(w / w.sum())
    B, D = compute_constants(mu0, lp)
    veff = _veff_from_measure(mu0.nodes, mu0, lp, D)
    support = mu0.weights > SUPPORT_FRACTION / mu0.cells
    res = _kkt_residual(veff, support)
    support.setflags(write=False)
    veff.setflags(write=False)
    return EquilibriumSolution(
        mu0=mu0,
        B=B,
        D=D,
        limits=lp,
        veff=veff,
        support_mask=support,
        kkt_residual=res,
        converged=bool(res <= tol),
        iterations=iters,
        energy_history=list(history),
    )


def refine_B(lp: LimitParams, cells: int = 256, levels: int = 3, **kw) -> dict:
    """Solve on ``cells * 2**k`` grids and report ``B`` with a Richardson-style error estimate.

    The estimate for the finest level is the last difference scaled by the
    observed contraction ratio of consecutive differences.
    """
    Bs = []
    for k in range(levels):
        s = solve_equilibrium(lp, cells * 2 ** k, strict=False, **kw)
        Bs.append(s.B)
    diffs = np.abs(np.diff(Bs))
    if diffs.size >= 2 and diffs[-2] > 0:
        ratio = min(diffs[-1] / diffs[-2], 0.9)
    else:
        ratio = 0.5
    estimate = float(diffs[-1] * ratio / (1.0 - ratio)) if diffs.size else math.inf
    return {"cells": [cells * 2 ** k for k in range(levels)], "B": Bs, "error_estimate": estimate}
