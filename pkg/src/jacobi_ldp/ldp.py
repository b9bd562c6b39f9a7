"""Monte Carlo checks of the outlier large deviation principle.

``p_hat(X)`` is the probability that at least one particle lands in ``X``.
The auxiliary quantity

    gamma_N(X) = E_Q[ int_X exp(kappaN log xi + lambdaN log(1 - xi) + 2 sum_i log|xi - x_i|) dxi ]

(expectation over the ``n - 1`` particle law ``Q_N``) brackets it:
``r <= p_hat <= n r`` with ``r = gamma_N(X) / gamma_N([0, 1])``.  For large
``N``, ``(1/N) log p_hat(X) -> -2 rho inf_X V_eff`` and
``(1/N) log gamma_N([0, 1]) -> -2 rho D``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .core import FiniteParams, LimitParams, ScalingFamily, field_log_weight
from .equilibrium import EquilibriumSolution, GridMeasure, effective_potential
from .logkernel import cell_truncated_log_integral
from .sampler import ChainSettings, MetropolisChain, integrated_autocorrelation, sample_reduced_chain

__all__ = [
    "Region",
    "OutlierEstimate",
    "GammaEstimate",
    "RateEstimate",
    "SandwichCheck",
    "InsufficientStatistics",
    "QuadratureWarning",
    "estimate_outlier_probability",
    "estimate_outlier_probabilities",
    "estimate_gamma",
    "sandwich_check",
    "truncated_field_functional",
    "fit_rate",
    "kolmogorov_distance",
]

MIN_HITS = 5
GL_ORDER = 8


class InsufficientStatistics(RuntimeError):
    """Too few ``N`` values with enough hits to fit a rate."""

    def __init__(self, message: str, needs_trials: list[int]):
        super().__init__(message)
        self.needs_trials = needs_trials


class QuadratureWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Region:
    """Finite union of disjoint closed subintervals of ``[0, 1]``."""

    intervals: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        iv = sorted((float(a), float(b)) for a, b in self.intervals)
        for a, b in iv:
            if not 0.0 <= a <= b <= 1.0:
                raise ValueError(f"interval [{a}, {b}] is not a subinterval of [0, 1]")
        for (_, b0), (a1, _) in zip(iv, iv[1:]):
            if a1 <= b0:
                raise ValueError("intervals must be disjoint")
        object.__setattr__(self, "intervals", tuple(iv))

    @classmethod
    def full(cls) -> "Region":
        return cls(((0.0, 1.0),))

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    @property
    def is_full(self) -> bool:
        return self.intervals == ((0.0, 1.0),)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        hit = np.zeros(x.shape, dtype=bool)
        for a, b in self.intervals:
            hit |= (x >= a) & (x <= b)
        return hit

    def hits(self, samples: np.ndarray) -> np.ndarray:
        """Per row: does any coordinate fall in the region."""
        if samples.shape[0] == 0 or self.is_empty:
            return np.zeros(samples.shape[0], dtype=bool)
        return self.contains(samples).any(axis=1)

    def __str__(self):
        return " U ".join(f"[{a:g}, {b:g}]" for a, b in self.intervals) or "empty"


@dataclass(frozen=True)
class OutlierEstimate:
    N: int
    trials: int
    hits: int
    p_hat: float
    std_err: float
    tau: float = 1.0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if not 0 <= self.hits <= self.trials:
            raise ValueError("hits must lie between 0 and trials")
        if abs(self.p_hat - self.hits / self.trials) > 1e-12:
            raise ValueError("p_hat must equal hits / trials")

    @property
    def effective_trials(self) -> float:
        return self.trials / self.tau


def _estimate_from_indicator(N: int, ind: np.ndarray) -> OutlierEstimate:
    trials = ind.size
    hits = int(ind.sum())
    p = hits / trials
    tau = integrated_autocorrelation(ind) if 0 < hits < trials else 1.0
    se = math.sqrt(p * (1.0 - p) * tau / trials)
    return OutlierEstimate(N, trials, hits, p, se, tau)


def estimate_outlier_probabilities(
    family: ScalingFamily,
    N: int,
    regions: Sequence[Region],
    trials: int,
    s: ChainSettings = ChainSettings(),
    backend: str | None = None,
) -> list[OutlierEstimate]:
    """Estimate ``p_hat`` for several regions from one shared chain.

    The retained states of a single thinned chain are the trials; sharing
    them makes ``p_hat`` monotone under region inclusion.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    p = family.params(N)
    live = [r for r in regions if not r.is_empty]
    inds = {id(r): np.empty(trials, dtype=bool) for r in live}
    if live:
        chain = MetropolisChain(p, s, backend)
        pos = 0
        for block in chain.batches(trials):
            k = block.shape[0]
            for r in live:
                inds[id(r)][pos : pos + k] = r.hits(block)
            pos += k
    out = []
    for r in regions:
        if r.is_empty:
            out.append(OutlierEstimate(N, trials, 0, 0.0, 0.0))
        else:
            out.append(_estimate_from_indicator(N, inds[id(r)]))
    return out


def estimate_outlier_probability(
    family: ScalingFamily,
    N: int,
    X: Region,
    trials: int,
    s: ChainSettings = ChainSettings(),
    backend: str | None = None,
) -> OutlierEstimate:
    """Fraction of thinned chain states with at least one particle in ``X``."""
    return estimate_outlier_probabilities(family, N, [X], trials, s, backend)[0]


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(GL_ORDER)


def _log_field_integrals(atoms: np.ndarray, p: FiniteParams, regions: Sequence[Region], quad_cells: int) -> list[float]:
    """``log int_X exp(kappaN log xi + lambdaN log(1-xi) + 2 sum log|xi - a|) dxi`` for each region.

    Composite Gauss-Legendre on panels cut at the atoms, at a uniform grid
    of ``quad_cells`` cells and at the region endpoints; the integrand is
    assembled in log space and summed with a max shift.
    """
    grid = np.linspace(0.0, 1.0, quad_cells + 1)
    out = []
    for X in regions:
        if X.is_empty:
            out.append(-math.inf)
            continue
        parts = []
        for a, b in X.intervals:
            if b <= a:
                continue
            cuts = np.concatenate(([a, b], grid[(grid > a) & (grid < b)], atoms[(atoms > a) & (atoms < b)]))
            cuts = np.unique(cuts)
            lo, hi = cuts[:-1], cuts[1:]
            half = 0.5 * (hi - lo)
            xi = (0.5 * (hi + lo))[:, None] + half[:, None] * _GL_NODES[None, :]
            logw = np.log(half)[:, None] + np.log(_GL_WEIGHTS)[None, :]
            xi = xi.ravel()
            with np.errstate(divide="ignore"):
                g = field_log_weight(xi, p.kappaN, p.lambdaN)
                g = g + 2.0 * np.log(np.abs(xi[:, None] - atoms[None, :])).sum(axis=1)
            parts.append(logsumexp(g + logw.ravel()))
        out.append(float(logsumexp(parts)) if parts else -math.inf)
    return out


@dataclass(frozen=True)
class GammaEstimate:
    """Monte Carlo estimate of ``gamma_N(X)`` and ``gamma_N([0, 1])``, kept in log space."""

    N: int
    n: int
    samples: int
    log_gamma_X: float
    log_gamma_full: float
    ratio: float
    ratio_std_err: float
    log_gamma_full_std_err: float

    @property
    def gamma_X(self) -> float:
        return math.exp(self.log_gamma_X) if self.log_gamma_X < 709 else math.inf

    @property
    def gamma_full(self) -> float:
        return math.exp(self.log_gamma_full) if self.log_gamma_full < 709 else math.inf


def estimate_gamma(
    family: ScalingFamily,
    N: int,
    X: Region,
    trials: int,
    quad_cells: int = 128,
    s: ChainSettings = ChainSettings(),
    backend: str | None = None,
) -> GammaEstimate:
    """Average the field integrals over ``X`` and ``[0, 1]`` across ``Q_N`` samples.

    Warns with :class:`QuadratureWarning` when the uniform quadrature cells
    are wider than the typical atom spacing.
    """
    p = family.params(N)
    if p.n < 2:
        raise ValueError("gamma_N needs n(N) >= 2")
    if quad_cells < p.n:
        warnings.warn(
            f"quad_cells={quad_cells} is coarser than the atom spacing at n={p.n}; use at least {2 * p.n}",
            QuadratureWarning,
            stacklevel=2,
        )
    samples, _ = sample_reduced_chain(p, s, trials, backend)
    full = Region.full()
    logs = np.array([_log_field_integrals(row, p, [X, full], quad_cells) for row in samples])
    la, lb = logs[:, 0], logs[:, 1]
    K = la.size
    shift = lb.max()
    a = np.exp(la - shift)
    b = np.exp(lb - shift)
    ratio = float(a.sum() / b.sum())
    z = (a - ratio * b) / b.mean()
    tau = integrated_autocorrelation(z)
    ratio_se = float(math.sqrt(z.var() * tau / K))
    tau_b = integrated_autocorrelation(b)
    log_full_se = float(math.sqrt(b.var() * tau_b / K) / b.mean())
    log_mean_a = float(logsumexp(la) - math.log(K))
    log_mean_b = float(logsumexp(lb) - math.log(K))
    return GammaEstimate(N, p.n, K, log_mean_a, log_mean_b, ratio, ratio_se, log_full_se)


@dataclass(frozen=True)
class SandwichCheck:
    """Verdict on ``r <= p_hat <= n r`` with ``bands`` standard errors of slack on each side."""

    N: int
    n: int
    p_hat: float
    ratio: float
    lower_gap: float
    upper_gap: float
    lower_band: float
    upper_band: float

    @property
    def lower_ok(self) -> bool:
        return self.lower_gap >= -self.lower_band

    @property
    def upper_ok(self) -> bool:
        return self.upper_gap >= -self.upper_band

    @property
    def passed(self) -> bool:
        return self.lower_ok and self.upper_ok


def sandwich_check(est: OutlierEstimate, gam: GammaEstimate, bands: float = 3.0) -> SandwichCheck:
    """Compare ``p_hat`` against ``r`` and ``n r`` within joint standard-error bands."""
    n = gam.n
    r, sr = gam.ratio, gam.ratio_std_err
    sp = est.std_err
    return SandwichCheck(
        N=est.N,
        n=n,
        p_hat=est.p_hat,
        ratio=r,
        lower_gap=est.p_hat - r,
        upper_gap=n * r - est.p_hat,
        lower_band=bands * math.hypot(sp, sr),
        upper_band=bands * math.hypot(sp, n * sr),
    )


def truncated_field_functional(xi, mu, L: float, p: FiniteParams):
    """``min(V_N(xi), L) - ((n-1)/n) int log(max(|xi - eta|, 1/L)) dmu(eta)``.

    ``mu`` is a :class:`GridMeasure` or an array of atoms (uniform weights).
    """
    if not L > 1:
        raise ValueError("L must exceed 1")
    xi = np.asarray(xi, dtype=float)
    VN = -field_log_weight(xi, p.kappaN, p.lambdaN) / (2.0 * p.n)
    if isinstance(mu, GridMeasure):
        e = mu.edges
        nz = np.flatnonzero(mu.weights)
        K = cell_truncated_log_integral(xi[..., None], e[nz], e[nz + 1], L) / mu.cell_width
        kern = K @ mu.weights[nz]
    else:
        atoms = np.asarray(mu, dtype=float)
        kern = np.log(np.maximum(np.abs(xi[..., None] - atoms), 1.0 / L)).mean(axis=-1)
    out = np.minimum(VN, L) - (p.n - 1) / p.n * kern
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class RateEstimate:
    per_N: tuple[OutlierEstimate, ...]
    used_N: tuple[int, ...]
    fitted_slope: float
    slope_std_err: float
    intercept: float
    theoretical_rate: float
    inf_veff: float

    @property
    def relative_error(self) -> float:
        if self.theoretical_rate == 0.0:
            return math.inf if self.fitted_slope != 0.0 else 0.0
        return abs(self.fitted_slope - self.theoretical_rate) / abs(self.theoretical_rate)


def region_inf_veff(X: Region, sol: EquilibriumSolution, lp: LimitParams | None = None) -> float:
    """``inf_X V_eff`` over grid nodes inside ``X`` plus the interval endpoints; 0 if ``X`` meets the support."""
    lp = sol.limits if lp is None else lp
    if X.is_empty:
        return math.inf
    nodes = sol.nodes
    inside = X.contains(nodes)
    if np.any(inside & sol.support_mask):
        return 0.0
    vals = [float(v) for v in sol.veff[inside]]
    for a, b in X.intervals:
        vals.append(effective_potential(a, sol, lp))
        vals.append(effective_potential(b, sol, lp))
    return max(0.0, min(vals))


def fit_rate(
    estimates: Sequence[OutlierEstimate],
    X: Region,
    sol: EquilibriumSolution,
    lp: LimitParams | None = None,
    min_hits: int = MIN_HITS,
) -> RateEstimate:
    """Weighted least squares of ``log p_hat`` against ``N`` with a free intercept.

    Weights are inverse delta-method variances ``(p_hat / std_err)^2``; only
    estimates with at least ``min_hits`` hits enter.  The slope is compared
    with ``-2 rho inf_X V_eff``.

    Raises:
        InsufficientStatistics: fewer than three usable ``N``.
    """
    lp = sol.limits if lp is None else lp
    usable = [e for e in estimates if e.hits >= min_hits]
    if len({e.N for e in usable}) < 3:
        short = sorted(e.N for e in estimates if e.hits < min_hits)
        raise InsufficientStatistics(
            f"only {len(usable)} N values have >= {min_hits} hits; more trials needed at N={short}", short
        )
    Ns = np.array([e.N for e in usable], dtype=float)
    y = np.log([e.p_hat for e in usable])
    var = np.array([
        (e.std_err / e.p_hat) ** 2 if e.std_err > 0 else (1.0 - e.p_hat) / e.hits + 1e-300
        for e in usable
    ])
    w = 1.0 / var
    A = np.column_stack([Ns, np.ones_like(Ns)])
    AtW = A.T * w
    cov = np.linalg.inv(AtW @ A)
    slope, intercept = cov @ (AtW @ y)
    inf_v = region_inf_veff(X, sol, lp)
    return RateEstimate(
        per_N=tuple(estimates),
        used_N=tuple(int(n) for n in Ns),
        fitted_slope=float(slope),
        slope_std_err=float(math.sqrt(cov[0, 0])),
        intercept=float(intercept),
        theoretical_rate=-2.0 * lp.rho * inf_v + 0.0,
        inf_veff=inf_v,
    )


def kolmogorov_distance(positions, mu: GridMeasure) -> float:
    """Sup distance between the empirical CDF of ``positions`` and the CDF of ``mu``."""
    x = np.sort(np.asarray(positions, dtype=float))
    n = x.size
    F = mu.cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
