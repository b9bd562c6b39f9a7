"""Random-walk Metropolis sampler for the finite-N Jacobi law.

One move proposes ``y = x_i + step * (2u - 1)`` reflected into ``[0, 1]`` and
accepts with probability ``min(1, exp(delta))``, where ``delta`` only involves
the ``n - 1`` pair terms of the moved particle.  Sweeps visit the coordinates
in order.  During burn-in the step is multiplied or divided by 1.1 per
100-sweep window; afterwards it is frozen.

Randomness comes from numpy's counter-based Philox generator keyed by
``(seed, stream)``, so chains with different stream indices never overlap.
Each move consumes exactly two uniforms, which is why the compiled and the
pure-Python kernels produce the same chain.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np

from . import _backend
from .core import Configuration, FiniteParams, log_unnormalized_density
from .equilibrium import GridMeasure

__all__ = [
    "ChainSettings",
    "ChainDiagnostics",
    "MetropolisChain",
    "make_rng",
    "sample_chain",
    "sample_reduced_chain",
    "empirical_measure",
    "integrated_autocorrelation",
]

log = logging.getLogger(__name__)

ADAPT_WINDOW = 100
ADAPT_FACTOR = 1.1
DRIFT_CHECK_SWEEPS = 1000
DRIFT_TOL = 1e-9
MAX_STEP = 1.0


@dataclass(frozen=True)
class ChainSettings:
    """Sweep counts default to ``burn_in = 200 n`` and ``thinning = n`` when left as ``None``."""

    burn_in: int | None = None
    thinning: int | None = None
    initial_step: float = 0.1
    target_acceptance: float = 0.4
    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        if self.burn_in is not None and self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        if self.thinning is not None and self.thinning < 1:
            raise ValueError("thinning must be at least 1")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if not 0 < self.target_acceptance < 1:
            raise ValueError("target_acceptance must lie in (0, 1)")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.stream < 0:
            raise ValueError("stream must be nonnegative")

    def resolved(self, n: int) -> "ChainSettings":
        return replace(
            self,
            burn_in=200 * n if self.burn_in is None else self.burn_in,
            thinning=n if self.thinning is None else self.thinning,
        )


@dataclass(frozen=True)
class ChainDiagnostics:
    acceptance_rate: float
    final_step: float
    sweeps_run: int
    max_logdensity_drift: float
    backend: str


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator for ``(seed, stream)``; distinct streams are disjoint."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def _initial_state(n: int) -> np.ndarray:
    # arcsine quantiles: distinct, interior, already spread like a log-gas
    k = np.arange(n) + 0.5
    return 0.5 * (1.0 - np.cos(np.pi * k / n))


class MetropolisChain:
    """A single chain; call :meth:`burn` once, then draw with :meth:`batches`."""

    def __init__(self, p: FiniteParams, settings: ChainSettings = ChainSettings(), backend: str | None = None):
        self.params = p
        self.settings = settings.resolved(p.n)
        self.backend, self._kernel = _backend.get_kernel(backend)
        self.rng = make_rng(self.settings.seed, self.settings.stream)
        self.x = _initial_state(p.n)
        self.step = float(min(self.settings.initial_step, MAX_STEP))
        self.logp = log_unnormalized_density(self.x, p)
        self.sweeps = 0
        self.accepted = 0
        self.moves = 0
        self.max_drift = 0.0
        self._since_check = 0
        self._burned = False

    def _run(self, sweeps: int, thin: int = 1, keep: int = 0) -> np.ndarray:
        n = self.params.n
        u = self.rng.random((sweeps * n, 2))
        out = np.empty((keep, n))
        acc, delta = self._kernel(self.x, self.params.kappaN, self.params.lambdaN, self.step, u, thin, out)
        self.logp += delta
        self.sweeps += sweeps
        self.moves += sweeps * n
        self.accepted += acc
        self._since_check += sweeps
        if self._since_check >= DRIFT_CHECK_SWEEPS:
            self.check_drift()
        return out

    def check_drift(self) -> float:
        """Compare the running log-density with a full recomputation and resynchronize."""
        exact = log_unnormalized_density(self.x, self.params)
        drift = abs(exact - self.logp)
        self.max_drift = max(self.max_drift, drift)
        if drift > DRIFT_TOL:
            log.warning("incremental log-density drifted by %.3e", drift)
        self.logp = exact
        self._since_check = 0
        return drift

    def burn(self) -> None:
        """Burn-in with step adaptation; afterwards the kernel is fixed."""
        remaining = self.settings.burn_in
        target = self.settings.target_acceptance
        while remaining > 0:
            w = min(ADAPT_WINDOW, remaining)
            acc0, mv0 = self.accepted, self.moves
            self._run(w)
            remaining -= w
            if w == ADAPT_WINDOW:
                rate = (self.accepted - acc0) / (self.moves - mv0)
                if rate > target:
                    self.step = min(self.step * ADAPT_FACTOR, MAX_STEP)
                else:
                    self.step /= ADAPT_FACTOR
        # acceptance statistics report the frozen kernel only
        self.accepted = 0
        self.moves = 0
        self._burned = True

    def batches(self, count: int, max_sweeps: int = DRIFT_CHECK_SWEEPS) -> Iterator[np.ndarray]:
        """Yield retained states (rows sorted ascending) in blocks, ``count`` rows in total."""
        if not self._burned:
            self.burn()
        thin = self.settings.thinning
        per_block = max(1, max_sweeps // thin)
        left = count
        while left > 0:
            k = min(per_block, left)
            out = self._run(k * thin, thin, k)
            out.sort(axis=1)
            left -= k
            yield out

    def diagnostics(self) -> ChainDiagnostics:
        rate = self.accepted / self.moves if self.moves else 0.0
        return ChainDiagnostics(rate, self.step, self.sweeps, self.max_drift, self.backend)


def sample_chain(
    p: FiniteParams, s: ChainSettings = ChainSettings(), count: int = 1, backend: str | None = None
) -> tuple[np.ndarray, ChainDiagnostics]:
    """Draw ``count`` thinned configurations from the Jacobi law with parameters ``p``.

    Returns a ``(count, n)`` array whose rows are sorted configurations,
    together with the chain diagnostics.  Identical inputs give identical
    output streams.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    chain = MetropolisChain(p, s, backend)
    chain.burn()
    rows = list(chain.batches(count)) if count else []
    samples = np.concatenate(rows) if rows else np.empty((0, p.n))
    if count:
        chain.check_drift()
    return samples, chain.diagnostics()


def sample_reduced_chain(
    p: FiniteParams, s: ChainSettings = ChainSettings(), count: int = 1, backend: str | None = None
) -> tuple[np.ndarray, ChainDiagnostics]:
    """Draw ``n - 1`` particle configurations from the reduced law ``Q_N``.

    ``Q_N`` keeps the ``n``-particle confinement ``-2 n V_N^{(n)}``, which equals
    ``kappaN log x + lambdaN log(1 - x)``.  That is the field of the ``n - 1``
    particle law with the same ``kappaN, lambdaN``, so the chain simply runs
    with ``p.reduced()``.
    """
    if p.n < 2:
        raise ValueError("the reduced law needs n >= 2")
    return sample_chain(p.reduced(), s, count, backend)


def empirical_measure(c, grid) -> GridMeasure:
    """Bin ``1/n`` per particle into the cells of a uniform grid of ``[0, 1]``.

    ``grid`` is a cell count or an array of the grid's nodes (cell midpoints).
    Cells are half open, ``[a, b)``, except the last one which includes 1.
    """
    x = c.as_array() if isinstance(c, Configuration) else np.asarray(c, dtype=float)
    if x.size == 0:
        raise ValueError("empirical measure of an empty configuration")
    cells = int(grid) if np.ndim(grid) == 0 else len(grid)
    idx = np.minimum((x * cells).astype(int), cells - 1)
    w = np.bincount(idx, minlength=cells) / x.size
    return GridMeasure(w)


def integrated_autocorrelation(series: np.ndarray, batches: int = 32) -> float:
    """Batch-means estimate of the integrated autocorrelation time, floored at 1."""
    y = np.asarray(series, dtype=float)
    m = y.size // batches
    if m < 2:
        return 1.0
    var = y[: m * batches].var()
    if var == 0.0:
        return 1.0
    means = y[: m * batches].reshape(batches, m).mean(axis=1)
    tau = m * means.var(ddof=1) / var
    return float(max(1.0, tau)) if math.isfinite(tau) else 1.0
