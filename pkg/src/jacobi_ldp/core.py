"""Parameter model, confining potentials and the Jacobi Gibbs log-density.

The finite-N law on ``[0, 1]^n`` has unnormalized log-density

    -2 n sum_i V_N(x_i) + 2 sum_{i<j} log|x_i - x_j|,

with ``V_N(x) = -(kappaN / 2n) log x - (lambdaN / 2n) log(1 - x)``.  Because
``-2 n V_N(x) = kappaN log x + lambdaN log(1 - x)``, the field part never
depends on ``n``; this is what makes the ``n - 1`` particle reduction used
by the sampler exact.

Extended reals are plain floats: ``math.inf`` / ``-math.inf`` mark the log
singularities, and no NaN is ever produced for inputs inside ``[0, 1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "FiniteParams",
    "LimitParams",
    "ScalingFamily",
    "Configuration",
    "beta_jacobi_to_params",
    "field_log_weight",
    "potential_VN",
    "potential_V",
    "log_unnormalized_density",
]


@dataclass(frozen=True)
class FiniteParams:
    """Finite-N parameters ``(n(N), kappa(N), lambda(N))``."""

    n: int
    kappaN: float
    lambdaN: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not (self.kappaN >= 0 and self.lambdaN >= 0):
            raise ValueError("kappaN and lambdaN must be nonnegative")
        if not (math.isfinite(self.kappaN) and math.isfinite(self.lambdaN)):
            raise ValueError("kappaN and lambdaN must be finite")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "kappaN", float(self.kappaN))
        object.__setattr__(self, "lambdaN", float(self.lambdaN))

    def reduced(self) -> "FiniteParams":
        """Parameters of the ``n - 1`` particle law with the same field strengths."""
        if self.n < 2:
            raise ValueError("reduction needs n >= 2")
        return FiniteParams(self.n - 1, self.kappaN, self.lambdaN)


@dataclass(frozen=True)
class LimitParams:
    """Limits ``rho = lim n/N``, ``kappa = lim kappa(N)/N``, ``lambda = lim lambda(N)/N``."""

    rho: float
    kappa: float
    lam: float

    def __post_init__(self):
        if not (self.rho > 0 and math.isfinite(self.rho)):
            raise ValueError(f"rho must be positive and finite, got {self.rho!r}")
        if not (self.kappa >= 0 and self.lam >= 0):
            raise ValueError("kappa and lambda must be nonnegative")
        if not (math.isfinite(self.kappa) and math.isfinite(self.lam)):
            raise ValueError("kappa and lambda must be finite")
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "lam", float(self.lam))


@dataclass(frozen=True)
class ScalingFamily:
    """A table of ``(N, n, kappaN, lambdaN)`` rows together with their declared limits.

    The consistency check only looks at the largest stored ``N``: the ratios
    there must sit within ``tolerance`` of ``(rho, kappa, lambda)``.
    """

    entries: tuple[tuple[int, int, float, float], ...]
    limits: LimitParams
    tolerance: float = 0.1
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rows = []
        for N, n, kN, lN in self.entries:
            if int(N) != N or N < 1:
                raise ValueError(f"N must be a positive integer, got {N!r}")
            FiniteParams(n, kN, lN)
            rows.append((int(N), int(n), float(kN), float(lN)))
        if not rows:
            raise ValueError("a scaling family needs at least one entry")
        rows.sort()
        if len({r[0] for r in rows}) != len(rows):
            raise ValueError("duplicate N in scaling family")
        N, n, kN, lN = rows[-1]
        lp = self.limits
        for name, got, want in (("n", n, lp.rho), ("kappaN", kN, lp.kappa), ("lambdaN", lN, lp.lam)):
            if abs(got / N - want) > self.tolerance:
                raise ValueError(
                    f"{name}/N = {got / N:.6g} at N={N} is inconsistent with the declared limit {want:.6g}"
                )
        object.__setattr__(self, "entries", tuple(rows))
        object.__setattr__(self, "_index", {r[0]: r for r in rows})

    @classmethod
    def exact(cls, limits: LimitParams, Ns: Iterable[int], tolerance: float = 0.1) -> "ScalingFamily":
        """Exact-ratio family ``n = ceil(rho N)``, ``kappa(N) = kappa N``, ``lambda(N) = lambda N``."""
        rows = []
        for N in Ns:
            # guard ceil against representation noise such as 0.3 * 10 = 3.0000000000000004
            n = max(1, math.ceil(limits.rho * N - 1e-9))
            rows.append((int(N), n, limits.kappa * N, limits.lam * N))
        return cls(tuple(rows), limits, tolerance)

    @property
    def Ns(self) -> list[int]:
        return [r[0] for r in self.entries]

    def params(self, N: int) -> FiniteParams:
        try:
            _, n, kN, lN = self._index[N]
        except KeyError:
            raise KeyError(f"N={N} is not part of this scaling family") from None
        return FiniteParams(n, kN, lN)


@dataclass(frozen=True)
class Configuration:
    """Particle positions in ``[0, 1]``, stored sorted ascending."""

    positions: tuple[float, ...]

    def __post_init__(self):
        xs = sorted(float(v) for v in self.positions)
        if xs and (xs[0] < 0.0 or xs[-1] > 1.0 or any(math.isnan(v) for v in xs)):
            raise ValueError("configuration coordinates must lie in [0, 1]")
        object.__setattr__(self, "positions", tuple(xs))

    def __len__(self):
        return len(self.positions)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.positions, dtype=float)


def beta_jacobi_to_params(N: int, a: float, b: float, beta: float) -> FiniteParams:
    """Map beta-Jacobi exponents ``x^a (1-x)^b |dx|^beta`` to ``(n, kappaN, lambdaN)``."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    if a < 0 or b < 0:
        raise ValueError("a and b must be nonnegative")
    return FiniteParams(N, 2.0 * a / beta, 2.0 * b / beta)


def _check_unit(x: float) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x!r}")
    return x


def _xlog(c: float, t: float) -> float:
    # c * log(t) with the 0 * log 0 = 0 convention
    if c == 0.0:
        return 0.0
    if t == 0.0:
        return -math.inf
    return c * math.log(t)


def field_log_weight(x, kappa, lam):
    """``kappa log x + lam log(1 - x)`` with ``0 log 0 = 0``; works on scalars and arrays."""
    if np.ndim(x) == 0:
        x = _check_unit(x)
        return _xlog(kappa, x) + _xlog(lam, 1.0 - x)
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("x must lie in [0, 1]")
    out = np.zeros_like(x)
    with np.errstate(divide="ignore"):
        if kappa:
            out += kappa * np.log(x)
        if lam:
            out += lam * np.log1p(-x)
    return out


def potential_VN(x: float, p: FiniteParams) -> float:
    """Finite-N potential ``V_N(x)``; ``+inf`` at a singular endpoint, 0 at a free one."""
    return -field_log_weight(x, p.kappaN, p.lambdaN) / (2.0 * p.n)


def potential_V(x: float, lp: LimitParams) -> float:
    """Limit potential ``V(x) = -(kappa/2rho) log x - (lambda/2rho) log(1 - x)``."""
    return -field_log_weight(x, lp.kappa, lp.lam) / (2.0 * lp.rho)


def log_unnormalized_density(c: Configuration | Sequence[float], p: FiniteParams) -> float:
    """Log of the Gibbs weight without ``Z(N)``; ``-inf`` on collisions and singular endpoints."""
    x = c.as_array() if isinstance(c, Configuration) else np.sort(np.asarray(c, dtype=float))
    if x.shape != (p.n,):
        raise ValueError(f"configuration has {x.size} coordinates, parameters expect n={p.n}")
    field_part = float(np.sum(field_log_weight(x, p.kappaN, p.lambdaN)))
    if field_part == -math.inf:
        return -math.inf
    gaps = np.abs(x[:, None] - x[None, :])[np.triu_indices(p.n, 1)]
    if np.any(gaps == 0.0):
        return -math.inf
    return field_part + 2.0 * float(np.sum(np.log(gaps)))
