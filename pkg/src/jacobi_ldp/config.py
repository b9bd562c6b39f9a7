"""Experiment configuration: flat ``key = value`` text with dotted section keys.

Example::

    # Jacobi outlier experiment
    limits.rho = 1
    limits.kappa = 1
    limits.lambda = 1
    scaling.rule = exact
    run.N = 16, 24, 32
    run.trials = 100000
    region.intervals = 0.958:1
    seed = 7

Lists are comma separated; an interval or table row is colon separated.
Blank lines and ``#`` comments are ignored.  :func:`dump_config` writes the
canonical form (every key, sorted, normalized values), and
``parse_config(dump_config(c)) == c``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

from .core import LimitParams, ScalingFamily
from .ldp import Region
from .sampler import ChainSettings

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_config", "dump_config", "config_hash"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    limits: LimitParams
    Ns: tuple[int, ...]
    region: Region = Region()
    scaling_rule: str = "exact"
    scaling_table: tuple[tuple[int, int, float, float], ...] = ()
    trials: int = 10000
    trials_per_N: tuple[tuple[int, int], ...] = ()
    chain: ChainSettings = ChainSettings()
    eq_cells: int = 1024
    eq_tol: float = 1e-3
    eq_max_iters: int = 2000
    gamma_trials: int = 2000
    gamma_quad_cells: int = 128
    repetitions: int = 20
    histogram_bins: int = 50
    output_dir: str = "out"
    seed: int = 0

    def family(self) -> ScalingFamily:
        if self.scaling_rule == "exact":
            return ScalingFamily.exact(self.limits, self.Ns)
        return ScalingFamily(self.scaling_table, self.limits)

    def trials_for(self, N: int) -> int:
        return dict(self.trials_per_N).get(N, self.trials)

    def chain_settings(self, stream: int) -> ChainSettings:
        c = self.chain
        return ChainSettings(c.burn_in, c.thinning, c.initial_step, c.target_acceptance, self.seed, stream)


def _num(text: str, key: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{key}: value must be finite")
    return v


def _int(text: str, key: str) -> int:
    try:
        return int(text)  # exact, even beyond 2**53
    except ValueError:
        pass
    v = _num(text, key)
    if v != int(v):
        raise ConfigError(f"{key}: expected an integer, got {text!r}")
    return int(v)


def _opt_int(text: str, key: str):
    return None if text.lower() in ("", "auto", "none") else _int(text, key)


def _items(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _ints(text: str, key: str) -> tuple[int, ...]:
    return tuple(_int(t, key) for t in _items(text))


def _intervals(text: str, key: str) -> tuple[tuple[float, float], ...]:
    if text.lower() in ("", "empty", "none"):
        return ()
    out = []
    for item in _items(text):
        parts = item.split(":")
        if len(parts) != 2:
            raise ConfigError(f"{key}: interval {item!r} must look like a:b")
        out.append((_num(parts[0], key), _num(parts[1], key)))
    return tuple(out)


def _table(text: str, key: str):
    rows = []
    for item in _items(text):
        parts = item.split(":")
        if len(parts) != 4:
            raise ConfigError(f"{key}: row {item!r} must look like N:n:kappaN:lambdaN")
        rows.append((_int(parts[0], key), _int(parts[1], key), _num(parts[2], key), _num(parts[3], key)))
    return tuple(rows)


def _pairs(text: str, key: str):
    rows = []
    for item in _items(text):
        parts = item.split(":")
        if len(parts) != 2:
            raise ConfigError(f"{key}: entry {item!r} must look like N:trials")
        rows.append((_int(parts[0], key), _int(parts[1], key)))
    return tuple(sorted(rows))


# key -> parser; every key is optional except the limits and run.N
_SCHEMA = {
    "limits.rho": _num,
    "limits.kappa": _num,
    "limits.lambda": _num,
    "scaling.rule": lambda t, k: t,
    "scaling.table": _table,
    "run.N": _ints,
    "run.trials": _int,
    "run.trials_per_N": _pairs,
    "run.repetitions": _int,
    "region.intervals": _intervals,
    "chain.burn_in": _opt_int,
    "chain.thinning": _opt_int,
    "chain.initial_step": _num,
    "chain.target_acceptance": _num,
    "equilibrium.cells": _int,
    "equilibrium.tol": _num,
    "equilibrium.max_iters": _int,
    "gamma.trials": _int,
    "gamma.quad_cells": _int,
    "sample.bins": _int,
    "output.dir": lambda t, k: t,
    "seed": _int,
}
_REQUIRED = ("limits.rho", "limits.kappa", "limits.lambda", "run.N")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate; raises :class:`ConfigError` on any problem."""
    raw: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = _SCHEMA[key](value, key)
    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    try:
        limits = LimitParams(raw["limits.rho"], raw["limits.kappa"], raw["limits.lambda"])
        d = ExperimentConfig(limits=limits, Ns=())
        chain = ChainSettings(
            burn_in=raw.get("chain.burn_in", d.chain.burn_in),
            thinning=raw.get("chain.thinning", d.chain.thinning),
            initial_step=raw.get("chain.initial_step", d.chain.initial_step),
            target_acceptance=raw.get("chain.target_acceptance", d.chain.target_acceptance),
            seed=raw.get("seed", d.seed),
        )
        cfg = ExperimentConfig(
            limits=limits,
            Ns=tuple(sorted(set(raw["run.N"]))),
            region=Region(raw.get("region.intervals", ())),
            scaling_rule=raw.get("scaling.rule", d.scaling_rule),
            scaling_table=raw.get("scaling.table", ()),
            trials=raw.get("run.trials", d.trials),
            trials_per_N=raw.get("run.trials_per_N", ()),
            chain=ChainSettings(chain.burn_in, chain.thinning, chain.initial_step, chain.target_acceptance),
            eq_cells=raw.get("equilibrium.cells", d.eq_cells),
            eq_tol=raw.get("equilibrium.tol", d.eq_tol),
            eq_max_iters=raw.get("equilibrium.max_iters", d.eq_max_iters),
            gamma_trials=raw.get("gamma.trials", d.gamma_trials),
            gamma_quad_cells=raw.get("gamma.quad_cells", d.gamma_quad_cells),
            repetitions=raw.get("run.repetitions", d.repetitions),
            histogram_bins=raw.get("sample.bins", d.histogram_bins),
            output_dir=raw.get("output.dir", d.output_dir),
            seed=chain.seed,
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if not cfg.Ns or any(N < 1 for N in cfg.Ns):
        raise ConfigError("run.N must list positive integers")
    if cfg.scaling_rule not in ("exact", "table"):
        raise ConfigError("scaling.rule must be 'exact' or 'table'")
    if cfg.scaling_rule == "table":
        listed = {row[0] for row in cfg.scaling_table}
        if not set(cfg.Ns) <= listed:
            raise ConfigError("scaling.table must have a row for every N in run.N")
    if cfg.trials < 0 or any(t < 0 for _, t in cfg.trials_per_N):
        raise ConfigError("trial counts must be nonnegative")
    if cfg.eq_cells < 64:
        raise ConfigError("equilibrium.cells must be at least 64")
    if not cfg.eq_tol > 0 or cfg.eq_max_iters < 1:
        raise ConfigError("equilibrium.tol must be positive and equilibrium.max_iters at least 1")
    if cfg.gamma_trials < 0 or cfg.gamma_quad_cells < 1:
        raise ConfigError("gamma.trials must be nonnegative and gamma.quad_cells positive")
    if cfg.repetitions < 1 or cfg.histogram_bins < 1:
        raise ConfigError("run.repetitions and sample.bins must be positive")
    if not cfg.output_dir:
        raise ConfigError("output.dir must not be empty")
    try:
        cfg.family()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


def _fmt(v: float) -> str:
    return repr(float(v)) if v != int(v) else str(int(v)) if abs(v) < 1e15 else repr(float(v))


def dump_config(cfg: ExperimentConfig) -> str:
    """Canonical text form: all keys, sorted, one per line."""
    c = cfg.chain
    entries = {
        "limits.rho": _fmt(cfg.limits.rho),
        "limits.kappa": _fmt(cfg.limits.kappa),
        "limits.lambda": _fmt(cfg.limits.lam),
        "scaling.rule": cfg.scaling_rule,
        "scaling.table": ", ".join(f"{N}:{n}:{_fmt(k)}:{_fmt(l)}" for N, n, k, l in cfg.scaling_table),
        "run.N": ", ".join(str(N) for N in cfg.Ns),
        "run.trials": str(cfg.trials),
        "run.trials_per_N": ", ".join(f"{N}:{t}" for N, t in cfg.trials_per_N),
        "run.repetitions": str(cfg.repetitions),
        "region.intervals": ", ".join(f"{_fmt(a)}:{_fmt(b)}" for a, b in cfg.region.intervals),
        "chain.burn_in": "auto" if c.burn_in is None else str(c.burn_in),
        "chain.thinning": "auto" if c.thinning is None else str(c.thinning),
        "chain.initial_step": _fmt(c.initial_step),
        "chain.target_acceptance": _fmt(c.target_acceptance),
        "equilibrium.cells": str(cfg.eq_cells),
        "equilibrium.tol": _fmt(cfg.eq_tol),
        "equilibrium.max_iters": str(cfg.eq_max_iters),
        "gamma.trials": str(cfg.gamma_trials),
        "gamma.quad_cells": str(cfg.gamma_quad_cells),
        "sample.bins": str(cfg.histogram_bins),
        "output.dir": cfg.output_dir,
        "seed": str(cfg.seed),
    }
    return "".join(f"{k} = {entries[k]}\n" for k in sorted(entries))


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()
