"""Command-line entry point: ``jacobi-ldp {equilibrium,sample,ldp,sandwich} --config FILE``.

Tables are comma-separated with a header row and reals written with 17
significant digits; each run also writes ``summary.json`` and a
``manifest.json`` listing every file with its SHA-256.  Data files and the
summary depend only on the config and seed; timings live in the manifest.

Exit codes: 0 success, 2 config error, 3 numeric non-convergence,
4 insufficient statistics.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import replace
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .config import ConfigError, ExperimentConfig, config_hash, dump_config, load_config
from .equilibrium import EquilibriumSolution, solve_equilibrium
from .ldp import (
    InsufficientStatistics,
    estimate_gamma,
    estimate_outlier_probability,
    fit_rate,
    kolmogorov_distance,
    region_inf_veff,
    sandwich_check,
)
from .sampler import sample_chain

log = logging.getLogger("jacobi_ldp")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_STATS = 0, 2, 3, 4
THREADS_ENV = "JACOBI_LDP_THREADS"

# stream index layout: (repetition, N index, purpose)
PURPOSE_OUTLIER, PURPOSE_GAMMA, PURPOSE_SAMPLE = 0, 1, 2


def stream_index(rep: int, n_index: int, purpose: int) -> int:
    return (rep * 4096 + n_index) * 4 + purpose


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


class RunWriter:
    """Writes the output files of one command and records them for the manifest."""

    def __init__(self, out_dir: Path, cfg: ExperimentConfig, command: str):
        self.dir = out_dir
        self.cfg = cfg
        self.command = command
        self.files: list[str] = []
        self.timings: dict[str, float] = {}
        self.streams: dict[str, int] = {}
        self.dir.mkdir(parents=True, exist_ok=True)

    def table(self, name: str, header: list[str], rows) -> None:
        lines = [",".join(header)]
        lines.extend(",".join(_cell(v) for v in row) for row in rows)
        self._write(name, "\n".join(lines) + "\n")

    def json(self, name: str, obj) -> None:
        self._write(name, json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")

    def _write(self, name: str, text: str) -> None:
        (self.dir / name).write_text(text)
        if name not in self.files:
            self.files.append(name)

    def timed(self, stage: str):
        writer = self

        class _T:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                writer.timings[stage] = writer.timings.get(stage, 0.0) + time.perf_counter() - self.t0

        return _T()

    def manifest(self) -> None:
        self._write("config.canonical", dump_config(self.cfg))
        entries = []
        for name in sorted(self.files):
            data = (self.dir / name).read_bytes()
            entries.append({"path": name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})
        manifest = {
            "command": self.command,
            "config_hash": config_hash(self.cfg),
            "toolkit_version": __version__,
            "backend": _backend.BACKEND,
            "seed": self.cfg.seed,
            "streams": self.streams,
            "timings_seconds": self.timings,
            "files": entries,
        }
        (self.dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _map(fn, jobs, threads: int):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


def _solve(cfg: ExperimentConfig) -> EquilibriumSolution:
    return solve_equilibrium(cfg.limits, cfg.eq_cells, cfg.eq_tol, cfg.eq_max_iters, strict=False)


def _eq_summary(sol: EquilibriumSolution) -> dict:
    a, b = sol.support_interval()
    return {
        "B": sol.B,
        "D": sol.D,
        "kkt_residual": sol.kkt_residual,
        "converged": sol.converged,
        "iterations": sol.iterations,
        "cells": sol.mu0.cells,
        "support": [a, b],
        "limits": {"rho": sol.limits.rho, "kappa": sol.limits.kappa, "lambda": sol.limits.lam},
    }


def cmd_equilibrium(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    w = RunWriter(out, cfg, "equilibrium")
    with w.timed("solve"):
        sol = _solve(cfg)
    mu = sol.mu0
    e = mu.edges
    cdf = np.cumsum(mu.weights)
    rows = zip(mu.nodes, e[:-1], e[1:], mu.weights, mu.weights / mu.cell_width, cdf, sol.veff, sol.support_mask)
    w.table("equilibrium.csv", ["node", "left", "right", "weight", "density", "cdf_right", "veff", "support"], rows)
    w.json("constants.json", _eq_summary(sol))
    w.manifest()
    if not sol.converged:
        log.error("equilibrium solver did not converge: KKT residual %.3e > %.1e", sol.kkt_residual, cfg.eq_tol)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_sample(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    w = RunWriter(out, cfg, "sample")
    fam = cfg.family()
    with w.timed("equilibrium"):
        sol = _solve(cfg)

    def job(item):
        i, N = item
        s = cfg.chain_settings(stream_index(0, i, PURPOSE_SAMPLE))
        return N, s.stream, sample_chain(fam.params(N), s, cfg.trials_for(N))

    with w.timed("sampling"):
        results = _map(job, list(enumerate(cfg.Ns)), threads)

    bins = np.linspace(0.0, 1.0, cfg.histogram_bins + 1)
    mu0_density = np.diff(sol.mu0.cdf(bins)) / np.diff(bins)
    per_N = {}
    for N, stream, (samples, diag) in results:
        w.streams[f"sample.N{N}"] = stream
        n = samples.shape[1]
        w.table(f"samples_N{N}.csv", [f"x{i + 1}" for i in range(n)], samples.tolist())
        counts = np.histogram(samples.ravel(), bins)[0] if samples.size else np.zeros(cfg.histogram_bins)
        emp = counts / max(samples.size, 1) / np.diff(bins)
        w.table(
            f"histogram_N{N}.csv",
            ["bin_left", "bin_right", "empirical_density", "mu0_density"],
            zip(bins[:-1], bins[1:], emp, mu0_density),
        )
        ks = [kolmogorov_distance(row, sol.mu0) for row in samples]
        per_N[str(N)] = {
            "n": n,
            "count": int(samples.shape[0]),
            "acceptance_rate": diag.acceptance_rate,
            "final_step": diag.final_step,
            "sweeps_run": diag.sweeps_run,
            "max_logdensity_drift": diag.max_logdensity_drift,
            "kolmogorov_mean": float(np.mean(ks)) if ks else None,
            "kolmogorov_max": float(np.max(ks)) if ks else None,
        }
    w.json("summary.json", {"equilibrium": _eq_summary(sol), "per_N": per_N})
    w.manifest()
    return EXIT_OK if sol.converged else EXIT_NONCONVERGED


def _outlier_and_gamma(cfg: ExperimentConfig, fam, N: int, i: int, rep: int):
    s_out = cfg.chain_settings(stream_index(rep, i, PURPOSE_OUTLIER))
    est = estimate_outlier_probability(fam, N, cfg.region, max(cfg.trials_for(N), 1), s_out)
    gam = None
    if fam.params(N).n >= 2 and cfg.gamma_trials > 0:
        s_gam = cfg.chain_settings(stream_index(rep, i, PURPOSE_GAMMA))
        gam = estimate_gamma(fam, N, cfg.region, cfg.gamma_trials, cfg.gamma_quad_cells, s_gam)
    return est, gam, s_out.stream


def _gamma_row(gam, check):
    return [
        gam.samples, gam.log_gamma_X, gam.log_gamma_full, gam.log_gamma_full_std_err,
        gam.ratio, gam.ratio_std_err, check.lower_ok, check.upper_ok,
    ]


_GAMMA_HEADER = [
    "N", "n", "samples", "log_gamma_X", "log_gamma_full", "log_gamma_full_std_err",
    "ratio", "ratio_std_err", "lower_ok", "upper_ok",
]


def cmd_ldp(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    if cfg.region.is_empty:
        raise ConfigError("the ldp command needs region.intervals")
    w = RunWriter(out, cfg, "ldp")
    fam = cfg.family()
    with w.timed("equilibrium"):
        sol = _solve(cfg)
    with w.timed("monte_carlo"):
        results = _map(lambda it: _outlier_and_gamma(cfg, fam, it[1], it[0], 0), list(enumerate(cfg.Ns)), threads)

    est_rows, gam_rows, estimates, checks = [], [], [], {}
    for N, (est, gam, stream) in zip(cfg.Ns, results):
        w.streams[f"outlier.N{N}"] = stream
        n = fam.params(N).n
        estimates.append(est)
        est_rows.append([N, n, est.trials, est.hits, est.p_hat, est.std_err, est.tau])
        if gam is not None:
            chk = sandwich_check(est, gam)
            checks[str(N)] = chk.passed
            gam_rows.append([N, n] + _gamma_row(gam, chk))
    w.table("ldp_estimates.csv", ["N", "n", "trials", "hits", "p_hat", "std_err", "tau"], est_rows)
    w.table("gamma.csv", _GAMMA_HEADER, gam_rows)

    inf_v = region_inf_veff(cfg.region, sol)
    summary = {
        "equilibrium": _eq_summary(sol),
        "region": [list(iv) for iv in cfg.region.intervals],
        "inf_veff": inf_v,
        "theoretical_rate": -2.0 * cfg.limits.rho * inf_v + 0.0,
        "sandwich": checks,
        "sandwich_all_pass": all(checks.values()) if checks else None,
    }
    code = EXIT_OK
    if all(e.p_hat == 1.0 for e in estimates):
        summary.update(fit_status="refused", fit_reason="every p_hat is 1: the region cannot exhibit decay")
        code = EXIT_STATS
    else:
        try:
            fit = fit_rate(estimates, cfg.region, sol)
        except InsufficientStatistics as exc:
            summary.update(fit_status="refused", fit_reason=str(exc), needs_more_trials=exc.needs_trials)
            code = EXIT_STATS
        else:
            summary.update(
                fit_status="fit",
                fitted_slope=fit.fitted_slope,
                slope_std_err=fit.slope_std_err,
                intercept=fit.intercept,
                used_N=list(fit.used_N),
                relative_error=fit.relative_error if fit.theoretical_rate else None,
            )
    summary["verdict"] = "no-decay" if inf_v == 0.0 else "decay"
    w.json("summary.json", summary)
    w.manifest()
    if code == EXIT_OK and not sol.converged:
        code = EXIT_NONCONVERGED
    return code


def cmd_sandwich(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    if cfg.region.is_empty:
        raise ConfigError("the sandwich command needs region.intervals")
    fam = cfg.family()
    if any(fam.params(N).n < 2 for N in cfg.Ns):
        raise ConfigError("the sandwich check needs n(N) >= 2 for every N")
    if cfg.gamma_trials < 1:
        raise ConfigError("the sandwich check needs gamma.trials >= 1")
    w = RunWriter(out, cfg, "sandwich")
    jobs = [(rep, i, N) for i, N in enumerate(cfg.Ns) for rep in range(cfg.repetitions)]
    with w.timed("monte_carlo"):
        results = _map(lambda j: _outlier_and_gamma(cfg, fam, j[2], j[1], j[0]), jobs, threads)
    rows = []
    passes: dict[str, list[bool]] = {str(N): [] for N in cfg.Ns}
    for (rep, i, N), (est, gam, _) in zip(jobs, results):
        chk = sandwich_check(est, gam)
        passes[str(N)].append(chk.passed)
        rows.append([
            N, rep, chk.n, est.trials, est.hits, est.p_hat, est.std_err, gam.ratio, gam.ratio_std_err,
            chk.lower_ok, chk.upper_ok, chk.passed,
        ])
    w.table(
        "sandwich.csv",
        ["N", "repetition", "n", "trials", "hits", "p_hat", "std_err", "ratio", "ratio_std_err",
         "lower_ok", "upper_ok", "passed"],
        rows,
    )
    frac = {N: sum(v) / len(v) for N, v in passes.items()}
    w.json("summary.json", {
        "region": [list(iv) for iv in cfg.region.intervals],
        "pass_fraction": frac,
        "all_at_least_95_percent": all(f >= 0.95 for f in frac.values()),
    })
    w.manifest()
    return EXIT_OK


COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "sample": cmd_sample,
    "ldp": cmd_ldp,
    "sandwich": cmd_sandwich,
}


def _threads(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, env)
    return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jacobi-ldp", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="flat key = value experiment file")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides seed)")
    ap.add_argument("--threads", type=int, help=f"worker threads for per-N jobs (else ${THREADS_ENV}, else 1)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg = replace(cfg, seed=args.seed)
        out = Path(args.out or cfg.output_dir)
        return COMMANDS[args.command](cfg, out, _threads(args.threads))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
