"""Desk-scale experiment runners behind the command line.

Each runner maps an :class:`ExperimentConfig` to a list of row dicts plus a
status.  Trial ``k`` draws its instance from the stream ``(master_seed, k)``;
trials may run in worker processes but rows always come back in trial order.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .analysis import contraction_ratio, support
from .errors import ConvergenceError, DomainError, InfeasibleSupportError
from .lp_oracle import relative_cost, solve_ot_exact
from .measures import sample_problem
from .objectives import VARIANTS, expected_cost, measured_cost
from .seeds import build_seed
from .solvers import DualConfig, SolveConfig, approximation_gap, tempered_ot
from .tempered_math import Temperature

log = logging.getLogger(__name__)

COMMANDS = ("distance-sweep", "convergence-sweep", "sparsity-map", "contraction-sweep", "quality")
SCHEMA_VERSION = "v1"

MEASURED_T_GRID = [0.0, 0.25, 0.5, 0.75, 1.0]
EXPECTED_T_GRID = [1.0, 1.25, 1.5, 1.75, 1.9]
LAMBDA_GRID = [float(x) for x in np.geomspace(0.1, 50.0, 7)]

COLUMNS = {
    "distance-sweep": ["t", "lambda", "trial", "relative_expected_cost",
                       "relative_measured_cost", "converged"],
    "convergence-sweep": ["t", "lambda", "trial", "iterations", "relative_expected_cost"],
    "contraction-sweep": ["variant", "t", "lambda", "trial", "kappa"],
    "quality": ["variant", "t", "lambda", "trial", "approximation_gap"],
}

EXIT_OK, EXIT_NONCONVERGENCE, EXIT_INFEASIBLE, EXIT_BAD_CONFIG = 0, 1, 2, 3


class ConfigError(DomainError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    command: str
    n: int = 64
    trials: int = 20
    master_seed: int = 0
    t_grid: list = field(default_factory=list)
    lambda_grid: list = field(default_factory=list)
    variant: str = "expected"
    output_path: str | None = None
    tol: float = 1e-10
    max_iter: int = 100_000
    threshold: float = 1e-25

    def validate(self) -> "ExperimentConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not self.t_grid and self.command not in ("contraction-sweep", "quality"):
            raise ConfigError("t grid is empty")
        if not self.lambda_grid and self.command != "sparsity-map":
            raise ConfigError("lambda grid is empty")
        if self.variant not in VARIANTS + ("both",):
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.variant == "both" and self.command in ("distance-sweep", "convergence-sweep"):
            raise ConfigError(f"{self.command} runs one variant at a time")
        if not self.tol > 0 or self.max_iter < 1:
            raise ConfigError("tol must be positive and max_iter at least 1")
        for t in self.t_grid:
            try:
                Temperature(t)
            except DomainError as exc:
                raise ConfigError(str(exc)) from exc
        if any(not lam >= 0 for lam in self.lambda_grid):
            raise ConfigError("lambda values must be non-negative")
        return self

    @property
    def variants(self) -> tuple:
        return VARIANTS if self.variant == "both" else (self.variant,)

    def solve_cfg(self) -> SolveConfig:
        return SolveConfig(tol=self.tol, max_iter=self.max_iter)

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def default_config(command: str) -> ExperimentConfig:
    """Per-command defaults (grid sizes follow the reference experiments)."""
    if command == "distance-sweep":
        return ExperimentConfig(command, n=64, trials=20, t_grid=sorted(set(MEASURED_T_GRID + EXPECTED_T_GRID)),
                                lambda_grid=list(LAMBDA_GRID))
    if command == "convergence-sweep":
        return ExperimentConfig(command, n=64, trials=100, t_grid=list(EXPECTED_T_GRID),
                                lambda_grid=list(LAMBDA_GRID))
    if command == "sparsity-map":
        return ExperimentConfig(command, n=32, trials=1, t_grid=sorted(set(MEASURED_T_GRID + EXPECTED_T_GRID)),
                                lambda_grid=[], variant="both")
    if command == "contraction-sweep":
        return ExperimentConfig(command, n=64, trials=100, t_grid=[], lambda_grid=list(LAMBDA_GRID),
                                variant="both")
    if command == "quality":
        return ExperimentConfig(command, n=64, trials=100, t_grid=[], lambda_grid=list(LAMBDA_GRID),
                                variant="both")
    raise ConfigError(f"unknown command {command!r}")


def config_fields() -> set:
    return {f.name for f in fields(ExperimentConfig)}


# --------------------------------------------------------------------------
# per-command t grids


def contraction_t_grid(cfg: ExperimentConfig, variant: str) -> list:
    """t values with a strictly positive seed: ``t <= 1`` expected, ``t >= 1`` measured."""
    if cfg.t_grid:
        return list(cfg.t_grid)
    return list(MEASURED_T_GRID) if variant == "expected" else list(EXPECTED_T_GRID)


def quality_t_grid(cfg: ExperimentConfig, variant: str) -> list:
    if cfg.t_grid:
        return list(cfg.t_grid)
    return list(EXPECTED_T_GRID) if variant == "expected" else list(MEASURED_T_GRID)


# --------------------------------------------------------------------------
# trial workers (module level so they pickle)


def _trial_distance(cfg: ExperimentConfig, k: int):
    rows, flags = [], set()
    variant = cfg.variants[0]
    for t in cfg.t_grid:
        p = sample_problem(cfg.n, (cfg.master_seed, k), t)
        lp = solve_ot_exact(p.M, p.r, p.c)
        lifted = measured_cost(lp.plan ** Temperature(t).t_star, p.M)
        for lam in cfg.lambda_grid:
            try:
                rep = tempered_ot(p.M, p.r_tilde, p.c_tilde, lam, t, variant, cfg.solve_cfg())
            except InfeasibleSupportError as exc:
                log.warning("trial %d (seed %s) infeasible at t=%r lambda=%r: %s",
                            k, (cfg.master_seed, k), t, lam, exc)
                flags.add("infeasible")
                rows.append([t, lam, k, math.nan, math.nan, False])
                continue
            if not rep.converged:
                flags.add("nonconvergence")
            rel_e = relative_cost(expected_cost(rep.plan, p.M, t), lp)
            rel_m = (measured_cost(rep.plan, p.M) - lifted) / lifted
            rows.append([t, lam, k, rel_e, rel_m, rep.converged])
    return rows, flags


def _trial_convergence(cfg: ExperimentConfig, k: int):
    rows, flags = [], set()
    variant = cfg.variants[0]
    for t in cfg.t_grid:
        p = sample_problem(cfg.n, (cfg.master_seed, k), t)
        lp = solve_ot_exact(p.M, p.r, p.c)
        for lam in cfg.lambda_grid:
            try:
                rep = tempered_ot(p.M, p.r_tilde, p.c_tilde, lam, t, variant, cfg.solve_cfg())
            except InfeasibleSupportError as exc:
                log.warning("trial %d (seed %s) infeasible at t=%r lambda=%r: %s",
                            k, (cfg.master_seed, k), t, lam, exc)
                flags.add("infeasible")
                rows.append([t, lam, k, -1, math.nan])
                continue
            if not rep.converged:
                flags.add("nonconvergence")
            rows.append([t, lam, k, rep.iterations, relative_cost(expected_cost(rep.plan, p.M, t), lp)])
    return rows, flags


def _trial_contraction(cfg: ExperimentConfig, k: int):
    rows = []
    for variant in cfg.variants:
        for t in contraction_t_grid(cfg, variant):
            p = sample_problem(cfg.n, (cfg.master_seed, k), t)
            for lam in cfg.lambda_grid:
                seed = build_seed(variant, p.M, p.r_tilde, p.c_tilde, lam, t)
                K = seed.kernel()
                if np.any(K <= 0):
                    raise ConfigError(f"{variant} seed is not positive at t={t!r}, lambda={lam!r}")
                rows.append([variant, t, lam, k, contraction_ratio(K)])
    return rows, set()


def _trial_quality(cfg: ExperimentConfig, k: int):
    rows, flags = [], set()
    for variant in cfg.variants:
        for t in quality_t_grid(cfg, variant):
            p = sample_problem(cfg.n, (cfg.master_seed, k), t)
            for lam in cfg.lambda_grid:
                try:
                    gap = approximation_gap(p.M, p.r_tilde, p.c_tilde, lam, t, variant,
                                            cfg.solve_cfg(), DualConfig())
                except (ConvergenceError, InfeasibleSupportError) as exc:
                    log.warning("trial %d (seed %s) flagged at %s t=%r lambda=%r: %s",
                                k, (cfg.master_seed, k), variant, t, lam, exc)
                    flags.add("nonconvergence")
                    gap = math.nan
                rows.append([variant, t, lam, k, gap])
    return rows, flags


_WORKERS = {
    "distance-sweep": _trial_distance,
    "convergence-sweep": _trial_convergence,
    "contraction-sweep": _trial_contraction,
    "quality": _trial_quality,
}


def _worker_count(trials: int) -> int:
    env = os.environ.get("TEMPERED_OT_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, trials))


def run_trials(cfg: ExperimentConfig):
    """All rows of a sweep command in trial order, plus the union of status flags."""
    worker = _WORKERS[cfg.command]
    workers = _worker_count(cfg.trials)
    if workers == 1:
        results = [worker(cfg, k) for k in range(cfg.trials)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(worker, [cfg] * cfg.trials, range(cfg.trials)))
    rows, flags = [], set()
    for r, f in results:
        rows.extend(r)
        flags |= f
    return rows, flags


def exit_code(flags: set) -> int:
    if "infeasible" in flags:
        return EXIT_INFEASIBLE
    if "nonconvergence" in flags:
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def rows_to_csv(command: str, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {command}/{SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS[command])
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def read_csv(text: str):
    """Parse a sweep CSV back into (schema, list of dicts)."""
    lines = text.splitlines()
    schema = lines[0].split(":", 1)[1].strip()
    return schema, list(csv.DictReader(lines[1:]))


# --------------------------------------------------------------------------
# sparsity map


def sparsity_lambda(variant: str, t: float, cfg: ExperimentConfig) -> float:
    """Explicit ``--lambda`` if given, else ``6/t*`` (expected) or ``0.25`` (measured)."""
    if cfg.lambda_grid:
        return float(cfg.lambda_grid[0])
    return 6.0 / Temperature(t).t_star if variant == "expected" else 0.25


def run_sparsity_map(cfg: ExperimentConfig):
    """Support of the tempered plan per (variant, t) on the trial-0 instance."""
    p = sample_problem(cfg.n, (cfg.master_seed, 0), 1.0)
    lp = solve_ot_exact(p.M, p.r, p.c)
    maps, flags = [], set()
    for variant in cfg.variants:
        for t in cfg.t_grid:
            q = p.with_t(t)
            lam = sparsity_lambda(variant, t, cfg)
            entry = {"variant": variant, "t": t, "lambda": lam}
            try:
                rep = tempered_ot(q.M, q.r_tilde, q.c_tilde, lam, t, variant, cfg.solve_cfg())
                pat = support(rep.plan, cfg.threshold)
                entry.update(feasible=True, converged=rep.converged)
                if not rep.converged:
                    flags.add("nonconvergence")
            except InfeasibleSupportError as exc:
                log.warning("sparsity map: %s seed infeasible at t=%r (%s)", variant, t, exc)
                seed = build_seed(variant, q.M, q.r_tilde, q.c_tilde, lam, t)
                pat = support(seed.entries, cfg.threshold)
                entry.update(feasible=False, converged=False)
            entry.update(nnz=pat.nnz, rows=pat.to_dict()["rows"])
            maps.append(entry)
    doc = {"schema": f"sparsity-map/{SCHEMA_VERSION}", "n": cfg.n, "seed": cfg.master_seed,
           "threshold": cfg.threshold, "lp_nnz": lp.basis_size,
           "lp_rows": support(lp.plan, 0.0).to_dict()["rows"], "maps": maps}
    return doc, flags


def sparsity_text(doc: dict) -> str:
    """Plain-text grids, ``#`` for a non-zero entry."""
    out = [f"LP baseline: nnz={doc['lp_nnz']}"]
    out += [row.replace("1", "#").replace("0", ".") for row in doc["lp_rows"]]
    for m in doc["maps"]:
        tag = "" if m["feasible"] else " (infeasible seed; seed support shown)"
        out.append("")
        out.append(f"{m['variant']} t={m['t']!r} lambda={m['lambda']!r}: nnz={m['nnz']}{tag}")
        out += [row.replace("1", "#").replace("0", ".") for row in m["rows"]]
    return "\n".join(out) + "\n"
