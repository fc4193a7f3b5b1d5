"""Experiment orchestration: configs, sweeps, trial parallelism, CSV output.

A sweep runs the full pipeline per grid cell (n, k, d): draw class-conditional
hypercube data at the cell's true parameter, encode every sample with the
group-partition scheme, assemble the distributed estimate, and score both the
squared l2 error and the exact excess logistic risk.  Every random draw comes
from a stream derived from (master seed, purpose, cell, trial), so the output
is a pure function of the config no matter how trials are scheduled.

Timing is opt-in (``record_timing``): with it off, the wall-clock column is
zero and rerunning a sweep reproduces the CSV byte for byte.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import toml

from .bounds import van_trees_bound, theorem_scalings
from .estimator import (
    SGDConfig,
    class_conditional_x_marginal,
    distributed_estimate,
    sample_class_conditional,
)
from .fisher import (
    estimate_subgaussian_param,
    second_moment_bound,
    trace_fisher_message,
)
from .model import ENUMERATION_CAP, excess_logistic_risk
from .quantize import encode_group, group_encoder_quantizer, make_group_partition
from .rng import derive_rng, derive_seed_sequence

__all__ = [
    "ConfigError",
    "ThetaSource",
    "ExperimentConfig",
    "RunRecord",
    "CellSummary",
    "SweepResult",
    "load_config",
    "run_sweep",
    "simulate_once",
    "write_results",
    "read_results",
    "WORKERS_ENV_VAR",
]

WORKERS_ENV_VAR = "BITLOGIT_WORKERS"

CSV_COLUMNS = [
    "kind", "n", "k", "d", "trial", "seed", "l2_error", "excess_risk",
    "trace_msg", "wall_ms", "l2_error_stderr", "excess_risk_stderr",
]

# beyond this many (support point, message) pairs the per-cell message trace
# is skipped rather than computed
_TRACE_CELL_CAP = 1 << 24


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ThetaSource:
    """True-parameter source: an explicit vector or a seeded random ball draw."""

    kind: str
    vector: tuple[float, ...] | None = None
    radius: float | None = None

    def __post_init__(self):
        if self.kind == "explicit":
            if not self.vector:
                raise ConfigError("explicit theta source needs a vector")
        elif self.kind == "random-ball":
            if self.radius is None or self.radius <= 0:
                raise ConfigError("random-ball theta source needs a positive radius")
        else:
            raise ConfigError(f"unknown theta source {self.kind!r}")

    def draw(self, d: int, master_seed: int) -> np.ndarray:
        if self.kind == "explicit":
            theta = np.asarray(self.vector, dtype=float)
            if theta.size != d:
                raise ConfigError(
                    f"explicit theta has dimension {theta.size}, cell needs {d}"
                )
            return theta
        rng = derive_rng(master_seed, "theta", d)
        g = rng.standard_normal(d)
        g /= np.linalg.norm(g)
        return g * self.radius * rng.random() ** (1.0 / d)


@dataclass(frozen=True)
class ExperimentConfig:
    n_grid: tuple[int, ...]
    k_grid: tuple[int, ...]
    d_grid: tuple[int, ...]
    trials: int
    seed: int
    theta: ThetaSource
    sgd: SGDConfig = SGDConfig()
    dist_kind: str = "uniform-hypercube"
    record_trace: bool = False
    record_timing: bool = False
    workers: int = 1
    out_path: str | None = None

    def __post_init__(self):
        if not self.n_grid or not self.k_grid or not self.d_grid:
            raise ConfigError("n, k and d grids must be nonempty")
        if any(k < 2 for k in self.k_grid):
            raise ConfigError("every k must be >= 2 for the group scheme")
        if any(n < 1 for n in self.n_grid) or any(d < 1 for d in self.d_grid):
            raise ConfigError("n and d values must be positive")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.dist_kind != "uniform-hypercube":
            raise ConfigError(
                "sweeps support the uniform-hypercube model only; the group "
                f"scheme is not defined for {self.dist_kind!r}"
            )
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def cells(self) -> list[tuple[int, int, int]]:
        return [(n, k, d) for d in self.d_grid for k in self.k_grid
                for n in self.n_grid]


@dataclass(frozen=True)
class RunRecord:
    n: int
    k: int
    d: int
    trial: int
    seed: int
    l2_error: float
    excess_risk: float
    trace_msg: float | None
    wall_ms: float

    def __post_init__(self):
        if not (math.isfinite(self.l2_error) and math.isfinite(self.excess_risk)):
            raise ValueError("recorded errors must be finite")
        if self.l2_error < 0 or self.excess_risk < -1e-12:
            raise ValueError("recorded errors must be nonnegative")


@dataclass(frozen=True)
class CellSummary:
    n: int
    k: int
    d: int
    trials: int
    l2_mean: float
    l2_stderr: float
    excess_mean: float
    excess_stderr: float
    trace_msg: float | None
    sigma2: float
    i0: float
    thm1: float
    thm2: float
    thm3: float
    van_trees: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "n", "k", "d", "trials", "l2_mean", "l2_stderr", "excess_mean",
            "excess_stderr", "trace_msg", "sigma2", "i0", "thm1", "thm2",
            "thm3", "van_trees")}


@dataclass(frozen=True)
class SweepResult:
    records: list[RunRecord]
    summaries: list[CellSummary]
    skipped: list[tuple[tuple[int, int, int], str]]


# ---------------------------------------------------------------------------
# Config files: TOML, with a JSON mirror keyed by file extension.
# ---------------------------------------------------------------------------


def _config_from_dict(data: dict) -> ExperimentConfig:
    try:
        grid = data["grid"]
        theta_raw = data["theta"]
        run = data.get("run", {})
        sgd_raw = data.get("sgd", {})
        dist_raw = data.get("distribution", {"kind": "uniform-hypercube"})

        source = str(theta_raw.get("source", "random-ball")).replace("_", "-")
        theta = ThetaSource(
            kind=source,
            vector=tuple(theta_raw["vector"]) if "vector" in theta_raw else None,
            radius=float(theta_raw["radius"]) if "radius" in theta_raw else None,
        )
        sgd = SGDConfig(
            step_scale=float(sgd_raw.get("step_scale", 1.0)),
            projection_radius=(float(sgd_raw["projection_radius"])
                               if "projection_radius" in sgd_raw else None),
            epochs=int(sgd_raw.get("epochs", 1)),
            averaging_start=(int(sgd_raw["averaging_start"])
                             if "averaging_start" in sgd_raw else None),
        )
        return ExperimentConfig(
            n_grid=tuple(int(v) for v in grid["n"]),
            k_grid=tuple(int(v) for v in grid["k"]),
            d_grid=tuple(int(v) for v in grid["d"]),
            trials=int(grid.get("trials", 1)),
            seed=int(run.get("seed", 0)),
            theta=theta,
            sgd=sgd,
            dist_kind=str(dist_raw.get("kind", "uniform-hypercube")).replace("_", "-"),
            record_trace=bool(run.get("record_trace", False)),
            record_timing=bool(run.get("record_timing", False)),
            workers=int(run.get("workers", 1)),
            out_path=run.get("out"),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad experiment config: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    """Load a sweep config from a .toml file or its .json mirror."""
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            if path.endswith(".json"):
                data = json.load(fh)
            else:
                data = toml.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except (json.JSONDecodeError, toml.TomlDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must contain a table at top level")
    return _config_from_dict(data)


# ---------------------------------------------------------------------------
# One trial.
# ---------------------------------------------------------------------------


def _trial_payload(config: ExperimentConfig, cell: tuple[int, int, int],
                   theta: np.ndarray, trial: int) -> tuple:
    n, k, d = cell
    return (config.seed, n, k, d, tuple(float(v) for v in theta), trial,
            config.sgd, config.record_timing)


def _run_trial(payload: tuple) -> RunRecord:
    seed, n, k, d, theta_t, trial, sgd, record_timing = payload
    theta = np.asarray(theta_t)
    t0 = time.perf_counter()
    assignment = make_group_partition(d=d, k=k, n=n)
    x, y = sample_class_conditional(theta, n,
                                    derive_rng(seed, "data", n, k, d, trial))
    messages = [encode_group((x[i], int(y[i])), assignment, i) for i in range(n)]
    theta_hat = distributed_estimate(messages, assignment, sgd,
                                     derive_rng(seed, "sgd", n, k, d, trial))
    dist = class_conditional_x_marginal(theta)
    l2 = float(np.sum((theta_hat - theta) ** 2))
    excess = float(excess_logistic_risk(theta, theta_hat, dist))
    wall_ms = (time.perf_counter() - t0) * 1e3 if record_timing else 0.0
    trial_seed = int(derive_seed_sequence(seed, "trial", n, k, d,
                                          trial).generate_state(1)[0])
    return RunRecord(n=n, k=k, d=d, trial=trial, seed=trial_seed, l2_error=l2,
                     excess_risk=excess, trace_msg=None, wall_ms=wall_ms)


def _cell_trace(theta: np.ndarray, n: int, k: int, d: int) -> float | None:
    """Machine-averaged message Fisher trace at the true parameter."""
    if (1 << d) * (1 << k) * 2 > _TRACE_CELL_CAP:
        return None
    assignment = make_group_partition(d=d, k=k, n=n)
    dist = class_conditional_x_marginal(theta)
    total = 0.0
    for gid in range(assignment.n_groups):
        load = assignment.group_load(gid)
        if load == 0:
            continue
        report = trace_fisher_message(theta, dist,
                                      group_encoder_quantizer(assignment, gid),
                                      tail_params=(1.0, 1.0, 1.0))
        total += (load / n) * report.trace_msg
    return total


def _stderr(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / math.sqrt(values.size))


def run_sweep(config: ExperimentConfig) -> SweepResult:
    """Run every (cell, trial) pair; deterministic given the config.

    Trials run serially or on a process pool (``workers`` > 1, overridable
    with the BITLOGIT_WORKERS variable); either way the records come back
    ordered by (cell, trial) and are identical.
    """
    workers = int(os.environ.get(WORKERS_ENV_VAR, config.workers))

    jobs: list[tuple] = []
    job_keys: list[tuple] = []
    skipped: list[tuple[tuple[int, int, int], str]] = []
    cell_theta: dict[tuple[int, int, int], np.ndarray] = {}
    for cell in config.cells():
        n, k, d = cell
        if d > ENUMERATION_CAP:
            skipped.append((cell, f"d={d} exceeds the exact-risk cap {ENUMERATION_CAP}"))
            continue
        try:
            theta = config.theta.draw(d, config.seed)
        except ConfigError as exc:
            skipped.append((cell, str(exc)))
            continue
        cell_theta[cell] = theta
        for trial in range(config.trials):
            jobs.append(_trial_payload(config, cell, theta, trial))
            job_keys.append((cell, trial))

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trial, jobs, chunksize=1))
    else:
        results = [_run_trial(job) for job in jobs]

    by_key = dict(zip(job_keys, results))
    records: list[RunRecord] = []
    summaries: list[CellSummary] = []
    # per-dimension tail parameters, shared across cells
    tails: dict[int, tuple[float, float]] = {}
    for cell in config.cells():
        if cell not in cell_theta:
            continue
        n, k, d = cell
        theta = cell_theta[cell]
        cell_records = [by_key[(cell, t)] for t in range(config.trials)]
        trace = _cell_trace(theta, n, k, d) if config.record_trace else None
        if trace is not None:
            cell_records = [replace(r, trace_msg=trace) for r in cell_records]
        records.extend(cell_records)

        if d not in tails:
            dist = class_conditional_x_marginal(theta)
            sigma2 = estimate_subgaussian_param(dist, n_directions=32,
                                                rng=derive_rng(config.seed, "tails", d))
            tails[d] = (sigma2, second_moment_bound(dist))
        sigma2, i0 = tails[d]
        thm = theorem_scalings(n, k, d, sigma2, math.sqrt(sigma2), i0)
        l2s = np.array([r.l2_error for r in cell_records])
        exs = np.array([r.excess_risk for r in cell_records])
        summaries.append(CellSummary(
            n=n, k=k, d=d, trials=config.trials,
            l2_mean=float(l2s.mean()), l2_stderr=_stderr(l2s),
            excess_mean=float(exs.mean()), excess_stderr=_stderr(exs),
            trace_msg=trace, sigma2=sigma2, i0=i0,
            thm1=thm.thm1, thm2=thm.thm2, thm3=thm.thm3,
            van_trees=van_trees_bound(n, d, math.inf, 4.0 * sigma2 * k),
        ))
    return SweepResult(records=records, summaries=summaries, skipped=skipped)


def simulate_once(d: int, k: int, n: int, theta, seed: int,
                  sgd: SGDConfig = SGDConfig()) -> dict:
    """One cell, one trial, timing included; returns a JSON-ready record.

    Uses the same derived streams as trial 0 of a sweep over the same cell.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.size != d:
        raise ConfigError(f"theta has dimension {theta.size}, expected {d}")
    t0 = time.perf_counter()
    assignment = make_group_partition(d=d, k=k, n=n)
    x, y = sample_class_conditional(theta, n, derive_rng(seed, "data", n, k, d, 0))
    messages = [encode_group((x[i], int(y[i])), assignment, i) for i in range(n)]
    theta_hat = distributed_estimate(messages, assignment, sgd,
                                     derive_rng(seed, "sgd", n, k, d, 0))
    dist = class_conditional_x_marginal(theta)
    l2 = float(np.sum((theta_hat - theta) ** 2))
    excess = float(excess_logistic_risk(theta, theta_hat, dist))
    wall_ms = (time.perf_counter() - t0) * 1e3
    return {
        "n": n, "k": k, "d": d, "seed": seed,
        "theta": [float(v) for v in theta],
        "theta_hat": [float(v) for v in theta_hat],
        "l2_error": l2,
        "excess_risk": excess,
        "wall_ms": wall_ms,
    }


# ---------------------------------------------------------------------------
# CSV persistence.
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_results(records: list[RunRecord], path,
                  summaries: list[CellSummary] | None = None,
                  master_seed: int | None = None) -> None:
    """Write one row per record plus one summary row per cell.

    Floats are written with shortest round-trip precision, so reading the
    file back reproduces every numeric field exactly.  UTF-8, LF endings.
    """
    if not records:
        raise ValueError("refusing to write an empty record list")
    path = os.fspath(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for r in records:
                writer.writerow([
                    "record", r.n, r.k, r.d, r.trial, r.seed,
                    _fmt(r.l2_error), _fmt(r.excess_risk), _fmt(r.trace_msg),
                    _fmt(r.wall_ms), "", "",
                ])
            for s in summaries or []:
                writer.writerow([
                    "summary", s.n, s.k, s.d, -1,
                    "" if master_seed is None else master_seed,
                    _fmt(s.l2_mean), _fmt(s.excess_mean), _fmt(s.trace_msg),
                    "", _fmt(s.l2_stderr), _fmt(s.excess_stderr),
                ])
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_results(path) -> list[dict]:
    """Read a results CSV back into dict rows with parsed numeric fields."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise ValueError(
                f"unexpected CSV header {reader.fieldnames}; expected {CSV_COLUMNS}"
            )
        for raw in reader:
            row: dict = {"kind": raw["kind"]}
            for key in ("n", "k", "d", "trial", "seed"):
                row[key] = int(raw[key]) if raw[key] != "" else None
            for key in ("l2_error", "excess_risk", "trace_msg", "wall_ms",
                        "l2_error_stderr", "excess_risk_stderr"):
                row[key] = float(raw[key]) if raw[key] != "" else None
            rows.append(row)
    return rows
