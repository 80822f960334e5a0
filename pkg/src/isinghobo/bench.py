"""Experiment harness for the RIS-SWIPT case study.

Sweeps over the RIS size or the EH requirement, screens channels to those an
exhaustive search can serve, runs each scheme and writes deterministic CSV
records plus a JSON summary that can be recomputed from the CSVs alone.

Output files of :func:`run_sweep` (all RFC 4180 CSV):

* ``screening.csv``: one row per scanned channel with the exhaustive verdict.
* ``records.csv``: one row per (scheme, screened channel), header
  :data:`RECORD_FIELDS`.
* ``timings.csv``: wall-clock per record, kept apart so ``records.csv`` is
  byte-identical across runs.
* ``summary.json``: per sweep point and scheme aggregates.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constrained import AlmConfig, PenaltyConfig, solve_alm, solve_penalty
from .hobo import derive_seed
from .solvers import EXHAUSTIVE_CAP, random_search, solve_exhaustive
from .swipt import (
    ScenarioConfig,
    SwiptInstance,
    ThresholdMode,
    eh_threshold,
    eh_upper_root,
    generate_instance,
    to_constrained_problem,
)

__all__ = [
    "SCHEMES",
    "RECORD_FIELDS",
    "ExperimentConfig",
    "ExperimentRecord",
    "run_sweep",
    "screen_channels",
    "run_scheme",
    "summarize",
    "read_records",
    "run_convergence",
    "run_timing",
    "SENTINEL",
]

SCHEMES = ("alm_dsb", "alm_quadratize_sa", "penalty_sa", "exhaustive", "random")
SENTINEL = -100.0

RECORD_FIELDS = [
    "scheme", "N", "delta_uW", "channel_id", "seed", "feasible", "snr_linear",
    "relative_snr", "objective", "outer_iters", "eh_input_uW", "harvested_uW",
]
SCREEN_FIELDS = ["N", "delta_uW", "channel_id", "exhaustive_feasible", "max_snr_linear"]
TIMING_FIELDS = ["scheme", "N", "delta_uW", "channel_id", "wall_ms"]


@dataclass
class ExperimentConfig:
    n_values: list[int] = field(default_factory=lambda: [14])
    delta_values: list[float] = field(default_factory=lambda: [500.0])
    schemes: tuple[str, ...] = ("alm_dsb", "exhaustive")
    channels_per_point: int = 50
    screen: bool = True
    scan_channels: int = 0
    max_scan: int = 20000
    reference: str = "exhaustive"
    seed: int = 0
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    alm: AlmConfig = field(default_factory=lambda: AlmConfig(min_iters=20))
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    random_samples: int = 5000
    workers: int = 1
    out_dir: str | None = None

    def __post_init__(self):
        self.n_values = [int(n) for n in self.n_values]
        self.delta_values = [float(d) for d in self.delta_values]
        self.schemes = tuple(self.schemes)
        if not self.n_values or not self.delta_values:
            raise ValueError("sweep must be nonempty")
        if self.channels_per_point < 1:
            raise ValueError("channels_per_point must be >= 1")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown:
            raise ValueError(f"unknown schemes: {sorted(unknown)}")
        if self.reference not in SCHEMES:
            raise ValueError(f"unknown reference scheme {self.reference!r}")

    def points(self) -> list[tuple[int, float]]:
        return [(n, d) for n in self.n_values for d in self.delta_values]

    def scenario_for(self, n: int, delta: float) -> ScenarioConfig:
        return dataclasses.replace(self.scenario, n_elements=n, delta=delta, seed=self.seed)


@dataclass
class ExperimentRecord:
    scheme: str
    N: int
    delta_uW: float
    channel_id: int
    seed: int
    feasible: bool
    snr_linear: float
    relative_snr: float | None
    objective: float
    outer_iters: int
    eh_input_uW: float
    harvested_uW: float
    wall_ms: float = 0.0

    def row(self) -> list[str]:
        fmt = lambda v: "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))
        return [
            self.scheme, str(self.N), repr(float(self.delta_uW)), str(self.channel_id), str(self.seed),
            str(int(self.feasible)), fmt(self.snr_linear), fmt(self.relative_snr), fmt(self.objective),
            str(self.outer_iters), fmt(self.eh_input_uW), fmt(self.harvested_uW),
        ]


def _record_seed(base_seed: int, scheme: str, n: int, delta: float, channel_id: int) -> int:
    return derive_seed(base_seed, scheme, n, repr(float(delta)), channel_id)


def _exhaustive(inst: SwiptInstance):
    return solve_exhaustive(-inst.r_matrix, (inst.j_matrix, inst.c), tol=inst.feasibility_tol())


def run_scheme(scheme: str, inst: SwiptInstance, seed: int, cfg: ExperimentConfig):
    """Run one scheme; returns ``(x or None, feasible, outer_iters, wall_ms)``.

    Timing covers the solver call only.
    """
    t0 = time.perf_counter()
    if scheme == "exhaustive":
        res = _exhaustive(inst)
        x, feasible, iters = res.assignment.values, res.feasible, 0
    elif scheme == "random":
        res = random_search(lambda X: -inst.info_powers(X), inst.feasible_rows, inst.n, cfg.random_samples, seed)
        x, feasible, iters = res.assignment.values, res.feasible, 0
    elif scheme in ("alm_dsb", "alm_quadratize_sa"):
        alm = dataclasses.replace(cfg.alm, seed=seed)
        if scheme == "alm_quadratize_sa":
            alm = dataclasses.replace(alm, inner_method="quadratize", quad_solver="sa")
        res = solve_alm(to_constrained_problem(inst), alm)
        x = None if res.assignment is None else res.assignment.values
        feasible, iters = res.feasible, res.outer_iters
    elif scheme == "penalty_sa":
        res = solve_penalty(to_constrained_problem(inst), dataclasses.replace(cfg.penalty, seed=seed))
        x = None if res.assignment is None else res.assignment.values
        feasible, iters = res.feasible, res.outer_iters
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    wall_ms = (time.perf_counter() - t0) * 1e3
    if x is not None:
        feasible = bool(feasible and inst.is_feasible(x))
    return x, feasible, iters, wall_ms


def screen_channels(cfg: ExperimentConfig, n: int, delta: float) -> tuple[list[int], list[list[str]]]:
    """Scan channel ids from 0 and keep the first ``channels_per_point`` the
    exhaustive search can serve.

    At least ``scan_channels`` ids are scanned so the raw feasibility rate is
    measured on a fixed set. Without screening (or when N exceeds the
    exhaustive cap) the first ids are taken as they are.
    """
    want = cfg.channels_per_point
    scenario = cfg.scenario_for(n, delta)
    if not cfg.screen or n > EXHAUSTIVE_CAP:
        return list(range(want)), []
    kept, rows = [], []
    cid = 0
    while (len(kept) < want or cid < cfg.scan_channels) and cid < cfg.max_scan:
        inst = generate_instance(scenario, cid)
        res = _exhaustive(inst)
        snr = inst.snr(res.assignment.values) if res.feasible else float("nan")
        rows.append([str(n), repr(float(delta)), str(cid), str(int(res.feasible)), "" if math.isnan(snr) else repr(snr)])
        if res.feasible and len(kept) < want:
            kept.append(cid)
        cid += 1
    return kept, rows


def _task(args):
    scheme, inst, seed, cfg = args
    x, feasible, iters, wall_ms = run_scheme(scheme, inst, seed, cfg)
    return scheme, inst.channel_id, seed, x, feasible, iters, wall_ms


def _scheme_order(scheme: str) -> int:
    return SCHEMES.index(scheme)


def run_sweep(cfg: ExperimentConfig) -> tuple[list[ExperimentRecord], dict]:
    """Run every scheme on every screened channel of every sweep point.

    Returns the records (sorted by N, delta, scheme, channel) and the summary
    dictionary; both are written to ``cfg.out_dir`` when it is set.
    """
    schemes = list(cfg.schemes)
    needs_ref = cfg.reference not in schemes
    if needs_ref:
        schemes.append(cfg.reference)
    if "exhaustive" in schemes and max(cfg.n_values) > EXHAUSTIVE_CAP:
        raise ValueError(f"exhaustive search is limited to N <= {EXHAUSTIVE_CAP}")
    records: list[ExperimentRecord] = []
    screening: list[list[str]] = []
    for n, delta in cfg.points():
        kept, rows = screen_channels(cfg, n, delta)
        screening.extend(rows)
        scenario = cfg.scenario_for(n, delta)
        tasks = []
        for cid in kept:
            inst = generate_instance(scenario, cid)
            for scheme in schemes:
                tasks.append((scheme, inst, _record_seed(cfg.seed, scheme, n, delta, cid), cfg))
        if cfg.workers > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                results = list(pool.map(_task, tasks))
        else:
            results = [_task(t) for t in tasks]
        insts = {t[1].channel_id: t[1] for t in tasks}
        by_key = {(r[0], r[1]): r for r in results}
        for scheme, cid, seed, x, feasible, iters, wall_ms in sorted(results, key=lambda r: (_scheme_order(r[0]), r[1])):
            inst = insts[cid]
            ref = by_key[(cfg.reference, cid)]
            rel = None
            snr = inst.snr(x) if x is not None else float("nan")
            if feasible and ref[4]:
                rel = snr / inst.snr(ref[3])
            records.append(ExperimentRecord(
                scheme, n, delta, cid, seed, bool(feasible), snr, rel,
                -inst.info_power(x) if x is not None else float("nan"), iters,
                inst.eh_input_power(x) if x is not None else float("nan"),
                inst.harvested(x) if x is not None else float("nan"), wall_ms,
            ))
    if needs_ref:
        records = [r for r in records if r.scheme != cfg.reference or r.scheme in cfg.schemes]
    summary = summarize([r.row() for r in records], screening, cfg)
    if cfg.out_dir is not None:
        write_outputs(cfg.out_dir, records, screening, summary)
    return records, summary


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        w.writerows(rows)


def write_outputs(out_dir, records: list[ExperimentRecord], screening: list[list[str]], summary: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "records.csv", RECORD_FIELDS, [r.row() for r in records])
    _write_csv(out / "screening.csv", SCREEN_FIELDS, screening)
    _write_csv(out / "timings.csv", TIMING_FIELDS,
               [[r.scheme, str(r.N), repr(float(r.delta_uW)), str(r.channel_id), repr(r.wall_ms)] for r in records])
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_records(path) -> list[list[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != RECORD_FIELDS:
        raise ValueError("unexpected records header")
    return rows[1:]


def _mean(xs):
    return float(np.mean(xs)) if xs else None


def summarize(record_rows: list[list[str]], screening_rows: list[list[str]], cfg: ExperimentConfig | None = None) -> dict:
    """Aggregate CSV rows (as strings) per sweep point and scheme.

    Relative SNR statistics use only channels feasible for both the scheme
    and the reference, as recorded in ``relative_snr``.
    """
    idx = {k: i for i, k in enumerate(RECORD_FIELDS)}
    points: dict[tuple, dict] = {}
    for row in record_rows:
        key = (int(row[idx["N"]]), float(row[idx["delta_uW"]]))
        per_scheme = points.setdefault(key, {}).setdefault(row[idx["scheme"]], [])
        per_scheme.append(row)
    scans: dict[tuple, list[int]] = {}
    for row in screening_rows:
        scans.setdefault((int(row[0]), float(row[1])), []).append(int(row[3]))

    out = []
    for key in sorted(set(points) | set(scans)):
        n, delta = key
        entry = {"N": n, "delta_uW": delta}
        scanned = scans.get(key, [])
        entry["scanned_channels"] = len(scanned)
        entry["exhaustive_scan_feasibility"] = (sum(scanned) / len(scanned)) if scanned else None
        params = (cfg.scenario.eh_params if cfg is not None else ScenarioConfig().eh_params)
        entry["threshold_uW"] = {m.value: _safe_threshold(params, delta, m) for m in ThresholdMode}
        upper = eh_upper_root(params, delta)
        schemes = {}
        for scheme, rows in sorted(points.get(key, {}).items(), key=lambda kv: _scheme_order(kv[0])):
            feas = [int(r[idx["feasible"]]) for r in rows]
            rel = [float(r[idx["relative_snr"]]) for r in rows if r[idx["relative_snr"]]]
            snr = [float(r[idx["snr_linear"]]) for r in rows if int(r[idx["feasible"]])]
            schemes[scheme] = {
                "channels": len(rows),
                "feasible": sum(feas),
                "feasibility_rate": sum(feas) / len(rows),
                "relative_count": len(rel),
                "mean_relative_snr": _mean(rel),
                "prob_relative_ge_0.95": (sum(r >= 0.95 for r in rel) / len(rel)) if rel else None,
                "mean_snr_linear": _mean(snr),
                # feasible points past the upper EH root would harvest less than delta
                "concavity_violations": sum(
                    1 for r in rows if int(r[idx["feasible"]]) and float(r[idx["eh_input_uW"]]) >= upper
                ),
            }
        entry["schemes"] = schemes
        out.append(entry)
    return {
        "reference": cfg.reference if cfg is not None else "exhaustive",
        "seed": cfg.seed if cfg is not None else None,
        "points": out,
    }


def _safe_threshold(params, delta, mode):
    try:
        return eh_threshold(params, delta, mode)
    except ValueError:
        return None


# ---------------------------------------------------------------------------
# convergence and timing


CONVERGENCE_FIELDS = ["outer_iter", "snr_plot", "snr_linear", "feasible", "best_feasible_snr", "objective"]


def run_convergence(inst: SwiptInstance, scheme: str = "alm_dsb", cfg: ExperimentConfig | None = None,
                    seed: int = 0) -> list[list]:
    """Per outer iteration: SNR of the iterate (``SENTINEL`` in the plot column
    when infeasible), raw SNR, feasibility flag and best feasible SNR so far."""
    cfg = cfg or ExperimentConfig()
    problem = to_constrained_problem(inst)
    if scheme in ("alm_dsb", "alm_quadratize_sa"):
        alm = dataclasses.replace(cfg.alm, seed=seed)
        if scheme == "alm_quadratize_sa":
            alm = dataclasses.replace(alm, inner_method="quadratize", quad_solver="sa")
        res = solve_alm(problem, alm)
        points = res.iterates
    elif scheme == "penalty_sa":
        res = solve_penalty(problem, dataclasses.replace(cfg.penalty, seed=seed))
        points = [None] * len(res.trace)
    else:
        raise ValueError("convergence traces exist for the iterative schemes only")
    rows = []
    best = None
    for t, x in zip(res.trace, points):
        feasible = inst.is_feasible(x) if x is not None else t.feasible
        snr = inst.snr(x) if x is not None else -t.objective * 1e-6 / inst.noise_power
        if feasible:
            best = snr if best is None else max(best, snr)
        rows.append([t.iteration, snr if feasible else SENTINEL, snr, int(feasible),
                     SENTINEL if best is None else best, t.objective])
    return rows


TIMING_SUMMARY_FIELDS = ["scheme", "N", "median_wall_ms", "channels"]


def run_timing(n_values, schemes, channels: int = 10, cfg: ExperimentConfig | None = None) -> list[list]:
    """Median solver wall-clock (ms) per scheme and N over the first ``channels`` ids."""
    cfg = cfg or ExperimentConfig()
    delta = cfg.delta_values[0]
    rows = []
    for scheme in schemes:
        # untimed call so JIT compilation is not charged to the first N
        warm = generate_instance(cfg.scenario_for(int(n_values[0]), delta), 0)
        run_scheme(scheme, warm, 0, cfg)
        for n in n_values:
            scenario = cfg.scenario_for(int(n), delta)
            walls = []
            for cid in range(channels):
                inst = generate_instance(scenario, cid)
                seed = _record_seed(cfg.seed, scheme, n, delta, cid)
                walls.append(run_scheme(scheme, inst, seed, cfg)[3])
            rows.append([scheme, int(n), float(np.median(walls)), channels])
    return rows
