"""Experiment runner: reference tables, density sweeps, concentration, gap scans.

Results are flat ResultRecords written as CSV, JSON or SVG box plots. Sweeps
log finished instances to an append-only JSON-lines file so an interrupted
run resumes where it stopped.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .combinatorics import clause_stats
from .hamiltonian import build_HC, build_Hk, normalize_HC
from .instances import generate_Ff, generate_Fs, surviving_assignments
from .search import solve_max_kssat
from .simulator import AdiabaticParams, SearchParams, find_first_local_max, find_min_threshold_steps, run_aqs, run_qs
from .spectral import argmin_gap, gap_scaling_fit, gap_scan

log = logging.getLogger(__name__)

KINDS = ("table1", "table2", "fig_qs_density", "fig_aqs_density", "concentration", "gapscan", "solve")


@dataclass
class ExperimentConfig:
    kind: str
    n_list: tuple[int, ...] = (10,)
    k: int = 3
    #: clause count as an absolute number ("144"), or a base "n" / "n^2"
    #: multiplied by each entry of ``c_list``
    m_spec: str = "n^2"
    c_list: tuple[float, ...] = (1.0,)
    instance_count: int = 100
    seed: int = 0
    theta: float = math.pi
    thresholds: tuple[float, ...] = (0.99,)
    out_dir: str = "results"
    jobs: int = 1
    #: fixed schedule length for sweeps; None derives it per n
    steps: int | None = None
    shots: int = 8
    record_timing: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        self.n_list = tuple(int(n) for n in self.n_list)
        self.c_list = tuple(float(c) for c in self.c_list)
        self.thresholds = tuple(float(t) for t in self.thresholds)
        if not self.n_list or not self.c_list or not self.thresholds:
            raise ValueError("n_list, c_list and thresholds must be nonempty")
        if self.instance_count < 1 or self.jobs < 1:
            raise ValueError("instance_count and jobs must be positive")
        for n in self.n_list:
            for c in self.c_list:
                self.resolve_m(n, c)

    def resolve_m(self, n: int, c: float = 1.0) -> int:
        spec = self.m_spec.replace(" ", "")
        if spec == "n":
            m = round(c * n)
        elif spec in ("n^2", "n**2"):
            m = round(c * n * n)
        else:
            try:
                m = round(c * float(spec))
            except ValueError:
                raise ValueError(f"bad m_spec {self.m_spec!r}") from None
        if m < 1:
            raise ValueError(f"m_spec {self.m_spec!r} with c={c} gives m={m} at n={n}")
        return int(m)

    def fingerprint(self) -> str:
        d = dataclasses.asdict(self)
        for key in ("out_dir", "jobs", "record_timing"):
            d.pop(key)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


_LIST_FIELDS = {"n_list": int, "c_list": float, "thresholds": float}
_SCALAR_FIELDS = {"kind": str, "k": int, "m_spec": str, "instance_count": int, "seed": int,
                  "theta": float, "out_dir": str, "jobs": int, "shots": int}


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; lists are comma separated, ``#`` starts a comment."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in _LIST_FIELDS:
            out[key] = tuple(_LIST_FIELDS[key](v) for v in val.replace(",", " ").split())
        elif key in _SCALAR_FIELDS:
            out[key] = _SCALAR_FIELDS[key](val)
        elif key == "steps":
            out[key] = None if val.lower() in ("", "none") else int(val)
        elif key == "record_timing":
            out[key] = val.lower() in ("1", "true", "yes")
        else:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
    return out


class ResultRecord(NamedTuple):
    kind: str
    n: int
    k: int
    m: int
    seed: int
    instance: int
    metric: str
    value: float
    wall_time: float = 0.0


FIELDS = ResultRecord._fields


def _check_finite(recs: Iterable[ResultRecord]) -> None:
    for r in recs:
        if not math.isfinite(r.value):
            raise ValueError(f"non-finite metric {r.metric} for n={r.n} instance {r.instance}")


# -- reference tables -------------------------------------------------------


@lru_cache(maxsize=1)
def reference_values() -> dict:
    with resources.files("klocal").joinpath("data/reference_values.json").open() as fh:
        return json.load(fh)


class TableRow(NamedTuple):
    k: int
    n: int
    steps: int
    prob: float
    ref_steps: int
    ref_prob: float


def _clock(cfg: ExperimentConfig):
    return time.perf_counter if cfg.record_timing else (lambda: 0.0)


def run_table1(cfg: ExperimentConfig, ks: Sequence[int] = (1, 2, 3)) -> tuple[list[ResultRecord], list[TableRow]]:
    """First local maximum of pure k-local search, target 0, for every (k, n)."""
    ref = reference_values()["table1"]
    clock = _clock(cfg)
    recs, rows = [], []
    for k in ks:
        for n in cfg.n_list:
            if n > 20:
                raise ValueError("table runs are limited to n <= 20")
            t0 = clock()
            lm = find_first_local_max(n, k, build_Hk(n, k, 0), cfg.theta, 0)
            dt = clock() - t0
            r = ref.get(str(k), {}).get(str(n), {"p": -1, "prob": math.nan})
            rows.append(TableRow(k, n, lm.p, lm.prob, r["p"], r["prob"]))
            recs += [ResultRecord("table1", n, k, 0, cfg.seed, -1, "p", float(lm.p), dt),
                     ResultRecord("table1", n, k, 0, cfg.seed, -1, "prob", lm.prob, dt)]
    return recs, rows


def run_table2(cfg: ExperimentConfig) -> tuple[list[ResultRecord], list[TableRow]]:
    """Shortest adiabatic schedule reaching the threshold on pure 3-local search."""
    ref = reference_values()["table2"]
    clock = _clock(cfg)
    threshold = cfg.thresholds[0]
    recs, rows = [], []
    for n in cfg.n_list:
        if n > 20:
            raise ValueError("table runs are limited to n <= 20")
        t0 = clock()
        lm = find_min_threshold_steps(n, cfg.k, build_Hk(n, cfg.k, 0), threshold, 0)
        dt = clock() - t0
        r = ref.get(str(n), {"T": -1, "prob": math.nan})
        rows.append(TableRow(cfg.k, n, lm.p, lm.prob, r["T"], r["prob"]))
        recs += [ResultRecord("table2", n, cfg.k, 0, cfg.seed, -1, "T", float(lm.p), dt),
                 ResultRecord("table2", n, cfg.k, 0, cfg.seed, -1, "prob", lm.prob, dt)]
    return recs, rows


class TableCheck(NamedTuple):
    ok: bool
    exact: int
    total: int
    messages: list[str]


def check_table1(rows: Sequence[TableRow], min_exact: int = 30, prob_tol: float = 0.02) -> TableCheck:
    """Iteration counts exact in at least ``min_exact`` cells and within 1 everywhere."""
    msgs = []
    exact = sum(r.steps == r.ref_steps for r in rows)
    for r in rows:
        if abs(r.steps - r.ref_steps) > 1:
            msgs.append(f"k={r.k} n={r.n}: p={r.steps}, reference {r.ref_steps}")
        if not abs(r.prob - r.ref_prob) <= prob_tol:
            msgs.append(f"k={r.k} n={r.n}: prob={r.prob:.4f}, reference {r.ref_prob}")
    if exact < min(min_exact, len(rows)):
        msgs.append(f"only {exact}/{len(rows)} cells exact")
    return TableCheck(not msgs, exact, len(rows), msgs)


def check_table2(rows: Sequence[TableRow], rel: float = 0.02, slack: int = 3, threshold: float = 0.99) -> TableCheck:
    msgs = []
    for r in rows:
        tol = max(rel * r.ref_steps, slack)
        if not abs(r.steps - r.ref_steps) <= tol:
            msgs.append(f"n={r.n}: T={r.steps}, reference {r.ref_steps}")
        if r.prob < threshold:
            msgs.append(f"n={r.n}: prob {r.prob:.4f} below {threshold}")
    return TableCheck(not msgs, sum(r.steps == r.ref_steps for r in rows), len(rows), msgs)


def render_table(rows: Sequence[TableRow], label: str = "p") -> str:
    out = [f"{'k':>2} {'n':>3} {label:>5} {'prob':>8} {'ref ' + label:>6} {'ref prob':>8} {'diff':>5}"]
    for r in rows:
        out.append(f"{r.k:>2} {r.n:>3} {r.steps:>5} {r.prob:>8.4f} {r.ref_steps:>6} {r.ref_prob:>8.4f} "
                   f"{r.steps - r.ref_steps:>+5d}")
    return "\n".join(out)


# -- per-instance sweeps ----------------------------------------------------


def cell_rng(seed: int, n: int, m: int, instance: int) -> np.random.Generator:
    """Stream for one (n, m, instance) cell; independent of run order."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(n, m, instance)))


@lru_cache(maxsize=None)
def qs_steps(n: int, k: int, theta: float) -> int:
    return find_first_local_max(n, k, build_Hk(n, k, 0), theta, 0).p


@lru_cache(maxsize=None)
def aqs_steps(n: int, k: int, threshold: float) -> int:
    return find_min_threshold_steps(n, k, build_Hk(n, k, 0), threshold, 0).p


class Task(NamedTuple):
    n: int
    m: int
    instance: int


def _tasks(cfg: ExperimentConfig) -> list[Task]:
    cells = sorted({(n, cfg.resolve_m(n, c)) for n in cfg.n_list for c in cfg.c_list})
    return [Task(n, m, i) for n, m in cells for i in range(cfg.instance_count)]


def schedule_length(cfg: ExperimentConfig, n: int) -> int:
    """Iterations per run: ``cfg.steps`` or the pure 3-local optimum at this n."""
    if cfg.steps is not None:
        return cfg.steps
    if cfg.kind == "fig_qs_density":
        return qs_steps(n, cfg.k, cfg.theta)
    return aqs_steps(n, cfg.k, cfg.thresholds[0])


def _run_task(cfg: ExperimentConfig, task: Task, p: int | None = None) -> list[ResultRecord]:
    clock = _clock(cfg)
    t0 = clock()
    n, m, i = task
    k = cfg.k
    rng = cell_rng(cfg.seed, n, m, i)

    def rec(metric, value):
        return ResultRecord(cfg.kind, n, k, m, cfg.seed, i, metric, float(value), clock() - t0)

    if cfg.kind in ("fig_qs_density", "fig_aqs_density"):
        inst = generate_Fs(n, m, k, rng)
        H = normalize_HC(build_HC(inst), m, k)
        alive = surviving_assignments(inst)
        if cfg.kind == "fig_qs_density":
            pt = run_qs(n, k, H, SearchParams(cfg.theta, p), alive)[-1]
        else:
            pt = run_aqs(n, k, H, AdiabaticParams(p), alive)
        return [rec("p_t", pt), rec("interpretations", alive.sum())]
    if cfg.kind == "solve":
        inst = generate_Fs(n, m, k, rng)
        out = solve_max_kssat(inst, rng, shots=cfg.shots)
        return [rec("satisfied", out.satisfied), rec("aqs_success", out.method == "aqs"),
                rec("steps_used", out.steps_used), rec("aqs_rounds", out.aqs_rounds)]
    if cfg.kind == "concentration":
        inst = generate_Ff(n, m, k, rng)
        cov = concentration_coverage(inst)
        return [rec(name, v) for name, v in cov.items()]
    raise ValueError(f"kind {cfg.kind!r} is not a per-instance sweep")


def _run_chunk(args) -> list[ResultRecord]:
    cfg, steps, tasks = args
    out = []
    for t in tasks:
        try:
            out += _run_task(cfg, t, steps.get(t.n))
        except Exception as exc:  # recorded, sweep continues
            log.warning("n=%d m=%d instance %d failed: %s", t.n, t.m, t.instance, exc)
            out.append(ResultRecord(cfg.kind, t.n, cfg.k, t.m, cfg.seed, t.instance, "failed", 1.0, 0.0))
    return out


def _log_path(cfg: ExperimentConfig) -> Path:
    return Path(cfg.out_dir) / f"{cfg.kind}.log.jsonl"


def _read_log(path: Path, fingerprint: str) -> list[ResultRecord]:
    if not path.exists():
        return []
    recs = []
    with open(path, encoding="utf-8") as fh:
        head = fh.readline()
        if head and json.loads(head).get("config") != fingerprint:
            raise ValueError(f"{path} was written by a different configuration")
        for line in fh:
            line = line.strip()
            if line:
                recs.append(ResultRecord(*json.loads(line)))
    return recs


def run_sweep(cfg: ExperimentConfig, resume: bool = True) -> list[ResultRecord]:
    """Run every (n, m, instance) task, skipping those already in the record log."""
    fp = cfg.fingerprint()
    path = _log_path(cfg)
    done = _read_log(path, fp) if resume else []
    finished = {(r.n, r.m, r.instance) for r in done}
    todo = [t for t in _tasks(cfg) if (t.n, t.m, t.instance) not in finished]
    # schedule lengths are shared by every task of an n; resolve them once here
    steps = {}
    if cfg.kind in ("fig_qs_density", "fig_aqs_density"):
        steps = {n: schedule_length(cfg, n) for n in sorted({t.n for t in todo})}
    path.parent.mkdir(parents=True, exist_ok=True)
    append_mode = resume and path.exists() and path.stat().st_size > 0
    with open(path, "a" if append_mode else "w", encoding="utf-8") as fh:
        if not append_mode:
            fh.write(json.dumps({"config": fp}) + "\n")

        def append(recs):
            # single writer: only this process touches the log
            for r in recs:
                fh.write(json.dumps(list(r)) + "\n")
            fh.flush()
            done.extend(recs)

        if cfg.jobs == 1:
            for t in todo:
                append(_run_chunk((cfg, steps, [t])))
        else:
            with ProcessPoolExecutor(cfg.jobs) as pool:
                for recs in pool.map(_run_chunk, [(cfg, steps, [t]) for t in todo]):
                    append(recs)
    return sort_records(done)


def sort_records(recs: Iterable[ResultRecord]) -> list[ResultRecord]:
    return sorted(recs, key=lambda r: (r.kind, r.n, r.k, r.m, r.instance, r.metric))


def run_density_sweep(cfg: ExperimentConfig, resume: bool = True) -> list[ResultRecord]:
    if cfg.kind not in ("fig_qs_density", "fig_aqs_density"):
        raise ValueError("density sweep needs kind fig_qs_density or fig_aqs_density")
    return run_sweep(cfg, resume)


class FiveNumber(NamedTuple):
    low: float
    q1: float
    median: float
    q3: float
    high: float
    count: int


def five_number(values: Sequence[float]) -> FiveNumber:
    v = np.asarray(values, float)
    if v.size == 0:
        raise ValueError("no values to summarize")
    q = np.percentile(v, [0, 25, 50, 75, 100])
    return FiveNumber(*map(float, q), int(v.size))


def summarize(recs: Iterable[ResultRecord], metric: str = "p_t") -> dict[tuple[int, int], FiveNumber]:
    """Five-number summary of ``metric`` per (n, m) cell."""
    cells: dict[tuple[int, int], list[float]] = {}
    for r in recs:
        if r.metric == metric:
            cells.setdefault((r.n, r.m), []).append(r.value)
    return {key: five_number(v) for key, v in sorted(cells.items())}


# -- concentration ------------------------------------------------------------


def concentration_coverage(inst, cs: Sequence[float] = (1, 2, 3)) -> dict[str, float]:
    """Fraction of assignments whose normalized eigenvalue lies within c standard errors of f_k.

    ``coverage_c*`` scales each deviation by its own standard error
    (2^k - 1) sigma_{k,x} / sqrt(m); the planted target has zero spread and is
    left out. ``bound_c*`` uses the uniform width c sqrt((2^k - 1) / m).
    """
    n, k, m, t = inst.n, inst.k, inst.m, inst.planted
    if t is None:
        raise ValueError("concentration needs a planted instance")
    q = 2**k - 1
    dev = normalize_HC(build_HC(inst), m, k).values - build_Hk(n, k, t).values
    d = n - np.bitwise_count(np.arange(2**n, dtype=np.uint64) ^ np.uint64(t)).astype(np.int64)
    sig = np.array([math.sqrt(clause_stats(n, k, dd).sigma2) for dd in range(n + 1)])[d]
    keep = sig > 0
    z = np.abs(dev[keep]) / (q * sig[keep] / math.sqrt(m))
    out = {}
    for c in cs:
        out[f"coverage_c{c:g}"] = float(np.mean(z <= c))
        out[f"bound_c{c:g}"] = float(np.mean(np.abs(dev[keep]) <= c * math.sqrt(q / m)))
    return out


def run_concentration(cfg: ExperimentConfig, resume: bool = True) -> list[ResultRecord]:
    if cfg.kind != "concentration":
        raise ValueError("needs kind concentration")
    return run_sweep(cfg, resume)


def pooled_coverage(recs: Iterable[ResultRecord]) -> dict[str, float]:
    """Mean of each coverage metric over instances (all instances weigh the same)."""
    acc: dict[str, list[float]] = {}
    for r in recs:
        if r.metric.startswith(("coverage_", "bound_")):
            acc.setdefault(r.metric, []).append(r.value)
    return {key: float(np.mean(v)) for key, v in sorted(acc.items())}


def erf_target(c: float) -> float:
    return math.erf(c / math.sqrt(2))


# -- gap scans ----------------------------------------------------------------


def run_gapscan(cfg: ExperimentConfig, s_points: int = 21) -> list[ResultRecord]:
    """Gap of the sum operator per n plus its log-log slope, and the interpolation
    scan at the largest n."""
    fit = gap_scaling_fit(cfg.k, cfg.n_list, "sum")
    recs = [ResultRecord("gapscan", n, cfg.k, 0, cfg.seed, -1, "gap_sum", g) for n, g in zip(fit.ns, fit.gaps)]
    recs.append(ResultRecord("gapscan", 0, cfg.k, 0, cfg.seed, -1, "slope", fit.slope))
    n = max(cfg.n_list)
    scan = gap_scan(n, cfg.k, build_Hk(n, cfg.k, 0), np.linspace(0, 1, s_points))
    for i, r in enumerate(scan):
        recs.append(ResultRecord("gapscan", n, cfg.k, 0, cfg.seed, i, "s", float(r.s)))
        recs.append(ResultRecord("gapscan", n, cfg.k, 0, cfg.seed, i, "gap", r.gap))
    recs.append(ResultRecord("gapscan", n, cfg.k, 0, cfg.seed, -1, "argmin_s", float(argmin_gap(scan).s)))
    return recs


def gapscan_csv_rows(n: int, k: int, results) -> list[dict]:
    return [{"n": n, "k": k, "s": r.s, "lambda1": r.lambda1, "lambda2": r.lambda2, "gap": r.gap,
             "iterations": r.iterations} for r in results]


# -- output -------------------------------------------------------------------


def records_to_csv(recs: Sequence[ResultRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIELDS)
    for r in recs:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def read_csv(path: str | os.PathLike) -> list[ResultRecord]:
    types = [str, int, int, int, int, int, str, float, float]
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != FIELDS:
        raise ValueError(f"{path}: unexpected header")
    return [ResultRecord(*(t(v) for t, v in zip(types, row))) for row in rows[1:]]


def _svg_boxplots(recs: Sequence[ResultRecord], path: Path, metric: str = "p_t") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    summary = summarize(recs, metric)
    if not summary:
        raise ValueError(f"no {metric} records to plot")
    ns = sorted({n for n, _ in summary})
    plt.rcParams["svg.hashsalt"] = "klocal"
    fig, axes = plt.subplots(1, len(ns), figsize=(3.2 * len(ns), 3.2), squeeze=False, sharey=True)
    for ax, n in zip(axes[0], ns):
        cells = [(m, s) for (nn, m), s in summary.items() if nn == n]
        stats = [dict(med=s.median, q1=s.q1, q3=s.q3, whislo=s.low, whishi=s.high, label=str(m)) for m, s in cells]
        ax.bxp(stats, showfliers=False)
        ax.set_title(f"n = {n}")
        ax.set_xlabel("m")
    axes[0][0].set_ylabel(metric)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_outputs(recs: Sequence[ResultRecord], fmt: str, out_dir: str | os.PathLike, name: str) -> Path:
    """Write ``recs`` as csv, json or svg under ``out_dir``; returns the file path."""
    recs = list(recs)
    if not recs:
        raise ValueError("no records to write")
    _check_finite(recs)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}.{fmt}"
    if fmt == "csv":
        path.write_text(records_to_csv(recs), encoding="utf-8")
    elif fmt == "json":
        path.write_text(json.dumps([r._asdict() for r in recs], indent=1) + "\n", encoding="utf-8")
    elif fmt == "svg":
        _svg_boxplots(recs, path)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path
