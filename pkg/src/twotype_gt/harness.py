"""Monte Carlo screening experiments and worst-rank statistics.

A replication plants defectives, simulates noisy pool outcomes, decodes them
with BP and records, per type, the worst (largest) 1-based rank held by a
true defective when items are sorted by posterior defective probability.
Summaries report the ceil(alpha * R)-th order statistic of those ranks.
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
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .bp import BpSettings, EdgeSet, NumericDegeneracyError, run_bp
from .pooling import PoolingDesign, build_design, import_design
from .sim import NoiseModel, Priors, observe, plant_bernoulli, plant_fixed, replication_rng

log = logging.getLogger(__name__)

TYPES = ("A", "B")
LEVELS = (0.95, 0.99)
GRID_KS = (1, 2, 3, 4, 5, 6)
GRID_COUNTS = (2, 4, 6, 8, 10, 12)


def _int_list(value) -> tuple[int, ...]:
    if value is None:
        return None
    if isinstance(value, str):
        value = [v for v in value.replace(" ", "").split(",") if v]
    return tuple(int(v) for v in value)


@dataclass
class ExperimentConfig:
    """One design and one planting scheme, replicated.

    The design comes from ``design_path`` if given, else from the plane sets
    ``ka``/``kb``/``kab`` over AG(3, ``q``).
    """

    q: int = 7
    ka: Optional[tuple[int, ...]] = (0, 1, 2)
    kb: Optional[tuple[int, ...]] = (0, 1, 2)
    kab: Optional[tuple[int, ...]] = (3, 4, 5, 6)
    design_path: Optional[str] = None
    count_a: int = 6
    count_b: int = 6
    bernoulli: bool = False
    sensitivity: float = 0.97
    specificity: float = 0.99
    p_a: float = 0.002
    p_b: float = 0.002
    replications: int = 1000
    seed: int = 0
    epsilon: float = 1e-6
    max_iterations: int = 200
    workers: int = 1
    label: str = ""

    def __post_init__(self):
        for name in ("ka", "kb", "kab"):
            setattr(self, name, _int_list(getattr(self, name)))
        self.validate()

    def validate(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if not self.bernoulli and (self.count_a < 0 or self.count_b < 0):
            raise ValueError("defective counts must be non-negative")
        if self.design_path is None and None in (self.ka, self.kb, self.kab):
            raise ValueError("need either a design file or all of ka, kb, kab")
        self.noise()
        self.priors()
        self.settings()

    def noise(self) -> NoiseModel:
        return NoiseModel(self.sensitivity, self.specificity)

    def priors(self) -> Priors:
        return Priors(self.p_a, self.p_b)

    def settings(self) -> BpSettings:
        return BpSettings(self.epsilon, self.max_iterations)

    def build(self) -> PoolingDesign:
        if self.design_path is not None:
            return import_design(self.design_path)
        return build_design(self.q, self.ka, self.kb, self.kab)

    def describe(self) -> str:
        if self.label:
            return self.label
        if self.design_path is not None:
            return os.path.basename(self.design_path)
        return f"q={self.q} KA={_fmt(self.ka)} KB={_fmt(self.kb)} KAB={_fmt(self.kab)}"


def _fmt(planes) -> str:
    return ",".join(map(str, planes)) if planes else "-"


@dataclass(frozen=True)
class RankRecord:
    rep: int
    worst_rank_A: int
    worst_rank_B: int
    converged: bool
    iterations: int


@dataclass
class RankSummary:
    label: str
    replications: int
    quantiles: dict            # {"A": {0.95: r, 0.99: r}, "B": {...}}
    convergence_rate: float
    failures: list = field(default_factory=list)   # [(rep, message)]
    count_a: Optional[int] = None
    count_b: Optional[int] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["quantiles"] = {t: {f"{a:.2f}": v for a, v in q.items()} for t, q in self.quantiles.items()}
        d["failures"] = [list(f) for f in self.failures]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RankSummary":
        d = dict(d)
        d["quantiles"] = {t: {float(a): v for a, v in q.items()} for t, q in d["quantiles"].items()}
        d["failures"] = [tuple(f) for f in d["failures"]]
        return cls(**d)


def rank_items(marginals, kind: str) -> np.ndarray:
    """Items by descending defective probability; ties keep index order."""
    p = marginals.defective(kind)
    return np.argsort(-p, kind="stable")


def worst_rank(permutation: Sequence[int], truth: np.ndarray) -> int:
    """Largest 1-based position of a true defective, 0 if there are none."""
    truth = np.asarray(truth, dtype=bool)
    if not truth.any():
        return 0
    position = np.empty(len(permutation), dtype=np.int64)
    position[np.asarray(permutation)] = np.arange(1, len(permutation) + 1)
    return int(position[truth].max())


def order_statistic_quantile(values: Sequence[int], alpha: float) -> Optional[int]:
    """The ceil(alpha * R)-th smallest of ``values`` (1-based)."""
    v = sorted(values)
    if not v:
        return None
    k = max(1, math.ceil(alpha * len(v) - 1e-9))
    return int(v[k - 1])


# per-process worker state, so the design is built once per process
_WORKER: dict = {}


def _init_worker(config: ExperimentConfig):
    design = config.build()
    _WORKER.update(config=config, design=design, edges=EdgeSet(design))


def _replicate(rep: int):
    config: ExperimentConfig = _WORKER["config"]
    design: PoolingDesign = _WORKER["design"]
    rng = replication_rng(config.seed, rep)
    n = design.n_items
    try:
        if config.bernoulli:
            truth = plant_bernoulli(n, config.priors(), rng)
        else:
            truth = plant_fixed(n, config.count_a, config.count_b, rng)
        obs = observe(design, truth, config.noise(), rng)
        res = run_bp(_WORKER["edges"], obs, config.priors(), config.noise(), config.settings())
    except (NumericDegeneracyError, ValueError) as exc:
        return rep, None, f"{type(exc).__name__}: {exc}"
    ranks = [worst_rank(rank_items(res.marginals, t), x) for t, x in zip(TYPES, (truth.x_A, truth.x_B))]
    return rep, RankRecord(rep, ranks[0], ranks[1], bool(res.converged), int(res.iterations)), None


def summarize(records: Sequence[RankRecord], label: str = "", failures=(),
              count_a=None, count_b=None) -> RankSummary:
    quantiles = {}
    for t in TYPES:
        ranks = [getattr(r, f"worst_rank_{t}") for r in records]
        ranks = [r for r in ranks if r > 0]
        quantiles[t] = {a: order_statistic_quantile(ranks, a) for a in LEVELS}
    rate = sum(r.converged for r in records) / len(records) if records else float("nan")
    return RankSummary(label, len(records), quantiles, rate, list(failures), count_a, count_b)


def run_experiment(config: ExperimentConfig):
    """Run all replications; returns ``(RankSummary, records)``.

    Results do not depend on ``config.workers``: each replication draws from
    its own stream and records are ordered by replication index.
    """
    config.validate()
    reps = range(config.replications)
    if config.workers == 1:
        _init_worker(config)
        outcomes = [_replicate(r) for r in reps]
    else:
        chunk = max(1, config.replications // (4 * config.workers))
        with ProcessPoolExecutor(config.workers, initializer=_init_worker, initargs=(config,)) as ex:
            outcomes = list(ex.map(_replicate, reps, chunksize=chunk))
    outcomes.sort(key=lambda o: o[0])
    records = [rec for _, rec, _ in outcomes if rec is not None]
    failures = [(rep, msg) for rep, _, msg in outcomes if msg is not None]
    if failures:
        log.warning("%d of %d replications failed", len(failures), config.replications)
    counts = (None, None) if config.bernoulli else (config.count_a, config.count_b)
    return summarize(records, config.describe(), failures, *counts), records


# --------------------------------------------------------------------------
# output

RECORD_COLUMNS = ("rep", "worst_rank_A", "worst_rank_B", "converged", "iterations")


def records_csv(records: Sequence[RankRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for r in records:
        w.writerow([r.rep, r.worst_rank_A, r.worst_rank_B, int(r.converged), r.iterations])
    return buf.getvalue()


def parse_records_csv(text: str) -> list[RankRecord]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [RankRecord(int(r["rep"]), int(r["worst_rank_A"]), int(r["worst_rank_B"]),
                       bool(int(r["converged"])), int(r["iterations"])) for r in rows]


def _q(v) -> str:
    return "-" if v is None else str(v)


def format_table(summaries: Sequence[RankSummary]) -> str:
    """Grid table layout: one block of rows per design, one column pair
    (99%, 95%) per defective count, A and B on separate lines."""
    designs: dict[str, dict] = {}
    counts: list = []
    for s in summaries:
        key = s.count_a if s.count_a == s.count_b else f"{s.count_a}/{s.count_b}"
        if key not in counts:
            counts.append(key)
        designs.setdefault(s.label, {})[key] = s
    label_w = max([len("design")] + [len(k) for k in designs])
    head = f"{'design':<{label_w}} type | " + " | ".join(f"{str(c):^15}" for c in counts)
    sub = f"{'':<{label_w}}      | " + " | ".join(f"{'99%':>7} {'95%':>7}" for _ in counts)
    lines = [head, sub, "-" * len(head)]
    for label, by_count in designs.items():
        for t in TYPES:
            cells = []
            for c in counts:
                s = by_count.get(c)
                q = s.quantiles[t] if s else {}
                cells.append(f"{_q(q.get(0.99)):>7} {_q(q.get(0.95)):>7}")
            lines.append(f"{label if t == 'A' else '':<{label_w}}    {t} | " + " | ".join(cells))
        rates = [f"{by_count[c].convergence_rate:.3f}" if c in by_count else "-" for c in counts]
        lines.append(f"{'':<{label_w}} conv | " + " | ".join(f"{r:>15}" for r in rates))
    return "\n".join(lines) + "\n"


def summaries_csv(summaries: Sequence[RankSummary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["design", "count_a", "count_b", "replications", "A_99", "A_95", "B_99", "B_95",
                "convergence_rate", "failures"])
    for s in summaries:
        w.writerow([s.label, _q(s.count_a), _q(s.count_b), s.replications,
                    _q(s.quantiles["A"][0.99]), _q(s.quantiles["A"][0.95]),
                    _q(s.quantiles["B"][0.99]), _q(s.quantiles["B"][0.95]),
                    f"{s.convergence_rate:.6f}", len(s.failures)])
    return buf.getvalue()


def results_json(summaries: Sequence[RankSummary], records_by_cell: Sequence[Sequence[RankRecord]]) -> str:
    cells = [{"summary": s.to_dict(), "records": [asdict(r) for r in recs]}
             for s, recs in zip(summaries, records_by_cell)]
    return json.dumps({"cells": cells}, indent=2, sort_keys=True) + "\n"


def load_results_json(text: str):
    data = json.loads(text)
    summaries = [RankSummary.from_dict(c["summary"]) for c in data["cells"]]
    records = [[RankRecord(**r) for r in c["records"]] for c in data["cells"]]
    return summaries, records


def emit_results(summaries, records_by_cell, fmt: str, path) -> list[Path]:
    """Write results under directory ``path``; returns the files written.

    ``table`` writes ``summary.txt``; ``csv`` writes ``summary.csv`` plus one
    ``records_<i>.csv`` per cell; ``json`` writes ``results.json``.
    """
    if isinstance(summaries, RankSummary):
        summaries, records_by_cell = [summaries], [records_by_cell]
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name, text):
        p = out / name
        p.write_text(text)
        written.append(p)

    if fmt == "table":
        put("summary.txt", format_table(summaries))
    elif fmt == "csv":
        put("summary.csv", summaries_csv(summaries))
        for i, recs in enumerate(records_by_cell):
            put(f"records_{i}.csv", records_csv(recs))
    elif fmt == "json":
        put("results.json", results_json(summaries, records_by_cell))
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return written


# --------------------------------------------------------------------------
# config files

CONFIG_KEYS = {f.name: f.type for f in fields(ExperimentConfig)}
GRID_KEYS = ("grid_k", "grid_counts")
EXTRA_KEYS = ("out", "format", "path", "rep", "budget", "exact", "disjunct", "separable",
              "two_separable", "collinearity")

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment.  Dashes in keys
    are read as underscores so keys match the CLI flags."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS and key not in GRID_KEYS + EXTRA_KEYS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def coerce_config(raw: dict) -> dict:
    """Convert string values from a config file to ExperimentConfig types."""
    out = {}
    for key, value in raw.items():
        if not isinstance(value, str):
            out[key] = value
        elif key in ("ka", "kb", "kab", *GRID_KEYS):
            out[key] = _int_list(value)
        elif key in ("bernoulli", "exact", "collinearity"):
            v = value.lower()
            if v not in _TRUE | _FALSE:
                raise ValueError(f"{key} must be a boolean, got {value!r}")
            out[key] = v in _TRUE
        elif key in ("q", "count_a", "count_b", "replications", "seed", "max_iterations", "workers",
                     "rep", "budget", "disjunct", "separable", "two_separable"):
            out[key] = int(value)
        elif key in ("sensitivity", "specificity", "p_a", "p_b", "epsilon"):
            out[key] = float(value)
        else:
            out[key] = value
    return out
