"""Command line interface.

    twotype-gt design --q 7 --ka 0,1,2 --kb 0,1,2 --kab 3,4,5,6 --out design.txt
    twotype-gt verify design.txt --disjunct 2 --separable 2 --collinearity
    twotype-gt simulate design.txt --seed 1 --count-a 6 --count-b 6
    twotype-gt experiment --config exp.cfg --out results/

Every option can also be given in a ``--config`` file as ``key = value``
(dashes or underscores); command line values win.  Exit codes: 0 success,
1 validation error, 2 budget exceeded, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from dataclasses import fields

from . import harness, pooling
from .bp import ExactBudgetExceeded, NumericDegeneracyError, exact_posterior, run_bp
from .harness import ExperimentConfig
from .pooling import BudgetExceeded
from .sim import observe, plant_bernoulli, plant_fixed, replication_rng

log = logging.getLogger("twotype_gt")

EXIT_OK, EXIT_INVALID, EXIT_BUDGET, EXIT_IO = 0, 1, 2, 3


def _add_model_options(p):
    p.add_argument("--sensitivity", type=float)
    p.add_argument("--specificity", type=float)
    p.add_argument("--p-a", type=float)
    p.add_argument("--p-b", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--max-iterations", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twotype-gt", description="Two-type group testing with BP decoding.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="write an AG(3,q) pooling design file")
    p.add_argument("--config")
    p.add_argument("--q", type=int)
    p.add_argument("--ka")
    p.add_argument("--kb")
    p.add_argument("--kab")
    p.add_argument("--out")

    p = sub.add_parser("verify", help="check combinatorial properties of a matrix or design file")
    p.add_argument("path")
    p.add_argument("--config")
    p.add_argument("--disjunct", type=int)
    p.add_argument("--separable", type=int)
    p.add_argument("--two-separable", type=int)
    p.add_argument("--collinearity", action="store_true", default=None)
    p.add_argument("--budget", type=int)
    p.add_argument("--format", choices=("text", "json"))

    p = sub.add_parser("simulate", help="one replication on a design file; dump marginals")
    p.add_argument("path")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--rep", type=int)
    p.add_argument("--count-a", type=int)
    p.add_argument("--count-b", type=int)
    p.add_argument("--bernoulli", action="store_true", default=None)
    _add_model_options(p)
    p.add_argument("--exact", action="store_true", default=None,
                   help="also compute exact marginals by enumeration (small designs only)")
    p.add_argument("--budget", type=int)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--out")

    p = sub.add_parser("experiment", help="Monte Carlo worst-rank experiment")
    p.add_argument("--config")
    p.add_argument("--q", type=int)
    p.add_argument("--ka")
    p.add_argument("--kb")
    p.add_argument("--kab")
    p.add_argument("--design-path")
    p.add_argument("--grid-k", help="designs k: M_A=M_B on planes 0..k-1, M_AB on the rest")
    p.add_argument("--grid-counts", help="defective counts per type, e.g. 2,4,6")
    p.add_argument("--count-a", type=int)
    p.add_argument("--count-b", type=int)
    p.add_argument("--bernoulli", action="store_true", default=None)
    _add_model_options(p)
    p.add_argument("--replications", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--format", choices=("table", "csv", "json", "all"))
    p.add_argument("--out")
    return parser


def _settings(args) -> dict:
    """Merge config file and flags; flags win.  Keys use underscores."""
    merged = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            merged.update(harness.parse_config_text(fh.read()))
        merged = harness.coerce_config(merged)
    for key, value in vars(args).items():
        if key in ("command", "config", "verbose") or value is None:
            continue
        merged[key] = value
    return harness.coerce_config(merged)


def _cmd_design(opts) -> int:
    q = opts.get("q", 7)
    if any(k not in opts for k in ("ka", "kb", "kab")):
        raise ValueError("design needs --ka, --kb and --kab")
    design = pooling.build_design(q, opts["ka"], opts["kb"], opts["kab"])
    text = pooling.format_design(design)
    if opts.get("out"):
        with open(opts["out"], "w") as fh:
            fh.write(text)
        log.info("wrote %s (%d/%d/%d pools, %d items)", opts["out"], design.M_A.n_rows,
                 design.M_B.n_rows, design.M_AB.n_rows, design.n_items)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def verify_report(obj, disjunct=None, separable=None, two_separable=None, collinearity=False,
                  budget=pooling.DEFAULT_BUDGET) -> dict:
    """Property report for a matrix or a design; budget overruns propagate."""
    if isinstance(obj, pooling.IncidenceMatrix):
        matrices = {"M": obj}
        report = {"kind": "matrix"}
    else:
        matrices = {"M_A": obj.M_A, "M_B": obj.M_B, "M_AB": obj.M_AB,
                    "M_A_bar": obj.M_A_bar, "M_B_bar": obj.M_B_bar}
        report = {"kind": "design", "n_items": obj.n_items,
                  "provenance": "present" if obj.has_provenance else
                  "unavailable (imported design); plane disjointness check skipped"}
    report["matrices"] = {}
    for name, M in matrices.items():
        entry = {"shape": list(M.shape),
                 "row_weights": sorted(set(M.row_weights().tolist())),
                 "column_weights": sorted(set(M.column_weights().tolist()))}
        if collinearity:
            ok, pair = pooling.unique_collinearity_check(M)
            entry["unique_collinearity"] = ok
            if pair is not None:
                entry["violating_rows"] = list(pair)
        if disjunct is not None:
            entry[f"{disjunct}-disjunct"] = pooling.is_disjunct(M, disjunct, budget)
        if separable is not None:
            entry[f"{separable}-bar-separable"] = pooling.is_separable_bar(M, separable, budget)
        report["matrices"][name] = entry
    if two_separable is not None and report["kind"] == "design":
        report[f"(2,{two_separable})-separable"] = pooling.is_2d_separable(obj, two_separable, budget)
    return report


def _format_report(report: dict) -> str:
    lines = [f"kind: {report['kind']}"]
    for key in ("n_items", "provenance"):
        if key in report:
            lines.append(f"{key}: {report[key]}")
    for name, entry in report["matrices"].items():
        lines.append(f"[{name}]")
        lines.extend(f"  {k}: {v}" for k, v in entry.items())
    lines.extend(f"{k}: {v}" for k, v in report.items() if k.startswith("(2,"))
    return "\n".join(lines) + "\n"


def _cmd_verify(opts) -> int:
    with open(opts["path"]) as fh:
        text = fh.read()
    obj = pooling.parse_design(text) if pooling.is_design_text(text) else pooling.parse_matrix(text)
    report = verify_report(obj, opts.get("disjunct"), opts.get("separable"), opts.get("two_separable"),
                           bool(opts.get("collinearity")), opts.get("budget", pooling.DEFAULT_BUDGET))
    if opts.get("format") == "json":
        sys.stdout.write(json.dumps(report, indent=2) + "\n")
    else:
        sys.stdout.write(_format_report(report))
    return EXIT_OK


def _config_from(opts, **extra) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    kwargs = {k: v for k, v in opts.items() if k in known}
    kwargs.update(extra)
    return ExperimentConfig(**kwargs)


def _cmd_simulate(opts) -> int:
    design = pooling.import_design(opts["path"])
    cfg = _config_from(opts, design_path=opts["path"], replications=1)
    rng = replication_rng(cfg.seed, opts.get("rep", 0))
    if cfg.bernoulli:
        truth = plant_bernoulli(design.n_items, cfg.priors(), rng)
    else:
        truth = plant_fixed(design.n_items, cfg.count_a, cfg.count_b, rng)
    obs = observe(design, truth, cfg.noise(), rng)
    res = run_bp(design, obs, cfg.priors(), cfg.noise(), cfg.settings())
    exact = None
    if opts.get("exact"):
        kw = {"budget": opts["budget"]} if "budget" in opts else {}
        exact = exact_posterior(design, obs, cfg.priors(), cfg.noise(), **kw)
    m = res.marginals
    rows = []
    for j in range(design.n_items):
        row = {"item": j, "q00": m.joint[j, 0], "q01": m.joint[j, 1], "q10": m.joint[j, 2],
               "q11": m.joint[j, 3], "p_A": m.p_A[j], "p_B": m.p_B[j],
               "truth_A": int(truth.x_A[j]), "truth_B": int(truth.x_B[j])}
        if exact is not None:
            row.update(exact_p_A=exact.p_A[j], exact_p_B=exact.p_B[j])
        rows.append(row)
    if opts.get("format", "csv") == "json":
        text = json.dumps({"seed": cfg.seed, "rep": opts.get("rep", 0), "converged": res.converged,
                           "iterations": res.iterations, "marginals": rows}, indent=2) + "\n"
    else:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else ["item"], lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.12g}" if isinstance(v, float) else v) for k, v in r.items()})
        text = buf.getvalue()
    if opts.get("out"):
        with open(opts["out"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    log.info("converged=%s iterations=%d", res.converged, res.iterations)
    return EXIT_OK


def experiment_cells(opts) -> list[ExperimentConfig]:
    """Expand options into one config per (design, count) cell.

    Without an explicit design the standard grid of designs k = 1..6 is used;
    without explicit counts the counts 2, 4, ..., 12 are used.
    """
    explicit_design = any(k in opts for k in ("ka", "kb", "kab", "design_path"))
    explicit_count = "count_a" in opts or "count_b" in opts
    if "grid_counts" in opts:
        counts = [(c, c) for c in opts["grid_counts"]]
    elif explicit_count or explicit_design or opts.get("bernoulli"):
        counts = [(opts.get("count_a", 6), opts.get("count_b", 6))]
    else:
        counts = [(c, c) for c in harness.GRID_COUNTS]
    q = opts.get("q", 7)
    if explicit_design and "grid_k" not in opts:
        designs = [{}]
    else:
        designs = [{"ka": tuple(range(k)), "kb": tuple(range(k)), "kab": tuple(range(k, q)),
                    "design_path": None, "label": f"k={k} (mA=mB={k * q * q}, mAB={(q - k) * q * q})"}
                   for k in opts.get("grid_k", harness.GRID_KS)]
    cells = []
    for d in designs:
        for ca, cb in counts:
            cells.append(_config_from(opts, **d, count_a=ca, count_b=cb))
    return cells


def _cmd_experiment(opts) -> int:
    cells = experiment_cells(opts)
    summaries, records = [], []
    for cfg in cells:
        t0 = time.perf_counter()
        s, recs = harness.run_experiment(cfg)
        log.info("%s counts=%s/%s: %d reps in %.1fs, convergence %.3f", s.label, cfg.count_a,
                 cfg.count_b, len(recs), time.perf_counter() - t0, s.convergence_rate)
        summaries.append(s)
        records.append(recs)
    table = harness.format_table(summaries)
    sys.stdout.write(table)
    fmt = opts.get("format", "all")
    if opts.get("out"):
        for f in (("table", "csv", "json") if fmt == "all" else (fmt,)):
            harness.emit_results(summaries, records, f, opts["out"])
    return EXIT_OK


COMMANDS = {"design": _cmd_design, "verify": _cmd_verify, "simulate": _cmd_simulate,
            "experiment": _cmd_experiment}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = _settings(args)
        return COMMANDS[args.command](opts)
    except (BudgetExceeded, ExactBudgetExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, NumericDegeneracyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
