"""Command-line orchestration: tune, evaluate, benchmark, export.

One dataset file is one model. The benchmark command runs the full
protocol for each file: repeated random tuning/test splits, per-split
hyperparameter tuning with optional MSP fallback, test-split metric
reports, and average-positive-gain aggregation across models. Output
assembly is deterministic regardless of worker scheduling, so identical
inputs produce byte-identical reports.

Exit codes: 0 success, 2 parse/parameter errors, 3 undefined-metric errors.
"""

from __future__ import annotations

import argparse
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .core import (
    DegenerateInputError,
    DimensionError,
    ParameterError,
    ParseError,
    UndefinedMetricError,
    argmax_predict,
    zero_one_loss,
)
from .estimators import BaseEstimator, EstimatorSpec, Raw
from .io import (
    ApgRow,
    BenchmarkReport,
    MethodCell,
    RunConfig,
    SplitRecord,
    SplitSpec,
    SyntheticModelSpec,
    generate_synthetic,
    hyper_label,
    load_dataset,
    load_run_config,
    load_spec,
    save_dataset,
    save_report,
    save_spec,
    split,
)
from .metrics import apg, compute_report, mean_std, rc_curve
from .tuning import (
    GridSpec,
    Method,
    Objective,
    TuneResult,
    apply_fallback,
    data_efficiency_sweep,
    parse_method,
    tune_method,
)

__all__ = ["main", "run_benchmark", "export_confidence_histogram", "render_apg_table"]

_AGG_KEYS = ("accuracy", "aurc", "e-aurc", "naurc", "auroc")


def export_confidence_histogram(conf, bins: int):
    """Equal-width histogram of confidence scores over [min, max].

    Returns (edges, counts) with len(edges) == bins + 1.
    """
    if bins < 1:
        raise ParameterError(f"bins must be >= 1, got {bins}")
    c = np.asarray(conf, dtype=np.float64)
    if c.ndim != 1 or c.size == 0:
        raise ParameterError("histogram needs a nonempty score vector")
    if not np.isfinite(c).all():
        raise ParameterError("histogram scores must be finite")
    counts, edges = np.histogram(c, bins=bins)
    return edges, counts


def _histogram_text(edges, counts) -> str:
    lines = [
        f"{edges[i]:.17g} {edges[i + 1]:.17g} {int(counts[i])}"
        for i in range(len(counts))
    ]
    return "\n".join(lines) + "\n"


def _model_name(path) -> str:
    return re.sub(r"[\s,=]+", "_", Path(path).stem)


def _estimator_of(spec_obj):
    return spec_obj.spec if isinstance(spec_obj, TuneResult) else spec_obj


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------


def _evaluate_cell(result, z_test, losses_test, sac_targets):
    conf = result.spec.scores(z_test)
    return compute_report(conf, losses_test, sac_targets)


def _aggregate(cell: MethodCell, sac_targets) -> None:
    reports = [rec.report for rec in sorted(cell.splits, key=lambda r: r.split)]
    agg: dict[str, float | None] = {}
    for key in _AGG_KEYS:
        attr = key.replace("-", "_")
        values = [getattr(r, attr) for r in reports]
        defined = [v for v in values if v is not None]
        if defined:
            m, s = mean_std(defined)
            agg[f"{key}-mean"], agg[f"{key}-std"] = m, s
        else:
            agg[f"{key}-mean"] = agg[f"{key}-std"] = None
    for t in sac_targets:
        m, s = mean_std([r.sac[t] for r in reports])
        agg[f"sac:{t:g}-mean"], agg[f"sac:{t:g}-std"] = m, s
    cell.aggregates = agg


def run_benchmark(
    config: RunConfig, dataset_paths, jobs: int = 1
) -> tuple[BenchmarkReport, list[str]]:
    """Run the full benchmark protocol; returns the report and warnings."""
    if not dataset_paths:
        raise ParameterError("benchmark needs at least one dataset")
    datasets = []
    for path in dataset_paths:
        z, y = load_dataset(path)
        if config.tuning_size >= z.shape[0]:
            raise ParameterError(
                f"dataset {path}: tuning_size {config.tuning_size} must be smaller "
                f"than the dataset ({z.shape[0]} samples)"
            )
        datasets.append((_model_name(path), z, y))
    names = [name for name, _, _ in datasets]
    if len(set(names)) != len(names):
        raise ParameterError(f"dataset names are not unique: {names}")

    methods = config.parsed_methods()
    split_spec = SplitSpec(config.tuning_size, config.seed, config.repetitions)
    tasks = [(mi, rep) for mi in range(len(datasets)) for rep in range(config.repetitions)]

    def run_task(task):
        mi, rep = task
        name, z, y = datasets[mi]
        tune_idx, test_idx = split(z.shape[0], split_spec, rep)
        z_tune, y_tune = z[tune_idx], y[tune_idx]
        z_test = z[test_idx]
        losses_test = zero_one_loss(argmax_predict(z_test), y[test_idx])
        records = {}
        for method in methods:
            result = tune_method(method, z_tune, y_tune, config.grids)
            if config.fallback_epsilon is not None:
                result = apply_fallback(result, config.fallback_epsilon)
            report = _evaluate_cell(result, z_test, losses_test, config.sac_targets)
            records[method.name] = SplitRecord(
                split=rep,
                hyper=hyper_label(result.spec),
                fallback=result.fallback_applied,
                report=report,
            )
        baseline = EstimatorSpec(BaseEstimator.MSP, Raw()).scores(z_test)
        base_report = compute_report(baseline, losses_test)
        return task, records, base_report.naurc

    if jobs > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run_task, tasks))
    else:
        outcomes = [run_task(t) for t in tasks]

    cells = {
        (name, m.name): MethodCell(method=m.name)
        for name in names
        for m in methods
    }
    base_naurc = {}  # (model index, rep) -> MSP raw test NAURC (None if undefined)
    for (mi, rep), records, baseline_naurc in outcomes:
        name = names[mi]
        base_naurc[(mi, rep)] = baseline_naurc
        for method_name, rec in records.items():
            cells[(name, method_name)].splits.append(rec)
    for cell in cells.values():
        cell.splits.sort(key=lambda r: r.split)
        _aggregate(cell, config.sac_targets)

    warnings_out = []
    apg_rows = []
    for method in methods:
        per_split = []
        for rep in range(config.repetitions):
            base_vals, method_vals = [], []
            for mi, name in enumerate(names):
                b = base_naurc[(mi, rep)]
                m = cells[(name, method.name)].splits[rep].report.naurc
                if b is None or m is None:
                    warnings_out.append(
                        f"model {name} split {rep}: NAURC undefined, "
                        f"excluded from APG of {method.name}"
                    )
                    continue
                base_vals.append(b)
                method_vals.append(m)
            if base_vals:
                per_split.append(apg(base_vals, method_vals, config.apg_epsilon))
        if per_split:
            m, s = mean_std(per_split)
            apg_rows.append(ApgRow(method.name, tuple(per_split), m, s))
        else:
            warnings_out.append(f"method {method.name}: no models eligible for APG")

    report = BenchmarkReport(
        models=tuple(names),
        methods=tuple(m.name for m in methods),
        repetitions=config.repetitions,
        tuning_size=config.tuning_size,
        seed=config.seed,
        apg_epsilon=config.apg_epsilon,
        fallback_epsilon=config.fallback_epsilon,
        sac_targets=config.sac_targets,
        cells=cells,
        apg=apg_rows,
    )
    return report, warnings_out


_TRANSFORM_COLUMNS = (("raw", "Raw"), ("ts-nll", "TS-NLL"), ("ts-aurc", "TS-AURC"), ("pnorm", "pNorm"))


def render_apg_table(report: BenchmarkReport) -> str:
    """Average-positive-gain grid: base estimators by logit transformation."""
    apg_by_method = {row.method: row for row in report.apg}

    def cell(method_name):
        row = apg_by_method.get(method_name)
        if row is None:
            return "-"
        return f"{row.mean:.5f}±{row.std:.5f}"

    header = ["Conf. estimator".ljust(16)] + [h for _, h in _TRANSFORM_COLUMNS]
    lines = ["APG-NAURC (mean±std over splits)", "  ".join(h.ljust(17) for h in header).rstrip()]
    for base in BaseEstimator:
        row = [base.value.ljust(16)]
        for suffix, _ in _TRANSFORM_COLUMNS:
            row.append(cell(f"{base.value}-{suffix}"))
        lines.append("  ".join(c.ljust(17) for c in row).rstrip())
    for comp in ("ets", "bk", "hts"):
        if comp in apg_by_method:
            lines.append("  ".join([comp.ljust(16), cell(comp)]).rstrip())
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _method_from_args(args) -> Method:
    if args.method in ("ets", "bk", "hts"):
        if args.transform is not None:
            raise ParameterError(f"composite method {args.method} takes no --transform")
        return parse_method(args.method)
    transform = args.transform or "raw"
    method_id = f"{args.method}-{transform}"
    if transform == "ts":
        method_id += f"-{args.objective}"
    return parse_method(method_id)


def cmd_tune(args) -> int:
    z, y = load_dataset(args.data)
    if args.tuning_size is not None:
        tune_idx, _ = split(z.shape[0], SplitSpec(args.tuning_size, args.seed, 1), 0)
        z, y = z[tune_idx], y[tune_idx]
    method = _method_from_args(args)
    result = tune_method(method, z, y, GridSpec(), jobs=args.jobs)
    if not args.no_fallback:
        result = apply_fallback(result, args.fallback_eps)
    save_spec(result, args.out)
    print(
        f"tuned {method.name} on {z.shape[0]} samples: "
        f"{hyper_label(result.spec)} tuning-aurc={result.tuning_aurc:.6f} "
        f"msp-aurc={result.msp_tuning_aurc:.6f}"
        + (" (fallback)" if result.fallback_applied else "")
    )
    return 0


def cmd_evaluate(args) -> int:
    z, y = load_dataset(args.data)
    estimator = _estimator_of(load_spec(args.spec))
    conf = estimator.scores(z)
    losses = zero_one_loss(argmax_predict(z), y)
    targets = args.sac if args.sac else [0.98]
    report = compute_report(conf, losses, targets)
    save_report(report, args.out)
    if args.histogram:
        edges, counts = export_confidence_histogram(conf, args.bins)
        Path(args.histogram).write_text(_histogram_text(edges, counts))
    nau = "undefined" if report.naurc is None else f"{report.naurc:.6f}"
    roc = "undefined" if report.auroc is None else f"{report.auroc:.6f}"
    print(
        f"evaluated {Path(args.data).name}: accuracy={report.accuracy:.6f} "
        f"aurc={report.aurc:.6f} naurc={nau} auroc={roc}"
    )
    return 0


def cmd_benchmark(args) -> int:
    config = load_run_config(args.config) if args.config else RunConfig()
    report, warn = run_benchmark(config, args.data, jobs=args.jobs)
    table = render_apg_table(report)
    save_report(report, args.out, trailer=table)
    for w in warn:
        print(f"warning: {w}", file=sys.stderr)
    print(table, end="")
    return 0


def cmd_rc_curve(args) -> int:
    z, y = load_dataset(args.data)
    estimator = _estimator_of(load_spec(args.spec))
    conf = estimator.scores(z)
    losses = zero_one_loss(argmax_predict(z), y)
    curve = rc_curve(conf, losses)
    Path(args.out).write_text(curve.to_text())
    print(f"wrote {curve.coverages.size} curve points to {args.out}")
    return 0


def cmd_synth(args) -> int:
    spec = SyntheticModelSpec(
        n=args.n,
        c=args.c,
        accuracy=args.accuracy,
        mode=args.mode,
        norm_log_mean=args.norm_mean,
        norm_log_sigma=args.norm_sigma,
        underconfidence_divisor=args.divisor,
        seed=args.seed,
    )
    logits, labels = generate_synthetic(spec)
    save_dataset(args.out, logits, labels, fmt=args.format)
    acc = float((argmax_predict(logits) == labels).mean())
    print(f"wrote {args.n}x{args.c} dataset ({args.mode}) to {args.out}, accuracy={acc:.4f}")
    return 0


def cmd_sweep(args) -> int:
    z, y = load_dataset(args.data)
    sizes = [int(s) for s in args.sizes.split(",") if s]
    if not sizes:
        raise ParameterError("no sweep sizes given")
    tune_idx, test_idx = split(z.shape[0], SplitSpec(args.tuning_size, args.seed, 1), 0)
    method = parse_method(args.method)
    points = data_efficiency_sweep(
        method,
        z[tune_idx],
        y[tune_idx],
        z[test_idx],
        y[test_idx],
        sizes,
        args.reps,
        args.seed,
        jobs=args.jobs,
    )
    lines = ["# size naurc-mean naurc-std"]
    lines += [f"{p.size} {p.naurc_mean:.17g} {p.naurc_std:.17g}" for p in points]
    Path(args.out).write_text("\n".join(lines) + "\n")
    for p in points:
        print(f"size {p.size}: naurc {p.naurc_mean:.6f} ± {p.naurc_std:.6f}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

_BASE_CHOICES = [b.value for b in BaseEstimator] + ["ets", "bk", "hts"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="selclass",
        description="Tune and evaluate post-hoc confidence estimators on classifier logits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tune", help="tune an estimator on (a subset of) a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--method", required=True, choices=_BASE_CHOICES)
    p.add_argument("--transform", choices=["raw", "ts", "pnorm"])
    p.add_argument("--objective", choices=["nll", "aurc"], default="aurc")
    p.add_argument("--tuning-size", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fallback-eps", type=float, default=0.0)
    p.add_argument("--no-fallback", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("evaluate", help="evaluate a tuned spec on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--sac", type=float, action="append")
    p.add_argument("--histogram", help="also export a confidence histogram table")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="run the repeated-split benchmark on datasets")
    p.add_argument("--config", help="JSON run configuration (defaults mirror the standard protocol)")
    p.add_argument("--data", required=True, nargs="+")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("rc-curve", help="export a risk-coverage curve as two-column text")
    p.add_argument("--data", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rc_curve)

    p = sub.add_parser("synth", help="generate a synthetic logits dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--c", type=int, required=True)
    p.add_argument("--mode", choices=["none", "norm-inflation", "underconfidence"], default="none")
    p.add_argument("--accuracy", type=float, default=0.8)
    p.add_argument("--norm-mean", type=float, default=0.0)
    p.add_argument("--norm-sigma", type=float, default=1.0)
    p.add_argument("--divisor", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["binary", "csv"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sweep", help="data-efficiency sweep over tuning-set sizes")
    p.add_argument("--data", required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--sizes", required=True, help="comma-separated tuning sizes")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--tuning-size", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UndefinedMetricError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ParseError, ParameterError, DimensionError, DegenerateInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
