"""Command-line entry point: ``axiou <command> [options]``.

Measure specs use the grammar ``family@K[:theta]``::

    recall@5:0.5   axiou@10   ap@5:0.5   dcg@10   ncxiou@3:0.5,0.3,0.2

Exit status: 0 on success, 2 on parse or validation errors, 1 on runtime
failures (and from ``axioms`` when an expected-satisfied cell is violated).
Without ``--gt``/``--run`` the experiment commands use the bundled
synthetic scenario.  ``--seed`` defaults to ``$AXIOU_SEED``, then 0.
"""

from __future__ import annotations

import argparse
import os
import sys
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

from . import axioms, experiments, rankstats, synth, theory
from .errors import AxiouError
from .io import (
    DatasetBundle,
    load_bundle,
    load_ground_truth,
    load_run,
    render_report,
    write_ground_truth,
    write_report,
    write_run,
)
from .measures import MeasureSpec, mean_measure, parse_specs

SEED_ENV = "AXIOU_SEED"
EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

DEFAULT_KS = (1, 5, 10)
DEFAULT_THETAS = (0.3, 0.5, 0.7)
DEFAULT_MEASURES = ",".join(
    [f"recall@{k}:{t}" for k in DEFAULT_KS for t in DEFAULT_THETAS]
    + [f"axiou@{k}" for k in DEFAULT_KS]
)
# R@10,0.3 saturates on easy data and is left out of the test side
DEFAULT_TEST_MEASURES = ",".join(
    f"recall@{k}:{t}" for k in DEFAULT_KS for t in DEFAULT_THETAS if (k, t) != (10, 0.3)
)


class UsageError(AxiouError):
    pass


def _floats(text: str) -> list[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _ints(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _resolve_seed(args, default: int = 0) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return default
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _emit(report, args) -> None:
    fmt = args.format
    if args.out:
        write_report(report, args.out, fmt or ("csv" if str(args.out).endswith(".csv") else "json"))
    else:
        sys.stdout.write(render_report(report, fmt or "json"))


def _bundle(args) -> DatasetBundle:
    if args.gt is None:
        if args.run:
            raise UsageError("--run needs --gt")
        return synth.bundled_paper_scenario()
    if not args.run:
        raise UsageError("--gt needs at least one --run")
    return load_bundle(args.gt, args.run, strict=not args.lenient)


def _specs(text: str) -> list[MeasureSpec]:
    specs = parse_specs(text)
    if not specs:
        raise UsageError("no measures given")
    return specs


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[dict, ...]
    per_query: tuple[dict, ...] = ()
    coverage: str = "1.0"

    def to_dict(self) -> dict:
        out = {"coverage": self.coverage, "results": list(self.rows)}
        if self.per_query:
            out["per_query"] = list(self.per_query)
        return out

    def to_rows(self) -> list[dict]:
        if not self.per_query:
            return list(self.rows)
        return [
            {"system": p["system"], "measure": p["measure"], "query_id": q, "score": v}
            for p in self.per_query
            for q, v in p["scores"].items()
        ]


def cmd_eval(args) -> int:
    specs = _specs(args.measures)
    bundle = _bundle(args)
    rows, per_query = [], []
    for run in bundle.runs:
        for spec in specs:
            ev = mean_measure(run, bundle.gt, spec, bundle.query_ids)
            rows.append({"system": run.system_id, "measure": spec.name,
                         "queries": len(ev.query_ids), "mean": ev.mean})
            if args.per_query:
                per_query.append({"system": run.system_id, "measure": spec.name,
                                  "scores": ev.as_dict()})
    _emit(EvalReport(tuple(rows), tuple(per_query), bundle.metadata.get("coverage", "1.0")), args)
    return EXIT_OK


def cmd_axioms(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    matrix = axioms.satisfaction_matrix(args.k, args.theta, args.trials, _resolve_seed(args))
    _emit(matrix, args)
    bad = matrix.unexpected_violations()
    for v in bad:
        print(f"unexpected violation: {v.spec.name} {v.axiom.value} "
              f"({v.violations}/{v.trials})", file=sys.stderr)
    return EXIT_RUNTIME if bad else EXIT_OK


def cmd_agreement(args) -> int:
    specs = _specs(args.measures)
    bundle = _bundle(args)
    _emit(rankstats.agreement_matrix(bundle.runs, bundle.gt, specs, bundle.query_ids), args)
    return EXIT_OK


def cmd_stability(args) -> int:
    specs = _specs(args.measures)
    bundle = _bundle(args)
    n = len(bundle.query_ids or bundle.gt.query_ids)
    too_big = [s for s in args.sizes if 2 * s > n]
    if too_big:
        raise UsageError(f"subset sizes {too_big} exceed half of the {n} queries")
    reports = experiments.stability_experiment(
        bundle.runs, bundle.gt, specs, args.sizes, args.trials, _resolve_seed(args), bundle.query_ids
    )
    _emit(reports, args)
    return EXIT_OK


def cmd_noise(args) -> int:
    specs = _specs(args.measures)
    configs = experiments.noise_series(args.beta2, args.raters, args.replicas, _resolve_seed(args))
    bundle = _bundle(args)
    _emit(experiments.noise_experiment(bundle.runs, bundle.gt, specs, configs, bundle.query_ids), args)
    return EXIT_OK


def cmd_select(args) -> int:
    val_specs = _specs(args.validation_measures)
    test_specs = _specs(args.test_measures)
    given = [args.val_gt, args.test_gt]
    if any(x is not None for x in given) or args.val_run or args.test_run:
        if None in given or not args.val_run or not args.test_run:
            raise UsageError("--val-gt, --val-run, --test-gt and --test-run go together")
        val_gt, test_gt = load_ground_truth(args.val_gt), load_ground_truth(args.test_gt)
        val_runs = [load_run(p) for p in args.val_run]
        test_runs = [load_run(p) for p in args.test_run]
    else:
        val, test = synth.model_sweep(args.variants, seed=_resolve_seed(args, synth.SWEEP_SEED))
        val_gt, test_gt, val_runs, test_runs = val.gt, test.gt, val.runs, test.runs
    _emit(experiments.model_selection(val_runs, test_runs, val_gt, test_gt, val_specs, test_specs), args)
    return EXIT_OK


def cmd_theory(args) -> int:
    rows = [p.to_dict() for r in args.r for p in theory.theory_sweep(r, args.theta, args.gamma)]
    if args.monte_carlo:
        checks = theory.monte_carlo_sweep(args.r, args.theta, args.gamma, args.samples, _resolve_seed(args))
        rows = []
        for c in checks:
            row = c.theory.to_dict()
            row.update(mc_bias=c.simulated.bias, mc_variance=c.simulated.variance,
                       bias_z=c.bias_z, variance_z=c.variance_z, agrees=c.agrees())
            rows.append(row)
    _emit(rows, args)
    return EXIT_OK


def cmd_synth(args) -> int:
    seed = _resolve_seed(args, synth.BUNDLED_CONFIG.seed)
    cfg = synth.ScenarioConfig(
        num_queries=args.queries,
        video_duration=synth.BUNDLED_CONFIG.video_duration,
        gt_length=synth.BUNDLED_CONFIG.gt_length,
        systems=synth.SCENARIO_PROFILES,
        seed=seed,
    )
    bundle = synth.generate_scenario(cfg)
    out = Path(args.out_dir)
    write_ground_truth(bundle.gt, out / "gt.jsonl")
    for run in bundle.runs:
        write_run(run, out / "runs" / f"{run.system_id}.jsonl")
    write_report(dict(bundle.metadata, systems=list(bundle.system_ids)), out / "metadata.json", "json")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None,
                   help=f"random seed (default: ${SEED_ENV}, else the command default)")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"),
                   help="report format (default: from --out suffix, else json)")


def _data(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gt", help="ground-truth JSONL (default: bundled synthetic scenario)")
    p.add_argument("--run", action="append", default=[], help="run JSONL; repeat for several runs")
    p.add_argument("--lenient", action="store_true",
                   help="evaluate the queries common to all runs instead of requiring full coverage")


def _measures(p: argparse.ArgumentParser, default: str = DEFAULT_MEASURES) -> None:
    p.add_argument("--measures", default=default,
                   help="comma-separated specs, family@K[:theta] (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="axiou", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("eval", help="mean score of each run under each measure")
    _data(p); _measures(p); _common(p)
    p.add_argument("--per-query", action="store_true", help="also dump per-query scores")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("axioms", help="randomised INV-k / MON-k satisfaction matrix")
    p.add_argument("--k", type=int, default=5, help="cutoff K (default: %(default)s)")
    p.add_argument("--theta", type=float, default=0.5, help="threshold (default: %(default)s)")
    p.add_argument("--trials", type=int, default=2000, help="trials per cell (default: %(default)s)")
    _common(p)
    p.set_defaults(func=cmd_axioms)

    p = sub.add_parser("agreement", help="Kendall tau-b between measure rankings of the runs")
    _data(p); _measures(p); _common(p)
    p.set_defaults(func=cmd_agreement)

    p = sub.add_parser("stability", help="tau-b self-agreement over disjoint query subsets")
    _data(p); _measures(p); _common(p)
    p.add_argument("--sizes", type=_ints, default=[25, 50, 100, 200],
                   help="comma-separated subset sizes (default: 25,50,100,200)")
    p.add_argument("--trials", type=int, default=5000, help="trials per size (default: %(default)s)")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("noise", help="RMSE of mean scores under simulated annotation noise")
    _data(p); _measures(p); _common(p)
    p.add_argument("--beta2", type=_floats, default=[1.0, 2.0, 3.0, 4.0],
                   help="comma-separated start-point variances in s^2 (default: 1,2,3,4)")
    p.add_argument("--replicas", type=int, default=100, help="noisy datasets per beta2 (default: %(default)s)")
    p.add_argument("--raters", type=int, default=5, help="raters per annotation, odd (default: %(default)s)")
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("select", help="model selection on validation, Z-scores on test")
    p.add_argument("--val-gt"); p.add_argument("--test-gt")
    p.add_argument("--val-run", action="append", default=[])
    p.add_argument("--test-run", action="append", default=[])
    p.add_argument("--variants", type=int, default=640,
                   help="synthetic sweep size when no files are given (default: %(default)s)")
    p.add_argument("--validation-measures", default=DEFAULT_MEASURES, help="default: %(default)s")
    p.add_argument("--test-measures", default=DEFAULT_TEST_MEASURES, help="default: %(default)s")
    _common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("theory", help="closed-form bias/variance/MSE of R@1 and AxIoU@1")
    p.add_argument("--r", type=_floats, default=[0.5], help="true top-1 IoU values (default: 0.5)")
    p.add_argument("--theta", type=_floats, default=list(DEFAULT_THETAS), help="default: 0.3,0.5,0.7")
    p.add_argument("--gamma", type=_floats, default=[0.05, 0.1, 0.2], help="default: 0.05,0.1,0.2")
    p.add_argument("--monte-carlo", action="store_true", help="add a simulation cross-check")
    p.add_argument("--samples", type=int, default=1_000_000, help="draws per cell (default: %(default)s)")
    _common(p)
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("synth", help="write a synthetic ground truth and six runs as JSONL")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--queries", type=int, default=synth.BUNDLED_CONFIG.num_queries,
                   help="number of queries (default: %(default)s)")
    p.add_argument("--seed", type=int, default=None,
                   help=f"scenario seed (default: ${SEED_ENV}, else the bundled seed)")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 2 on bad usage, 0 for --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ValueError, LookupError) as exc:
        print(f"axiou {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - report, do not trace
        print(f"axiou {args.command}: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
