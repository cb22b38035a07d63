"""Command-line entry point: ``afsbm run | select | synth | verify``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields

import numpy as np

from . import baselines, harness
from .dataset import SplitSpec, load_csv, save_csv, split
from .learners import LearnerConfig
from .selection import AfsBmParams, run_afs_bm
from .synthetic import SyntheticSpec, generate

log = logging.getLogger("afsbm")

EXIT_INPUT_ERROR = 2
EXIT_MISMATCH = 1

_LEARNER_KEYS = {f.name for f in fields(LearnerConfig)}
_AFS_KEYS = {f.name for f in fields(AfsBmParams)}


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_params(items):
    """``["k=5", "learner.num_leaves=20"]`` -> ``({"k": 5}, {"num_leaves": 20})``."""
    sel, lrn = {}, {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ValueError(f"parameter {item!r} is not of the form key=value")
        key = key.strip()
        if key.startswith("learner."):
            lrn[key[len("learner."):]] = _parse_value(value)
        else:
            sel[key] = _parse_value(value)
    return sel, lrn


def _write_json(obj, path):
    text = json.dumps(obj, indent=1, sort_keys=True)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_run(args):
    config = harness.load_config(args.config)
    out_dir = args.output_dir or config.output_dir
    report = harness.run_experiment(config, jobs=args.jobs)
    path = harness.write_report(report, out_dir)
    sys.stdout.write(harness.report_table(report))
    log.info("report written to %s", path)
    failed = [c for sec in report["series"] for c in sec["cells"] if c["status"] != "ok"]
    if failed:
        log.warning("%d cell(s) failed; see the report for diagnostics", len(failed))
    return 0


def cmd_select(args):
    params, learner_params = parse_params(args.params)
    data = load_csv(args.data, args.target, args.timestamp)
    learner_params.setdefault("task", args.task)
    learner = LearnerConfig(**learner_params)
    X, y = data.features, data.targets
    names = list(data.feature_names)
    out = {"method": args.method, "data": args.data, "target": args.target}
    if args.method == "afs_bm":
        unknown = set(params) - _AFS_KEYS
        if unknown:
            raise ValueError(f"unknown AFS-BM parameters {sorted(unknown)}")
        parts = split(data, SplitSpec(mode=args.split_mode, seed=args.seed))
        params.setdefault("seed", args.seed)
        result = run_afs_bm(learner, parts.train, parts.mask_val, AfsBmParams(**params))
        out.update(result.to_dict())
        out["split_indices"] = {k: v.tolist() for k, v in parts.indices.items()}
        bits = result.final_mask.bits
        scores = None
    else:
        bp = baselines.BaselineParams(args.method, **params)
        if bp.k > X.shape[1] and args.method != "cross_correlation":
            raise ValueError(f"k={bp.k} exceeds the {X.shape[1]} features")
        sel = baselines.select(bp, X, y, learner=learner,
                               classification=args.task == "binary_classification")
        bits, scores = sel.mask.bits, sel.scores.tolist()
        out["params"] = {"gamma": bp.gamma} if args.method == "cross_correlation" else {"k": bp.k, "mi_bins": bp.mi_bins}
    out["learner"] = learner.to_dict()
    out["mask"] = bits.tolist()
    out["selected_features"] = [names[i] for i in np.flatnonzero(bits)]
    out["scores"] = scores
    _write_json(out, args.out)
    return 0


def cmd_synth(args):
    spec = SyntheticSpec(
        n_samples=args.n_samples,
        n_features=args.n_features,
        n_informative=args.n_informative,
        noise_variance=args.noise_variance,
        seed=args.seed,
    )
    data, informative = generate(spec)
    save_csv(data, args.out, target_column="y")
    log.info("wrote %d x %d to %s (informative columns %s)", data.n_samples, data.n_features, args.out, informative)
    return 0


def cmd_verify(args):
    with open(args.report, encoding="utf-8") as fh:
        report = json.load(fh)
    bad = 0
    for cell, reported, recomputed in harness.recompute_test_losses(report):
        diff = abs(reported - recomputed)
        ok = diff <= args.tol
        bad += not ok
        print(f"{'ok  ' if ok else 'FAIL'} {cell}: reported {reported!r} recomputed {recomputed!r}")
    return EXIT_MISMATCH if bad else 0


def build_parser():
    p = argparse.ArgumentParser(prog="afsbm", description="Feature selection with binary masking.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a full experiment from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--output-dir", default=None)
    r.add_argument("--jobs", type=int, default=None, help=f"parallel workers (default: ${harness.JOBS_ENV} or 1)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("select", help="one-shot feature selection on a CSV file")
    s.add_argument("--method", required=True, choices=list(baselines.METHODS) + ["afs_bm"])
    s.add_argument("--data", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--timestamp", default=None)
    s.add_argument("--task", default="regression", choices=["regression", "binary_classification"])
    s.add_argument("--params", nargs="*", default=[], metavar="KEY=VALUE",
                   help="selector parameters; prefix learner settings with 'learner.'")
    s.add_argument("--split-mode", default="random", choices=["random", "chronological"])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None, help="write JSON here instead of stdout")
    s.set_defaults(func=cmd_select)

    g = sub.add_parser("synth", help="write the synthetic benchmark as CSV")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n-samples", type=int, default=300)
    g.add_argument("--n-features", type=int, default=100)
    g.add_argument("--n-informative", type=int, default=10)
    g.add_argument("--noise-variance", type=float, default=0.1)
    g.set_defaults(func=cmd_synth)

    v = sub.add_parser("verify", help="recompute every test loss in a report")
    v.add_argument("--report", required=True)
    v.add_argument("--tol", type=float, default=1e-12)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, TypeError) as exc:
        print(f"afsbm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
