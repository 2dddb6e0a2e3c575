"""Command line front end: ``adarf {split,train,quantize,eval,sweep,export-c}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import engine
from .codegen import export_c
from .cost import CostParams, calibrate_defaults
from .engine import Policy, PolicyConfig
from .forest import Forest
from .ingest import ParseError, ingest_csv, write_csv
from .quantize import QuantizedForest, comparison_consistency_check, quantize_forest
from .report import FORMATS, report
from .sweep import SweepSpec, make_point, reduced_rf_baseline, run_sweep
from .trainer import TrainConfig, train_forest, train_test_split

log = logging.getLogger("adarf")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _label_column(text: str):
    try:
        return int(text)
    except ValueError:
        return text


def _add_data_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("CSV options")
    g.add_argument("--label-column", type=_label_column, default=-1,
                   help="label column index or header name (default: last column)")
    g.add_argument("--delimiter", default=None, help="field delimiter (default: sniff comma/tab/whitespace)")
    hdr = g.add_mutually_exclusive_group()
    hdr.add_argument("--header", dest="header", action="store_true", default=None)
    hdr.add_argument("--no-header", dest="header", action="store_false")
    g.add_argument("--positive-labels", type=lambda s: s.split(","), default=None,
                   help="comma-separated labels mapped to class 1; all others become class 0")


def _read(path, args, classes=None):
    data = ingest_csv(path, label_column=args.label_column, header=args.header, delimiter=args.delimiter,
                      classes=classes, positive_labels=args.positive_labels)
    log.info("%s: %d samples, %d features, classes %s", path, data.n_samples, data.n_features,
             ", ".join(f"{name}->{i}" for i, name in enumerate(data.class_names)))
    return data


def _load_model(args, calibration=None) -> QuantizedForest:
    with open(args.model) as fh:
        doc = json.load(fh)
    if doc.get("format") == "adarf-quantized-forest":
        return QuantizedForest.from_dict(doc)
    if calibration is None:
        raise ValueError(f"{args.model} is a float forest; pass --calibration to quantize it")
    return quantize_forest(Forest.from_dict(doc), calibration)


def _cost_params(args) -> CostParams:
    return CostParams.from_file(args.cost_config) if args.cost_config else calibrate_defaults()


def _policy(args) -> PolicyConfig:
    if args.policy is None:
        return PolicyConfig.full()
    return PolicyConfig(Policy(args.policy), alpha=args.alpha, eps_minus=args.eps_minus,
                        eps_plus=args.eps_plus, batch=args.batch)


def cmd_split(args) -> int:
    data = _read(args.data, args)
    train, test = train_test_split(data, args.test_fraction, args.seed)
    write_csv(train, args.train_out)
    write_csv(test, args.test_out)
    print(f"train: {train.n_samples} samples -> {args.train_out}")
    print(f"test: {test.n_samples} samples -> {args.test_out}")
    return 0


def cmd_train(args) -> int:
    data = _read(args.data, args)
    cfg = TrainConfig(num_trees=args.trees, max_depth=args.depth, features_per_split=args.features_per_split,
                      bootstrap=not args.no_bootstrap, rng_seed=args.seed,
                      min_samples_leaf=args.min_samples_leaf, n_jobs=args.jobs)
    forest = train_forest(data, cfg)
    forest.save(args.out)
    acc = float((forest.predict(data.features) == data.labels).mean())
    print("label mapping: " + ", ".join(f"{name} -> {i}" for i, name in enumerate(data.class_names)))
    print(f"trained {forest.n_trees} trees (depth <= {forest.max_depth}, {forest.n_nodes()} nodes), "
          f"train accuracy {acc:.4f} -> {args.out}")
    return 0


def cmd_quantize(args) -> int:
    forest = Forest.load(args.forest)
    calib = _read(args.calibration, args, classes=forest.class_names)
    qf = quantize_forest(forest, calib, leaf_one=args.leaf_one)
    qf.save(args.out)
    rep = comparison_consistency_check(forest, qf, calib)
    print(f"quantized {qf.num_trees} trees, {qf.n_nodes} nodes, {qf.n_leaves} leaves -> {args.out}")
    print(f"float/int16 disagreement on calibration data: {rep.n_disagree}/{rep.n_samples} ({rep.disagreement:.4%})")
    return 0


def cmd_eval(args) -> int:
    calib = None
    if args.calibration:
        calib = _read(args.calibration, args)
    qf = _load_model(args, calib)
    data = _read(args.data, args, classes=qf.class_names)
    policy = _policy(args)
    order = None
    if policy.kind is Policy.QWYC:
        order = engine.qwyc_order_trees(qf, data if calib is None else calib, policy.eps_minus, policy.eps_plus)
    res = engine.run_batch(qf, qf.quantize_input(data.features), policy, order=order)
    point = make_point(res, data.labels, qf.num_classes, _cost_params(args), policy)
    report([point], args.format, sys.stdout)
    if args.forest:
        rep = comparison_consistency_check(Forest.load(args.forest), qf, data)
        print(f"float/int16 disagreement: {rep.n_disagree}/{rep.n_samples} ({rep.disagreement:.4%})", file=sys.stderr)
    return 0


def cmd_sweep(args) -> int:
    calib = _read(args.calibration, args) if args.calibration else None
    qf = _load_model(args, calib)
    data = _read(args.data, args, classes=qf.class_names)
    if calib is not None and calib.class_names != qf.class_names:
        calib = _read(args.calibration, args, classes=qf.class_names)
    policy = Policy(args.policy)
    thresholds = _floats(args.alphas) if args.alphas else None
    if thresholds is None and args.grid_size:
        thresholds = tuple(float(v) for v in np.linspace(0.0, qf.num_trees, args.grid_size))
    spec = SweepSpec(policy=policy, thresholds=thresholds, batches=_ints(args.batch),
                     drop_targets=_floats(args.drop_targets), metric=args.metric)
    params = _cost_params(args)
    table = engine.leaf_table(qf, qf.quantize_input(data.features))
    result = run_sweep(qf, data, spec, params, calibration=calib, table=table)
    points = result.pareto if args.pareto_only else result.points
    if args.reduced:
        points = points + reduced_rf_baseline(qf, data, range(1, qf.num_trees + 1), params, table=table)
    report(points, args.format, args.out or sys.stdout)

    err = sys.stderr
    full = result.full
    print(f"full RF: {args.metric} {full.metric(args.metric):.4f}, {full.avg_trees:g} trees, "
          f"{full.avg_energy_uj:.5f} uJ", file=err)
    for drop in spec.drop_targets:
        t, e = result.min_trees[drop], result.min_energy[drop]
        if t is None:
            print(f"drop <= {drop:.2%}: no operating point", file=err)
            continue
        print(f"drop <= {drop:.2%}: min trees {t.avg_trees:.2f} (threshold {t.threshold}, B={t.batch}); "
              f"min energy {e.avg_energy_uj:.5f} uJ (threshold {e.threshold}, B={e.batch})", file=err)
    return 0


def cmd_export_c(args) -> int:
    calib = _read(args.calibration, args) if args.calibration else None
    qf = _load_model(args, calib)
    text = export_c(qf, args.prefix, runtime=args.runtime)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adarf", description="Adaptive random forests for microcontrollers.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="stratified train/test split of a CSV")
    p.add_argument("data")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-out", required=True)
    p.add_argument("--test-out", required=True)
    _add_data_options(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a random forest, write forest JSON")
    p.add_argument("data")
    p.add_argument("--trees", type=int, default=40)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--features-per-split", type=int, default=None)
    p.add_argument("--no-bootstrap", action="store_true")
    p.add_argument("--min-samples-leaf", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_data_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("quantize", help="convert forest JSON to the int16 flat layout")
    p.add_argument("--forest", required=True)
    p.add_argument("--calibration", required=True, help="CSV whose feature ranges set the input scaling")
    p.add_argument("--leaf-one", type=int, default=1 << 14)
    p.add_argument("--out", required=True)
    _add_data_options(p)
    p.set_defaults(func=cmd_quantize)

    def policy_options(p, batch_help, policy, fmt):
        p.add_argument("--policy", choices=[k.value for k in Policy if k is not Policy.FULL], default=policy)
        p.add_argument("--cost-config", default=None, help="key = value cost parameter file")
        p.add_argument("--format", choices=FORMATS, default=fmt)
        p.add_argument("--batch", default="1", help=batch_help)
        p.add_argument("--calibration", default=None,
                       help="CSV used to quantize a float model and to order trees for QWYC")

    p = sub.add_parser("eval", help="evaluate one operating point")
    p.add_argument("data")
    p.add_argument("--model", required=True, help="quantized forest JSON (or float forest with --calibration)")
    p.add_argument("--forest", default=None, help="float forest JSON for a float/int16 agreement check")
    p.add_argument("--alpha", type=float, default=float("inf"))
    p.add_argument("--eps-minus", type=float, default=0.0)
    p.add_argument("--eps-plus", type=float, default=1.0)
    policy_options(p, "batch size B", None, "table")
    _add_data_options(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="threshold sweep with Pareto front and accuracy-drop summary")
    p.add_argument("data")
    p.add_argument("--model", required=True)
    p.add_argument("--alphas", default=None, help="explicit comma-separated threshold grid")
    p.add_argument("--grid-size", type=int, default=None, help="evenly spaced thresholds over [0, N] (default 64)")
    p.add_argument("--drop-targets", default="0,0.005")
    p.add_argument("--metric", choices=("accuracy", "macro"), default="accuracy")
    p.add_argument("--pareto-only", action="store_true")
    p.add_argument("--reduced", action="store_true", help="append static prefix-forest points")
    p.add_argument("--out", default=None)
    policy_options(p, "comma-separated batch sizes", "agg-sm", "csv")
    _add_data_options(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export-c", help="emit the forest as a C header")
    p.add_argument("--model", required=True)
    p.add_argument("--prefix", default="rf")
    p.add_argument("--runtime", action="store_true", help="also emit the adaptive inference routine")
    p.add_argument("--calibration", default=None)
    p.add_argument("--out", default=None)
    _add_data_options(p)
    p.set_defaults(func=cmd_export_c)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "eval":
            args.batch = int(args.batch)
        return args.func(args)
    except (ParseError, ValueError, OSError) as exc:
        print(f"adarf {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
