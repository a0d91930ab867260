"""Command line interface: synth, oracle, train, postproc, report.

Configuration is a flat ``key = value`` text file; any CLI flag overrides the
file value. Every command exits 0 on success and nonzero with a one-line
diagnostic on error. All outputs are deterministic given (config, seed).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from paretofair import adaptive, baselines, oracle, report
from paretofair.data import GroupedDataset, load_csv, save_csv, split_dataset
from paretofair.model import MLPClassifier, TrainConfig, load_checkpoint, save_checkpoint


@dataclass
class ExperimentConfig:
    scenario: str | None = None
    data: str | None = None
    method: str = "paretofair"
    hidden: tuple = (64, 64)
    activation: str = "relu"
    loss: str = "brier"
    n: int = 20000
    split: tuple = (0.6, 0.2, 0.2)
    seed: int = 0
    out: str = "out"
    # inner SGD
    lr: float = 0.1
    batch_size: int = 128
    max_epochs: int = 60
    patience: int = 5
    # outer loop
    mu_init: float = 1.0
    k: float = 2.0
    gamma0: float = 0.5
    xi: float = 0.85
    zeta: float = 0.85
    max_outer_iters: int = 80
    max_consecutive_rejects: int = 15
    lr_min: float = 1e-6


_INT_KEYS = {"n", "seed", "batch_size", "max_epochs", "patience", "max_outer_iters", "max_consecutive_rejects"}
_FLOAT_KEYS = {"lr", "mu_init", "k", "gamma0", "xi", "zeta", "lr_min"}
_TUPLE_INT_KEYS = {"hidden"}
_TUPLE_FLOAT_KEYS = {"split"}
_STR_KEYS = {"scenario", "data", "method", "activation", "loss", "out"}


def parse_config_file(path) -> dict:
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    return values


def build_config(file_values: dict, overrides: dict) -> ExperimentConfig:
    cfg = ExperimentConfig()
    merged = dict(file_values)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    for key, val in merged.items():
        if key in _INT_KEYS:
            setattr(cfg, key, int(val))
        elif key in _FLOAT_KEYS:
            setattr(cfg, key, float(val))
        elif key in _TUPLE_INT_KEYS:
            setattr(cfg, key, tuple(int(v) for v in str(val).split(",") if v))
        elif key in _TUPLE_FLOAT_KEYS:
            setattr(cfg, key, tuple(float(v) for v in str(val).split(",")))
        elif key in _STR_KEYS:
            setattr(cfg, key, str(val))
        else:
            raise ValueError(f"unknown config key '{key}'")
    return cfg


def _load_experiment_data(cfg: ExperimentConfig) -> GroupedDataset:
    if cfg.data:
        return load_csv(cfg.data)
    if cfg.scenario:
        spec = oracle.make_scenario(oracle.load_scenario(cfg.scenario))
        return oracle.sample_dataset(spec, cfg.n, cfg.seed)
    raise ValueError("config needs either 'data' (CSV path) or 'scenario' (scenario file)")


def cmd_synth(args) -> int:
    params = oracle.load_scenario(args.scenario)
    spec = oracle.make_scenario(params)
    ds = oracle.sample_dataset(spec, args.n, args.seed)
    save_csv(ds, args.out)
    print(f"wrote {ds.n} samples to {args.out}")
    return 0


def cmd_oracle(args) -> int:
    params = oracle.load_scenario(args.scenario)
    spec = oracle.make_scenario(params)
    front = oracle.trace_front(spec, args.num_lambda)
    os.makedirs(args.out, exist_ok=True)
    front_path = os.path.join(args.out, "front.csv")
    refs_path = os.path.join(args.out, "reference_points.csv")
    oracle.write_front_csv(front, front_path)
    oracle.write_reference_csv(oracle.reference_points(spec, args.num_lambda), refs_path)
    pf = oracle.pareto_fair_point(front)
    print(
        f"front: {len(front)} points -> {front_path}; "
        f"pareto-fair risks {np.array2string(pf.risks.risks, precision=4)} gap {pf.max_gap:.4f}"
    )
    return 0


def cmd_train(args) -> int:
    file_values = parse_config_file(args.config) if args.config else {}
    overrides = {"scenario": args.scenario, "data": args.data, "method": args.method,
                 "seed": args.seed, "out": args.out}
    cfg = build_config(file_values, overrides)
    if cfg.method not in ("naive", "rebalanced", "paretofair"):
        raise ValueError(f"unknown method '{cfg.method}'")
    ds = _load_experiment_data(cfg)
    train, val, test = split_dataset(ds, cfg.split, seed=cfg.seed)
    dims = [ds.dim, *cfg.hidden, ds.num_classes]
    model = MLPClassifier(dims, activation=cfg.activation, seed=cfg.seed)
    tc = TrainConfig(
        lr=cfg.lr, batch_size=cfg.batch_size, max_epochs=cfg.max_epochs,
        patience=cfg.patience, seed=cfg.seed,
    )
    os.makedirs(cfg.out, exist_ok=True)
    if cfg.method == "naive":
        baselines.train_naive(model, train, val, tc, cfg.loss)
    elif cfg.method == "rebalanced":
        baselines.train_rebalanced(model, train, val, tc, cfg.loss)
    else:
        hp = adaptive.PFHyperparams(
            mu_init=cfg.mu_init, k=cfg.k, gamma0=cfg.gamma0, xi=cfg.xi, zeta=cfg.zeta,
            lr0=cfg.lr, max_outer_iters=cfg.max_outer_iters,
            max_consecutive_rejects=cfg.max_consecutive_rejects, lr_min=cfg.lr_min, train=tc,
        )
        _model, trace = adaptive.pareto_fair_optimize(train, val, model, hp, cfg.loss)
        adaptive.write_trace_csv(trace, os.path.join(cfg.out, "trace.csv"))
    save_checkpoint(model, os.path.join(cfg.out, "model.ckpt"))
    metrics = report.compute_metrics(model, test, cfg.method)
    metrics_path = os.path.join(cfg.out, "metrics.csv")
    report.save_metrics_csv(metrics, metrics_path)
    print(f"{cfg.method}: test brier per group {np.array2string(metrics.brier, precision=4)} -> {metrics_path}")
    return 0


def cmd_postproc(args) -> int:
    model = load_checkpoint(args.checkpoint)
    ds = load_csv(args.data)
    fit_set, holdout = split_dataset(ds, (0.5, 0.5), seed=args.seed)
    decisions = model.decisions(fit_set.features)
    rule = baselines.fit_equalizing_rule(
        decisions, (decisions == fit_set.targets).astype(int), fit_set.groups
    )
    os.makedirs(args.out, exist_ok=True)
    baselines.save_rule_csv(rule, os.path.join(args.out, "rule.csv"))
    base = model.decisions(holdout.features)
    post = baselines.apply_rule(rule, base, holdout.groups, seed=args.seed)
    pre_metrics = report.compute_metrics(model, holdout, "pre_rule")
    post_metrics = report.metrics_from_decisions(post, holdout, pre_metrics.brier, "post_rule")
    report.save_metrics_csv(pre_metrics, os.path.join(args.out, "metrics_pre.csv"))
    report.save_metrics_csv(post_metrics, os.path.join(args.out, "metrics_post.csv"))
    print(
        f"keep probs {np.array2string(rule.keep_prob, precision=4)}; "
        f"holdout accuracies {np.array2string(post_metrics.accuracy, precision=4)}"
    )
    return 0


def cmd_report(args) -> int:
    if not args.metrics:
        raise ValueError("no metrics files given")
    header, rows = report.combine_reports(args.metrics, out_csv=args.out)
    print(report.format_table(header, rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="paretofair", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="sample a dataset CSV from a scenario file")
    s.add_argument("--scenario", required=True)
    s.add_argument("--n", type=int, default=20000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("oracle", help="trace the exact Pareto front of a scenario")
    s.add_argument("--scenario", required=True)
    s.add_argument("--num-lambda", type=int, default=1001)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("train", help="train a model (naive, rebalanced or paretofair)")
    s.add_argument("--config", default=None)
    s.add_argument("--scenario", default=None)
    s.add_argument("--data", default=None)
    s.add_argument("--method", default=None, choices=["naive", "rebalanced", "paretofair"])
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("postproc", help="fit and apply an accuracy-equalizing rule")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_postproc)

    s = sub.add_parser("report", help="combine metrics CSVs into one table")
    s.add_argument("metrics", nargs="*")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_report)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"paretofair {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
