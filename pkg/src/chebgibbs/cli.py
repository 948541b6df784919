"""Command-line entry point for reproducible experiments.

Subcommands: `approx` (scalar Gibbs measurements), `train` (node
classification), `homophily` (graph diagnostic), `filter` (apply a filter
spec to one feature column), and `sbm` (materialize a synthetic dataset
directory).  Every file-writing run leaves a manifest.json next to its
outputs.  Exit codes: 0 success, 2 usage error, 1 runtime error; runtime
errors go to stderr as JSON.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import tempfile
import time
from datetime import datetime, timezone

import numpy as np
import scipy

from . import __version__
from .data_io import load_dataset_dir, random_split, planetoid_split, sbm_generate, save_dataset_dir
from .graph_core import node_homophily, renormalized_adjacency
from .model import (
    TrainConfig,
    evaluate,
    evaluate_ablation,
    history_to_csv,
    save_checkpoint,
    train,
    train_ablation,
)
from .nn_core import array_to_doc
from .poly_filters import DAMPINGS, FilterSpec, apply_poly_filter, scalar_response
from .scalar_approx import BUILTIN_TARGETS, builtin_target, measure_gibbs
from .spectral_oracle import apply_filter_spectral, eigendecompose

__all__ = ["main"]

ORACLE_GRAPH_CAP = 64


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    items = [t for t in text.split(",") if t.strip()]
    if not items:
        raise UsageError("expected a nonempty comma-separated list of integers")
    try:
        return [int(t) for t in items]
    except ValueError as exc:
        raise UsageError(f"bad integer list {text!r}") from exc


def _damping_list(text: str) -> list[str]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise UsageError("expected a nonempty comma-separated list of damping kinds")
    for item in items:
        if item not in DAMPINGS:
            raise UsageError(f"unknown damping {item!r}; choose from {','.join(DAMPINGS)}")
    return items


def _write_json_atomic(path, doc) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_manifest(out_dir, command, args, outputs, started_utc, wall_s) -> None:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    doc = {
        "command": command,
        "config": config,
        "seed": config.get("seed"),
        "versions": {
            "chebgibbs": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "started_utc": started_utc,
        "wall_clock_s": wall_s,
        "outputs": [os.path.basename(p) for p in outputs],
    }
    _write_json_atomic(os.path.join(out_dir, "manifest.json"), doc)


def _split_for_run(ds, args, run_seed: int):
    if ds.splits:
        return ds
    if getattr(args, "split", "random") == "planetoid":
        return planetoid_split(ds, per_class_train=args.per_class_train,
                               val_size=args.val_size, test_size=args.test_size,
                               seed=run_seed)
    return random_split(ds, (0.6, 0.2, 0.2), seed=run_seed)


# ---------------------------------------------------------------------------


def cmd_approx(args) -> int:
    try:
        target = builtin_target(args.target)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    orders = _int_list(args.k)
    dampings = _damping_list(args.damping)

    started = datetime.now(timezone.utc).isoformat()
    t0 = time.monotonic()
    os.makedirs(args.out, exist_ok=True)
    report_path = os.path.join(args.out, "report.csv")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write("K,damping,sup_error_away,overshoot\n")
        for K in orders:
            for damping in dampings:
                rep = measure_gibbs(target, K, damping, grid=args.grid,
                                    exclusion=args.exclusion, m=args.lanczos_m,
                                    quad_nodes=args.quad_nodes)
                fh.write(f"{rep.K},{rep.damping},{rep.sup_error_away:.17g},"
                         f"{rep.overshoot:.17g}\n")
    outputs = [report_path]
    if args.plot:
        from .plotting import render_gibbs_figure

        figure_path = os.path.join(args.out, "gibbs.png")
        render_gibbs_figure(target, orders, dampings, figure_path,
                            lanczos_m=args.lanczos_m, quad_nodes=args.quad_nodes)
        outputs.append(figure_path)
    _write_manifest(args.out, "approx", args, outputs, started, time.monotonic() - t0)
    print(json.dumps({"report": report_path, "outputs": [os.path.basename(p) for p in outputs]}))
    return 0


def cmd_train(args) -> int:
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.monotonic()
    base = load_dataset_dir(args.data)
    os.makedirs(args.out, exist_ok=True)

    test_accs, val_accs, seeds = [], [], []
    histories = {}
    outputs = []
    last_params = None
    for i in range(args.seeds):
        run_seed = args.seed + i
        ds = _split_for_run(base, args, run_seed)
        config = TrainConfig(
            lr=args.lr, l2_rate=args.l2, dropout_rate=args.dropout,
            hidden_dim=args.hidden, K=args.k, max_epochs=args.max_epochs,
            patience=args.patience, seed=run_seed, damping=args.damping,
            lanczos_m=args.lanczos_m, gso_mode=args.gso,
            homophily_threshold=args.homophily_threshold,
            homophily_train_only=args.train_only,
            lambda_max_mode=args.lambda_max, coeff_init=args.coeff_init,
            activation=args.activation,
        )
        if args.arch == "decoupled":
            params, history = train(ds, config)
            acc = evaluate(params, ds, ds.splits["test"])
        else:
            params, history = train_ablation(ds, config)
            acc = evaluate_ablation(params, ds, ds.splits["test"])
        last_params = (args.arch, params)
        test_accs.append(acc)
        val_accs.append(max((rec["val_acc"] for rec in history), default=float("nan")))
        seeds.append(run_seed)
        histories[f"seed{run_seed}"] = history
        hist_path = os.path.join(args.out, f"history_seed{run_seed}.csv")
        history_to_csv(history, hist_path)
        outputs.append(hist_path)

    accs = np.asarray(test_accs)
    std = float(accs.std(ddof=1)) if accs.size > 1 else 0.0
    metrics = {
        "dataset": base.name,
        "arch": args.arch,
        "seeds": seeds,
        "test_accs": test_accs,
        "mean_test_acc": float(accs.mean()),
        "std_test_acc": std,
        "ci95_test_acc": 1.96 * std / np.sqrt(accs.size) if accs.size > 1 else 0.0,
        "best_val_accs": val_accs,
    }
    metrics_path = os.path.join(args.out, "metrics.json")
    _write_json_atomic(metrics_path, metrics)
    outputs.append(metrics_path)

    ckpt_path = os.path.join(args.out, "checkpoint.json")
    arch, params = last_params
    if arch == "decoupled":
        save_checkpoint(params, ckpt_path)
    else:
        doc = {
            "layers": [{"W": array_to_doc(l.W), "b": array_to_doc(l.b)}
                       for l in params.layers],
            "damping": params.damping, "K": params.K, "m": params.m,
            "activation": params.activation, "lambda_max": params.lambda_max,
        }
        _write_json_atomic(ckpt_path, doc)
    outputs.append(ckpt_path)

    if args.plot:
        from .plotting import render_history_figure

        fig_path = os.path.join(args.out, "training_curves.png")
        render_history_figure(histories, fig_path)
        outputs.append(fig_path)

    _write_manifest(args.out, "train", args, outputs, started, time.monotonic() - t0)
    print(json.dumps(metrics))
    return 0


def cmd_homophily(args) -> int:
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.monotonic()
    ds = load_dataset_dir(args.data)
    mask = None
    if args.train_only:
        if "train" not in ds.splits:
            raise ValueError("--train-only requires a dataset with a train split")
        mask = ds.splits["train"]
    rep = node_homophily(ds.graph, ds.y, mask=mask)
    doc = {
        "h": rep.h,
        "n_isolated": rep.n_isolated,
        "gso_sign": 1 if rep.h >= args.homophily_threshold else -1,
    }
    print(json.dumps(doc))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        out_path = os.path.join(args.out, "homophily.json")
        _write_json_atomic(out_path, doc)
        _write_manifest(args.out, "homophily", args, [out_path], started,
                        time.monotonic() - t0)
    return 0


def cmd_filter(args) -> int:
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.monotonic()
    ds = load_dataset_dir(args.data)
    with open(args.spec, "r", encoding="utf-8") as fh:
        spec = FilterSpec.from_json(fh.read())
    if not 0 <= args.column < ds.X.shape[1]:
        raise ValueError(f"signal column {args.column} outside feature width {ds.X.shape[1]}")

    S = renormalized_adjacency(ds.graph, 1.0)
    if args.gso == "neg":
        S = S.negated()
    elif args.gso == "auto":
        if node_homophily(ds.graph, ds.y).h < args.homophily_threshold:
            S = S.negated()

    signal = np.asarray(ds.X[:, args.column], dtype=np.float64)
    filtered = apply_poly_filter(spec, S, signal)
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "filtered.csv")
    np.savetxt(out_path, filtered, delimiter=",", fmt="%.17g")
    outputs = [out_path]

    result = {"filtered": out_path}
    if args.oracle:
        if ds.n > ORACLE_GRAPH_CAP:
            raise ValueError("oracle restricted to small graphs")
        es = eigendecompose(S.to_dense())
        reference = apply_filter_spectral(es, lambda lam: scalar_response(spec, lam), signal)
        result["oracle_max_abs_deviation"] = float(np.max(np.abs(filtered - reference)))

    _write_manifest(args.out, "filter", args, outputs, started, time.monotonic() - t0)
    print(json.dumps(result))
    return 0


def cmd_sbm(args) -> int:
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.monotonic()
    ds = sbm_generate(args.n, args.classes, args.p_in, args.p_out,
                      feature_dim=args.feature_dim, feature_noise=args.noise,
                      seed=args.seed)
    save_dataset_dir(ds, args.out)
    files = [os.path.join(args.out, f) for f in ("edges.txt", "features.csv", "labels.txt")]
    _write_manifest(args.out, "sbm", args, files, started, time.monotonic() - t0)
    print(json.dumps({"dataset": ds.name, "out": args.out,
                      "nodes": ds.n, "edges": ds.graph.num_edges}))
    return 0


# ---------------------------------------------------------------------------


def _add_common_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--damping", default="jackson",
                   help="damping kind: none, jackson, or lanczos")
    p.add_argument("--lanczos-m", type=int, default=1, dest="lanczos_m")
    p.add_argument("--homophily-threshold", type=float, default=0.5,
                   dest="homophily_threshold")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chebgibbs",
        description="Chebyshev graph filters with Gibbs damping factors",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("approx", help="measure damped partial sums of a scalar target")
    p.add_argument("--target", required=True,
                   help=f"one of: {', '.join(sorted(BUILTIN_TARGETS))}")
    p.add_argument("--k", required=True, help="comma-separated list of orders")
    p.add_argument("--damping", default="none,jackson",
                   help="comma-separated damping kinds")
    p.add_argument("--lanczos-m", type=int, default=1, dest="lanczos_m")
    p.add_argument("--grid", type=int, default=100_000)
    p.add_argument("--exclusion", type=float, default=0.05)
    p.add_argument("--quad-nodes", type=int, default=None, dest="quad_nodes",
                   help="coefficient quadrature nodes (default: converged)")
    p.add_argument("--out", required=True)
    p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("train", help="train a node classifier on a dataset directory")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--arch", choices=("decoupled", "coupled"), default="decoupled",
                   help="decoupled filter-after-MLP model or coupled ablation layers")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--l2", type=float, default=5e-4)
    p.add_argument("--dropout", type=float, default=0.6)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--max-epochs", type=int, default=1000, dest="max_epochs")
    p.add_argument("--patience", type=int, default=30)
    p.add_argument("--seeds", type=int, default=1, help="number of runs")
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--lambda-max", choices=("power", "fixed2"), default="power",
                   dest="lambda_max")
    p.add_argument("--gso", choices=("auto", "pos", "neg"), default="auto")
    p.add_argument("--coeff-init", choices=("ones", "normal"), default="ones",
                   dest="coeff_init")
    p.add_argument("--activation", choices=("relu", "silu"), default="relu",
                   help="coupled-layer activation")
    p.add_argument("--train-only", action="store_true", dest="train_only",
                   help="compute homophily from training labels only")
    p.add_argument("--split", choices=("random", "planetoid"), default="random",
                   help="split generator when the dataset has none")
    p.add_argument("--per-class-train", type=int, default=20, dest="per_class_train")
    p.add_argument("--val-size", type=int, default=500, dest="val_size")
    p.add_argument("--test-size", type=int, default=1000, dest="test_size")
    p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True)
    _add_common_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("homophily", help="report node homophily and the GSO sign")
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--train-only", action="store_true", dest="train_only")
    p.add_argument("--homophily-threshold", type=float, default=0.5,
                   dest="homophily_threshold")
    p.set_defaults(func=cmd_homophily)

    p = sub.add_parser("filter", help="apply a filter spec to one feature column")
    p.add_argument("--data", required=True)
    p.add_argument("--spec", required=True, help="path to a FilterSpec JSON document")
    p.add_argument("--column", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--gso", choices=("auto", "pos", "neg"), default="pos")
    p.add_argument("--homophily-threshold", type=float, default=0.5,
                   dest="homophily_threshold")
    p.add_argument("--oracle", action="store_true",
                   help="check the spatial result against the dense spectral oracle")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("sbm", help="generate a stochastic block model dataset directory")
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--p-in", type=float, default=0.05, dest="p_in")
    p.add_argument("--p-out", type=float, default=0.005, dest="p_out")
    p.add_argument("--feature-dim", type=int, default=None, dest="feature_dim")
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sbm)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    threads = os.environ.get("CHEBGIBBS_THREADS")
    try:
        if threads:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=int(threads)):
                return args.func(args)
        return args.func(args)
    except UsageError as exc:
        print(json.dumps({"error": str(exc), "type": "usage"}), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
