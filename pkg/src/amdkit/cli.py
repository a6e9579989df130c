"""Command-line pipeline: gen-data | train | analyze | report.

`report` chains the other three under a named preset so one command takes a
seed to the full CSV bundle. All outputs are deterministic functions of the
manifest (inputs, config, version): files are written atomically, floats at
full round-trip precision, JSON with sorted keys, and no timestamps anywhere.

Relative --out-dir/--out paths can be rerooted with the AMDKIT_OUTPUT_ROOT
environment variable. Exit codes: 0 success, 2 validation error, 3 runtime
error (training divergence, solver failure).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__, amd, infotheory, similarity
from ._util import atomic_write_text, canonical_json, fmt, sha256_of_file
from .datasets import (DatasetError, Dataset, SyntheticConfig,
                       generate_synthetic, load_dataset, load_dataset_csv,
                       save_dataset)
from .isc import (Hyperparams, ISCModel, ModelDims, TrainingDivergence,
                  load_checkpoint, save_checkpoint, task_acquisition_order,
                  train)

DEFAULT_THRESHOLDS = tuple(round(0.05 * i, 2) for i in range(11))
ACQ_MEASURES = ("joint_entropy", "marginal_entropy_sum", "l1_norm")


def preset_config(name: str, seed: int) -> tuple[SyntheticConfig, ModelDims, Hyperparams]:
    if name == "desk":
        return (SyntheticConfig(n_items=40, n_classes=8, features_per_class=25,
                                positive_rate=0.6, class_expression_rate=0.9,
                                seed=seed),
                ModelDims(d_item=32, d_task=10, d_hidden=32),
                # 320 pairs/epoch is 5 updates; 600 epochs gives every task
                # room to cross threshold (the large preset needs far fewer)
                Hyperparams(lr=0.05, epochs=600, batch_size=64, seed=seed))
    if name == "paper-shape":
        # 36 classes x ~80 features totalling 2896, embeddings at full width
        counts = (81,) * 16 + (80,) * 20
        return (SyntheticConfig(n_items=350, n_classes=36, features_per_class=80,
                                positive_rate=0.6, class_expression_rate=0.9,
                                seed=seed, class_feature_counts=counts),
                ModelDims(d_item=64, d_task=24, d_hidden=64),
                Hyperparams(lr=0.05, epochs=150, batch_size=64, seed=seed))
    raise DatasetError(f"unknown preset {name!r} (expected desk or paper-shape)")


def _resolve(path: str | Path) -> Path:
    path = Path(path)
    root = os.environ.get("AMDKIT_OUTPUT_ROOT")
    if root and not path.is_absolute():
        return Path(root) / path
    return path


def _load_dataset_any(path: Path) -> Dataset:
    if path.suffix == ".csv":
        return load_dataset_csv(path)
    return load_dataset(path)


def load_trace_csv(path: Path, task_names: tuple[str, ...]) -> np.ndarray:
    """Rebuild the (epochs, T) accuracy matrix from a trace file."""
    col = {name: t for t, name in enumerate(task_names)}
    rows: dict[int, dict[int, float]] = {}
    with open(path) as f:
        header = f.readline().strip()
        if header != "epoch,task,accuracy,loss":
            raise DatasetError(f"{path}: unexpected trace header {header!r}")
        for ln in f:
            epoch_s, task, acc_s, _ = ln.rstrip("\n").split(",")
            if task not in col:
                raise DatasetError(f"{path}: unknown task {task!r}")
            rows.setdefault(int(epoch_s), {})[col[task]] = float(acc_s)
    epochs = max(rows)
    acc = np.zeros((epochs, len(task_names)))
    for e, per_task in rows.items():
        for t, v in per_task.items():
            acc[e - 1, t] = v
    return acc


@dataclass
class AnalysisResult:
    """In-memory view of everything cmd_analyze wrote to disk."""

    out_dir: Path
    mode: str
    posteriors: list[amd.MaskDistribution]
    metrics: list[infotheory.TaskRepresentationMetrics]
    mi: infotheory.MIReport
    matrices: dict[str, similarity.DistanceMatrix]
    rsa: similarity.RSAResult
    acquisition: list[tuple[float, str, float]]


def _task_grids(model: ISCModel, ds: Dataset, grid_dir: Path) -> list[amd.AccuracyGrid]:
    """Full per-task accuracy grids, cached as CSV keyed by model hash."""
    grid_dir.mkdir(parents=True, exist_ok=True)
    mhash = amd.model_hash(model)
    grids = []
    for t, name in enumerate(ds.task_names):
        path = grid_dir / f"grid_{name}.csv"
        grid = None
        if path.exists():
            cached = amd.load_grid_csv(path)
            if cached.model_hash == mhash and cached.task == t:
                grid = cached
        if grid is None:
            grid = amd.compute_grid(model, ds, t)
            grid.save_csv(path)
        grids.append(grid)
    return grids


def run_analysis(ds: Dataset, model: ISCModel, trace_accuracy: np.ndarray,
                 out_dir: Path, mode: str = "odds_ratio",
                 exact_limit: int = amd.EXACT_LIMIT,
                 mcmc_samples: int = 200_000, mcmc_burn_in: int = 10_000,
                 mcmc_seed: int = 0,
                 thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS,
                 mpc_method: str = "pearson") -> AnalysisResult:
    """Produce the full analysis bundle for one trained model and mode."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    d = model.dims.d_task
    exact = d <= exact_limit

    grids = _task_grids(model, ds, out_dir / "grids")

    posteriors = []
    for t in range(ds.n_tasks):
        if exact:
            dist = amd.posterior_exact(model, ds, t, mode, exact_limit, grid=grids[t])
        else:
            dist = amd.posterior_mcmc(model, ds, t, mode, mcmc_samples,
                                      mcmc_burn_in, mcmc_seed + t)
        dist.save_csv(out_dir / f"posterior_task_{ds.task_names[t]}.csv")
        posteriors.append(dist)
    atomic_write_text(out_dir / "posteriors.meta.json", canonical_json(
        {ds.task_names[t]: asdict(p.provenance)
         for t, p in enumerate(posteriors)}))

    metrics = [infotheory.metrics_bundle(p) for p in posteriors]
    atomic_write_text(out_dir / "metrics.json", canonical_json(
        {name: {
            "joint_entropy_bits": m.joint_entropy_bits,
            "marginal_prob": m.marginal_prob.tolist(),
            "marginal_entropy_bits": m.marginal_entropy_bits.tolist(),
            "importance": m.importance.tolist(),
            "distributedness": m.distributedness,
            "entropy_drop": m.entropy_drop,
        } for name, m in zip(ds.task_names, metrics)}))

    dense = [infotheory.densify(p) for p in posteriors]
    tp = infotheory.reverse_task_posterior(dense)
    mi = infotheory.normalized_mi(tp)

    lines = ["task,unit,marginal_prob,importance,In_unit"]
    for name, m in zip(ds.task_names, metrics):
        for i in range(d):
            lines.append(f"{name},{i},{fmt(m.marginal_prob[i])},"
                         f"{fmt(m.importance[i])},{fmt(mi.In_unit[i])}")
    atomic_write_text(out_dir / "unit_table.csv", "\n".join(lines) + "\n")

    lines = ["task,unit,h_value,importance"]
    for t, (name, m) in enumerate(zip(ds.task_names, metrics)):
        h = model.task_representation(t)
        for i in range(d):
            lines.append(f"{name},{i},{fmt(h[i])},{fmt(m.importance[i])}")
    atomic_write_text(out_dir / "importance_scatter.csv", "\n".join(lines) + "\n")

    lines = ["scope,In"]
    lines.append(f"full,{fmt(mi.In_full)}")
    for i in range(d):
        lines.append(f"unit{i:02d},{fmt(mi.In_unit[i])}")
    atomic_write_text(out_dir / "mi_summary.csv", "\n".join(lines) + "\n")

    if exact:
        geo_grid = np.stack([g.geo_mean() for g in grids], axis=1)
    else:
        shared = np.unique(np.concatenate([p.support for p in posteriors]))
        geo_grid = np.stack(
            [amd.compute_grid(model, ds, t, shared).geo_mean()
             for t in range(ds.n_tasks)], axis=1)

    w_matrix, w_meta = similarity.wasserstein_matrix(posteriors, ds.task_names)
    cos_matrix, euc_matrix = similarity.vector_distances(model, ds.task_names)
    matrices = {
        "sym_kl": similarity.sym_kl_matrix(posteriors, ds.task_names),
        "wasserstein": w_matrix,
        "mpc": similarity.mpc_matrix(geo_grid, ds.task_names, mpc_method),
        "cosine": cos_matrix,
        "euclidean": euc_matrix,
    }
    for mid, mat in matrices.items():
        mat.save_csv(out_dir / f"distance_{mid}.csv")
        meta = {"metric_id": mid, "orientation": mat.orientation}
        if mid == "wasserstein":
            meta.update(w_meta)
        if mid == "mpc":
            meta["method"] = mpc_method
        atomic_write_text(out_dir / f"distance_{mid}.meta.json",
                          canonical_json(meta))

    rsa_result = similarity.rsa(list(matrices.values()))
    rsa_result.save_csv(out_dir / "rsa.csv")

    me_sum = np.array([m.marginal_entropy_bits.sum() for m in metrics])
    joint = np.array([m.joint_entropy_bits for m in metrics])
    l1 = np.array([np.abs(model.task_representation(t)).sum()
                   for t in range(ds.n_tasks)])
    measure_vec = {"joint_entropy": joint, "marginal_entropy_sum": me_sum,
                   "l1_norm": l1}
    acquisition = []
    lines = ["threshold,measure,spearman"]
    for thr in thresholds:
        ranks = task_acquisition_order(trace_accuracy, thr)
        for measure in ACQ_MEASURES:
            try:
                rho = similarity.spearman(measure_vec[measure], ranks)
            except ValueError:
                rho = float("nan")
            acquisition.append((thr, measure, rho))
            lines.append(f"{fmt(thr)},{measure},{fmt(rho)}")
    atomic_write_text(out_dir / "acquisition_correlation.csv",
                      "\n".join(lines) + "\n")

    config = {
        "mode": mode, "exact_limit": exact_limit,
        "mcmc_samples": mcmc_samples, "mcmc_burn_in": mcmc_burn_in,
        "mcmc_seed": mcmc_seed, "thresholds": list(thresholds),
        "mpc_method": mpc_method,
    }
    outputs = {}
    for path in sorted(out_dir.rglob("*")):
        if path.is_file() and path.name != "manifest.json":
            outputs[str(path.relative_to(out_dir))] = sha256_of_file(path)
    manifest = {
        "tool": "amdkit", "version": __version__, "config": config,
        "inputs": {"dataset_fingerprint": ds.fingerprint(),
                   "model_hash": amd.model_hash(model)},
        "outputs": outputs,
    }
    atomic_write_text(out_dir / "manifest.json", canonical_json(manifest))

    return AnalysisResult(out_dir=out_dir, mode=mode, posteriors=posteriors,
                          metrics=metrics, mi=mi, matrices=matrices,
                          rsa=rsa_result, acquisition=acquisition)


def cmd_gen_data(args) -> int:
    if args.preset:
        config, _, _ = preset_config(args.preset, args.seed)
    else:
        config = SyntheticConfig(
            n_items=args.items, n_classes=args.classes,
            features_per_class=args.features_per_class,
            positive_rate=args.positive_rate,
            class_expression_rate=args.expression_rate, seed=args.seed)
    config.validate()
    ds = generate_synthetic(config)
    out = _resolve(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, out)
    print(f"wrote {out}: {ds.n_items} items, {ds.n_tasks} classes, "
          f"{ds.n_features} features")
    return 0


def cmd_train(args) -> int:
    ds = _load_dataset_any(_resolve(args.dataset))
    hyper = Hyperparams(lr=args.lr, epochs=args.epochs,
                        batch_size=args.batch_size, seed=args.seed)
    hyper.validate()
    dims = ModelDims(d_item=args.d_item, d_task=args.d_task,
                     d_hidden=args.d_hidden)
    model, trace = train(ds, hyper, dims)
    out_dir = _resolve(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, hyper, out_dir / "checkpoint.json")
    trace.save_csv(out_dir / "trace.csv")
    print(f"trained {hyper.epochs} epochs; final accuracy per task:")
    for t, name in enumerate(ds.task_names):
        print(f"  {name}: {trace.accuracy[-1, t]:.4f}")
    print(f"wrote {out_dir / 'checkpoint.json'} and {out_dir / 'trace.csv'}")
    return 0


def cmd_analyze(args) -> int:
    ds = _load_dataset_any(_resolve(args.dataset))
    ckpt_path = _resolve(args.checkpoint)
    model, _ = load_checkpoint(ckpt_path)
    if model.dataset_fingerprint != ds.fingerprint():
        raise amd.FingerprintMismatch(
            f"checkpoint {ckpt_path} was not trained on dataset {args.dataset}")
    trace_path = _resolve(args.trace) if args.trace else ckpt_path.parent / "trace.csv"
    trace_accuracy = load_trace_csv(trace_path, ds.task_names)
    thresholds = tuple(float(x) for x in args.thresholds.split(","))
    result = run_analysis(
        ds, model, trace_accuracy, _resolve(args.out_dir), mode=args.mode,
        exact_limit=args.exact_limit, mcmc_samples=args.mcmc_samples,
        mcmc_burn_in=args.mcmc_burn_in, mcmc_seed=args.mcmc_seed,
        thresholds=thresholds, mpc_method=args.mpc_method)
    print(f"analysis ({args.mode}) written to {result.out_dir}")
    return 0


def cmd_report(args) -> int:
    out_dir = _resolve(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config, dims, hyper = preset_config(args.preset, args.seed)
    if args.epochs is not None:
        hyper = replace(hyper, epochs=args.epochs)
    ds = generate_synthetic(config)
    save_dataset(ds, out_dir / "dataset.json")
    model, trace = train(ds, hyper, dims)
    save_checkpoint(model, hyper, out_dir / "checkpoint.json")
    trace.save_csv(out_dir / "trace.csv")
    modes = list(amd.MODES) if args.modes == "both" else [args.modes]
    for mode in modes:
        run_analysis(ds, model, trace.accuracy, out_dir / f"analysis_{mode}",
                     mode=mode)
    print(f"report for preset {args.preset!r} (seed {args.seed}) in {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amdkit",
        description="Train small multitask networks and analyze their "
                    "task representations through ablation-mask posteriors.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    p.add_argument("--preset", choices=["desk", "paper-shape"])
    p.add_argument("--items", type=int, default=40)
    p.add_argument("--classes", type=int, default=8)
    p.add_argument("--features-per-class", type=int, default=25)
    p.add_argument("--positive-rate", type=float, default=0.6)
    p.add_argument("--expression-rate", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a model on a dataset file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--epochs", type=int, default=150)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--d-item", type=int, default=32)
    p.add_argument("--d-task", type=int, default=10)
    p.add_argument("--d-hidden", type=int, default=32)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("analyze", help="run the full analysis bundle")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--trace", help="trace CSV (default: next to checkpoint)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--mode", choices=list(amd.MODES), default="odds_ratio")
    p.add_argument("--exact-limit", type=int, default=amd.EXACT_LIMIT)
    p.add_argument("--mcmc-samples", type=int, default=200_000)
    p.add_argument("--mcmc-burn-in", type=int, default=10_000)
    p.add_argument("--mcmc-seed", type=int, default=0)
    p.add_argument("--thresholds",
                   default=",".join(str(t) for t in DEFAULT_THRESHOLDS))
    p.add_argument("--mpc-method", choices=["pearson", "spearman"],
                   default="pearson")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="gen-data + train + analyze, one preset")
    p.add_argument("--preset", choices=["desk", "paper-shape"], default="desk")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--epochs", type=int, help="override the preset epoch count")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--modes", choices=["both", *amd.MODES], default="both")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, amd.FingerprintMismatch, FileNotFoundError,
            ValueError, IndexError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (TrainingDivergence, RuntimeError, FloatingPointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
