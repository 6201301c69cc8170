# src/cli/main.py
'''
Command-line harness: generate datasets, train an embedder, evaluate it, sweep the
clustering parameter.

    python -m src.cli generate --out data --n-trains 2000
    python -m src.cli train --data data --out runs/transformer --model transformer
    python -m src.cli evaluate --data data --checkpoint runs/transformer/checkpoints/best --out runs/transformer/eval
    python -m src.cli sweep --data data --checkpoint runs/transformer/checkpoints/best --grid 5,10,20 --out runs/sweep

Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.
'''
from __future__ import annotations
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import orjson
import pandas as pd

from config.settings import MANIFEST_FILE, SPLIT_FILES, configure_logging
from src.cli.profile import (
    RunConfig,
    RunProfile,
    load_profile,
    resolve_clustering,
    resolve_loss,
    resolve_model,
    resolve_scenario,
    resolve_train,
)
from src.clustering.hdbscan import hdbscan_config
from src.clustering.pipeline import cluster_dataset, embed_dataset
from src.metrics.evaluation import evaluate_dataset
from src.metrics.reports import predictions_table, write_predictions, write_reports
from src.models.config import MODEL_KINDS, model_config_from_dict
from src.models.model_registry import get_model
from src.models.params import ParameterStore, check_config, load_checkpoint
from src.pdw.dataset_io import load_dataset
from src.pdw.errors import ConfigError, PdwError, UsageError
from src.pdw.types import PulseTrain
from src.simulator.generator import generate_dataset
from src.simulator.scenario import scenario_from_dict
from src.training.trainer import train

logger = logging.getLogger(__name__)

SWEEP_FILE = "sweep.csv"
PREDICTIONS_FILE = "predictions.parquet"


def write_run_manifest(run: RunConfig, **sections: Any) -> Path:
    """manifest.json in the run's output directory: the full effective configuration."""
    path = run.out / MANIFEST_FILE
    doc = {"run": run.model_dump(mode="json"), **sections}
    path.write_bytes(orjson.dumps(doc, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY))
    print(f"wrote {path}")
    return path


def _split_path(data: Path, split: str) -> Path:
    """A dataset directory resolves to its split file; a file is used as given."""
    return data / SPLIT_FILES[split] if data.is_dir() else data


def _labelled(trains: List[PulseTrain], path: Path) -> List[PulseTrain]:
    if not trains:
        raise UsageError(f"dataset {path} holds no trains")
    missing = [t.train_id for t in trains if t.labels is None]
    if missing:
        raise UsageError(f"dataset {path} has unlabelled trains (first: {missing[0]})")
    return trains


# --- generate ---

def split_sizes(profile: RunProfile, n_trains: Optional[int]) -> Dict[str, int]:
    """--n-trains sets the training split; validation and test keep the profile's ratio to it."""
    sizes = dict(profile.splits)
    if n_trains is None:
        return sizes
    if n_trains < 1:
        raise UsageError(f"--n-trains must be >= 1, got {n_trains}")
    base = max(1, sizes["train"])
    return {
        split: n_trains if split == "train" else max(1, int(n_trains * count / base + 0.5))
        for split, count in sizes.items()
    }


def cmd_generate(args: argparse.Namespace) -> Dict[str, Any]:
    profile = load_profile(args.config)
    sizes = split_sizes(profile, args.n_trains)
    base = resolve_scenario(profile, n_pulses_per_train=args.n_pulses)
    if args.single_emitter:
        base = scenario_from_dict(
            {**base.model_dump(), "allow_single_emitter": True, "emitter_count_range": (1, base.emitter_count_range[1])}
        )
    seed = base.rng_seed if args.seed is None else args.seed
    run = RunConfig(command="generate", out=Path(args.out), seed=seed, profile=args.config)
    run.out.mkdir(parents=True, exist_ok=True)

    summaries = {}
    # splits never share a seed, so their train ids never collide
    for offset, split in enumerate(SPLIT_FILES):
        scenario = scenario_from_dict({**base.model_dump(), "n_trains": sizes[split], "rng_seed": seed + offset})
        path = run.out / SPLIT_FILES[split]
        summaries[split] = generate_dataset(scenario, path, progress=args.progress)
        print(f"wrote {path}")
    write_run_manifest(run, scenario=base.model_dump(mode="json"), splits=sizes, summaries=summaries)
    return summaries


# --- train ---

def cmd_train(args: argparse.Namespace) -> Dict[str, Any]:
    profile = load_profile(args.config)
    run = RunConfig(command="train", out=Path(args.out), seed=args.seed if args.seed is not None else int(profile.train.get("seed", 0)), model=args.model, data=Path(args.data), profile=args.config)
    run.require(run.data)
    train_path, val_path = _split_path(run.data, "train"), _split_path(run.data, "val")
    run.require(train_path, val_path)
    train_set = _labelled(load_dataset(train_path), train_path)
    val_set = _labelled(load_dataset(val_path), val_path)

    model_config = resolve_model(profile, args.model)
    train_config = resolve_train(
        profile,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
        dtype=args.dtype,
    )
    loss_config = resolve_loss(profile, margin=args.margin, loss_reduction=args.loss_reduction)
    clustering = resolve_clustering(profile, val_set, min_cluster_size=args.min_cluster_size)
    run.out.mkdir(parents=True, exist_ok=True)

    result = train(
        model_config.kind,
        model_config,
        train_set,
        val_set,
        run.out,
        train_config,
        loss_config,
        clustering,
        resume=args.resume,
        progress=args.progress,
    )
    for path in (result.best_checkpoint, result.last_checkpoint, result.log_path):
        print(f"wrote {path}")
    write_run_manifest(
        run,
        model=model_config.model_dump(mode="json"),
        train=train_config.model_dump(mode="json"),
        loss=loss_config.model_dump(mode="json"),
        clustering=clustering.model_dump(mode="json"),
        result=result.model_dump(mode="json", exclude={"history"}),
    )
    return result.model_dump()


# --- evaluate / sweep ---

def load_embedder(args: argparse.Namespace, profile: RunProfile) -> Tuple[str, Any, Optional[ParameterStore]]:
    """
    (model name, model config, parameters) to evaluate. A checkpoint carries its own
    model config; an explicit --model or --config must agree with it field by field.
    Without a checkpoint only the parameter-free identity model can be evaluated.
    """
    if args.checkpoint is None:
        config = resolve_model(profile, args.model)
        if get_model(config.kind).trainable:
            raise UsageError(f"--checkpoint is required to evaluate the {config.kind} model")
        return config.kind, config, None

    ckpt = load_checkpoint(args.checkpoint)
    name = ckpt.manifest.get("model_name")
    config = model_config_from_dict(ckpt.manifest.get("model", {}))
    if args.model is not None or args.config is not None:
        requested = resolve_model(profile, args.model)
        check_config(
            {"model_name": name, **config.model_dump(mode="json")},
            {"model_name": requested.kind, **requested.model_dump(mode="json")},
        )
    return name, config, ckpt.params


def _test_set(args: argparse.Namespace, command: str) -> Tuple[RunConfig, List[PulseTrain]]:
    run = RunConfig(
        command=command,
        out=Path(args.out),
        seed=args.seed or 0,
        model=args.model,
        checkpoint=args.checkpoint,
        data=Path(args.data),
        profile=args.config,
    )
    run.require(run.data)
    if run.checkpoint is not None:
        run.require(run.checkpoint)
    path = _split_path(run.data, "test")
    run.require(path)
    return run, _labelled(load_dataset(path), path)


def cmd_evaluate(args: argparse.Namespace) -> Dict[str, Any]:
    profile = load_profile(args.config)
    run, trains = _test_set(args, "evaluate")
    name, config, params = load_embedder(args, profile)
    clustering = resolve_clustering(profile, trains, min_cluster_size=args.min_cluster_size)

    embeddings = embed_dataset(get_model(name), config, params, trains, progress=args.progress)
    preds = cluster_dataset(embeddings, clustering, progress=args.progress)
    truths = [t.labels for t in trains]
    evaluation = evaluate_dataset(preds, truths, [t.train_id for t in trains])
    write_reports(evaluation, preds, truths, run.out, seed=run.seed, n_resamples=args.n_resamples)
    write_predictions(predictions_table(preds, truths, [t.train_id for t in trains]), run.out / PREDICTIONS_FILE)
    write_run_manifest(
        run,
        model_name=name,
        model=config.model_dump(mode="json"),
        clustering=clustering.model_dump(mode="json"),
        n_resamples=args.n_resamples,
        aggregate=evaluation.aggregate.model_dump(),
    )
    return evaluation.aggregate.model_dump()


def parse_grid(text: str) -> List[int]:
    try:
        grid = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--grid must be a comma-separated list of integers, got {text!r}") from None
    if not grid:
        raise UsageError("--grid is empty")
    bad = [v for v in grid if v < 2]
    if bad:
        raise UsageError(f"--grid values must be >= 2 (a cluster needs two points), got {bad}")
    return grid


def cmd_sweep(args: argparse.Namespace) -> pd.DataFrame:
    grid = parse_grid(args.grid)
    profile = load_profile(args.config)
    run, trains = _test_set(args, "sweep")
    name, config, params = load_embedder(args, profile)

    # embeddings do not depend on the clustering parameter
    embeddings = embed_dataset(get_model(name), config, params, trains, progress=args.progress)
    truths = [t.labels for t in trains]
    base = {k: v for k, v in profile.clustering.items() if k != "min_cluster_size"}
    rows = []
    for mcs in grid:
        clustering = hdbscan_config(**{**base, "min_cluster_size": mcs})
        preds = cluster_dataset(embeddings, clustering, progress=args.progress)
        agg = evaluate_dataset(preds, truths, [t.train_id for t in trains]).aggregate
        rows.append(
            {
                "min_cluster_size": mcs,
                "min_samples": clustering.k,
                "ami": agg.ami,
                "ari": agg.ari,
                "v": agg.v_measure,
                "h": agg.homogeneity,
                "c": agg.completeness,
                "mean_n_pred_clusters": agg.mean_n_pred_clusters,
                "cluster_count_rmse": agg.cluster_count_rmse,
            }
        )
        logger.info("min_cluster_size=%d: AMI %.4f", mcs, agg.ami)

    table = pd.DataFrame(rows)
    run.out.mkdir(parents=True, exist_ok=True)
    path = run.out / SWEEP_FILE
    table.to_csv(path, index=False)
    print(f"wrote {path}")
    write_run_manifest(run, model_name=name, model=config.model_dump(mode="json"), grid=grid, clustering=base)
    return table


# --- parser ---

def _common(p: argparse.ArgumentParser, out_default: str) -> None:
    p.add_argument("--config", default=None, help="YAML run profile (default: config/desk_profile.yaml)")
    p.add_argument("--seed", type=int, default=None, help="Base seed")
    p.add_argument("--out", default=out_default, help="Output directory")
    p.add_argument("--progress", action="store_true", help="Show progress bars")


def _model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="Dataset directory (split files) or a single dataset file")
    p.add_argument("--model", choices=MODEL_KINDS, default=None, help="Embedder")
    p.add_argument("--min-cluster-size", type=int, default=None, help="HDBSCAN minimum cluster size")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pdw", description="Radar pulse deinterleaving by metric learning and density clustering")
    ap.add_argument("--verbose", action="store_true", help="Debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="Simulate train/val/test datasets")
    _common(g, "data")
    g.add_argument("--n-trains", type=int, default=None, help="Training split size; val/test keep the profile ratio")
    g.add_argument("--n-pulses", type=int, default=None, help="Pulses per train")
    g.add_argument("--single-emitter", action="store_true", help="Allow 1-emitter trains (inference-only sets)")
    g.set_defaults(handler=cmd_generate)

    t = sub.add_parser("train", help="Train an embedder with the triplet loss")
    _common(t, "runs/train")
    _model_flags(t)
    t.add_argument("--lr", type=float, default=None, help="Adam learning rate")
    t.add_argument("--batch-size", type=int, default=None, help="Trains per batch")
    t.add_argument("--epochs", type=int, default=None, help="Number of epochs")
    t.add_argument("--margin", type=float, default=None, help="Triplet margin")
    t.add_argument("--loss-reduction", choices=["per_train", "pooled"], default=None)
    t.add_argument("--dtype", choices=["float32", "float64"], default=None)
    t.add_argument("--resume", action="store_true", help="Continue from <out>/checkpoints/last")
    t.set_defaults(handler=cmd_train)

    e = sub.add_parser("evaluate", help="Embed, cluster and score the test split")
    _common(e, "runs/eval")
    _model_flags(e)
    e.add_argument("--checkpoint", default=None, help="Checkpoint directory (not needed for identity)")
    e.add_argument("--n-resamples", type=int, default=1000, help="Bootstrap resamples")
    e.set_defaults(handler=cmd_evaluate)

    s = sub.add_parser("sweep", help="Evaluate across a min_cluster_size grid")
    _common(s, "runs/sweep")
    _model_flags(s)
    s.add_argument("--checkpoint", default=None, help="Checkpoint directory (not needed for identity)")
    s.add_argument("--grid", required=True, help="Comma-separated min_cluster_size values, e.g. 5,10,20")
    s.set_defaults(handler=cmd_sweep)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (None, 0) else 2
    configure_logging("DEBUG" if args.verbose else None)
    try:
        args.handler(args)
    except (UsageError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (PdwError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
