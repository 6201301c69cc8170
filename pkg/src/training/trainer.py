# src/training/trainer.py
'''
Training loop: batches of pulse trains, batch-all triplet loss mined inside each
train, Adam, and per-epoch validation by clustering the validation embeddings
and scoring AMI. The checkpoint with the best validation AMI is kept.

Output layout under `out_dir`:
  checkpoints/best/   best validation AMI so far
  checkpoints/last/   end of the latest epoch, with optimizer state (used by resume)
  train_log.jsonl     one record per epoch
'''
from __future__ import annotations
import logging
import time
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import orjson
from pydantic import BaseModel, ConfigDict, Field, field_validator
from tqdm import tqdm

from config.settings import FULL_BATCH_SIZE, FULL_EPOCHS, FULL_LEARNING_RATE, FULL_MARGIN
from src.clustering.hdbscan import HdbscanConfig
from src.clustering.pipeline import cluster_dataset, embed_dataset
from src.metrics.information import ami
from src.models.model_registry import get_model
from src.models.params import ParameterStore, check_config, load_checkpoint, save_checkpoint
from src.numerics.tensor import Tensor, default_dtype
from src.pdw.errors import TrainingAbort, UsageError
from src.pdw.normalize import normalize_train
from src.pdw.types import PulseTrain
from src.training.adam import Adam
from src.training.triplet import triplet_statistics, triplet_terms

logger = logging.getLogger(__name__)

TRAIN_LOG = "train_log.jsonl"
CHECKPOINT_DIR = "checkpoints"
BEST = "best"
LAST = "last"


class MiningStrategy(str, Enum):
    batch_all = "batch_all"
    batch_hard = "batch_hard"
    semi_hard = "semi_hard"


class LossReduction(str, Enum):
    per_train = "per_train"
    pooled = "pooled"


class TripletLossConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    margin: float = Field(default=FULL_MARGIN, gt=0.0)
    distance: Literal["euclidean"] = "euclidean"
    mining: MiningStrategy = MiningStrategy.batch_all
    loss_reduction: LossReduction = LossReduction.per_train

    @field_validator("mining")
    @classmethod
    def _only_batch_all(cls, v: MiningStrategy) -> MiningStrategy:
        if v != MiningStrategy.batch_all:
            raise ValueError(f"mining strategy '{v.value}' is reserved and not implemented; use 'batch_all'")
        return v


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    learning_rate: float = Field(default=FULL_LEARNING_RATE, gt=0.0)
    batch_size: int = Field(default=FULL_BATCH_SIZE, ge=1)
    epochs: int = Field(default=FULL_EPOCHS, ge=1)
    seed: int = 0
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    dtype: Literal["float32", "float64"] = "float32"


class EpochRecord(BaseModel):
    epoch: int
    step: int
    train_loss: float
    val_ami: float
    wall_time: float
    skipped_batches: int = 0
    val_fraction_non_easy: float = 0.0
    val_mean_distance: float = 0.0


class TrainingResult(BaseModel):
    best_checkpoint: str
    last_checkpoint: str
    log_path: str
    best_epoch: int
    best_val_ami: float
    history: List[EpochRecord]


def epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    """Shuffled train order for one epoch; depends only on (seed, epoch)."""
    return np.random.default_rng([seed, epoch]).permutation(n)


def batch_loss(
    terms: Sequence[Tuple[Optional[Tensor], int]], reduction: LossReduction
) -> Optional[Tensor]:
    """
    per_train: mean over the batch of each train's mean hinge (a train with no
    non-easy triplet counts as 0). pooled: every mined triplet of the batch weighs
    the same. None when no triplet was mined anywhere in the batch.
    """
    mined = [(t, c) for t, c in terms if t is not None]
    if not mined:
        return None
    if reduction == LossReduction.per_train:
        return sum(t * (1.0 / c) for t, c in mined) * (1.0 / len(terms))
    return sum(t for t, _ in mined) * (1.0 / sum(c for _, c in mined))


def _dump_abort(out_dir: Path, train_id: str, info: Dict[str, Any]) -> Path:
    path = out_dir / f"abort_{train_id}.json"
    path.write_bytes(orjson.dumps({"train_id": train_id, **info}, option=orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY))
    return path


def validate(
    model_name: str,
    model_config: Any,
    params: ParameterStore,
    val_set: Sequence[PulseTrain],
    clustering: HdbscanConfig,
    margin: float,
) -> Tuple[float, float, float]:
    """(mean AMI, fraction of non-easy triplets, mean pairwise distance) over the validation trains."""
    embedder = get_model(model_name)
    embeddings = embed_dataset(embedder, model_config, params, val_set)
    preds = cluster_dataset(embeddings, clustering)
    scores = [ami(p, t.labels) for p, t in zip(preds, val_set)]
    stats = [triplet_statistics(z.embeddings, t.labels, margin) for z, t in zip(embeddings, val_set)]
    n_valid = sum(s.n_valid for s in stats)
    fraction = sum(s.n_non_easy for s in stats) / n_valid if n_valid else 0.0
    return float(np.mean(scores)), float(fraction), float(np.mean([s.mean_distance for s in stats]))


def _manifest(model_name, model_config, train_config, loss_config, clustering, **state) -> Dict[str, Any]:
    return {
        "model_name": model_name,
        "model": model_config.model_dump(mode="json"),
        "train": train_config.model_dump(mode="json"),
        "loss": loss_config.model_dump(mode="json"),
        "clustering": clustering.model_dump(mode="json"),
        **state,
    }


def train(
    model_name: str,
    model_config: Any,
    train_set: Sequence[PulseTrain],
    val_set: Sequence[PulseTrain],
    out_dir: Union[str, Path],
    train_config: TrainConfig,
    loss_config: TripletLossConfig,
    clustering: HdbscanConfig,
    resume: bool = False,
    progress: bool = False,
) -> TrainingResult:
    embedder = get_model(model_name)
    if not embedder.trainable:
        raise UsageError(f"{model_name} model has no parameters")
    if not train_set or not val_set:
        raise UsageError("training needs non-empty training and validation sets")
    for t in list(train_set) + list(val_set):
        if t.labels is None:
            raise UsageError(f"train {t.train_id} has no emitter labels")

    out = Path(out_dir)
    ckpt_root = out / CHECKPOINT_DIR
    ckpt_root.mkdir(parents=True, exist_ok=True)
    log_path = out / TRAIN_LOG
    best_path, last_path = ckpt_root / BEST, ckpt_root / LAST

    with default_dtype(train_config.dtype):
        params = embedder.init_params(model_config, train_config.seed)
        opt = Adam(train_config.learning_rate, train_config.beta1, train_config.beta2, train_config.adam_eps)
        start_epoch, step, best_ami, best_epoch, prior_wall = 0, 0, -np.inf, -1, 0.0
        history: List[EpochRecord] = []

        if resume:
            ckpt = load_checkpoint(last_path)
            check_config(
                {"model_name": ckpt.manifest.get("model_name"), **ckpt.manifest["model"]},
                {"model_name": model_name, **model_config.model_dump(mode="json")},
            )
            params.load_arrays(ckpt.params.arrays())
            if ckpt.optimizer_state is not None:
                opt.load_state_dict(ckpt.optimizer_state)
            start_epoch = int(ckpt.manifest["epoch"]) + 1
            step = int(ckpt.manifest["step"])
            best_ami = float(ckpt.manifest["best_val_ami"])
            best_epoch = int(ckpt.manifest["best_epoch"])
            prior_wall = float(ckpt.manifest.get("wall_time", 0.0))
            # epochs logged after the last checkpoint are replayed, so drop them
            if log_path.exists():
                history = [r for r in read_train_log(log_path) if r.epoch < start_epoch]
            log_path.write_bytes(b"".join(orjson.dumps(r.model_dump()) + b"\n" for r in history))
            logger.info("resuming %s at epoch %d (step %d)", model_name, start_epoch, step)
        else:
            log_path.write_bytes(b"")

        prepared = [(t.train_id, normalize_train(t), t.labels) for t in train_set]
        started = time.perf_counter()
        seed = train_config.seed

        for epoch in range(start_epoch, train_config.epochs):
            order = epoch_order(seed, epoch, len(prepared))
            batches = [order[i:i + train_config.batch_size] for i in range(0, len(order), train_config.batch_size)]
            losses: List[float] = []
            skipped = 0
            for b, idx in enumerate(tqdm(batches, desc=f"epoch {epoch}", disable=not progress)):
                rng = np.random.default_rng([seed, epoch, b])
                params.zero_grad()
                terms = []
                for i in idx:
                    train_id, x, labels = prepared[i]
                    z = embedder.forward_train(model_config, params, x, True, rng)
                    total, count = triplet_terms(z, labels, loss_config.margin)
                    if total is not None and not np.isfinite(total.item()):
                        dump = _dump_abort(out, train_id, {"epoch": epoch, "step": step, "loss_sum": total.item(), "n_triplets": count})
                        raise TrainingAbort(f"non-finite triplet loss at epoch {epoch} step {step}; see {dump}", train_id)
                    terms.append((total, count))
                loss = batch_loss(terms, loss_config.loss_reduction)
                step += 1
                if loss is None:
                    # no non-easy triplet in the whole batch: nothing to learn from
                    skipped += 1
                    losses.append(0.0)
                    continue
                loss.backward()
                opt.step_store(params)
                losses.append(loss.item())

            val_ami, frac, mean_dist = validate(model_name, model_config, params, val_set, clustering, loss_config.margin)
            record = EpochRecord(
                epoch=epoch,
                step=step,
                train_loss=float(np.mean(losses)) if losses else 0.0,
                val_ami=val_ami,
                wall_time=prior_wall + time.perf_counter() - started,
                skipped_batches=skipped,
                val_fraction_non_easy=frac,
                val_mean_distance=mean_dist,
            )
            history.append(record)
            with log_path.open("ab") as fh:
                fh.write(orjson.dumps(record.model_dump()) + b"\n")
            logger.info("epoch %d: train_loss=%.5f val_ami=%.4f", epoch, record.train_loss, val_ami)

            if val_ami > best_ami:
                best_ami, best_epoch = val_ami, epoch
            state = dict(
                seed=seed, epoch=epoch, step=step, val_ami=val_ami,
                best_val_ami=best_ami, best_epoch=best_epoch, wall_time=record.wall_time,
            )
            manifest = _manifest(model_name, model_config, train_config, loss_config, clustering, **state)
            if best_epoch == epoch:
                save_checkpoint(best_path, params, manifest)
            save_checkpoint(last_path, params, manifest, opt.state_dict())

    return TrainingResult(
        best_checkpoint=str(best_path),
        last_checkpoint=str(last_path),
        log_path=str(log_path),
        best_epoch=best_epoch,
        best_val_ami=float(best_ami),
        history=history,
    )


def read_train_log(path: Union[str, Path]) -> List[EpochRecord]:
    return [EpochRecord(**orjson.loads(line)) for line in Path(path).read_bytes().splitlines() if line.strip()]
