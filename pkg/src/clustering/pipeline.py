# src/clustering/pipeline.py
from __future__ import annotations
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, List, Optional, Sequence, TypeVar

import numpy as np
from tqdm import tqdm

from config.settings import settings
from src.clustering.hdbscan import HdbscanConfig, cluster_embeddings
from src.models.embedder import Embedder, EmbeddingSet
from src.models.params import ParameterStore
from src.pdw.normalize import normalize_train
from src.pdw.types import PulseTrain

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Sequence[T], desc: str = "", progress: bool = False) -> List[R]:
    """Map over items with settings.num_threads workers; results keep input order."""
    workers = max(1, settings.num_threads)
    bar = tqdm(total=len(items), desc=desc, disable=not progress)
    out: List[R] = []
    if workers == 1:
        for r in map(fn, items):
            out.append(r)
            bar.update()
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for r in pool.map(fn, items):
                out.append(r)
                bar.update()
    bar.close()
    return out


def embed_dataset(
    embedder: Embedder,
    config: Any,
    params: Optional[ParameterStore],
    trains: Sequence[PulseTrain],
    progress: bool = False,
) -> List[EmbeddingSet]:
    return ordered_map(lambda t: embedder.embed(config, params, normalize_train(t)), trains, "embed", progress)


def cluster_dataset(embeddings: Sequence[EmbeddingSet], config: HdbscanConfig, progress: bool = False) -> List[np.ndarray]:
    return ordered_map(lambda z: cluster_embeddings(z, config), embeddings, "cluster", progress)


def predict_dataset(
    embedder: Embedder,
    config: Any,
    params: Optional[ParameterStore],
    trains: Sequence[PulseTrain],
    clustering: HdbscanConfig,
    progress: bool = False,
) -> List[np.ndarray]:
    return cluster_dataset(embed_dataset(embedder, config, params, trains, progress), clustering, progress)
