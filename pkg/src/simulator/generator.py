# src/simulator/generator.py
from __future__ import annotations
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import orjson
from tqdm import tqdm

from config.settings import DATASET_FORMAT, settings
from src.pdw.dataset_io import train_summary, write_dataset
from src.pdw.errors import SimulationError
from src.pdw.types import TOA, PulseTrain
from src.simulator.emitters import freq_band, generate_emitter_pulses, sample_emitter
from src.simulator.scenario import EmitterSpec, ScenarioConfig

logger = logging.getLogger(__name__)

# expected pulse count of the first window, as a multiple of the target length
_WINDOW_HEADROOM = 1.5


def train_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream per (seed, train index); serial and parallel runs agree."""
    return np.random.default_rng([seed, index])


def make_train_id(seed: int, index: int) -> str:
    return f"s{seed}-{index:06d}"


def _simulate(
    config: ScenarioConfig, rng: np.random.Generator, train_id: str
) -> Tuple[PulseTrain, List[EmitterSpec]]:
    n = config.n_pulses_per_train
    lo, hi = config.emitter_count_range
    # the emitter count is fixed before any retry so its distribution stays uniform
    k = int(rng.integers(lo, hi + 1))
    bands = [freq_band(config, e, k) if config.disjoint_freq_bands else None for e in range(k)]
    for attempt in range(config.max_retries):
        specs = [sample_emitter(config, rng, band) for band in bands]
        rate = sum((1.0 - s.drop_prob) / s.mean_interval() for s in specs)
        t_end = _WINDOW_HEADROOM * n / rate + max(s.toa_offset for s in specs)

        pulses: List[np.ndarray] = []
        for _ in range(config.max_retries):
            pulses = [generate_emitter_pulses(s, t_end, rng) for s in specs]
            if sum(p.shape[0] for p in pulses) >= n:
                break
            t_end *= 2.0
        else:
            logger.debug("%s: attempt %d never reached %d pulses", train_id, attempt, n)
            continue

        features = np.concatenate(pulses, axis=0)
        labels = np.concatenate([np.full(p.shape[0], e, dtype=np.int64) for e, p in enumerate(pulses)])
        order = np.argsort(features[:, TOA], kind="stable")[:n]
        features, labels = features[order], labels[order]
        if np.unique(labels).size == k:
            return PulseTrain(train_id=train_id, features=features, labels=labels), specs
        logger.debug("%s: attempt %d left an emitter without pulses, regenerating", train_id, attempt)

    raise SimulationError(
        f"{train_id}: could not build a {n}-pulse train with every emitter present "
        f"after {config.max_retries} attempts"
    )


def generate_train(config: ScenarioConfig, rng: np.random.Generator, train_id: str = "train") -> PulseTrain:
    """
    Merge per-emitter pulse lists, sort by ToA and cut at exactly
    `n_pulses_per_train` pulses; regenerate while any emitter ends up empty.
    """
    train, _ = _simulate(config, rng, train_id)
    return train


def _indexed(config: ScenarioConfig, index: int) -> Tuple[PulseTrain, List[EmitterSpec]]:
    seed = config.rng_seed
    return _simulate(config, train_rng(seed, index), make_train_id(seed, index))


def simulate_trains(config: ScenarioConfig, progress: bool = False) -> List[Tuple[PulseTrain, List[EmitterSpec]]]:
    indices = range(config.n_trains)
    workers = max(1, settings.num_threads)
    bar = tqdm(total=config.n_trains, desc="simulate", disable=not progress)
    out: List[Tuple[PulseTrain, List[EmitterSpec]]] = []
    if workers == 1:
        for i in indices:
            out.append(_indexed(config, i))
            bar.update()
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for item in pool.map(lambda i: _indexed(config, i), indices):
                out.append(item)
                bar.update()
    bar.close()
    return out


def summarize(config: ScenarioConfig, simulated: List[Tuple[PulseTrain, List[EmitterSpec]]]) -> Dict[str, Any]:
    per_train = [train_summary(t) for t, _ in simulated]
    counts = Counter(s["n_emitters"] for s in per_train)
    modes = Counter(s.pri_mode.value for _, specs in simulated for s in specs)
    freq_modes = Counter(s.freq_mode.value for _, specs in simulated for s in specs)
    sizes = [c for s in per_train for c in s["cluster_sizes"]]
    return {
        "n_trains": len(simulated),
        "n_pulses_per_train": config.n_pulses_per_train,
        "emitter_count_histogram": {str(k): counts[k] for k in sorted(counts)},
        "mean_pulses_per_emitter": float(np.mean(sizes)) if sizes else 0.0,
        "pri_mode_mix": dict(sorted(modes.items())),
        "freq_mode_mix": dict(sorted(freq_modes.items())),
    }


def manifest_path_for(path: Union[str, Path]) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".manifest.json")


def write_manifest(path: Union[str, Path], config: ScenarioConfig, stats: Dict[str, Any], extra: Optional[Dict[str, Any]] = None) -> Path:
    doc = {
        "format": DATASET_FORMAT,
        "config": config.model_dump(mode="json"),
        "summary": stats,
    }
    if extra:
        doc.update(extra)
    out = Path(path)
    try:
        out.write_bytes(orjson.dumps(doc, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS))
    except OSError as e:
        raise OSError(f"failed writing manifest {out}: {e}") from e
    return out


def generate_dataset(config: ScenarioConfig, path: Union[str, Path], progress: bool = False) -> Dict[str, Any]:
    """Write `config.n_trains` trains to `path` plus a manifest next to it."""
    simulated = simulate_trains(config, progress=progress)
    out = Path(path)
    write_dataset((t for t, _ in simulated), out)
    stats = summarize(config, simulated)
    write_manifest(manifest_path_for(out), config, stats, {"dataset": out.name})
    logger.info("generated %d trains -> %s", stats["n_trains"], out)
    return stats
