# src/models/params.py
'''
Named parameter storage and on-disk checkpoints.

A checkpoint is a directory:
  manifest.json   config, schema version, seed, training metadata (orjson)
  params.npz      one array per parameter name (NumPy .npy members: shape header + raw data)
  optimizer.npz   optimizer moments and step counter, when present
'''
from __future__ import annotations
import logging
import shutil
from pathlib import Path
from typing import Any, Dict, Iterator, List, Mapping, NamedTuple, Optional, Tuple, Union

import numpy as np
import orjson

from config.settings import CHECKPOINT_SCHEMA_VERSION, MANIFEST_FILE
from src.numerics.tensor import Tensor, get_default_dtype
from src.pdw.errors import CheckpointError, CheckpointMismatchError

logger = logging.getLogger(__name__)

PARAMS_FILE = "params.npz"
OPTIMIZER_FILE = "optimizer.npz"


class ParameterStore:
    """Ordered mapping of parameter name -> trainable Tensor."""

    def __init__(self, arrays: Optional[Mapping[str, np.ndarray]] = None, dtype=None):
        self._tensors: Dict[str, Tensor] = {}
        for name, arr in (arrays or {}).items():
            self.add(name, arr, dtype=dtype)

    def add(self, name: str, array: np.ndarray, dtype=None) -> Tensor:
        if name in self._tensors:
            raise ValueError(f"duplicate parameter name: {name}")
        if "/" in name:
            raise ValueError(f"parameter names may not contain '/': {name}")
        t = Tensor(np.array(array, dtype=get_default_dtype() if dtype is None else dtype, copy=True), requires_grad=True)
        self._tensors[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._tensors[name]
        except KeyError:
            raise KeyError(f"unknown parameter: {name}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> List[str]:
        return list(self._tensors)

    def items(self) -> List[Tuple[str, Tensor]]:
        return list(self._tensors.items())

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {k: t.shape for k, t in self._tensors.items()}

    @property
    def dtype(self):
        first = next(iter(self._tensors.values()), None)
        return first.dtype if first is not None else np.dtype(get_default_dtype())

    def n_parameters(self) -> int:
        return sum(t.size for t in self._tensors.values())

    def arrays(self) -> Dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self._tensors.items()}

    def grads(self) -> Dict[str, np.ndarray]:
        return {k: (np.zeros_like(t.data) if t.grad is None else t.grad) for k, t in self._tensors.items()}

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.zero_grad()

    def load_arrays(self, arrays: Mapping[str, np.ndarray]) -> None:
        """Overwrite values in place; names and shapes must match exactly."""
        missing = sorted(set(self._tensors) - set(arrays))
        unknown = sorted(set(arrays) - set(self._tensors))
        if missing or unknown:
            raise CheckpointError(f"parameter names differ: missing={missing} unknown={unknown}")
        for k, t in self._tensors.items():
            a = np.asarray(arrays[k])
            if a.shape != t.shape:
                raise CheckpointError(f"parameter {k}: shape {a.shape} does not match {t.shape}")
            t.data = a.astype(t.dtype, copy=True)

    def astype(self, dtype) -> "ParameterStore":
        return ParameterStore(self.arrays(), dtype=dtype)


class Checkpoint(NamedTuple):
    manifest: Dict[str, Any]
    params: ParameterStore
    optimizer_state: Optional[Dict[str, np.ndarray]]


def _write_npz(path: Path, arrays: Mapping[str, np.ndarray]) -> None:
    with path.open("wb") as fh:
        np.savez(fh, **{k: np.asarray(v) for k, v in arrays.items()})


def _read_npz(path: Path) -> Dict[str, np.ndarray]:
    try:
        with np.load(path, allow_pickle=False) as z:
            return {k: z[k] for k in z.files}
    except (OSError, ValueError) as e:
        raise CheckpointError(f"unreadable checkpoint member {path}: {e}") from e


def save_checkpoint(
    path: Union[str, Path],
    store: ParameterStore,
    manifest: Dict[str, Any],
    optimizer_state: Optional[Mapping[str, np.ndarray]] = None,
) -> Path:
    """Write the checkpoint to a sibling temp directory, then swap it into place."""
    out = Path(path)
    tmp = out.with_name(out.name + ".tmp")
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    doc = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "dtype": str(store.dtype),
        "parameters": {k: list(s) for k, s in store.shapes().items()},
        **manifest,
    }
    (tmp / MANIFEST_FILE).write_bytes(orjson.dumps(doc, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS))
    _write_npz(tmp / PARAMS_FILE, store.arrays())
    if optimizer_state is not None:
        _write_npz(tmp / OPTIMIZER_FILE, optimizer_state)
    if out.exists():
        shutil.rmtree(out)
    tmp.rename(out)
    logger.debug("saved checkpoint %s (%d parameters)", out, store.n_parameters())
    return out


def read_manifest(path: Union[str, Path]) -> Dict[str, Any]:
    p = Path(path) / MANIFEST_FILE
    if not p.exists():
        raise CheckpointError(f"checkpoint manifest not found: {p}")
    try:
        doc = orjson.loads(p.read_bytes())
    except orjson.JSONDecodeError as e:
        raise CheckpointError(f"{p}: invalid JSON: {e}") from e
    if doc.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
        raise CheckpointError(
            f"{p}: unsupported checkpoint schema_version {doc.get('schema_version')!r} "
            f"(expected {CHECKPOINT_SCHEMA_VERSION})"
        )
    return doc


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    root = Path(path)
    manifest = read_manifest(root)
    arrays = _read_npz(root / PARAMS_FILE)
    declared = {k: tuple(v) for k, v in manifest.get("parameters", {}).items()}
    found = {k: a.shape for k, a in arrays.items()}
    if declared != found:
        raise CheckpointError(f"{root}: parameter arrays do not match the manifest")
    # npz members keep their write order, which is the model's parameter order
    store = ParameterStore()
    for name, a in arrays.items():
        store.add(name, a, dtype=a.dtype)
    opt_path = root / OPTIMIZER_FILE
    optimizer_state = _read_npz(opt_path) if opt_path.exists() else None
    return Checkpoint(manifest=manifest, params=store, optimizer_state=optimizer_state)


def check_config(checkpoint_config: Mapping[str, Any], requested: Mapping[str, Any]) -> None:
    """Raise CheckpointMismatchError listing every field whose values differ."""
    keys = set(checkpoint_config) | set(requested)
    diffs = {
        k: (checkpoint_config.get(k), requested.get(k))
        for k in keys
        if checkpoint_config.get(k) != requested.get(k)
    }
    if diffs:
        raise CheckpointMismatchError(diffs)
