# src/pdw/errors.py
from __future__ import annotations
from typing import Any, Dict, Optional, Sequence


class PdwError(Exception):
    """Root of every error raised by the toolkit."""


class ConfigError(PdwError, ValueError):
    pass


class UsageError(PdwError, ValueError):
    pass


class PartitionError(PdwError, ValueError):
    pass


class DatasetFormatError(PdwError, ValueError):
    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(f"{where}{message}")


class ShapeError(PdwError, ValueError):
    def __init__(self, op: str, *shapes: Sequence[int]):
        self.op = op
        self.shapes = [tuple(s) for s in shapes]
        super().__init__(f"{op}: incompatible shapes " + " and ".join(str(s) for s in self.shapes))


class NonFiniteError(PdwError, FloatingPointError):
    pass


class SimulationError(PdwError, RuntimeError):
    pass


class CheckpointError(PdwError, RuntimeError):
    pass


class CheckpointMismatchError(CheckpointError):
    def __init__(self, differences: Dict[str, Any]):
        self.differences = differences
        fields = ", ".join(
            f"{k} (checkpoint={v[0]!r}, requested={v[1]!r})" for k, v in sorted(differences.items())
        )
        super().__init__(f"checkpoint/config mismatch in: {fields}")


class TrainingAbort(PdwError, RuntimeError):
    def __init__(self, message: str, train_id: Optional[str] = None):
        self.train_id = train_id
        super().__init__(message if train_id is None else f"{message} (train_id={train_id})")
