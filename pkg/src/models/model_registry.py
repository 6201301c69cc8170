# src/models/model_registry.py

from src.models.gru import gru_model
from src.models.identity import identity_model
from src.models.transformer import transformer_model
from src.models.embedder import Embedder
from src.pdw.errors import UsageError

# Master registry (CLI --model choices follow this order)
ALL_MODELS = [
    transformer_model,
    gru_model,
    identity_model,
]

TRAINABLE_MODELS = [m for m in ALL_MODELS if m.trainable]

MODEL_REGISTRY = {m.name: m for m in ALL_MODELS}


def get_model(name: str) -> Embedder:
    try:
        return MODEL_REGISTRY[name]
    except KeyError:
        raise UsageError(f"unknown model {name!r}; choose from {sorted(MODEL_REGISTRY)}") from None
