'''
All settings, configurations, and constants for the pulse deinterleaving toolkit.
'''

import logging
import os
from typing import Literal

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()

# Schema versions of the documents we read and write
SCENARIO_SCHEMA_VERSION = 1
PROFILE_SCHEMA_VERSION = 1
CHECKPOINT_SCHEMA_VERSION = 1
DATASET_FORMAT = "pdw-jsonl/1"

# PDW feature columns, in file order
PDW_FEATURES = ["toa", "frequency", "pulse_width", "aoa", "amplitude"]
N_FEATURES = len(PDW_FEATURES)

# Paths
CONFIG_DIR = os.path.dirname(os.path.abspath(__file__))
DESK_PROFILE_PATH = os.path.join(CONFIG_DIR, "desk_profile.yaml")
DATA_DIR = "data"
RUNS_DIR = "runs"

SPLIT_FILES = {
    "train": "train.jsonl",
    "val": "val.jsonl",
    "test": "test.jsonl",
}
MANIFEST_FILE = "manifest.json"

# Full-scale hyperparameters (reported, not trained at desk scale)
FULL_TRANSFORMER = {
    "n_layers": 8,
    "n_heads": 8,
    "d_model": 256,
    "d_ff": 2048,
    "d_embed": 8,
    "dropout": 0.05,
}
FULL_GRU = {
    "n_layers": 8,
    "hidden_size": 480,
    "d_embed": 8,
}
FULL_MARGIN = 1.9
FULL_LEARNING_RATE = 1e-4
FULL_BATCH_SIZE = 8
FULL_EPOCHS = 8
FULL_MIN_CLUSTER_SIZE = 20
FULL_TRAIN_LENGTH = 1000

# Desk-scale defaults
DESK_TRANSFORMER = {
    "n_layers": 2,
    "n_heads": 2,
    "d_model": 32,
    "d_ff": 64,
    "d_embed": 8,
    "dropout": 0.05,
}
DESK_GRU = {
    "n_layers": 2,
    "hidden_size": 64,
    "d_embed": 8,
}
DESK_SPLITS = {"train": 2000, "val": 200, "test": 200}

# Numerics
LAYER_NORM_EPS = 1e-5
DISTANCE_EPS = 1e-12

# Evaluation
BOOTSTRAP_RESAMPLES = 1000
BOOTSTRAP_QUANTILES = (0.1, 0.9)
CLUSTER_SIZE_BINS = [0, 5, 10, 20, 50, 100, 200, 500, 1000]


class Settings(BaseSettings):
    """Environment overrides (PDW_ prefix, .env honoured)."""

    model_config = SettingsConfigDict(env_prefix="PDW_", env_file=".env", extra="ignore")

    num_threads: int = 1
    debug: bool = False
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"


settings = Settings()


def configure_logging(level: str | None = None) -> None:
    logging.basicConfig(
        level=getattr(logging, level or settings.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
