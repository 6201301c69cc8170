# src/models/parameter_report.py
from __future__ import annotations
import argparse
from typing import Any, List, Optional

import pandas as pd

from src.models.config import GruConfig, IdentityConfig, TransformerConfig, desk_config, full_config
from src.models.gru import gru_parameter_count
from src.models.model_registry import ALL_MODELS
from src.models.transformer import transformer_parameter_count


def parameter_count(config: Any) -> int:
    """Analytic count; matches ParameterStore.n_parameters() of an initialised model."""
    if isinstance(config, TransformerConfig):
        return transformer_parameter_count(config)
    if isinstance(config, GruConfig):
        return gru_parameter_count(config)
    if isinstance(config, IdentityConfig):
        return 0
    raise TypeError(f"not a model config: {type(config).__name__}")


def parameter_report(scale: str = "full", initialise: bool = False) -> pd.DataFrame:
    """
    One row per model: parameter count and its ratio to the transformer's.
    `initialise=True` also builds each model and counts the stored arrays.
    """
    make = full_config if scale == "full" else desk_config
    rows: List[dict] = []
    for m in ALL_MODELS:
        cfg = make(m.name)
        row = {"model": m.name, "scale": scale, "n_parameters": parameter_count(cfg)}
        if initialise:
            store = m.init_params(cfg, 0)
            row["n_initialised"] = store.n_parameters() if store is not None else 0
        rows.append(row)
    df = pd.DataFrame(rows)
    ref = float(df.loc[df["model"] == "transformer", "n_parameters"].iloc[0])
    df["ratio_to_transformer"] = df["n_parameters"] / ref
    return df


def relative_size_gap(a: str = "gru", b: str = "transformer", scale: str = "full") -> float:
    make = full_config if scale == "full" else desk_config
    na, nb = parameter_count(make(a)), parameter_count(make(b))
    return abs(na - nb) / nb


def main(argv: Optional[List[str]] = None) -> int:
    ap = argparse.ArgumentParser(description="Report model parameter counts.")
    ap.add_argument("--scale", choices=["full", "desk"], default="full")
    ap.add_argument("--initialise", action="store_true", help="also build each model and count stored arrays")
    args = ap.parse_args(argv)
    print(parameter_report(args.scale, args.initialise).to_string(index=False))
    print(f"gru vs transformer parameter gap: {relative_size_gap(scale=args.scale):.2%}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
