"""Explanations for basic-block throughput predictions."""

import json
import os
from pathlib import Path

from . import _core
from ._core import (
    CometError,
    ConfigError,
    KbError,
    ModelError,
    ParseError,
    PreservationError,
    SpaceLimitError,
    canonical,
    crude_predict,
    ground_truth,
    load_kb,
    load_table,
    perturb,
    space_size,
)

__all__ = [
    "CometError",
    "ConfigError",
    "KbError",
    "ModelError",
    "ParseError",
    "PreservationError",
    "SpaceLimitError",
    "canonical",
    "crude_predict",
    "data_dir",
    "explain",
    "graph",
    "ground_truth",
    "load_kb",
    "load_table",
    "perturb",
    "space_size",
]


def data_dir() -> Path:
    """Bundled data directory, overridable with COMET_DATA_DIR."""
    env = os.environ.get("COMET_DATA_DIR")
    return Path(env) if env else Path(__file__).parent / "data"


def graph(text, kb):
    return json.loads(_core.graph_json(text, kb))


def explain(text, kb, table, config=None, seed=0):
    """Explains the crude model's prediction for one block."""
    cfg = json.dumps(config) if config else ""
    return json.loads(_core.explain_crude(text, kb, table, cfg, seed))
