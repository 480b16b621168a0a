"""Python access to the split learning simulator.

Configs may be given as a dict, a JSON string, or a path to a JSON file.
Relative dataset paths resolve against the file's directory, or against
``base_dir`` for dicts and strings. Library failures raise ``Error``, whose
``code`` attribute matches the CLI's error JSON.
"""

import json
import os
from pathlib import Path

from . import _core
from ._core import LOG_SCHEMA, LOG_SCHEMA_VERSION, Error, tensor_message_size

__all__ = [
    "Error",
    "LOG_SCHEMA",
    "LOG_SCHEMA_VERSION",
    "parse_config",
    "run_experiment",
    "read_jsonl",
    "gradcheck",
    "partition_stats",
    "tensor_message_size",
]


def _config_text(config, base_dir):
    if isinstance(config, os.PathLike):
        path = Path(config)
        return path.read_text(), Path(base_dir) if base_dir else path.parent
    if isinstance(config, str):
        return config, Path(base_dir or "")
    return json.dumps(config), Path(base_dir or "")


def parse_config(config, base_dir=None):
    """Validated config with defaults applied, in canonical JSON form."""
    return json.loads(_core.parse_config(*_config_text(config, base_dir)))


def run_experiment(config, base_dir=None, trace_path=None):
    """Run one experiment and return the log as a dict.

    Keys: ``config``, ``records`` (one per epoch), ``summary``, ``trace_path``.
    The JSONL file is also written when the config sets ``out_path``.
    """
    text, base = _config_text(config, base_dir)
    trace = None if trace_path is None else Path(trace_path)
    return json.loads(_core.run_experiment(text, base, trace))


def read_jsonl(path):
    """Read and validate a run log written by the runner."""
    return json.loads(_core.read_jsonl(Path(path)))


def gradcheck(seeds=10, eps=1e-4):
    """Finite-difference check of every layer kind; one dict per case and seed."""
    return json.loads(_core.gradcheck(seeds, eps))


def partition_stats(config, base_dir=None):
    """Shard sizes, class histograms and imbalance for a config's partition."""
    return json.loads(_core.partition_stats(*_config_text(config, base_dir)))
