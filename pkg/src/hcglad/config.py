"""Run configuration: flat key=value files, overrides, range validation.

One master ``seed`` fans out through named sub-seeds (split, init,
batching, inference, sampling) so a single knob reproduces a whole run.
Numeric hyper-parameters are validated against the tuning search space;
``allow_out_of_range = true`` opts out for experimentation.
"""

from __future__ import annotations

import os
from typing import Optional

import numpy as np

from .errors import ConfigError

# inclusive (lo, hi) bounds spanned by the tuning grid
SEARCH_RANGES: dict[str, tuple[float, float]] = {
    "epochs": (10, 2500),
    "learning_rate": (1e-5, 1e-2),
    "layers": (2, 7),
    "hidden": (2, 64),
    "head_layers": (1, 5),
    "lam1": (0.0, 1.0),
    "lam2": (0.0, 1.0),
    "weight_decay": (0.001, 0.30),
    "momentum": (0.90, 0.99),
    "tau": (0.1, 1.2),
}

_SUBSEED_INDEX = {"split": 1, "init": 2, "batching": 3, "inference": 4, "sampling": 5}


def derive_seed(master: int, name: str, extra: Optional[int] = None) -> int:
    """Stable named sub-seed: one master seed drives every RNG in a run."""
    if name not in _SUBSEED_INDEX:
        raise ConfigError(f"unknown sub-seed name {name!r}")
    key = [int(master), _SUBSEED_INDEX[name]]
    if extra is not None:
        key.append(int(extra))
    return int(np.random.SeedSequence(key).generate_state(1, np.uint32)[0])


# keys accepted in config files, with their parsers
_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _parse_bool(s: str) -> bool:
    try:
        return _BOOL[s.strip().lower()]
    except KeyError:
        raise ConfigError(f"expected a boolean, got {s!r}") from None


def _parse_anomaly(s: str):
    return s if s == "minority" else int(s)

CONFIG_KEYS: dict[str, type | object] = {
    "dataset": str,
    "data_dir": str,
    "out": str,
    "epochs": int,
    "batch_size": int,
    "learning_rate": float,
    "weight_decay": float,
    "momentum": float,
    "seed": int,
    "layers": int,
    "hidden": int,
    "head_layers": int,
    "walk_length": int,
    "tau": float,
    "xi1": float,
    "xi2": float,
    "lam1": float,
    "lam2": float,
    "train_fraction": float,
    "anomaly_class": _parse_anomaly,
    "max_degree_bucket": int,
    "eval_batch": int,
    "score_whole_set": _parse_bool,
    "geometry": str,
    "final_activation": _parse_bool,
    "graph_encoder": str,
    "hypergraph_encoder": str,
    "allow_out_of_range": _parse_bool,
}


def parse_config_file(path: str) -> dict:
    """Read a ``key = value`` file (# comments, UTF-8); unknown keys rejected."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    out: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            out.update(parse_setting(key, value, where=f"{path}:{lineno}"))
    return out


def parse_setting(key: str, value: str, where: str = "override") -> dict:
    """Parse one key=value pair (config line or --set flag)."""
    if key not in CONFIG_KEYS:
        raise ConfigError(f"{where}: unknown config key {key!r}")
    parser = CONFIG_KEYS[key]
    try:
        return {key: parser(value)}
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: bad value for {key}: {value!r} ({exc})") from exc
