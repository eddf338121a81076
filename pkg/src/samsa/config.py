"""Layered run configuration.

Precedence, lowest to highest: built-in defaults, INI config file,
``SAMSA_<SECTION>_<KEY>`` environment variables, CLI flags.  Unknown keys
are rejected by name.  The effective configuration is echoed to the output
directory before a run and round-trips: re-running from the echo reproduces
the run.
"""

import configparser
import hashlib
import json
import os
from dataclasses import dataclass, field

# section -> key -> (type, default, help)
SCHEMA = {
    "run": {
        "seed": (int, 7, "global seed for init, data, and noise"),
        "precision": (int, 32, "float width: 32 (training) or 64 (verification)"),
        "out_dir": (str, "runs/latest", "artifact directory"),
        "verbose": (bool, False, "log noise-draw counts and extra detail"),
    },
    "task": {
        "kind": (str, "seq-select",
                 "seq-select | seq-listops-lite | graph-degree | cloud-centroid"),
        "n": (int, 256, "sequence length / point count"),
        "vocab": (int, 16, "class count for seq-select"),
        "min_nodes": (int, 6, "graph tasks: smallest node count"),
        "max_nodes": (int, 14, "graph tasks: largest node count"),
        "n_train": (int, 2048, "training samples"),
        "n_val": (int, 256, "validation samples"),
        "n_test": (int, 256, "test samples"),
        "cache_dir": (str, "", "optional dataset cache directory"),
    },
    "model": {
        "attention": (str, "samsa", "samsa | full"),
        "depth": (int, 2, "number of layers"),
        "d_model": (int, 64, "token width"),
        "d_ffn": (int, 128, "feed-forward hidden width"),
        "n_heads": (int, 4, "attention heads"),
        "k": (int, 32, "sampled rows per head"),
        "mode": (str, "hard", "hard | soft sampling"),
        "locality": (str, "truncated", "truncated | full comparison set"),
        "tau": (float, 1.0, "relaxation temperature"),
        "p_dropout": (float, 0.0, "dropout probability"),
        "p_droppath": (float, 0.0, "stochastic-depth probability"),
        "score_on_raw": (bool, True, "importance scores from raw tokens"),
    },
    "train": {
        "lr": (float, 1e-3, "peak learning rate"),
        "weight_decay": (float, 0.01, "decoupled weight decay"),
        "clip_norm": (float, 2.0, "global gradient-norm clip"),
        "steps": (int, 2000, "optimizer steps"),
        "warmup_steps": (int, 200, "linear warmup steps"),
        "batch_size": (int, 32, "samples per step"),
        "eval_every": (int, 50, "validation cadence in steps"),
        "log_every": (int, 10, "train metric cadence in steps"),
        "early_stop_acc": (float, 0.0, "stop at this val accuracy; 0 disables"),
    },
}

ENV_PREFIX = "SAMSA_"


class ConfigError(Exception):
    """Unknown key or unparsable value; carries the offending key name."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


def _parse(section, key, raw):
    typ = SCHEMA[section][key][0]
    if typ is bool:
        if isinstance(raw, bool):
            return raw
        lowered = str(raw).strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{section}.{key}", f"not a boolean: {raw!r}")
    try:
        return typ(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{section}.{key}", f"expected {typ.__name__}, got {raw!r}")


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def get(self, section, key):
        return self.values[section][key]

    def set(self, section, key, value):
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"{section}.{key}", "unknown config key")
        self.values[section][key] = _parse(section, key, value)

    def as_dict(self):
        return {s: dict(kv) for s, kv in self.values.items()}


def default_config():
    cfg = RunConfig({s: {k: spec[1] for k, spec in keys.items()}
                     for s, keys in SCHEMA.items()})
    return cfg


def load_config(path=None, env=None, overrides=None):
    """Merge defaults, an optional INI file, environment, and overrides."""
    cfg = default_config()
    if path:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(path, "config file not found")
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(section, "unknown config section")
            for key, raw in parser.items(section):
                cfg.set(section, key, raw)
    env = os.environ if env is None else env
    for name, raw in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):].lower()
        section = rest.split("_", 1)[0]
        if section not in SCHEMA:
            continue
        key = rest[len(section) + 1:]
        cfg.set(section, key, raw)
    for (section, key), value in (overrides or {}).items():
        cfg.set(section, key, value)
    return cfg


def echo_config(cfg, path):
    parser = configparser.ConfigParser()
    for section, keys in cfg.values.items():
        parser[section] = {k: str(v) for k, v in keys.items()}
    with open(path, "w") as fh:
        parser.write(fh)


def config_hash(cfg):
    return hashlib.sha256(
        json.dumps(cfg.as_dict(), sort_keys=True).encode()).hexdigest()[:16]
