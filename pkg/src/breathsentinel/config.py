"""Run configuration: flat key=value files with validated ranges.

Precedence, lowest to highest: built-in defaults, --config file,
command-line flags, then the BREATHSENTINEL_SEED environment variable
(which overrides the seed from anywhere else).
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

SEED_ENV_VAR = "BREATHSENTINEL_SEED"


@dataclass
class RunConfig:
    seed: int = 42
    ae_epochs: int = 200
    ae_batch: int = 128
    ae_learning_rate: float = 0.05
    rnn_epochs: int = 300
    rnn_learning_rate: float = 0.01
    rnn_hidden: int = 75
    noise_aug: bool = True
    confidence: float = 0.99
    run_length: int = 3
    interval_window: int = 20
    trend_alpha: float = 0.05
    ci_level: float = 0.80
    refractory: float = 1.0
    corpus_dir: str = ""
    model_path: str = ""

    def validate(self) -> "RunConfig":
        checks = [
            ("seed", 0 <= self.seed, "must be >= 0"),
            ("ae_epochs", self.ae_epochs >= 0, "must be >= 0"),
            ("ae_batch", self.ae_batch >= 1, "must be >= 1"),
            ("ae_learning_rate", self.ae_learning_rate > 0, "must be > 0"),
            ("rnn_epochs", self.rnn_epochs >= 0, "must be >= 0"),
            ("rnn_learning_rate", self.rnn_learning_rate > 0, "must be > 0"),
            ("rnn_hidden", self.rnn_hidden in (50, 75, 100), "must be one of 50, 75, 100"),
            ("confidence", 0.5 <= self.confidence < 1.0, "must be in [0.5, 1.0)"),
            ("run_length", 1 <= self.run_length <= 10, "must be in [1, 10]"),
            ("interval_window", 5 <= self.interval_window <= 200, "must be in [5, 200]"),
            ("trend_alpha", 0.0 < self.trend_alpha <= 0.5, "must be in (0, 0.5]"),
            ("ci_level", 0.5 <= self.ci_level <= 0.999, "must be in [0.5, 0.999]"),
            ("refractory", 0.0 <= self.refractory <= 5.0, "must be in [0, 5] seconds"),
        ]
        for name, ok, message in checks:
            if not ok:
                raise ConfigError(f"{name}={getattr(self, name)}: {message}")
        return self

    def apply_env(self) -> "RunConfig":
        raw = os.environ.get(SEED_ENV_VAR)
        if raw is not None:
            try:
                self.seed = int(raw)
            except ValueError:
                raise ConfigError(f"{SEED_ENV_VAR}={raw!r} is not an integer") from None
        return self


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            lowered = raw.lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}={raw!r}: cannot parse as {kind}") from None


def load_config(path) -> RunConfig:
    """Parse a flat key=value file; unknown keys are rejected."""
    cfg = RunConfig()
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        setattr(cfg, key, _coerce(key, value))
    return cfg.validate()
