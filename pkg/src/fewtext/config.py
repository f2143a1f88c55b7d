"""Run configuration: one flat key-value document.

The same schema serves every subcommand; a JSON config file and
repeatable ``--set key=value`` overrides resolve into a
:class:`RunConfig`, and the fully resolved document is snapshotted next
to each run's artifacts so reruns are reproducible.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path

from .augment import EXTERNAL, LEXICAL_NOISE
from .errors import ConfigError
from .losses import LossConfig


@dataclass
class RunConfig:
    # Optimization
    max_step: int = 1000
    labeled_batch: int = 8
    unlabeled_batch: int = 32
    learning_rate: float = 1e-3
    warmup_percent: float = 0.1
    weight_decay: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    # Objective.  The contrastive weight is deliberately small and its
    # temperature soft: with a compact trunk a sharp, heavily weighted
    # contrastive pull can crush the class geometry the classifier needs.
    scl_temperature: float = 1.0
    cc_temperature: float = 0.1
    lambda_scl: float = 0.01
    lambda_con: float = 1.0
    lambda_cc: float = 0.5
    cc_symmetric: bool = False
    # Encoder
    features: int = 4096
    hidden: int = 128
    embedding_dim: int = 32
    max_length: int | None = None
    # Split protocol
    seed: int = 0
    shots_per_class: int = 10
    unlabeled_count: int = 1000
    dev_count: int = 200
    labels: list[str] | None = None
    # Augmentation
    augmentation: str = LEXICAL_NOISE
    drop_prob: float = 0.5
    swap_prob: float = 0.1
    paired_path: str | None = None
    # Data wiring
    data_path: str | None = None
    test_path: str | None = None
    split_dir: str | None = None
    split_root: str | None = None
    run_dir: str | None = None
    checkpoint_path: str | None = None
    # Bookkeeping
    eval_every: int = 50

    def validate(self) -> "RunConfig":
        if self.max_step < 1:
            raise ConfigError("max_step must be >= 1")
        if self.labeled_batch < 2:
            raise ConfigError("labeled_batch must be >= 2")
        if self.unlabeled_batch < 2:
            raise ConfigError("unlabeled_batch must be >= 2")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not 0.0 <= self.warmup_percent < 1.0:
            raise ConfigError("warmup_percent must be in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")
        if self.scl_temperature <= 0 or self.cc_temperature <= 0:
            raise ConfigError("temperatures must be positive")
        for name in ("lambda_scl", "lambda_con", "lambda_cc"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("features", "hidden", "embedding_dim"):
            if getattr(self, name) < 2:
                raise ConfigError(f"{name} must be >= 2")
        if self.max_length is not None and self.max_length < 1:
            raise ConfigError("max_length must be >= 1 when set")
        if self.shots_per_class < 1:
            raise ConfigError("shots_per_class must be >= 1")
        if self.augmentation not in (LEXICAL_NOISE, EXTERNAL):
            raise ConfigError(f"augmentation must be {LEXICAL_NOISE!r} or {EXTERNAL!r}")
        if not 0.0 <= self.drop_prob <= 1.0 or not 0.0 <= self.swap_prob <= 1.0:
            raise ConfigError("noise probabilities must be in [0, 1]")
        if self.augmentation == EXTERNAL and not self.paired_path:
            raise ConfigError("augmentation=external needs paired_path")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")
        return self

    def loss_config(self) -> LossConfig:
        return LossConfig(
            scl_temperature=self.scl_temperature,
            cc_temperature=self.cc_temperature,
            lambda_scl=self.lambda_scl,
            lambda_con=self.lambda_con,
            lambda_cc=self.lambda_cc,
            cc_symmetric=self.cc_symmetric,
        )

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw).validate()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(key: str, value):
    """Parse a --set value: JSON when it parses, bare string otherwise."""
    if isinstance(value, str):
        try:
            value = json.loads(value)
        except json.JSONDecodeError:
            pass  # keep the raw string, e.g. a path
    return value


def resolve_config(file_path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """defaults <- config file <- --set overrides; unknown keys reject."""
    merged: dict = {}
    if file_path is not None:
        try:
            doc = json.loads(Path(file_path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {file_path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{file_path}: invalid JSON ({exc.msg})") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{file_path}: config must be a flat JSON object")
        merged.update(doc)
    if overrides:
        for key, value in overrides.items():
            merged[key] = _coerce(key, value)

    unknown = sorted(set(merged) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    try:
        cfg = RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def parse_set_args(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        out[key.strip()] = value
    return out


def write_resolved(config: RunConfig, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def fingerprint(config: RunConfig) -> str:
    """Hash of everything that shapes a run except the seed and output wiring."""
    doc = config.to_dict()
    for key in ("seed", "run_dir"):
        doc.pop(key, None)
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]
