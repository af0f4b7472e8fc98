"""Flat ``key=value`` configuration for scenarios and CLI commands."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields
from typing import Dict, Iterable, Optional

from ..model import ModelConfig
from ..scfg import DatasetConfig
from ..training import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    seed: int = 13
    # dataset sizes per domain
    d_old: int = 2000
    e_old: int = 400
    e_new: int = 400
    max_depth: int = 3
    # extension: examples of D_old used for training, and epochs
    train_size: int = 2000
    epochs: int = 50
    s2s_epochs: int = 50
    # transfer: examples drawn from each training domain
    transfer_size: int = 2000
    transfer_epochs: int = 50
    pretrain_epochs: int = 50
    # keep the epoch with the best E_new dev accuracy (both systems)
    select_on_dev: bool = True
    lr: float = 1e-3
    clip_norm: float = 5.0
    hidden: int = 64
    f_hidden: int = 128
    key_pooling: str = "mean"
    span_pooling: str = "sum"
    train_embeddings: bool = False
    vectors: str = ""
    out_dir: str = "runs"

    def dataset(self) -> DatasetConfig:
        return DatasetConfig(d_old=self.d_old, e_old=self.e_old, e_new=self.e_new,
                             max_depth=self.max_depth, seed=self.seed)

    def model(self) -> ModelConfig:
        return ModelConfig(hidden=self.hidden, f_hidden=self.f_hidden, key_pooling=self.key_pooling,
                           span_pooling=self.span_pooling, train_embeddings=self.train_embeddings,
                           seed=self.seed, vectors=self.vectors or None)

    def training(self, epochs: Optional[int] = None, select: bool = False, **kw) -> TrainConfig:
        if select and self.select_on_dev:
            kw.update(dev_every=1, select_best=True)
        return TrainConfig(epochs=self.epochs if epochs is None else epochs, lr=self.lr,
                           seed=self.seed, clip_norm=self.clip_norm, **kw)

    def items(self) -> Dict[str, object]:
        return dataclasses.asdict(self)

    def fingerprint(self, exclude: Iterable[str] = ("out_dir",)) -> str:
        data = {k: v for k, v in self.items().items() if k not in set(exclude)}
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()[:16]

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.items().items())


# Desk-scale settings used by the acceptance runs (one CPU; extension under an hour).
DESK = {
    "train_size": 400, "epochs": 20, "s2s_epochs": 15,
    "transfer_size": 200, "transfer_epochs": 15, "pretrain_epochs": 10,
}


def _coerce(name: str, raw: str, current):
    try:
        if isinstance(current, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return raw


def parse_config_text(text: str) -> Dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def apply_overrides(cfg: ScenarioConfig, values: Dict[str, str]) -> ScenarioConfig:
    known = {f.name for f in fields(cfg)}
    for k, v in values.items():
        key = k.replace("-", "_")
        if key not in known:
            raise ConfigError(f"unknown configuration key {k!r}")
        setattr(cfg, key, _coerce(key, str(v), getattr(cfg, key)))
    return cfg


def load_config(path: Optional[str] = None, overrides: Iterable[str] = (),
                preset: Optional[Dict[str, object]] = None) -> ScenarioConfig:
    cfg = ScenarioConfig()
    if preset:
        apply_overrides(cfg, {k: str(v) for k, v in preset.items()})
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        apply_overrides(cfg, parse_config_text(text))
    pairs = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        k, v = item.split("=", 1)
        pairs[k.strip()] = v.strip()
    return apply_overrides(cfg, pairs)
