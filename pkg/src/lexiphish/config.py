"""Run configuration: defaults, JSON config file, flag overrides (flags win)."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

from .errors import InputError


@dataclass(frozen=True)
class RunConfig:
    # inputs and outputs
    phish_csv: Optional[str] = None
    legit_path: Optional[str] = None
    features_csv: Optional[str] = None
    out_dir: str = "runs"
    checkpoint: Optional[str] = None
    # data and training
    seed: int = 42
    split_ratio: float = 0.8
    epochs: int = 50
    batch_size: int = 64
    lr: float = 1e-3
    threshold: float = 0.5
    knn_k: int = 5
    # explanations
    background_size: int = 5000
    n_permutations: int = 100
    explain_samples: int = 500
    # lexicon overrides
    keywords_path: Optional[str] = None
    shorteners_path: Optional[str] = None

    def __post_init__(self):
        if not 0.0 < self.split_ratio < 1.0:
            raise InputError(f"split_ratio must be in (0, 1), got {self.split_ratio}")
        if not 0.0 <= self.threshold <= 1.0:
            raise InputError(f"threshold must be in [0, 1], got {self.threshold}")
        for name in ("epochs", "batch_size", "knn_k", "background_size", "n_permutations", "explain_samples"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    def merged(self, overrides: dict) -> "RunConfig":
        """Copy with ``overrides`` applied; ``None`` values are ignored."""
        _check_keys(overrides)
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


def _check_keys(d: dict) -> None:
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(unknown)}")


def _coerce(d: dict) -> dict:
    types = {f.name: f.type for f in fields(RunConfig)}
    out = {}
    for k, v in d.items():
        t = types[k]
        if v is None:
            out[k] = None
        elif t == "int":
            if isinstance(v, bool) or not isinstance(v, int):
                raise InputError(f"config key {k} must be an integer")
            out[k] = v
        elif t == "float":
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise InputError(f"config key {k} must be a number")
            out[k] = float(v)
        else:
            if not isinstance(v, str):
                raise InputError(f"config key {k} must be a string")
            out[k] = v
    return out


def load_config(path=None, overrides: Optional[dict] = None) -> RunConfig:
    """Defaults, then the JSON file at ``path``, then non-None ``overrides``."""
    cfg = RunConfig()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise InputError(f"config file not found: {path}")
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise InputError("config file must hold a JSON object")
        _check_keys(data)
        cfg = cfg.merged(_coerce(data))
    if overrides:
        cfg = cfg.merged(overrides)
    return cfg
