"""The 1D CNN phishing classifier: build, train, evaluate, persist."""
from __future__ import annotations

import base64
import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .dataset import NormStats
from .errors import (
    CheckpointError,
    CorruptChecksum,
    EmptyTestSet,
    InputError,
    NonFiniteError,
    NonFiniteLoss,
    SchemaMismatch,
    VersionMismatch,
)
from .features import SCHEMA_VERSION
from .nn import Adam, BatchNormalization, Conv1D, Dense, GlobalAveragePooling1D, MaxPool1D, ReLU, Sequential, Sigmoid
from .nn.functional import bce_loss, bce_with_logits
from .records import FeatureMatrix

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = "lexiphish-checkpoint"
CHECKPOINT_VERSION = 1
INPUT_LEN = 21


@dataclass(frozen=True)
class ModelConfig:
    seed: int = 42
    epochs: int = 50
    batch_size: int = 64
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    bn_momentum: float = 0.9
    bn_eps: float = 1e-5
    input_len: int = INPUT_LEN

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 2:
            raise InputError("epochs must be >= 1 and batch_size >= 2")

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def cnn_layers(cfg: ModelConfig) -> list:
    """Conv(32,3) -> pool(2) -> Conv(64,3) -> GAP -> Dense(64) -> BN -> Dense(1)."""
    return [
        Conv1D(32, 3), ReLU(),
        MaxPool1D(2),
        Conv1D(64, 3), ReLU(),
        GlobalAveragePooling1D(),
        Dense(64),
        BatchNormalization(cfg.bn_momentum, cfg.bn_eps), ReLU(),
        Dense(1), Sigmoid(),
    ]


@dataclass
class ModelCheckpoint:
    model: Sequential
    config: ModelConfig
    arch: str = "cnn"
    stats: Optional[NormStats] = None
    schema_version: str = SCHEMA_VERSION
    history: dict = field(default_factory=lambda: {k: [] for k in HISTORY_KEYS})
    best_epoch: Optional[int] = None
    run_config: Optional[dict] = None

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return self.model.predict_proba(x)

    __call__ = predict_proba

    def copy(self) -> "ModelCheckpoint":
        return ModelCheckpoint(
            model=self.model.copy(), config=self.config, arch=self.arch, stats=self.stats,
            schema_version=self.schema_version, history={k: list(v) for k, v in self.history.items()},
            best_epoch=self.best_epoch, run_config=self.run_config,
        )


HISTORY_KEYS = ("train_acc", "test_acc", "train_loss", "test_loss")


def build_model(seed: int = 42, config: Optional[ModelConfig] = None) -> ModelCheckpoint:
    """Untrained CNN with He-uniform conv/dense weights drawn from ``seed``."""
    cfg = config if config is not None else ModelConfig(seed=seed)
    if config is not None and config.seed != seed:
        cfg = ModelConfig(**{**asdict(config), "seed": seed})
    net = Sequential(cnn_layers(cfg), (cfg.input_len, 1)).build(np.random.default_rng(seed))
    return ModelCheckpoint(model=net, config=cfg, arch="cnn")


@dataclass
class TrainResult:
    final: ModelCheckpoint
    best: ModelCheckpoint

    @property
    def history(self) -> dict:
        return self.final.history


def _accuracy_loss(model: Sequential, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    p = model.predict_proba(x)
    return float(np.mean((p >= 0.5) == (y == 1))), bce_loss(p, y)


def _batches(n: int, size: int, rng: np.random.Generator) -> list[np.ndarray]:
    order = rng.permutation(n)
    out = [order[s : s + size] for s in range(0, n, size)]
    if len(out) > 1 and len(out[-1]) < 2:
        # batch-norm cannot train on a single row
        tail = out.pop()
        out[-1] = np.concatenate([out[-1], tail])
    return out


def train(ckpt: ModelCheckpoint, train_fm: FeatureMatrix, test_fm: FeatureMatrix,
          cfg: Optional[ModelConfig] = None, stats: Optional[NormStats] = None,
          on_epoch: Optional[Callable[[int, dict], None]] = None) -> TrainResult:
    """Mini-batch Adam on BCE. Returns the final weights and the best-on-test snapshot.

    Inputs must already be standardized with ``stats`` (or ``ckpt.stats``).
    Metrics recorded per epoch are inference-mode accuracy and loss over the
    whole train and test matrices.
    """
    cfg = cfg if cfg is not None else ckpt.config
    for fm in (train_fm, test_fm):
        fm.require_schema(ckpt.schema_version)
    stats = stats if stats is not None else ckpt.stats
    if stats is not None and stats.schema_version != ckpt.schema_version:
        raise SchemaMismatch("normalization stats were computed for a different schema")
    if len(train_fm) < 2:
        raise InputError("need at least 2 training rows")

    ckpt = ckpt.copy()
    ckpt.config, ckpt.stats = cfg, stats
    ckpt.history = {k: [] for k in HISTORY_KEYS}
    net = ckpt.model
    xtr, ytr = train_fm.rows, train_fm.labels.astype(np.float64)
    xte, yte = test_fm.rows, test_fm.labels.astype(np.float64)
    opt = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
    rng = np.random.default_rng([cfg.seed, 1])

    best, best_acc = ckpt.copy(), -1.0
    for epoch in range(1, cfg.epochs + 1):
        for b, idx in enumerate(_batches(len(xtr), cfg.batch_size, rng)):
            try:
                net.zero_grad()
                z = net.forward_logits(xtr[idx], training=True)
                loss, g = bce_with_logits(z, ytr[idx])
                if not np.isfinite(loss):
                    raise NonFiniteLoss(epoch, b, loss)
                net.backward(g.reshape(z.shape))
                opt.step(net)
            except NonFiniteError as exc:
                raise NonFiniteLoss(epoch, b, float("nan")) from exc
        try:
            tr_acc, tr_loss = _accuracy_loss(net, xtr, ytr)
            te_acc, te_loss = _accuracy_loss(net, xte, yte) if len(xte) else (float("nan"), float("nan"))
        except NonFiniteError as exc:
            raise NonFiniteLoss(epoch, -1, float("nan")) from exc
        for k, v in zip(HISTORY_KEYS, (tr_acc, te_acc, tr_loss, te_loss)):
            ckpt.history[k].append(v)
        log.info("epoch %d: train_acc=%.4f test_acc=%.4f train_loss=%.4f test_loss=%.4f",
                 epoch, tr_acc, te_acc, tr_loss, te_loss)
        if on_epoch is not None:
            on_epoch(epoch, {k: ckpt.history[k][-1] for k in HISTORY_KEYS})
        if te_acc > best_acc:
            best_acc = te_acc
            best = ckpt.copy()
            best.best_epoch = epoch
    best.history = {k: list(v) for k, v in ckpt.history.items()}
    ckpt.best_epoch = best.best_epoch
    return TrainResult(final=ckpt, best=best)


def _schema_check(x: np.ndarray, schema_version: Optional[str], ckpt: ModelCheckpoint) -> np.ndarray:
    if schema_version is not None and schema_version != ckpt.schema_version:
        raise SchemaMismatch(f"vector schema {schema_version!r} != model schema {ckpt.schema_version!r}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != ckpt.config.input_len:
        raise SchemaMismatch(f"expected {ckpt.config.input_len} features, got {x.shape[-1]}")
    return x


def predict(ckpt: ModelCheckpoint, x, schema_version: Optional[str] = None):
    """Probability of phishing for one standardized vector (float) or a batch (array)."""
    if isinstance(x, FeatureMatrix):
        schema_version, x = x.schema_version, x.rows
    x = _schema_check(x, schema_version, ckpt)
    if x.ndim == 1:
        return float(ckpt.model.predict_proba(x[None])[0])
    return ckpt.model.predict_proba(x)


# --- metrics --------------------------------------------------------------

def _pct(num: int, den: int) -> tuple[float, bool]:
    return (100.0 * num / den, True) if den else (0.0, False)


@dataclass
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int
    threshold: float = 0.5
    undefined: list = field(default_factory=list)
    model: str = "cnn"

    @classmethod
    def from_confusion(cls, tp: int, fp: int, tn: int, fn: int, threshold: float = 0.5,
                       model: str = "cnn") -> "EvalReport":
        """Percent-scale metrics; a ratio with a zero denominator is 0 and listed in ``undefined``."""
        n = tp + fp + tn + fn
        if n == 0:
            raise EmptyTestSet("confusion matrix is empty")
        undefined = []
        acc, _ = _pct(tp + tn, n)
        prec, ok = _pct(tp, tp + fp)
        if not ok:
            undefined.append("precision")
        rec, ok = _pct(tp, tp + fn)
        if not ok:
            undefined.append("recall")
        if prec + rec > 0:
            f1 = 2 * prec * rec / (prec + rec)
        else:
            f1 = 0.0
            undefined.append("f1")
        return cls(acc, prec, rec, f1, int(tp), int(fp), int(tn), int(fn), threshold, undefined, model)

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def row(self) -> str:
        return f"{self.accuracy:.2f} / {self.precision:.2f} / {self.recall:.2f} / {self.f1:.2f}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["confusion"] = {"TP": self.tp, "FP": self.fp, "TN": self.tn, "FN": self.fn}
        for k in ("tp", "fp", "tn", "fn"):
            del d[k]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        c = d["confusion"]
        return cls(d["accuracy"], d["precision"], d["recall"], d["f1"], c["TP"], c["FP"], c["TN"], c["FN"],
                   d.get("threshold", 0.5), list(d.get("undefined", [])), d.get("model", "cnn"))

    def to_json(self, extra: Optional[dict] = None) -> str:
        d = self.to_dict()
        if extra:
            d.update(extra)
        return json.dumps(d, indent=2, sort_keys=True) + "\n"


def confusion(scores: np.ndarray, labels: np.ndarray, threshold: float = 0.5) -> tuple[int, int, int, int]:
    pred = np.asarray(scores) >= threshold
    y = np.asarray(labels) == 1
    return (int(np.sum(pred & y)), int(np.sum(pred & ~y)), int(np.sum(~pred & ~y)), int(np.sum(~pred & y)))


def evaluate(scorer: Union[ModelCheckpoint, Callable], test: FeatureMatrix, threshold: float = 0.5,
             model: Optional[str] = None) -> EvalReport:
    if len(test) == 0:
        raise EmptyTestSet("test matrix has no rows")
    if isinstance(scorer, ModelCheckpoint):
        test.require_schema(scorer.schema_version)
        name = model or scorer.arch
    else:
        name = model or getattr(scorer, "name", "model")
    scores = scorer(test.rows)
    return EvalReport.from_confusion(*confusion(scores, test.labels, threshold), threshold=threshold, model=name)


# --- checkpoint files -----------------------------------------------------

def _encode(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "dtype": "<f8", "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"].encode("ascii"), validate=True)
    return np.frombuffer(raw, dtype=d["dtype"]).reshape(d["shape"]).astype(np.float64)


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True).encode("utf-8")


def checkpoint_payload(ckpt: ModelCheckpoint) -> dict:
    arrays = ckpt.model.arrays()
    return {
        "arch": ckpt.arch,
        "schema_version": ckpt.schema_version,
        "config": asdict(ckpt.config),
        "input_shape": list(ckpt.model.input_shape),
        "layers": ckpt.model.layer_specs(),
        "arrays": {k: _encode(v) for k, v in arrays.items()},
        "stats": ckpt.stats.to_dict() if ckpt.stats is not None else None,
        "history": ckpt.history,
        "best_epoch": ckpt.best_epoch,
        "run_config": ckpt.run_config,
    }


def checkpoint_checksum(ckpt: ModelCheckpoint) -> str:
    return hashlib.sha256(_canonical(checkpoint_payload(ckpt))).hexdigest()


def save_checkpoint(ckpt: ModelCheckpoint, path) -> str:
    """Write a versioned JSON container; returns the payload's sha256."""
    payload = checkpoint_payload(ckpt)
    digest = hashlib.sha256(_canonical(payload)).hexdigest()
    container = {"magic": CHECKPOINT_MAGIC, "version": CHECKPOINT_VERSION, "sha256": digest, "payload": payload}
    Path(path).write_bytes(_canonical(container) + b"\n")
    return digest


def load_checkpoint(path) -> ModelCheckpoint:
    raw = Path(path).read_bytes()
    try:
        container = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptChecksum(f"{path}: unreadable checkpoint ({exc})") from None
    if not isinstance(container, dict) or container.get("magic") != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a lexiphish checkpoint")
    if container.get("version") != CHECKPOINT_VERSION:
        raise VersionMismatch(container.get("version"), CHECKPOINT_VERSION)
    payload = container.get("payload")
    if payload is None or hashlib.sha256(_canonical(payload)).hexdigest() != container.get("sha256"):
        raise CorruptChecksum(f"{path}: checksum mismatch")

    cfg = ModelConfig.from_dict(payload["config"])
    if payload["arch"] == "cnn":
        expected = [layer.spec() for layer in cnn_layers(cfg)]
        if payload["layers"] != expected:
            raise CheckpointError(f"{path}: cnn layer manifest differs from the fixed architecture")
    net = Sequential.from_specs(payload["layers"], tuple(payload["input_shape"]))
    net.load_arrays({k: _decode(v) for k, v in payload["arrays"].items()})
    stats = NormStats.from_dict(payload["stats"]) if payload["stats"] is not None else None
    return ModelCheckpoint(
        model=net, config=cfg, arch=payload["arch"], stats=stats, schema_version=payload["schema_version"],
        history={k: list(v) for k, v in payload["history"].items()}, best_epoch=payload["best_epoch"],
        run_config=payload.get("run_config"),
    )


def export_curves(history: dict, path) -> None:
    """CSV of per-epoch accuracy/loss: epoch, train_acc, test_acc, train_loss, test_loss."""
    n = len(history.get("train_acc", []))
    if n == 0:
        raise InputError("history is empty")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", *HISTORY_KEYS])
        for i in range(n):
            w.writerow([i + 1, *(repr(float(history[k][i])) for k in HISTORY_KEYS)])


def read_curves(path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return {k: [float(r[k]) for r in rows] for k in HISTORY_KEYS}
