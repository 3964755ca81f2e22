"""Reference classifiers on the same standardized features: KNN and a one-hidden-layer MLP."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EmptyTrainSet, InputError, KTooLarge
from .model import ModelCheckpoint, ModelConfig, EvalReport
from .nn import Dense, ReLU, Sequential, Sigmoid
from .records import FeatureMatrix


# --- k nearest neighbours -------------------------------------------------

@dataclass
class KnnModel:
    x: np.ndarray
    y: np.ndarray
    k: int = 5
    name: str = "knn"

    def __call__(self, q: np.ndarray) -> np.ndarray:
        return knn_predict(self, q).astype(np.float64)


def knn_fit(train: FeatureMatrix, k: int = 5) -> KnnModel:
    if len(train) == 0:
        raise EmptyTrainSet("no training rows")
    if k < 1:
        raise InputError("k must be >= 1")
    if k > len(train):
        raise KTooLarge(f"k={k} exceeds {len(train)} training rows")
    return KnnModel(train.rows.copy(), train.labels.copy(), k)


def knn_neighbors(model: KnnModel, q: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Indices of the k nearest training rows per query, nearest first.

    Squared Euclidean distances are computed by explicit differences so equal
    points stay exactly equal; ties are broken by training-row index.
    """
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    out = np.empty((len(q), model.k), dtype=np.int64)
    for s in range(0, len(q), chunk):
        qc = q[s : s + chunk]
        d = np.zeros((len(qc), len(model.x)))
        for j in range(q.shape[1]):
            d += (qc[:, j, None] - model.x[None, :, j]) ** 2
        out[s : s + chunk] = np.argsort(d, axis=1, kind="stable")[:, : model.k]
    return out


def knn_predict(model: KnnModel, q: np.ndarray) -> np.ndarray:
    """Majority vote of the k nearest; a tied vote goes to the single nearest."""
    single = np.asarray(q).ndim == 1
    nn = knn_neighbors(model, q)
    votes = model.y[nn]
    pos = votes.sum(axis=1)
    pred = np.where(2 * pos > model.k, 1, 0)
    tie = 2 * pos == model.k
    pred[tie] = votes[tie, 0]
    return pred[0] if single else pred


# --- MLP ------------------------------------------------------------------

MLP_HIDDEN = 64


def build_mlp(seed: int = 42, config: Optional[ModelConfig] = None, n_features: int = 21) -> ModelCheckpoint:
    """Dense(21->64, ReLU) -> Dense(64->1, sigmoid), He-uniform init."""
    cfg = config if config is not None else ModelConfig(seed=seed)
    net = Sequential([Dense(MLP_HIDDEN), ReLU(), Dense(1), Sigmoid()], (n_features,))
    net.build(np.random.default_rng(seed))
    return ModelCheckpoint(model=net, config=cfg, arch="mlp")


def mlp_train(train: FeatureMatrix, test: FeatureMatrix, cfg: Optional[ModelConfig] = None, **kw):
    from .model import train as _train

    cfg = cfg if cfg is not None else ModelConfig()
    return _train(build_mlp(cfg.seed, cfg), train, test, cfg, **kw)


def mlp_evaluate(ckpt: ModelCheckpoint, test: FeatureMatrix, threshold: float = 0.5) -> EvalReport:
    from .model import evaluate

    return evaluate(ckpt, test, threshold, model="mlp")


# --- comparison table -----------------------------------------------------

COMPARE_COLUMNS = ("model", "accuracy", "precision", "recall", "f1", "source", "proposed")


@dataclass
class ComparisonRow:
    model: str
    accuracy: Optional[float]
    precision: Optional[float] = None
    recall: Optional[float] = None
    f1: Optional[float] = None
    source: str = "computed"
    proposed: bool = False

    def __post_init__(self):
        if not self.model or not str(self.model).strip():
            raise InputError("comparison row needs a model name")
        if self.source not in ("computed", "external"):
            raise InputError(f"source must be computed or external, got {self.source!r}")


def _opt_float(v) -> Optional[float]:
    if v is None or (isinstance(v, str) and not v.strip()):
        return None
    return float(v)


def read_external_rows(path) -> list[ComparisonRow]:
    """Rows typed in from elsewhere (e.g. published numbers); columns model, accuracy[, precision, recall, f1]."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = []
        for rec in csv.DictReader(fh):
            rows.append(ComparisonRow(
                model=(rec.get("model") or "").strip(),
                accuracy=_opt_float(rec.get("accuracy") or rec.get("acc")),
                precision=_opt_float(rec.get("precision")),
                recall=_opt_float(rec.get("recall")),
                f1=_opt_float(rec.get("f1")),
                source="external",
            ))
    return rows


def compare_models(reports: Sequence[tuple[str, EvalReport]], external: Iterable = (),
                   proposed: str = "cnn", out=None) -> list[ComparisonRow]:
    """Merge computed reports and external rows into one table sorted by accuracy (desc).

    External rows may be :class:`ComparisonRow` or dicts like
    ``{"name": "RF", "acc": 99.12}``; their numbers are copied verbatim.
    Writes CSV to ``out`` (and JSON next to it) when given.
    """
    rows = [ComparisonRow(name, r.accuracy, r.precision, r.recall, r.f1, "computed") for name, r in reports]
    for e in external:
        if isinstance(e, ComparisonRow):
            rows.append(e)
        else:
            rows.append(ComparisonRow(
                model=e.get("model", e.get("name", "")),
                accuracy=_opt_float(e.get("accuracy", e.get("acc"))),
                precision=_opt_float(e.get("precision")),
                recall=_opt_float(e.get("recall")),
                f1=_opt_float(e.get("f1")),
                source="external",
            ))
    if not rows:
        raise InputError("nothing to compare")
    names = [r.model for r in rows]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise InputError(f"duplicate model names: {', '.join(dupes)}")
    for r in rows:
        r.proposed = r.model == proposed
    rows.sort(key=lambda r: -(r.accuracy if r.accuracy is not None else -np.inf))
    if out is not None:
        write_comparison(rows, out)
    return rows


def write_comparison(rows: Sequence[ComparisonRow], path) -> None:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARE_COLUMNS)
        for r in rows:
            w.writerow([r.model] + ["" if v is None else f"{v:.2f}" for v in (r.accuracy, r.precision, r.recall, r.f1)]
                       + [r.source, int(r.proposed)])
    path.with_suffix(".json").write_text(json.dumps([asdict(r) for r in rows], indent=2) + "\n", encoding="utf-8")
