"""Ingest, merge, split and standardize labeled URL corpora."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyFile, InputError, MissingColumn, SchemaMismatch, TooFewSamples
from .records import FeatureMatrix, RawUrlRecord, Source

log = logging.getLogger(__name__)

STD_FLOOR = 1e-8


@dataclass
class IngestResult:
    records: list[RawUrlRecord]
    warnings: list[str]

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)


def _parse_bool(v: Optional[str]) -> Optional[bool]:
    if v is None:
        return None
    v = v.strip().lower()
    if v in ("yes", "true", "1", "y"):
        return True
    if v in ("no", "false", "0", "n"):
        return False
    return None


def _read_text(path) -> str:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    text = path.read_text(encoding="utf-8-sig")
    if not text.strip():
        raise EmptyFile(f"{path} is empty")
    return text


def _csv_records(text: str, path, column: str, source: Source) -> IngestResult:
    lines = text.splitlines()
    reader = csv.reader(lines, strict=True)
    header = next(reader)
    if column not in header:
        raise MissingColumn(column)
    col = header.index(column)
    optional = {k: header.index(k) for k in ("submission_time", "verified", "online", "target") if k in header}

    records, warnings = [], []
    label = 1 if source is Source.PHISH_FEED else 0
    lineno = 1
    while True:
        try:
            row = next(reader)
        except StopIteration:
            break
        except csv.Error as exc:
            # csv keeps going with the next physical line after a bad quote
            warnings.append(f"{path}:{reader.line_num}: malformed row ({exc})")
            continue
        lineno = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            warnings.append(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            continue
        url = row[col].strip()
        if not url:
            warnings.append(f"{path}:{lineno}: empty url")
            continue
        get = lambda k: row[optional[k]] if k in optional else None  # noqa: E731
        records.append(
            RawUrlRecord(
                url=url,
                label=label,
                source=source,
                submitted_at=get("submission_time") or None,
                verified=_parse_bool(get("verified")),
                online=_parse_bool(get("online")),
                target=get("target") or None,
            )
        )
    for w in warnings:
        log.warning(w)
    return IngestResult(records, warnings)


def ingest_phish_csv(path, url_column: str = "url") -> IngestResult:
    """Read a phishing-feed CSV export; every record is labeled 1.

    Only ``url_column`` is required. PhishTank-style ``submission_time``,
    ``verified``, ``online`` and ``target`` columns are carried through when
    present. Malformed rows are skipped and reported in ``warnings``.
    """
    text = _read_text(path)
    return _csv_records(text, path, url_column, Source.PHISH_FEED)


def ingest_legit_list(path, url_column: Optional[str] = None) -> IngestResult:
    """Read legitimate URLs; every record is labeled 0.

    Accepts a bare list (one URL per line) or a CSV with a header. For CSV the
    column is ``url_column`` if given, else the first of ``url``, ``urls``,
    ``URL``, ``URLs`` found in the header.
    """
    text = _read_text(path)
    first = text.splitlines()[0]
    header = next(csv.reader([first]))
    candidates = [url_column] if url_column else ["url", "urls", "URL", "URLs"]
    column = next((c for c in candidates if c in header), None)
    if column is not None and len(header) > 1:
        return _csv_records(text, path, column, Source.LEGIT_LIST)
    if url_column and column is None and "," in first:
        raise MissingColumn(url_column)
    if column is not None:
        lines = text.splitlines()[1:]
    else:
        lines = text.splitlines()
    records = [RawUrlRecord(url=ln.strip(), label=0, source=Source.LEGIT_LIST) for ln in lines if ln.strip()]
    if not records:
        raise EmptyFile(f"{path} has no URLs")
    return IngestResult(records, [])


@dataclass
class MergeResult:
    records: list[RawUrlRecord]
    duplicate_count: int
    conflict_count: int


def merge_dedupe(a: Sequence[RawUrlRecord], b: Sequence[RawUrlRecord]) -> MergeResult:
    """Concatenate, drop exact-string duplicates (first kept), and drop any URL
    that appears with both labels."""
    labels: dict[str, set[int]] = {}
    for rec in list(a) + list(b):
        labels.setdefault(rec.url, set()).add(rec.label)
    conflicts = {u for u, ls in labels.items() if len(ls) > 1}

    seen: set[str] = set()
    out, dup = [], 0
    for rec in list(a) + list(b):
        if rec.url in conflicts:
            continue
        if rec.url in seen:
            dup += 1
            continue
        seen.add(rec.url)
        out.append(rec)
    return MergeResult(out, dup, len(conflicts))


def split_indices(labels, ratio: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Stratified shuffle split. Returns sorted-by-draw train and test indices."""
    if not 0 < ratio < 1:
        raise InputError(f"split ratio must be in (0, 1), got {ratio}")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        n_train = int(round(ratio * len(idx)))
        train.append(idx[:n_train])
        test.append(idx[n_train:])
    train = np.concatenate(train) if train else np.array([], dtype=np.int64)
    test = np.concatenate(test) if test else np.array([], dtype=np.int64)
    if len(train) == 0 or len(test) == 0:
        raise TooFewSamples(f"split of {len(labels)} rows at ratio {ratio} leaves an empty side")
    # interleave classes so downstream consumers never see label-sorted blocks
    return train[rng.permutation(len(train))], test[rng.permutation(len(test))]


def split(records, ratio: float = 0.8, seed: int = 42):
    """Split a list of records or a :class:`FeatureMatrix` into (train, test)."""
    if isinstance(records, FeatureMatrix):
        tr, te = split_indices(records.labels, ratio, seed)
        return records.take(tr, "train"), records.take(te, "test")
    records = list(records)
    tr, te = split_indices([r.label for r in records], ratio, seed)
    return [records[i] for i in tr], [records[i] for i in te]


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray
    std: np.ndarray
    schema_version: str
    computed_on: str = "train_only"

    @classmethod
    def fit(cls, rows: np.ndarray, schema_version: str) -> "NormStats":
        rows = np.asarray(rows, dtype=np.float64)
        return cls(rows.mean(axis=0), np.maximum(rows.std(axis=0), STD_FLOOR), schema_version)

    def transform(self, rows: np.ndarray) -> np.ndarray:
        return (np.asarray(rows, dtype=np.float64) - self.mean) / self.std

    def inverse(self, rows: np.ndarray) -> np.ndarray:
        return np.asarray(rows, dtype=np.float64) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"schema_version": self.schema_version, "mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(np.array(d["mean"], dtype=np.float64), np.array(d["std"], dtype=np.float64), d["schema_version"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "NormStats":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def standardize(train: FeatureMatrix, test: FeatureMatrix) -> tuple[FeatureMatrix, FeatureMatrix, NormStats]:
    """z-score both matrices with statistics from ``train`` alone."""
    if train.schema_version != test.schema_version:
        raise SchemaMismatch(f"train schema {train.schema_version!r} != test schema {test.schema_version!r}")
    stats = NormStats.fit(train.rows, train.schema_version)
    return apply_stats(train, stats), apply_stats(test, stats), stats


def apply_stats(fm: FeatureMatrix, stats: NormStats) -> FeatureMatrix:
    fm.require_schema(stats.schema_version)
    return replace(fm, rows=stats.transform(fm.rows))


def unstandardize(fm: FeatureMatrix, stats: NormStats) -> FeatureMatrix:
    return replace(fm, rows=stats.inverse(fm.rows))
