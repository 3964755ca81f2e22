"""Record and matrix containers shared by the featurizer and the data pipeline."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import InputError, MissingColumn, SchemaMismatch


class Source(str, Enum):
    PHISH_FEED = "phish_feed"
    LEGIT_LIST = "legit_list"


LABEL_FOR_SOURCE = {Source.PHISH_FEED: 1, Source.LEGIT_LIST: 0}


@dataclass(frozen=True)
class RawUrlRecord:
    url: str
    label: int
    source: Source
    submitted_at: Optional[str] = None
    verified: Optional[bool] = None
    online: Optional[bool] = None
    target: Optional[str] = None

    def __post_init__(self):
        if self.label != LABEL_FOR_SOURCE[self.source]:
            raise InputError(f"label {self.label} inconsistent with source {self.source.value}")


@dataclass
class FeatureMatrix:
    """N x 21 feature rows with their labels.

    ``urls`` is optional bookkeeping so exports can show which URL a row came
    from; it is not written to the feature CSV.
    """

    rows: np.ndarray
    labels: np.ndarray
    schema_version: str
    split_tag: Optional[str] = None
    urls: Optional[list[str]] = None
    errors: list[tuple[int, str]] = field(default_factory=list)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.rows.ndim != 2:
            raise InputError(f"rows must be 2-D, got shape {self.rows.shape}")
        if len(self.rows) != len(self.labels):
            raise InputError(f"{len(self.rows)} rows but {len(self.labels)} labels")
        if self.urls is not None and len(self.urls) != len(self.rows):
            raise InputError("urls length does not match rows")

    def __len__(self) -> int:
        return len(self.rows)

    def take(self, idx, split_tag: Optional[str] = None) -> "FeatureMatrix":
        idx = np.asarray(idx, dtype=np.int64)
        return replace(
            self,
            rows=self.rows[idx],
            labels=self.labels[idx],
            split_tag=split_tag if split_tag is not None else self.split_tag,
            urls=[self.urls[i] for i in idx] if self.urls is not None else None,
            errors=[],
        )

    def require_schema(self, version: str) -> None:
        if self.schema_version != version:
            raise SchemaMismatch(f"schema {self.schema_version!r} != expected {version!r}")


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def write_feature_csv(fm: FeatureMatrix, path, names: Sequence[str]) -> None:
    """Header: feature names in canonical order, then ``label``."""
    if fm.rows.shape[1] != len(names):
        raise SchemaMismatch(f"{fm.rows.shape[1]} columns but {len(names)} names")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(names) + ["label"])
        for row, y in zip(fm.rows, fm.labels):
            w.writerow([_fmt(v) for v in row] + [int(y)])


def read_feature_csv(path, names: Sequence[str], schema_version: str) -> FeatureMatrix:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path} is empty") from None
        expected = list(names) + ["label"]
        if header != expected:
            missing = [n for n in expected if n not in header]
            if missing:
                raise MissingColumn(missing[0])
            raise SchemaMismatch(f"{path}: column order differs from schema {schema_version}")
        rows, labels = [], []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(expected):
                raise InputError(f"{path}:{lineno}: expected {len(expected)} fields, got {len(rec)}")
            try:
                rows.append([float(v) for v in rec[:-1]])
                labels.append(int(rec[-1]))
            except ValueError:
                raise InputError(f"{path}:{lineno}: non-numeric field") from None
    return FeatureMatrix(
        rows=np.array(rows, dtype=np.float64).reshape(-1, len(names)),
        labels=np.array(labels, dtype=np.int64),
        schema_version=schema_version,
    )
