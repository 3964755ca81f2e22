"""The canonical 21-slot lexical feature vector."""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Protocol, Sequence

import numpy as np

from ..errors import BatchEmpty, LexiphishError
from ..records import FeatureMatrix, RawUrlRecord
from .urls import ParsedUrl, parse_url

SCHEMA_VERSION = "lexical-21/v1"

COUNT, LENGTH, BINARY = "count", "length", "binary"


@dataclass(frozen=True)
class FeatureSchema:
    names: tuple[str, ...]
    kinds: tuple[str, ...]
    version: str = SCHEMA_VERSION

    def __post_init__(self):
        if len(self.names) != 21 or len(self.kinds) != 21:
            raise ValueError("feature schema must have exactly 21 slots")
        if len(set(self.names)) != len(self.names):
            raise ValueError("feature names must be unique")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)


_SLOTS = [
    ("use_of_ip", BINARY),
    ("abnormal_url", BINARY),
    ("google_index", BINARY),
    ("count_dot", COUNT),
    ("count_www", COUNT),
    ("count_at", COUNT),
    ("count_dir", COUNT),
    ("count_embed", COUNT),
    ("short_url", BINARY),
    ("count_https", COUNT),
    ("count_http", COUNT),
    ("count_percent", COUNT),
    ("count_question", COUNT),
    ("count_hyphen", COUNT),
    ("count_equal", COUNT),
    ("url_length", LENGTH),
    ("hostname_length", LENGTH),
    ("sus_url", BINARY),
    ("fd_length", LENGTH),
    ("count_digits", COUNT),
    ("count_letters", COUNT),
]

SCHEMA = FeatureSchema(names=tuple(n for n, _ in _SLOTS), kinds=tuple(k for _, k in _SLOTS))
FEATURE_NAMES = SCHEMA.names

# display names used in reports, where a conventional one exists
DISPLAY_NAMES = {
    "use_of_ip": "Contain Ip Address",
    "abnormal_url": "Abnormal URL",
    "google_index": "Is Google Index",
    "count_www": "Count WWW",
    "count_at": "Count @",
    "count_embed": "No of Embedded",
    "count_http": "Count HTTP",
    "count_question": "Count question mark",
    "url_length": "URL Length",
    "hostname_length": "Hostname length",
    "sus_url": "Suspicious words",
    "count_digits": "Digit count",
    "count_letters": "Letter count",
}


class IndexLookupProvider(Protocol):
    def is_indexed(self, hostname: str) -> bool: ...


class StubIndexProvider:
    """Answers "indexed" for every host. No network, no state; safe to share."""

    def __init__(self, verdict: bool = True):
        self.verdict = verdict

    def is_indexed(self, hostname: str) -> bool:
        return self.verdict


def _read_list(path) -> tuple[str, ...]:
    text = Path(path).read_text(encoding="utf-8")
    return tuple(line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#"))


def _bundled(name: str) -> tuple[str, ...]:
    with resources.as_file(resources.files("lexiphish.features") / "data" / name) as p:
        return _read_list(p)


@dataclass(frozen=True)
class Lexicon:
    suspicious_words: tuple[str, ...]
    shorteners: tuple[str, ...]

    @classmethod
    def load(cls, keywords_path=None, shorteners_path=None) -> "Lexicon":
        return cls(
            suspicious_words=_read_list(keywords_path) if keywords_path else _bundled("suspicious_words.txt"),
            shorteners=_read_list(shorteners_path) if shorteners_path else _bundled("shorteners.txt"),
        )


_DEFAULT_LEXICON: Optional[Lexicon] = None


def default_lexicon() -> Lexicon:
    global _DEFAULT_LEXICON
    if _DEFAULT_LEXICON is None:
        _DEFAULT_LEXICON = Lexicon.load()
    return _DEFAULT_LEXICON


def _octet(group: str) -> bool:
    if group[:2].lower() == "0x":
        digits = group[2:]
        return 0 < len(digits) <= 2 and all(c in "0123456789abcdefABCDEF" for c in digits)
    return group.isascii() and group.isdigit() and len(group) <= 3 and int(group) <= 255


def is_ipv4_host(hostname: str) -> bool:
    """Dotted quad, each group decimal 0-255 or 0x-prefixed hex up to 0xff."""
    groups = hostname.split(".")
    return len(groups) == 4 and all(_octet(g) for g in groups)


def _is_shortener(hostname: str, shorteners: Iterable[str]) -> bool:
    host = hostname.lower()
    return any(host == s or host.endswith("." + s) for s in shorteners)


def _keyword_pattern(words: Sequence[str]) -> re.Pattern:
    return re.compile("|".join(re.escape(w) for w in words), re.IGNORECASE)


class Featurizer:
    """Maps a raw URL string to its 21 lexical features.

    Instances are immutable after construction and can be shared across
    threads as long as the index provider can.
    """

    def __init__(self, provider: Optional[IndexLookupProvider] = None, lexicon: Optional[Lexicon] = None):
        self.provider = provider if provider is not None else StubIndexProvider()
        self.lexicon = lexicon if lexicon is not None else default_lexicon()
        self._sus = _keyword_pattern(self.lexicon.suspicious_words)

    def features(self, parsed: ParsedUrl) -> dict[str, int]:
        raw, host, path = parsed.raw, parsed.hostname, parsed.path
        return {
            "use_of_ip": int(is_ipv4_host(host)),
            "abnormal_url": int(bool(host) and host not in raw),
            "google_index": int(bool(self.provider.is_indexed(host))),
            "count_dot": raw.count("."),
            "count_www": raw.count("www"),
            "count_at": raw.count("@"),
            "count_dir": path.count("/"),
            "count_embed": path.count("//"),
            "short_url": int(_is_shortener(host, self.lexicon.shorteners)),
            "count_https": raw.count("https"),
            "count_http": raw.count("http"),
            "count_percent": raw.count("%"),
            "count_question": raw.count("?"),
            "count_hyphen": raw.count("-"),
            "count_equal": raw.count("="),
            "url_length": len(raw),
            "hostname_length": len(host),
            "sus_url": int(self._sus.search(raw) is not None),
            "fd_length": len(parsed.first_dir),
            "count_digits": sum(c in "0123456789" for c in raw),
            "count_letters": sum(("a" <= c <= "z") or ("A" <= c <= "Z") for c in raw),
        }

    def vector(self, raw: str) -> np.ndarray:
        feats = self.features(parse_url(raw))
        return np.array([feats[n] for n in FEATURE_NAMES], dtype=np.float64)

    def batch(self, records: Sequence[RawUrlRecord]) -> FeatureMatrix:
        rows, labels, urls, errors = [], [], [], []
        for i, rec in enumerate(records):
            try:
                rows.append(self.vector(rec.url))
            except LexiphishError as exc:
                errors.append((i, f"{type(exc).__name__}: {exc}"))
                continue
            labels.append(rec.label)
            urls.append(rec.url.strip())
        if not rows:
            raise BatchEmpty(f"no rows featurized ({len(errors)} errors)")
        return FeatureMatrix(
            rows=np.vstack(rows),
            labels=np.array(labels),
            schema_version=SCHEMA_VERSION,
            urls=urls,
            errors=errors,
        )


def extract_features(raw: str, idx: Optional[IndexLookupProvider] = None, lexicon: Optional[Lexicon] = None) -> np.ndarray:
    """Feature vector for one URL, aligned with :data:`FEATURE_NAMES`."""
    return Featurizer(idx, lexicon).vector(raw)


def featurize_batch(records: Sequence[RawUrlRecord], idx: Optional[IndexLookupProvider] = None,
                    lexicon: Optional[Lexicon] = None) -> FeatureMatrix:
    """Featurize in order; unparseable rows land in ``.errors`` as ``(index, message)``."""
    return Featurizer(idx, lexicon).batch(records)
