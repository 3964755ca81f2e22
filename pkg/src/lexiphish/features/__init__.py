from .extract import (
    DISPLAY_NAMES,
    FEATURE_NAMES,
    SCHEMA,
    SCHEMA_VERSION,
    Featurizer,
    FeatureSchema,
    IndexLookupProvider,
    Lexicon,
    StubIndexProvider,
    extract_features,
    featurize_batch,
    is_ipv4_host,
)
from .urls import ParsedUrl, parse_url

__all__ = [
    "DISPLAY_NAMES",
    "FEATURE_NAMES",
    "SCHEMA",
    "SCHEMA_VERSION",
    "Featurizer",
    "FeatureSchema",
    "IndexLookupProvider",
    "Lexicon",
    "ParsedUrl",
    "StubIndexProvider",
    "extract_features",
    "featurize_batch",
    "is_ipv4_host",
    "parse_url",
]
