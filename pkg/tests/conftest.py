from pathlib import Path

import numpy as np
import pytest

from lexiphish.dataset import ingest_legit_list, ingest_phish_csv, merge_dedupe, split, standardize
from lexiphish.features import featurize_batch
from lexiphish.model import ModelConfig, build_model, train

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = Path(__file__).resolve().parent / "fixtures"
CORPUS = ROOT / "data" / "corpus"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def corpus_fm():
    ph = ingest_phish_csv(CORPUS / "phish_feed.csv")
    lg = ingest_legit_list(CORPUS / "legit_list.txt")
    merged = merge_dedupe(ph.records, lg.records)
    return featurize_batch(merged.records)


@pytest.fixture(scope="session")
def corpus_split(corpus_fm):
    tr, te = split(corpus_fm, 0.8, 42)
    return standardize(tr, te)


@pytest.fixture(scope="session")
def trained(corpus_split):
    """The desk-scale run: seed 42, 80/20, 50 epochs. Shared by every test that needs a fitted model."""
    tr, te, stats = corpus_split
    cfg = ModelConfig(seed=42, epochs=50)
    return train(build_model(42, cfg), tr, te, cfg, stats)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one PASS/FAIL line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: list[str] = []


def record(name: str, ok: bool, detail: str = "") -> bool:
    line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else "")
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
