import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from seqguard.corpus import load_corpus_path
from seqguard.knowledge import build_kb
from seqguard.miner import MiningConfig, hierarchical_mine
from seqguard.providers import offline_providers
from seqguard.taxonomy import load_seed_taxonomy

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"

FIXTURE_SUPPORTS = (10, 5, 3, 2)


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def taxonomy():
    return load_seed_taxonomy()


@pytest.fixture(scope="session")
def fixture_corpus(taxonomy):
    return load_corpus_path(FIXTURES / "corpus.jsonl", taxonomy)


@pytest.fixture(scope="session")
def fixture_mining(fixture_corpus):
    return hierarchical_mine(
        fixture_corpus, MiningConfig(supports=FIXTURE_SUPPORTS, tau=0.9)
    )


@pytest.fixture(scope="session")
def providers(taxonomy):
    return offline_providers(taxonomy)


@pytest.fixture(scope="session")
def fixture_kb(fixture_mining, fixture_corpus, providers):
    return build_kb(
        fixture_mining,
        fixture_corpus,
        providers.embedder,
        providers.reasoner,
        k=5,
    )


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        status = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"\n[acceptance] {status}: {name}", flush=True)
