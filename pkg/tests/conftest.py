"""Shared fixtures: the canonical 49-party registry, dataset, and model.

Heavy artifacts are session-scoped; the canonical chain (registry ->
dataset -> 80/20 split at seed 42 -> fitted model) matches the acceptance
configuration exactly.
"""

from pathlib import Path

import numpy as np
import pytest

from slipcount.augment import AugmentationSpec
from slipcount.classifier import fit
from slipcount.dataset import build_labeled_dataset, split_dataset
from slipcount.fixtures import fixture_registry
from slipcount.registry import SymbolRegistry

REPO_ROOT = Path(__file__).resolve().parents[1]
FIXTURES_49 = REPO_ROOT / "fixtures" / "49"

CANONICAL_SEED = 42


@pytest.fixture(scope="session")
def registry49() -> SymbolRegistry:
    if FIXTURES_49.is_dir():
        return SymbolRegistry.load(FIXTURES_49)
    return fixture_registry()


@pytest.fixture(scope="session")
def small_registry() -> SymbolRegistry:
    return fixture_registry(count=8)


@pytest.fixture(scope="session")
def canonical_dataset(registry49):
    return build_labeled_dataset(registry49, AugmentationSpec(noise_seed=CANONICAL_SEED))


@pytest.fixture(scope="session")
def canonical_split(canonical_dataset):
    return split_dataset(canonical_dataset, 0.8, CANONICAL_SEED)


@pytest.fixture(scope="session")
def canonical_model(canonical_split):
    train, _ = canonical_split
    return fit(train)


@pytest.fixture(scope="session")
def small_model(small_registry):
    ds = build_labeled_dataset(small_registry, AugmentationSpec(noise_seed=0))
    train, _ = split_dataset(ds, 0.8, 0)
    return fit(train)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
