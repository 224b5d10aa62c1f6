from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from neurondiag.corpus import load_corpus
from neurondiag.generate import GenParams

# Size cycle for random sweeps; every shape stays at or under 12 neurons.
SWEEP_SIZES = [(3, 2), (3, 3), (4, 2), (4, 3), (3, 4), (2, 3)]


def sweep_params(seed: int, **overrides) -> GenParams:
    cols, rows = SWEEP_SIZES[seed % len(SWEEP_SIZES)]
    return GenParams(columns=cols, rows=rows, seed=seed, **overrides)


@pytest.fixture(scope="session")
def corpus():
    return load_corpus()


@pytest.fixture(scope="session")
def verified(corpus):
    return [c for c in corpus if c.verified]


@pytest.fixture(scope="session")
def by_id(corpus):
    return {c.case_id: c for c in corpus}
