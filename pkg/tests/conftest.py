import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import random_nondegenerate_lp  # noqa: E402

from rhpdhg.lp_model import StandardFormLP  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures" / "mps"
CORPUS_SEED = 2024


@pytest.fixture
def e1():
    """min 0 s.t. x = 1, x >= 0; saddle point (1, 0)."""
    return StandardFormLP.from_dense([[1.0]], [1.0], [0.0], name="E1")


@pytest.fixture
def primal_infeasible():
    return StandardFormLP.from_dense([[1.0], [1.0]], [1.0, 2.0], [0.0], name="PINF")


@pytest.fixture
def dual_infeasible():
    return StandardFormLP.from_dense([[1.0, -1.0]], [0.0], [-1.0, 0.0], name="DINF")


@pytest.fixture
def primal_dual_infeasible():
    return StandardFormLP.from_dense([[1.0, 0.0], [1.0, 0.0]], [1.0, 2.0], [0.0, -1.0], name="PDINF")


def oracle_corpus(count: int, seed: int = CORPUS_SEED):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        m = int(rng.integers(2, 4))
        n = int(rng.integers(m + 2, 7))
        out.append(random_nondegenerate_lp(rng, m, n))
    return out


def as_lp(oracle) -> StandardFormLP:
    return StandardFormLP.from_dense(oracle.A, oracle.b, oracle.c)
