"""Test configuration and fixtures."""

import pytest

from treepin.core.models import (
    BernoulliDisorder,
    BranchShift,
    ConstantDisorder,
    GaussianDisorder,
    ModelSpec,
    NoDefect,
    SubtreeConstant,
    SubtreeShift,
)
from treepin.utils.cache import critical_cache
from treepin.utils.rng import replica_seed


def all_model_kinds(d: int, bulk=None, u: float = 0.7):
    """One model of every defect kind for arity d (branch models force d1 = 1)."""
    bulk = bulk or GaussianDisorder()
    d1 = d - 1
    return [
        ModelSpec(d=d, d1=d1, bulk=bulk, defect=NoDefect()),
        ModelSpec(d=d, d1=1, bulk=bulk, defect=BranchShift(u=u)),
        ModelSpec(d=d, d1=d1, bulk=bulk, defect=SubtreeConstant(u=u)),
        ModelSpec(d=d, d1=d1, bulk=bulk, defect=SubtreeShift(u=u)),
    ]


def seeds(count: int, master: int = 20240915):
    return [replica_seed(master, r) for r in range(count)]


@pytest.fixture(autouse=True)
def test_env(tmp_path, monkeypatch):
    """Isolate every test from the caller's environment."""
    monkeypatch.setenv("TREEPIN_ENABLE_CACHE", "false")
    monkeypatch.setenv("TREEPIN_OUTPUT_DIR", str(tmp_path / "outputs"))
    monkeypatch.setenv("TREEPIN_CACHE_DIR", str(tmp_path / "cache"))
    for name in ("TREEPIN_NODE_BUDGET", "TREEPIN_BRUTE_FORCE_LIMIT", "TREEPIN_BLOCK_SIZE",
                 "TREEPIN_THREADS", "TREEPIN_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    yield
    critical_cache.clear()


@pytest.fixture
def gaussian():
    return GaussianDisorder(mu=0.0, sigma=1.0)


@pytest.fixture
def fair_coin():
    """Bernoulli ±1 with p = 1/2."""
    return BernoulliDisorder(p=0.5, lo=-1.0, hi=1.0)


@pytest.fixture
def hd_model(gaussian):
    return ModelSpec(d=2, d1=1, bulk=gaussian)


@pytest.fixture
def branch_model(gaussian):
    return ModelSpec(d=2, d1=1, bulk=gaussian, defect=BranchShift(u=0.5))


@pytest.fixture
def subtree_model(gaussian):
    return ModelSpec(d=3, d1=2, bulk=gaussian, defect=SubtreeConstant(u=0.5))


@pytest.fixture
def det_model():
    """Non-disordered tree with a constant-potential defect subtree."""
    return ModelSpec(d=3, d1=2, bulk=ConstantDisorder(c=0.0), defect=SubtreeConstant(u=0.3))
