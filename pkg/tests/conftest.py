import numpy as np
import pytest

from poolsim.params import NameParams, PoolSpec, SystematicRiskModel, TimeGrid


@pytest.fixture
def fig1_pool() -> PoolSpec:
    """Baseline parameter case used throughout the figure experiments."""
    return PoolSpec.homogeneous_pool(NameParams(4.0, 0.2, 0.9, 2.0, 2.0), 0.2)


@pytest.fixture
def cir_model() -> SystematicRiskModel:
    return SystematicRiskModel.cir(kappa=4.0, theta=0.5, epsilon=0.5, x0=0.5)


@pytest.fixture
def unit_grid() -> TimeGrid:
    return TimeGrid(delta=0.01, horizon=1.0)


def two_sample_ks(a, b) -> float:
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / len(a)
    fb = np.searchsorted(b, pooled, side="right") / len(b)
    return float(np.abs(fa - fb).max())
