import numpy as np
import pytest

from poolsim.params import (
    NameParams,
    PoolEntry,
    PoolSpec,
    SimConfig,
    SystematicRiskModel,
    TimeGrid,
    validate_pool,
)


def test_validate_fig1_pool_ok():
    pool = PoolSpec.homogeneous_pool(NameParams(4.0, 0.2, 0.9, 2.0, 2.0), 0.2)
    report = validate_pool(pool, cap=100.0)
    assert report.ok
    assert report.violations == []


def test_validate_negative_sigma():
    pool = PoolSpec.homogeneous_pool(NameParams(4.0, 0.2, -1.0, 2.0, 2.0), 0.2)
    report = validate_pool(pool)
    assert not report.ok
    assert any("sigma negative" in v for v in report.violations)


def test_validate_empty_pool():
    report = validate_pool(PoolSpec(entries=()))
    assert not report.ok
    assert any("N = 0" in v for v in report.violations)


def test_validate_cap_and_nonfinite():
    pool = PoolSpec(entries=(
        PoolEntry(NameParams(2e6, 0.2, 0.9, 2.0, -2e6), 0.2, 3),
        PoolEntry(NameParams(4.0, float("nan"), 0.9, 2.0, 0.0), -0.1, 2),
    ))
    report = validate_pool(pool)
    joined = " | ".join(report.violations)
    assert "alpha exceeds cap" in joined
    assert "|beta_s| exceeds cap" in joined
    assert "lambda_bar not finite" in joined
    assert "lambda0 negative" in joined


def test_validation_is_pure():
    pool = PoolSpec.homogeneous_pool(NameParams(4.0, 0.2, 0.9, 2.0, 2.0), 0.2)
    assert validate_pool(pool).ok == validate_pool(pool).ok
    assert pool.entries[0].params.sigma == 0.9


def test_expand_names_largest_remainder():
    pool = PoolSpec(entries=(
        PoolEntry(NameParams(1, 1, 1, 1, 1), 0.1, 1),
        PoolEntry(NameParams(2, 2, 2, 2, 2), 0.2, 2),
    ))
    names = pool.expand_names(10)
    assert len(names["alpha"]) == 10
    # one third / two thirds split: 3 + 7 or 4 + 6 depending on remainders
    counts = np.bincount(names["entry_index"])
    assert counts.sum() == 10
    assert counts[1] > counts[0]
    # without rescaling, raw weights are used
    raw = pool.expand_names()
    assert list(np.bincount(raw["entry_index"])) == [1, 2]


def test_risk_model_kinds():
    cir = SystematicRiskModel.cir(4.0, 0.5, 0.5, 0.5)
    assert cir.b0(0.5) == pytest.approx(0.0)
    assert cir.sigma0(0.25) == pytest.approx(0.5 * 0.5)
    assert cir.sigma0(-1.0) == 0.0  # truncated under the square root
    ou = SystematicRiskModel.ou(1.0, 0.0, 0.3, 0.1)
    assert ou.sigma0(123.0) == 0.3
    bm = SystematicRiskModel.brownian(0.0)
    assert bm.b0(2.0) == 0.0 and bm.sigma0(2.0) == 1.0
    none = SystematicRiskModel.none(0.7)
    assert none.b0(0.7) == 0.0 and none.sigma0(0.7) == 0.0
    with pytest.raises(ValueError):
        SystematicRiskModel.cir(-1.0, 0.5, 0.5, 0.5)
    with pytest.raises(ValueError):
        SystematicRiskModel("weird", 0.0)


def test_time_grid():
    grid = TimeGrid(delta=0.01, horizon=1.0, sample_horizons=(0.25, 1.0))
    assert grid.steps == 100
    assert grid.index_of(0.25) == 25
    assert grid.horizon_indices() == [25, 100]
    assert len(grid.times()) == 101
    with pytest.raises(ValueError):
        TimeGrid(delta=-0.01, horizon=1.0)
    with pytest.raises(ValueError):
        TimeGrid(delta=0.01, horizon=1.0, sample_horizons=(0.2513,))
    # default horizon sampling
    assert TimeGrid(delta=0.01, horizon=1.0).sample_horizons == (1.0,)


def test_sim_config():
    with pytest.raises(ValueError):
        SimConfig(trials=0, master_seed=1)
    cfg = SimConfig(trials=5, master_seed=1, parallelism=4)
    assert cfg.parallelism == 4
