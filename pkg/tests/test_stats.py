import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poolsim.stats import EmpiricalDistribution, histogram, ks_distance, spearman, var_at_level

samples_strategy = st.lists(
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), min_size=1, max_size=200)


def test_var_order_statistic_examples():
    assert var_at_level([0.1, 0.2, 0.3, 0.4], 0.5) == 0.2
    assert var_at_level([3.0, 3.0, 3.0], 0.25) == 3.0
    assert var_at_level([3.0, 3.0, 3.0], 0.99) == 3.0
    d = EmpiricalDistribution.from_samples(np.arange(1, 21) / 20.0)
    assert var_at_level(d, 0.95) == 0.95  # 0.95*20 must not ceil to 20
    with pytest.raises(ValueError):
        var_at_level([1.0], 0.0)
    with pytest.raises(ValueError):
        var_at_level([1.0], 1.0)


@settings(max_examples=200, deadline=None)
@given(samples_strategy, st.floats(min_value=0.01, max_value=0.99),
       st.floats(min_value=0.01, max_value=0.99))
def test_var_monotone_and_bounded(xs, l1, l2):
    lo, hi = sorted((l1, l2))
    v_lo = var_at_level(xs, lo)
    v_hi = var_at_level(xs, hi)
    assert v_lo <= v_hi
    assert min(xs) <= v_lo and v_hi <= max(xs)


def test_ks_examples():
    assert ks_distance([1, 2, 3], [1, 2, 3]) == 0.0
    assert ks_distance([0.0], [1.0]) == 1.0
    assert ks_distance([0.0, 1.0], [0.5]) == 0.5


@settings(max_examples=100, deadline=None)
@given(samples_strategy, samples_strategy, samples_strategy)
def test_ks_symmetric_triangle(a, b, c):
    dab = ks_distance(a, b)
    assert dab == ks_distance(b, a)
    assert 0.0 <= dab <= 1.0
    assert dab <= ks_distance(a, c) + ks_distance(c, b) + 1e-12


def test_spearman_examples():
    assert spearman([1, 5, 9], [2, 10, 18]) == pytest.approx(1.0)
    assert spearman([1, 5, 9], [-2, -10, -18]) == pytest.approx(-1.0)
    assert spearman([1, 2, 3], [1, 1, 2]) == pytest.approx(math.sqrt(3) / 2, rel=1e-12)
    assert math.isnan(spearman([1, 2, 3], [5, 5, 5]))
    with pytest.raises(ValueError):
        spearman([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        spearman([1], [1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(min_value=-100, max_value=100, allow_nan=False),
                min_size=3, max_size=60, unique=True))
def test_spearman_invariant_under_increasing_transforms(xs):
    x = np.asarray(xs)
    y = np.random.default_rng(0).permutation(x)
    rho = spearman(x, y)
    # strictly increasing transforms of either argument leave ranks intact;
    # upward power-of-two scalings are exact for every double in range
    assert spearman(8.0 * x, y) == pytest.approx(rho, abs=1e-12)
    assert spearman(x, 4.0 * y) == pytest.approx(rho, abs=1e-12)


def test_histogram_examples():
    counts, edges = histogram([0.0, 0.5, 1.0], 2)
    assert list(counts) == [2, 1]
    counts1, _ = histogram([7.0], 3)
    assert counts1.sum() == 1 and np.count_nonzero(counts1) == 1
    with pytest.raises(ValueError):
        histogram([1.0], 0)


@settings(max_examples=100, deadline=None)
@given(samples_strategy, st.integers(min_value=1, max_value=25))
def test_histogram_counts_conserved(xs, bins):
    counts, edges = histogram(xs, bins)
    assert counts.sum() == len(xs)
    assert len(edges) == bins + 1


def test_ecdf_shape():
    d = EmpiricalDistribution.from_samples([3.0, 1.0, 2.0])
    assert np.array_equal(d.values, [1.0, 2.0, 3.0])
    grid = np.array([0.5, 1.0, 1.5, 3.0, 4.0])
    assert np.array_equal(d.ecdf(grid), [0.0, 1 / 3, 1 / 3, 1.0, 1.0])
    with pytest.raises(ValueError):
        EmpiricalDistribution.from_samples([])
