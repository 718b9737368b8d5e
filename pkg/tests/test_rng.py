import numpy as np

from poolsim.rng import derive_stream


def test_same_id_same_sequence():
    a = derive_stream(7, ("exp-clock", 0, 3)).standard_normal(64)
    b = derive_stream(7, ("exp-clock", 0, 3)).standard_normal(64)
    assert np.array_equal(a, b)


def test_distinct_ids_distinct_sequences():
    base = derive_stream(7, ("exp-clock", 0, 3)).standard_normal(64)
    for sid in (("exp-clock", 1, 3), ("exp-clock", 0, 4), ("wiener", 0, 3)):
        other = derive_stream(7, sid).standard_normal(64)
        assert not np.array_equal(base, other)
    assert not np.array_equal(base, derive_stream(8, ("exp-clock", 0, 3)).standard_normal(64))


def test_clt_mean_bound():
    # 1e6 standard normals: sample mean within 4/sqrt(1e6) of zero
    draws = derive_stream(123, ("wiener", 0, 0)).standard_normal(10**6)
    assert abs(draws.mean()) < 4.0 / np.sqrt(10**6)


def test_cross_stream_correlation_small():
    n = 10**5
    a = derive_stream(5, ("wiener", 0, 0)).standard_normal(n)
    b = derive_stream(5, ("wiener", 1, 0)).standard_normal(n)
    corr = float(np.corrcoef(a, b)[0, 1])
    assert abs(corr) < 4.0 / np.sqrt(n)
