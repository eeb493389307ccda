import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rrcstorm import distributions as d
from rrcstorm.des import RngStream


def rng(seed=0):
    return RngStream(seed, 99)


def test_truncated_normal_respects_bounds_and_mean():
    dist = d.TruncatedNormal(10, 5, 2)
    x = dist.sample_n(rng(), 200_000)
    assert x.min() >= 2
    # mean of N(10, 5) truncated below at 2
    from scipy import stats
    a = (2 - 10) / 5
    assert x.mean() == pytest.approx(stats.truncnorm(a, np.inf, 10, 5).mean(), rel=5e-3)


def test_truncated_exponential_mean():
    dist = d.TruncatedExponential(60, 10, 600)
    x = dist.sample_n(rng(1), 200_000)
    assert x.min() >= 10 and x.max() <= 600
    # exponential with rate 1/60 conditioned on [10, 600]
    lam = 1 / 60
    lo, hi = 10, 600
    num = (lo + 1 / lam) * np.exp(-lam * lo) - (hi + 1 / lam) * np.exp(-lam * hi)
    den = np.exp(-lam * lo) - np.exp(-lam * hi)
    assert x.mean() == pytest.approx(num / den, rel=5e-3)


def test_histogram_mass_per_bin():
    h = d.Histogram((0, 5, 15, 40, 100), (0.3, 0.4, 0.25, 0.05))
    x = h.sample_n(rng(2), 100_000)
    counts = np.histogram(x, bins=h.edges)[0] / x.size
    assert counts == pytest.approx([0.3, 0.4, 0.25, 0.05], abs=0.01)


def test_scalar_and_vector_agree_on_support():
    for dist in (d.Uniform(1, 2), d.Constant(3), d.TruncatedNormal(0, 1, -1, 1)):
        lo, hi = dist.bounds()
        r = rng(3)
        assert lo <= dist.sample(r) <= hi
        x = dist.sample_n(r, 100)
        assert x.shape == (100,) and x.min() >= lo and x.max() <= hi


def test_bad_distributions():
    with pytest.raises(d.BadDistribution):
        d.from_dict({"kind": "gamma", "mean": 1})
    with pytest.raises(d.BadDistribution):
        d.from_dict({"kind": "uniform", "low": 1})
    with pytest.raises(d.BadDistribution):
        d.from_dict({"kind": "constant", "value": 1, "extra": 2})
    with pytest.raises(ValueError):
        d.Uniform(2, 1)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 100), st.floats(0.01, 50), st.floats(1e-3, 1e3))
def test_dict_round_trip(mean, sd, scale):
    dist = d.from_dict({"kind": "truncated_normal", "mean": mean, "sd": sd, "min": 0}, scale)
    back = d.from_dict(d.to_dict(dist, scale), scale)
    assert back.mean == pytest.approx(dist.mean)
    assert back.sd == pytest.approx(dist.sd)
