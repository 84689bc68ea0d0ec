import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from cbss.stable import (
    StableParams,
    char_exponent_scale,
    char_scale_by_quadrature,
    char_scale_gamma_form,
    levy_tail_mass,
    sample_stable,
    stable_cdf,
    stable_tail,
)


def test_levy_tail_mass_examples():
    assert levy_tail_mass(StableParams(1.0), 2.0) == 0.5
    assert levy_tail_mass(StableParams(0.5), 4.0) == pytest.approx(1.0, abs=1e-15)
    assert levy_tail_mass(StableParams(1.0), math.inf) == 0.0


@pytest.mark.parametrize("A", [0.0, -1.0])
def test_levy_tail_mass_domain(A):
    with pytest.raises(ValueError):
        levy_tail_mass(StableParams(1.0), A)


@pytest.mark.parametrize("alpha", [0.0, 2.0, -0.5, 2.5, math.nan])
def test_alpha_domain(alpha):
    with pytest.raises(ValueError):
        StableParams(alpha)


def test_char_scale_values():
    assert char_exponent_scale(1.0) == math.pi
    expected = 2 * special.gamma(1.5) * math.cos(math.pi / 4) / (0.5 * 0.5)
    assert char_exponent_scale(0.5) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("alpha", [0.3, 0.7, 1.0, 1.3, 1.9])
def test_char_scale_quadrature_oracle(alpha):
    assert char_scale_by_quadrature(alpha) == pytest.approx(char_exponent_scale(alpha), rel=1e-8)


@given(st.floats(min_value=0.01, max_value=1.99).filter(lambda a: abs(a - 1) > 1e-6))
def test_char_scale_forms_agree(alpha):
    assert char_scale_gamma_form(alpha) == pytest.approx(char_exponent_scale(alpha), rel=1e-10)


def test_char_scale_continuous_at_one():
    assert char_exponent_scale(1 - 1e-7) == pytest.approx(math.pi, rel=1e-6)
    assert char_exponent_scale(1 + 1e-7) == pytest.approx(math.pi, rel=1e-6)


def test_stable_tail_examples():
    p = StableParams(1.0)
    assert stable_tail(p, 1.0, 0.0) == 0.5
    assert stable_tail(p, 1.0, math.pi) == pytest.approx(0.25, abs=1e-12)
    for a in (0.5, 1.5):
        assert stable_tail(StableParams(a), 2.0, 0.0) == 0.5


@pytest.mark.parametrize("alpha", [0.6, 1.0, 1.4, 1.8])
def test_stable_tail_monotone(alpha):
    p = StableParams(alpha)
    vals = [stable_tail(p, 1.0, x) for x in np.linspace(-20, 20, 100)]
    assert np.all(np.diff(vals) <= 1e-9)


@pytest.mark.parametrize("alpha", [0.5, 1.2, 1.7])
def test_stable_tail_matches_scipy(alpha):
    # scipy's S1 parametrisation with scale c^(1/alpha) is the same law
    p = StableParams(alpha)
    dist = stats.levy_stable(alpha, 0.0, scale=p.char_scale ** (1 / alpha))
    for x in (0.3, 2.0, 15.0):
        assert stable_tail(p, 1.0, x) == pytest.approx(dist.sf(x), abs=1e-6)


def test_tail_ratio_to_levy_mass():
    for alpha in (0.8, 1.0, 1.5):
        p = StableParams(alpha)
        assert stable_tail(p, 1.0, 100.0) / levy_tail_mass(p, 100.0) == pytest.approx(1.0, abs=0.05)


def test_sample_median_and_cauchy_quartile(rng):
    p = StableParams(1.0)
    x = sample_stable(p, 1.0, rng, 100_000)
    n = x.size
    assert abs(np.mean(x > 0) - 0.5) < 3 * 0.5 / math.sqrt(n)
    assert abs(np.mean(x > math.pi) - 0.25) < 3 * math.sqrt(0.25 * 0.75 / n)


def test_sample_regular_variation(rng):
    p = StableParams(1.5)
    n = 1_000_000
    x = sample_stable(p, 1.0, rng, n)
    q = np.mean(x > 50.0)
    # stable_tail is the oracle at finite x; its ratio to 1/alpha is ~1.0
    target = stable_tail(p, 1.0, 50.0)
    assert abs(q - target) < 3 * math.sqrt(target / n)
    assert 50.0**1.5 * q == pytest.approx(1 / 1.5, rel=0.1)


def test_scaling_property(rng):
    p = StableParams(0.8)
    a = sample_stable(p, 3.0, rng, 100_000) / 3.0 ** (1 / 0.8)
    b = sample_stable(p, 1.0, rng, 100_000)
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_sampler_matches_tail_oracle(rng):
    p = StableParams(1.3)
    n = 1_000_000
    x = sample_stable(p, 1.0, rng, n)
    levels = list(np.quantile(x, np.linspace(0.1, 0.9, 9))) + [10.0, 30.0, 100.0]
    for lv in levels:
        q = stable_tail(p, 1.0, lv)
        assert abs(np.mean(x >= lv) - q) < 3 * math.sqrt(q * (1 - q) / n) + 1e-6


def test_ks_against_cdf(rng):
    p = StableParams(1.5)
    x = sample_stable(p, 2.0, rng, 3000)
    assert stats.kstest(x, lambda v: stable_cdf(p, 2.0, v)).pvalue > 0.01


def test_single_draw_is_record(rng):
    s = sample_stable(StableParams(1.0), 0.5, rng)
    assert s.t == 0.5 and math.isfinite(s.value)
    with pytest.raises(ValueError):
        sample_stable(StableParams(1.0), 0.0, rng)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 1.9), st.floats(0.1, 10.0), st.floats(0.1, 50.0))
def test_tail_symmetry(alpha, t, x):
    p = StableParams(alpha)
    assert stable_tail(p, t, x) + stable_tail(p, t, -x) == pytest.approx(1.0, abs=2e-6)
