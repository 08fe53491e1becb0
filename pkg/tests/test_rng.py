import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from bmidas.rng import (RngHandle, inv_gaussian_pdf, make_rng, sample_beta, sample_gamma,
                        sample_inv_gamma, sample_inv_gaussian, sample_mvn)

N_MOM = 10**6
N_KS = 10**5


def test_streams_are_reproducible_and_distinct():
    a = RngHandle(5, 0).generator().random(4)
    b = RngHandle(5, 0).generator().random(4)
    c = RngHandle(5, 1).generator().random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    assert make_rng(RngHandle(5, 1)).random() == RngHandle(5, 1).generator().random()
    g = np.random.default_rng(0)
    assert make_rng(g) is g


@pytest.mark.parametrize("shape,rate", [(0.3, 2.0), (1.5, 0.5), (12.0, 3.0)])
def test_gamma_moments_and_ks(shape, rate):
    rng = make_rng(11)
    x = sample_gamma(shape, rate, rng, size=N_MOM)
    assert x.mean() == pytest.approx(shape / rate, rel=0.01)
    assert x.var() == pytest.approx(shape / rate**2, rel=0.02)
    p = stats.kstest(x[:N_KS], stats.gamma(shape, scale=1 / rate).cdf).pvalue
    assert p > 0.01


@pytest.mark.parametrize("shape,rate", [(6.5, 2.0), (9.0, 10.0)])
def test_inv_gamma_moments_and_ks(shape, rate):
    rng = make_rng(12)
    x = sample_inv_gamma(shape, rate, rng, size=N_MOM)
    assert x.mean() == pytest.approx(rate / (shape - 1), rel=0.01)
    assert x.var() == pytest.approx(rate**2 / ((shape - 1) ** 2 * (shape - 2)), rel=0.02)
    assert stats.kstest(x[:N_KS], stats.invgamma(shape, scale=rate).cdf).pvalue > 0.01


@pytest.mark.parametrize("mean,shape", [(1.0, 1.0), (0.2, 3.0), (5.0, 2.0)])
def test_inv_gaussian_moments_and_ks(mean, shape):
    rng = make_rng(13)
    x = sample_inv_gaussian(mean, shape, rng, size=N_MOM)
    assert x.mean() == pytest.approx(mean, rel=0.01)
    assert x.var() == pytest.approx(mean**3 / shape, rel=0.02 if mean < 5 else 0.05)
    ref = stats.invgauss(mean / shape, scale=shape)
    assert stats.kstest(x[:N_KS], ref.cdf).pvalue > 0.01


@pytest.mark.parametrize("mean,shape", [(1.0, 1.0), (0.3, 4.0)])
def test_inv_gaussian_density(mean, shape):
    xs = np.linspace(0.01, 5, 50)
    ref = stats.invgauss(mean / shape, scale=shape).pdf(xs)
    np.testing.assert_allclose(inv_gaussian_pdf(xs, mean, shape), ref, rtol=1e-10)
    total, _ = integrate.quad(inv_gaussian_pdf, 0, np.inf, args=(mean, shape))
    assert total == pytest.approx(1.0, abs=1e-8)
    # histogram of draws against the closed-form density
    x = sample_inv_gaussian(mean, shape, make_rng(14), size=N_MOM)
    hist, edges = np.histogram(x, bins=40, range=(0.05, 2.0))
    expect = N_MOM * np.array([integrate.quad(inv_gaussian_pdf, lo, hi, args=(mean, shape))[0]
                               for lo, hi in zip(edges[:-1], edges[1:])])
    mask = expect > 500
    np.testing.assert_allclose(hist[mask], expect[mask], rtol=0.05)


@pytest.mark.parametrize("a,b", [(2.0, 5.0), (31.0, 1.0)])
def test_beta_moments_and_ks(a, b):
    x = sample_beta(a, b, make_rng(15), size=N_MOM)
    assert x.mean() == pytest.approx(a / (a + b), rel=0.01)
    assert x.var() == pytest.approx(a * b / ((a + b) ** 2 * (a + b + 1)), rel=0.02)
    assert stats.kstest(x[:N_KS], stats.beta(a, b).cdf).pvalue > 0.01


def test_mvn_moments():
    cov = np.array([[2.0, 0.6], [0.6, 1.0]])
    L = np.linalg.cholesky(cov)
    x = sample_mvn(np.array([1.0, -2.0]), L, make_rng(16), size=N_MOM)
    np.testing.assert_allclose(x.mean(0), [1, -2], atol=0.01)
    np.testing.assert_allclose(np.cov(x.T), cov, rtol=0.02)
    single = sample_mvn(np.zeros(2), L, make_rng(16))
    assert single.shape == (2,)


@given(bad=st.sampled_from([0.0, -1.0, np.inf, np.nan]))
def test_domain_errors(bad):
    rng = make_rng(0)
    with pytest.raises(ValueError):
        sample_gamma(bad, 1.0, rng)
    with pytest.raises(ValueError):
        sample_inv_gaussian(1.0, bad, rng)
    with pytest.raises(ValueError):
        sample_beta(1.0, bad, rng)


@given(seed=st.integers(0, 2**63 - 1), stream=st.integers(0, 1000))
def test_handle_determinism(seed, stream):
    h = RngHandle(seed, stream)
    assert h.generator().integers(0, 2**62) == h.generator().integers(0, 2**62)
