import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dmrisk.distributions import InverseGaussian
from dmrisk.dm import GammaMatrix
from dmrisk.errors import DomainError, NumericError
from dmrisk.fixtures import example1_spec
from dmrisk.importance import (
    ISSpec,
    esscher_ig,
    fit_is_densities,
    is_marginals,
    is_sample,
    is_var_avar_gradient,
    shifted_gaussian_sampler,
    weighted_quantile,
)
from dmrisk.sa import avar_standard_error, empirical_var_avar, lr_gradient

EX1_IS = ISSpec((0.1, 0.3), (0.5, 1.0))


def test_esscher_first_marginal():
    assert esscher_ig(1.0, 0.5, 0.1).mu == pytest.approx(1.2910, abs=5e-5)


def test_esscher_second_marginal():
    assert esscher_ig(1.0, 1.2, 0.3).mu == pytest.approx(1.4142, abs=5e-5)


def test_esscher_zero_tilt_is_identity():
    assert esscher_ig(1.3, 0.7, 0.0) == InverseGaussian(1.3, 0.7)


def test_esscher_inadmissible_tilt():
    with pytest.raises(DomainError):
        esscher_ig(1.0, 0.5, 0.25)


@settings(max_examples=50)
@given(st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.floats(0.0, 0.99), st.floats(0.0, 0.99))
def test_esscher_keeps_lambda_and_raises_mean(mu, lam, s1, s2):
    bound = lam / (2 * mu * mu)
    w1, w2 = sorted((s1 * bound, s2 * bound))
    a, b = esscher_ig(mu, lam, w1), esscher_ig(mu, lam, w2)
    assert a.lam == lam and b.lam == lam
    assert mu <= a.mu * (1 + 1e-12) and a.mu <= b.mu * (1 + 1e-12)


def test_esscher_density_ratio_is_exponential():
    f, h = InverseGaussian(1.0, 0.5), esscher_ig(1.0, 0.5, 0.1)
    x = np.linspace(0.1, 5, 20)
    r = h.log_pdf(x) - f.log_pdf(x) - 0.1 * x
    np.testing.assert_allclose(r, r[0], atol=1e-10)


def test_is_marginal_and_shift_validation():
    spec = example1_spec()
    with pytest.raises(DomainError):
        is_marginals(spec, ISSpec((0.1,), ()))
    with pytest.raises(DomainError):
        shifted_gaussian_sampler(spec, ISSpec((), (1.0, 2.0, 3.0)))
    assert shifted_gaussian_sampler(spec, ISSpec((), (0.0, 0.0))) is None


def test_shifted_sampler_moves_mass_up():
    spec = example1_spec()
    draw = shifted_gaussian_sampler(spec, EX1_IS)
    u = draw(100_000, np.random.default_rng(0))
    assert np.mean(u[:, 0] > 0.95) > 0.1 and np.mean(u[:, 1] > 0.95) > 0.2


# weighted estimators


def test_weighted_quantile_with_unit_weights_is_order_statistic():
    x = np.random.default_rng(1).normal(size=1001)
    v, _ = empirical_var_avar(x, 0.9)
    assert weighted_quantile(x, np.ones_like(x), 0.9) == v


def test_weighted_cdf_is_monotone_and_tops_out_at_mean_ratio():
    rng = np.random.default_rng(2)
    y = rng.normal(size=500)
    w = rng.exponential(size=500)
    order = np.argsort(y)
    cum = np.cumsum(w[order]) / y.size
    assert np.all(np.diff(cum) >= 0)
    assert cum[-1] == pytest.approx(w.mean())


def test_weighted_quantile_unreachable_level():
    with pytest.raises(NumericError):
        weighted_quantile(np.arange(10.0), np.full(10, 0.5), 0.9)


def test_unit_ratios_reduce_to_crude_estimators():
    spec = example1_spec()
    dens = fit_is_densities(spec, ISSpec(), 20_000, 3, 400)
    g = GammaMatrix.uniform(spec.K, spec.m)
    y, logr, floor = is_sample(spec, ISSpec(), g, 20_000, 4, dens)
    assert np.all(logr == 0.0)
    f_tab = dens.f.mixture(g, spec.alpha)
    v, c, grad = is_var_avar_gradient(y, logr, dens.f.g, f_tab, spec.alpha, 0.95)
    v0, c0 = empirical_var_avar(y, 0.95)
    assert (v, c) == (v0, pytest.approx(c0, rel=1e-12))
    np.testing.assert_allclose(grad, lr_gradient(y, v0, f_tab, dens.f.g, spec.alpha, 0.95), rtol=1e-12)


@pytest.fixture(scope="module")
def ex1_is():
    spec = example1_spec()
    return spec, fit_is_densities(spec, EX1_IS, 1_000_000, 5, 1000)


def test_likelihood_ratio_has_unit_mean(ex1_is):
    spec, dens = ex1_is
    g = GammaMatrix.uniform(spec.K, spec.m)
    _, logr, floor = is_sample(spec, EX1_IS, g, 1_000_000, 6, dens)
    assert np.exp(logr).mean() == pytest.approx(1.0, abs=0.01)
    assert floor < 0.01


def test_is_and_crude_agree(ex1_is):
    spec, dens = ex1_is
    g = GammaMatrix.uniform(spec.K, spec.m)
    n = 200_000
    f_tab = dens.f.mixture(g, spec.alpha)
    y, logr, _ = is_sample(spec, EX1_IS, g, n, 7, dens)
    _, c_is, _ = is_var_avar_gradient(y, logr, dens.f.g, f_tab, spec.alpha, 0.95)
    y0, lr0, _ = is_sample(spec, ISSpec(), g, n, 8, dens)
    v0, c0 = empirical_var_avar(y0, 0.95)
    se = avar_standard_error(y0, 0.95, v0)
    assert abs(c_is - c0) < 3 * math.sqrt(2) * se
