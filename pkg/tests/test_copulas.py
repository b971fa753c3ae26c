import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from dmrisk.copulas import (
    ClaytonCopula,
    FrankCopula,
    GaussianCopula,
    GroupedTCopula,
    GumbelCopula,
    IndependenceCopula,
    TCopula,
    archimedean_cdf,
    copula_from_dict,
    copula_sample,
    repair_correlation,
    validate_correlation,
)
from dmrisk.errors import DomainError


def _tau(u, i=0, j=1):
    return stats.kendalltau(u[:, i], u[:, j])[0]


def _corr(rho, d=2):
    c = np.full((d, d), rho)
    np.fill_diagonal(c, 1.0)
    return c


# sampling


def test_identity_gaussian_is_independent():
    u = copula_sample(GaussianCopula(np.eye(2)), 100_000, 1)
    assert abs(_tau(u)) < 0.01


def test_gaussian_kendall_tau():
    u = copula_sample(GaussianCopula(_corr(0.7)), 1_000_000, 2)
    assert _tau(u) == pytest.approx(2 / math.pi * math.asin(0.7), abs=0.003)


def test_clayton_lower_tail_dependence():
    u = copula_sample(ClaytonCopula(1.0), 1_000_000, 3)
    q = 0.001
    lam = np.mean((u[:, 0] <= q) & (u[:, 1] <= q)) / q
    assert lam == pytest.approx(0.5, abs=0.05)


def test_sampling_is_deterministic():
    c = TCopula(4.0, _corr(0.3, 3))
    np.testing.assert_array_equal(c.sample(50, 9), c.sample(50, 9))


@pytest.mark.parametrize(
    "cop",
    [
        GaussianCopula(_corr(0.5, 3)),
        TCopula(3.0, _corr(0.5, 3)),
        GroupedTCopula((2.0, 8.0), (0, 0, 1), _corr(0.4, 3)),
        ClaytonCopula(2.0, 3),
        GumbelCopula(1.8, 3),
        GumbelCopula(1.000061, 5),
        FrankCopula(5.0, 3),
        IndependenceCopula(3),
    ],
    ids=lambda c: c.kind,
)
def test_marginal_uniformity(cop):
    u = cop.sample(100_000, 0)
    assert u.shape == (100_000, cop.d)
    assert np.all((u > 0) & (u < 1))
    for k in range(cop.d):
        assert stats.kstest(u[:, k], "uniform").pvalue > 0.01


def test_grouped_t_with_one_group_matches_t():
    corr = _corr(0.6, 3)
    a = GroupedTCopula((5.0,), (0, 0, 0), corr).sample(1_000_000, 5)
    b = TCopula(5.0, corr).sample(1_000_000, 5)
    for i, j in ((0, 1), (0, 2), (1, 2)):
        assert _tau(a, i, j) == pytest.approx(_tau(b, i, j), abs=0.01)


@pytest.mark.parametrize("cop", [FrankCopula(0.0), FrankCopula(1e-12), GumbelCopula(1.0)], ids=["frank0", "frank_tiny", "gumbel1"])
def test_independence_limits(cop):
    assert abs(_tau(cop.sample(100_000, 6))) < 0.01


def test_gaussian_exchangeability():
    u = GaussianCopula(_corr(0.5)).sample(200_000, 7)
    t12 = _tau(u)
    t21 = stats.kendalltau(u[:, 1], u[:, 0])[0]
    assert t12 == pytest.approx(t21, abs=1e-12)
    assert np.mean(u[:, 0] < 0.2) == pytest.approx(np.mean(u[:, 1] < 0.2), abs=0.005)


@pytest.mark.parametrize(
    "cop, tau",
    [
        (ClaytonCopula(2.0), 0.5),
        (GumbelCopula(2.0), 0.5),
        (FrankCopula(5.0), None),
    ],
    ids=["clayton", "gumbel", "frank"],
)
def test_archimedean_kendall_tau(cop, tau):
    if tau is None:
        tau = _frank_tau(cop.theta)
    u = cop.sample(200_000, 8)
    assert _tau(u) == pytest.approx(tau, abs=0.01)


def _frank_tau(theta):
    """1 - 4/theta (1 - D_1(theta)) with the Debye function D_1."""
    from scipy import integrate

    d1 = integrate.quad(lambda t: t / math.expm1(t), 0, theta)[0] / theta
    return 1 - 4 / theta * (1 - d1)


# closed-form CDFs


def test_independence_cdf():
    assert archimedean_cdf(IndependenceCopula(2), [0.3, 0.5]) == pytest.approx(0.15)


@settings(max_examples=30)
@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=5))
def test_gumbel_one_is_product(u):
    assert archimedean_cdf(GumbelCopula(1.0, len(u)), u) == pytest.approx(float(np.prod(u)), rel=1e-12)


def test_clayton_cdf_value():
    assert archimedean_cdf(ClaytonCopula(2.0), [0.5, 0.5]) == pytest.approx(7 ** -0.5, rel=1e-12)


@pytest.mark.parametrize("cop", [ClaytonCopula(1.5), GumbelCopula(1.7), FrankCopula(3.0)], ids=lambda c: c.kind)
def test_cdf_matches_sample_frequency(cop):
    u = cop.sample(400_000, 10)
    for pt in ([0.3, 0.6], [0.8, 0.9], [0.1, 0.2]):
        emp = np.mean(np.all(u <= pt, axis=1))
        assert archimedean_cdf(cop, pt) == pytest.approx(emp, abs=0.003)


@pytest.mark.parametrize("cop", [ClaytonCopula(1.5, 3), GumbelCopula(1.7, 3), FrankCopula(3.0, 3)], ids=lambda c: c.kind)
def test_cdf_has_uniform_margins(cop):
    assert archimedean_cdf(cop, [0.37, 1.0, 1.0]) == pytest.approx(0.37, rel=1e-12)


def test_cdf_rejects_points_outside_cube():
    with pytest.raises(DomainError):
        archimedean_cdf(ClaytonCopula(1.0), [0.0, 0.5])
    with pytest.raises(DomainError):
        archimedean_cdf(GaussianCopula(np.eye(2)), [0.5, 0.5])


# parameter checks


@pytest.mark.parametrize(
    "bad",
    [
        lambda: ClaytonCopula(0.0),
        lambda: GumbelCopula(0.9),
        lambda: FrankCopula(-1.0),
        lambda: IndependenceCopula(1),
        lambda: TCopula(0.0, np.eye(2)),
        lambda: GaussianCopula(np.array([[1.0, 0.9, 0.9], [0.9, 1.0, -0.9], [0.9, -0.9, 1.0]])),
        lambda: GaussianCopula(np.array([[1.0, 0.5], [0.4, 1.0]])),
    ],
)
def test_invalid_parameters(bad):
    with pytest.raises(DomainError):
        bad()


def test_non_psd_error_names_eigenvalue():
    with pytest.raises(DomainError, match="eigenvalue"):
        validate_correlation(np.array([[1.0, 0.9, 0.9], [0.9, 1.0, -0.9], [0.9, -0.9, 1.0]]))


def test_near_psd_matrix_is_repaired():
    a = np.array([[1.0, 0.5, 0.5], [0.5, 1.0, -0.5], [0.5, -0.5, 1.0]])
    w = np.linalg.eigvalsh(a).min()
    assert abs(w) < 1e-12
    b = validate_correlation(a - 5e-9 * np.eye(3) + 5e-9 * np.eye(3))
    assert np.linalg.eigvalsh(b).min() >= -1e-12


def test_repair_gives_unit_diagonal_psd():
    a = np.array([[1.0, 0.95, 0.1], [0.95, 1.0, 0.9], [0.1, 0.9, 1.0]])
    b = repair_correlation(a)
    np.testing.assert_allclose(np.diag(b), 1.0)
    assert np.linalg.eigvalsh(b).min() > -1e-12
    np.testing.assert_allclose(b, b.T)


@pytest.mark.parametrize(
    "cop",
    [GaussianCopula(_corr(0.3)), TCopula(4.0, _corr(0.3)), GroupedTCopula((2.0, 5.0), (0, 1), _corr(0.3)), ClaytonCopula(1.2), GumbelCopula(1.5, 4), FrankCopula(2.0), IndependenceCopula(3)],
    ids=lambda c: c.kind,
)
def test_dict_round_trip(cop):
    back = copula_from_dict(cop.to_dict())
    np.testing.assert_array_equal(back.sample(20, 1), cop.sample(20, 1))
