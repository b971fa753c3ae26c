import math

import numpy as np
import pytest

from dmrisk.density import EPS, DensityTable, eval_density, fit_kde, load_table, mix_tables, save_table, silverman_bandwidth
from dmrisk.errors import DomainError


@pytest.fixture(scope="module")
def normal_table():
    return fit_kde(np.random.default_rng(0).standard_normal(1_000_000), 1000)


def test_normal_density_at_zero(normal_table):
    assert eval_density(normal_table, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=0.01)


def test_table_integrates_to_one(normal_table):
    assert normal_table.integral() == pytest.approx(1.0, abs=0.02)


def test_uniform_density_in_the_middle():
    t = fit_kde(np.random.default_rng(1).random(1_000_000), 1000)
    assert eval_density(t, 0.5) == pytest.approx(1.0, abs=0.05)


def test_silverman_rule_and_grid_span():
    x = np.random.default_rng(2).normal(3.0, 2.0, 10_000)
    h = silverman_bandwidth(x)
    assert h == pytest.approx(1.06 * x.std(ddof=1) * x.size ** -0.2)
    t = fit_kde(x, 500)
    assert t.bandwidth == h and t.n == x.size and t.grid.size == 500
    assert t.grid[0] == pytest.approx(x.min() - 3 * h) and t.grid[-1] == pytest.approx(x.max() + 3 * h)


def test_values_are_floored():
    t = fit_kde(np.concatenate([np.zeros(500), np.full(500, 100.0)]) + np.random.default_rng(3).normal(0, 0.01, 1000), 2000)
    assert t.values.min() >= EPS


@pytest.mark.parametrize("x", [np.ones(1000), np.ones(10)])
def test_degenerate_samples_rejected(x):
    with pytest.raises(DomainError):
        fit_kde(x, 100)


def test_eval_at_grid_points_and_midpoints(normal_table):
    g, v = normal_table.grid, normal_table.values
    np.testing.assert_array_equal(eval_density(normal_table, g[10:20]), v[10:20])
    mid = 0.5 * (g[100] + g[101])
    assert eval_density(normal_table, mid) == pytest.approx(0.5 * (v[100] + v[101]), rel=1e-12)


def test_extrapolation_returns_floor(normal_table):
    assert eval_density(normal_table, normal_table.grid[-1] + 1.0) == EPS
    assert eval_density(normal_table, normal_table.grid[0] - 1.0) == EPS


def test_mixture_table_matches_pooled_fit():
    rng = np.random.default_rng(4)
    n = 1_000_000
    a = rng.normal(0, 1, n)
    b = rng.normal(3, 0.5, n)
    w = 0.7
    grid = np.linspace(-6, 6, 1000)
    mixed = mix_tables([w, 1 - w], [fit_kde(a, grid=grid), fit_kde(b, grid=grid)])
    pick = rng.random(n) < w
    pooled = fit_kde(np.where(pick, a, b), grid=grid)
    assert np.max(np.abs(mixed.values - pooled.values)) < 0.05


def test_mixing_requires_shared_grid():
    x = np.random.default_rng(5).standard_normal(1000)
    with pytest.raises(DomainError):
        mix_tables([0.5, 0.5], [fit_kde(x, 100), fit_kde(x, 200)])


def test_csv_round_trip(tmp_path, normal_table):
    save_table(normal_table, tmp_path / "t.csv")
    back = load_table(tmp_path / "t.csv")
    np.testing.assert_array_equal(back.grid, normal_table.grid)
    np.testing.assert_array_equal(back.values, normal_table.values)


def test_table_validation():
    with pytest.raises(DomainError):
        DensityTable(np.array([0.0, 0.0]), np.array([1.0, 1.0]))
