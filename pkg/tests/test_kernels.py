"""Both kernel backends against brute-force oracles and each other."""
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dmrisk import kernels


def brute_force_projection(y: np.ndarray) -> np.ndarray:
    """Enumerate supports; on a support S the KKT point is y_S - (sum y_S - 1)/|S|."""
    best, best_d = None, np.inf
    K = y.size
    for mask in itertools.product((0, 1), repeat=K):
        s = np.array(mask, dtype=bool)
        if not s.any():
            continue
        x = np.zeros(K)
        x[s] = y[s] - (y[s].sum() - 1.0) / s.sum()
        if np.any(x < -1e-15):
            continue
        d = np.sum((x - y) ** 2)
        if d < best_d:
            best, best_d = x, d
    return np.maximum(best, 0.0)


def test_backend_selected():
    assert kernels.BACKEND in kernels.backends()


def test_projection_examples(backend):
    np.testing.assert_allclose(backend.project_simplex(np.array([2.0, 0.0])), [1.0, 0.0])
    np.testing.assert_allclose(backend.project_simplex(np.array([0.5, 0.5, 0.5])), [1 / 3] * 3, atol=1e-15)
    y = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(backend.project_simplex(y), y, atol=1e-15)


def test_projection_matches_enumeration(backend):
    rng = np.random.default_rng(0)
    for _ in range(300):
        K = int(rng.integers(1, 9))
        y = rng.normal(scale=rng.uniform(0.1, 3.0), size=K)
        np.testing.assert_allclose(backend.project_simplex(y), brute_force_projection(y), atol=1e-10)


@settings(max_examples=200)
@given(arrays(np.float64, st.integers(1, 12), elements=st.floats(-1e3, 1e3)))
def test_projection_properties(y):
    for mod in kernels.backends().values():
        x = mod.project_simplex(y)
        assert np.all(x >= 0)
        assert abs(x.sum() - 1.0) < 1e-9
        np.testing.assert_allclose(mod.project_simplex(x), x, atol=1e-9)


def _bank(rng, rows=3, n=2000):
    s = np.sort(rng.normal(size=(rows, n)) * rng.uniform(0.5, 2, size=(rows, 1)) + rng.normal(size=(rows, 1)), axis=1)
    suffix = np.zeros((rows, n + 1))
    suffix[:, :-1] = np.cumsum(s[:, ::-1], axis=1)[:, ::-1]
    return s, suffix


def test_backends_agree_on_grid():
    mods = kernels.backends()
    rng = np.random.default_rng(1)
    s, suf = _bank(rng)
    w = rng.dirichlet(np.ones(3), size=50)
    lo, hi = np.quantile(s, [0.01, 0.999])
    res = {k: m.saa_grid(s, suf, w, 0.95, 0.5 / s.shape[1], lo, hi) for k, m in mods.items()}
    ref = res["python"]
    for out in res.values():
        np.testing.assert_allclose(out[0], ref[0], rtol=1e-12)
        np.testing.assert_allclose(out[1], ref[1], rtol=1e-12)
        np.testing.assert_array_equal(out[3], ref[3])


def test_pbar_counts(backend):
    s = np.tile(np.arange(1.0, 101.0), (2, 1))
    w = np.array([0.3, 0.7])
    assert backend.pbar_eval(95.0, s, w) == pytest.approx(0.95)
    assert backend.pbar_eval(-1e300, s, w) == 0.0
    assert backend.pbar_eval(1e300, s, w) == pytest.approx(1.0)


def test_saa_point_bracket_expansion(backend):
    rng = np.random.default_rng(2)
    s, suf = _bank(rng, 1, 1000)
    # start from a bracket that misses the quantile entirely
    u, c, _, status = backend.saa_point(s, suf, np.array([1.0]), 0.95, 0.5e-3, 100.0, 101.0)
    assert status == kernels.OK
    assert u == pytest.approx(np.quantile(s[0], 0.95), abs=0.05)
    assert c >= u


def test_saa_point_gives_up_after_64_doublings(backend):
    s = np.array([[0.0, 1e30, 1e30, 1e30]])
    suf = np.zeros((1, 5))
    suf[:, :-1] = np.cumsum(s[:, ::-1], axis=1)[:, ::-1]
    *_, status = backend.saa_point(s, suf, np.array([1.0]), 0.5, 1e-3, 0.0, 1.0)
    assert status == kernels.NO_BRACKET
