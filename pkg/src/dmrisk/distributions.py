"""Univariate laws used as marginals, frailties and severities.

Every law exposes the same small surface:

* ``cdf(x)``       - vectorised distribution function
* ``ppf(u)``       - vectorised quantile, no argument checking (hot path)
* ``quantile(u)``  - checked quantile, raises :class:`DomainError` outside (0, 1)
* ``sample(n, seed)``
* ``log_pdf(x)``   - ``-inf`` outside the support

Laws are frozen dataclasses and round-trip through ``to_dict`` /
:func:`distribution_from_dict` so they can live in run configurations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from functools import cached_property
from typing import Any, Callable, ClassVar

import numpy as np
from scipy import special, stats

from dmrisk._rng import SeedLike, as_generator, open_unit
from dmrisk.errors import DomainError, StateError

__all__ = [
    "Distribution",
    "InverseGaussian",
    "GPD",
    "Lognormal",
    "NegBinomial",
    "Normal",
    "StudentT",
    "Gamma",
    "PositiveStable",
    "LogSeries",
    "ChiSquare",
    "Uniform",
    "SplicedMarginal",
    "CompoundMarginal",
    "QuantileTable",
    "build_quantile_table",
    "quantile",
    "cdf",
    "sample",
    "log_pdf",
    "distribution_from_dict",
]

_REGISTRY: dict[str, type["Distribution"]] = {}


def _check_probs(u) -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    if np.any(~(arr > 0.0) | ~(arr < 1.0)):
        raise DomainError(f"probability levels must lie in (0, 1), got {u!r}")
    return arr


def _scalar_or_array(value: np.ndarray, like) -> Any:
    return float(value) if np.ndim(like) == 0 else value


def _log_ndtr(z: np.ndarray) -> np.ndarray:
    """log Phi(z); ndtr is relatively accurate down to z = -30, log_ndtr is only needed below."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    deep = z < -30.0
    out[~deep] = np.log(special.ndtr(z[~deep]))
    out[deep] = special.log_ndtr(z[deep])
    return out


def _newton_increasing(
    fn: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    target: np.ndarray,
    y0: np.ndarray,
    tol: float = 1e-13,
    max_iter: int = 200,
) -> np.ndarray:
    """Solve fn(y) = target for an increasing fn by bracketed Newton.

    ``fn`` returns the value and the derivative. Points leave the working set
    as they converge, so late iterations only touch the stragglers.
    """
    y = np.array(y0, dtype=float, copy=True)
    lo = y - 1.0
    hi = y + 1.0
    for _ in range(200):
        bad = np.flatnonzero(fn(lo)[0] > target)
        if bad.size == 0:
            break
        lo[bad] -= 2.0 * (hi[bad] - lo[bad])
    for _ in range(200):
        bad = np.flatnonzero(fn(hi)[0] < target)
        if bad.size == 0:
            break
        hi[bad] += 2.0 * (hi[bad] - lo[bad])
    idx = np.arange(y.size)
    ya, la, ha, ta = y, lo, hi, target
    for _ in range(max_iter):
        if idx.size == 0:
            break
        val, der = fn(ya)
        g = val - ta
        la = np.where(g < 0, ya, la)
        ha = np.where(g > 0, ya, ha)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = g / der
        y_new = ya - step
        # test convergence on the raw step: a sub-ulp step lands on the bracket end
        done = (np.abs(step) <= tol * (1.0 + np.abs(ya))) | (g == 0) | (ha - la <= tol * (1.0 + np.abs(ya)))
        outside = ~done & (~np.isfinite(y_new) | (y_new <= la) | (y_new >= ha))
        y_new = np.where(outside, 0.5 * (la + ha), y_new)
        y[idx] = y_new
        keep = ~done
        idx, ya, la, ha, ta = idx[keep], y_new[keep], la[keep], ha[keep], ta[keep]
    return y


def _invert_positive(logcdf, logsf, logpdf, u: np.ndarray, y0: np.ndarray) -> np.ndarray:
    """Quantiles of a law on (0, inf) in log space: log F = log u below the median, -log S above."""
    x = np.empty_like(u)
    low = u <= 0.5
    if low.any():

        def f_low(y):
            z = np.exp(y)
            lc = logcdf(z)
            return lc, np.exp(logpdf(z) - lc) * z

        x[low] = np.exp(_newton_increasing(f_low, np.log(u[low]), y0[low]))
    high = ~low
    if high.any():

        def f_high(y):
            z = np.exp(y)
            ls = logsf(z)
            return -ls, np.exp(logpdf(z) - ls) * z

        x[high] = np.exp(_newton_increasing(f_high, -np.log1p(-u[high]), y0[high]))
    return x


@dataclass(frozen=True)
class Distribution:
    """Base class; subclasses register themselves under ``kind``."""

    kind: ClassVar[str] = ""

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if cls.kind:
            _REGISTRY[cls.kind] = cls

    # hot path, unchecked
    def ppf(self, u):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def log_pdf(self, x):
        raise NotImplementedError

    def quantile(self, u):
        arr = _check_probs(u)
        return _scalar_or_array(np.asarray(self.ppf(arr), dtype=float), u)

    def sample(self, n: int, seed: SeedLike = None) -> np.ndarray:
        if n < 1:
            raise DomainError(f"sample size must be >= 1, got {n}")
        rng = as_generator(seed)
        return np.asarray(self.ppf(open_unit(rng.random(n))), dtype=float)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, Distribution):
                val = val.to_dict()
            elif isinstance(val, np.ndarray):
                val = val.tolist()
            out[f.name] = val
        return out


def distribution_from_dict(d: dict[str, Any]) -> Distribution:
    d = dict(d)
    if d.get("kind") == "quantile_table":
        return QuantileTable(np.asarray(d["values"], dtype=float))
    try:
        cls = _REGISTRY[d.pop("kind")]
    except KeyError as exc:
        raise DomainError(f"unknown distribution kind {exc.args[0]!r}") from None
    return cls.from_dict(d) if hasattr(cls, "from_dict") else cls(**d)


def _positive(name: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise DomainError(f"{name} must be positive and finite, got {value}")


@dataclass(frozen=True)
class InverseGaussian(Distribution):
    """Inverse Gaussian with mean ``mu`` and shape ``lam`` (variance mu^3/lam)."""

    mu: float
    lam: float
    kind: ClassVar[str] = "inverse_gaussian"

    def __post_init__(self):
        _positive("mu", self.mu)
        _positive("lam", self.lam)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        xs = np.where(x > 0, x, 1.0)
        r = np.sqrt(self.lam / xs)
        a = special.ndtr(r * (xs / self.mu - 1.0))
        b = np.exp(2.0 * self.lam / self.mu + special.log_ndtr(-r * (xs / self.mu + 1.0)))
        out = np.where(x > 0, np.clip(a + b, 0.0, 1.0), 0.0)
        return _scalar_or_array(out, x)

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        xs = np.where(x > 0, x, 1.0)
        val = 0.5 * np.log(self.lam / (2.0 * np.pi * xs**3)) - self.lam * (xs - self.mu) ** 2 / (
            2.0 * self.mu**2 * xs
        )
        out = np.where(x > 0, val, -np.inf)
        return _scalar_or_array(out, x)

    def _log_terms(self, x):
        r = np.sqrt(self.lam / x)
        return r * (x / self.mu - 1.0), 2.0 * self.lam / self.mu + _log_ndtr(-r * (x / self.mu + 1.0))

    def _logcdf(self, x):
        a, log_b = self._log_terms(x)
        return np.logaddexp(_log_ndtr(a), log_b)

    def _logsf(self, x):
        a, log_b = self._log_terms(x)
        head = _log_ndtr(-a)
        return head + np.log1p(-np.exp(np.minimum(log_b - head, 0.0)))

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        flat = u.reshape(-1)
        # lognormal with matching mean and variance as the starting point
        s2 = math.log1p(self.mu / self.lam)
        y0 = math.log(self.mu) - 0.5 * s2 + math.sqrt(s2) * special.ndtri(flat)
        x = _invert_positive(self._logcdf, self._logsf, self.log_pdf, flat, y0)
        return x.reshape(u.shape)

    def sample(self, n: int, seed: SeedLike = None) -> np.ndarray:
        # Michael, Schucany & Haas transform: one normal, one uniform, no rejection
        if n < 1:
            raise DomainError(f"sample size must be >= 1, got {n}")
        rng = as_generator(seed)
        mu, lam = self.mu, self.lam
        y = rng.standard_normal(n) ** 2
        x = mu + mu * mu * y / (2.0 * lam) - mu / (2.0 * lam) * np.sqrt(4.0 * mu * lam * y + (mu * y) ** 2)
        z = rng.random(n)
        return np.where(z <= mu / (mu + x), x, mu * mu / x)

    def mean(self) -> float:
        return self.mu

    def var(self) -> float:
        return self.mu**3 / self.lam


@dataclass(frozen=True)
class GPD(Distribution):
    """Generalised Pareto with shape ``xi`` and scale ``scale`` (location 0)."""

    xi: float
    scale: float
    kind: ClassVar[str] = "gpd"

    def __post_init__(self):
        if not math.isfinite(self.xi):
            raise DomainError(f"xi must be finite, got {self.xi}")
        _positive("scale", self.scale)

    @property
    def upper_endpoint(self) -> float:
        return -self.scale / self.xi if self.xi < 0 else math.inf

    def _is_exp(self) -> bool:
        return abs(self.xi) < 1e-12

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        z = np.maximum(x, 0.0) / self.scale
        if self._is_exp():
            val = -np.expm1(-z)
        else:
            arg = np.maximum(self.xi * z, -1.0)
            with np.errstate(divide="ignore"):
                val = -np.expm1(-np.log1p(arg) / self.xi)
        val = np.where(x <= 0, 0.0, val)
        val = np.where(x >= self.upper_endpoint, 1.0, val)
        return _scalar_or_array(np.clip(val, 0.0, 1.0), x)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self._is_exp():
            out = -self.scale * np.log1p(-u)
        else:
            out = self.scale / self.xi * np.expm1(-self.xi * np.log1p(-u))
        if self.xi < 0:
            out = np.minimum(out, self.upper_endpoint)
        return out

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= 0) & (x <= self.upper_endpoint)
        xs = np.where(inside, x, 0.0)
        if self._is_exp():
            val = -math.log(self.scale) - xs / self.scale
        else:
            with np.errstate(divide="ignore"):
                val = -math.log(self.scale) - (1.0 / self.xi + 1.0) * np.log1p(self.xi * xs / self.scale)
        return _scalar_or_array(np.where(inside, val, -np.inf), x)


class _ScipyBacked(Distribution):
    """Mixin for laws whose cdf/ppf/logpdf come straight from scipy.stats."""

    def _frozen(self):
        raise NotImplementedError

    def cdf(self, x):
        return _scalar_or_array(np.asarray(self._frozen().cdf(x), dtype=float), x)

    def ppf(self, u):
        return np.asarray(self._frozen().ppf(u), dtype=float)

    def log_pdf(self, x):
        return _scalar_or_array(np.asarray(self._frozen().logpdf(x), dtype=float), x)


@dataclass(frozen=True)
class Lognormal(_ScipyBacked):
    mu: float
    sigma: float
    kind: ClassVar[str] = "lognormal"

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise DomainError(f"mu must be finite, got {self.mu}")
        _positive("sigma", self.sigma)

    def _frozen(self):
        return stats.lognorm(s=self.sigma, scale=math.exp(self.mu))

    def ppf(self, u):
        return np.exp(self.mu + self.sigma * special.ndtri(np.asarray(u, dtype=float)))

    def sample(self, n, seed=None):
        if n < 1:
            raise DomainError(f"sample size must be >= 1, got {n}")
        return as_generator(seed).lognormal(self.mu, self.sigma, n)

    def mean(self) -> float:
        return math.exp(self.mu + 0.5 * self.sigma**2)


@dataclass(frozen=True)
class NegBinomial(_ScipyBacked):
    """Number of failures before the r-th success; mean r(1-p)/p."""

    r: float
    p: float
    kind: ClassVar[str] = "neg_binomial"

    def __post_init__(self):
        _positive("r", self.r)
        if not 0.0 < self.p < 1.0:
            raise DomainError(f"p must lie in (0, 1), got {self.p}")

    def _frozen(self):
        return stats.nbinom(self.r, self.p)

    def log_pdf(self, x):
        return _scalar_or_array(np.asarray(self._frozen().logpmf(x), dtype=float), x)

    def sample(self, n, seed=None):
        if n < 1:
            raise DomainError(f"sample size must be >= 1, got {n}")
        return as_generator(seed).negative_binomial(self.r, self.p, n)

    def mean(self) -> float:
        return self.r * (1.0 - self.p) / self.p


@dataclass(frozen=True)
class Normal(_ScipyBacked):
    mu: float = 0.0
    sigma: float = 1.0
    kind: ClassVar[str] = "normal"

    def __post_init__(self):
        _positive("sigma", self.sigma)

    def _frozen(self):
        return stats.norm(self.mu, self.sigma)

    def ppf(self, u):
        return self.mu + self.sigma * special.ndtri(np.asarray(u, dtype=float))

    def sample(self, n, seed=None):
        if n < 1:
            raise DomainError(f"sample size must be >= 1, got {n}")
        return as_generator(seed).normal(self.mu, self.sigma, n)


@dataclass(frozen=True)
class StudentT(_ScipyBacked):
    nu: float
    kind: ClassVar[str] = "student_t"

    def __post_init__(self):
        _positive("nu", self.nu)

    def _frozen(self):
        return stats.t(self.nu)

    def cdf(self, x):
        return _scalar_or_array(special.stdtr(self.nu, np.asarray(x, dtype=float)), x)

    def ppf(self, u):
        return special.stdtrit(self.nu, np.asarray(u, dtype=float))


@dataclass(frozen=True)
class Gamma(_ScipyBacked):
    shape: float
    scale: float = 1.0
    kind: ClassVar[str] = "gamma"

    def __post_init__(self):
        _positive("shape", self.shape)
        _positive("scale", self.scale)

    def _frozen(self):
        return stats.gamma(self.shape, scale=self.scale)

    def sample(self, n, seed=None):
        if n < 1:
            raise DomainError(f"sample size must be >= 1, got {n}")
        return as_generator(seed).gamma(self.shape, self.scale, n)


@dataclass(frozen=True)
class ChiSquare(_ScipyBacked):
    nu: float
    kind: ClassVar[str] = "chi_square"

    def __post_init__(self):
        _positive("nu", self.nu)

    def _frozen(self):
        return stats.chi2(self.nu)

    def ppf(self, u):
        return special.chdtri(self.nu, 1.0 - np.asarray(u, dtype=float))

    def sample(self, n, seed=None):
        if n < 1:
            raise DomainError(f"sample size must be >= 1, got {n}")
        return as_generator(seed).chisquare(self.nu, n)


@dataclass(frozen=True)
class Uniform(_ScipyBacked):
    a: float = 0.0
    b: float = 1.0
    kind: ClassVar[str] = "uniform"

    def __post_init__(self):
        if not self.a < self.b:
            raise DomainError(f"need a < b, got a={self.a}, b={self.b}")

    def _frozen(self):
        return stats.uniform(self.a, self.b - self.a)

    def ppf(self, u):
        return self.a + (self.b - self.a) * np.asarray(u, dtype=float)

    def sample(self, n, seed=None):
        if n < 1:
            raise DomainError(f"sample size must be >= 1, got {n}")
        return as_generator(seed).uniform(self.a, self.b, n)


@dataclass(frozen=True)
class PositiveStable(_ScipyBacked):
    """One-sided stable law with Laplace transform exp(-t**alpha), 0 < alpha < 1.

    Used as the frailty of the Gumbel copula.
    """

    alpha: float
    kind: ClassVar[str] = "positive_stable"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")

    def _frozen(self):
        a = self.alpha
        return stats.levy_stable(a, 1.0, loc=0.0, scale=math.cos(math.pi * a / 2.0) ** (1.0 / a))

    def sample(self, n, seed=None):
        # Chambers-Mallows-Stuck in Kanter's form
        if n < 1:
            raise DomainError(f"sample size must be >= 1, got {n}")
        rng = as_generator(seed)
        a = self.alpha
        theta = np.pi * open_unit(rng.random(n))
        w = rng.standard_exponential(n)
        # log form stays finite as alpha -> 1
        log_s = (
            np.log(np.sin(a * theta))
            - np.log(np.sin(theta)) / a
            + (1.0 - a) / a * (np.log(np.sin((1.0 - a) * theta)) - np.log(w))
        )
        return np.exp(log_s)


@dataclass(frozen=True)
class LogSeries(_ScipyBacked):
    """Logarithmic series law on {1, 2, ...}; the Frank copula frailty."""

    theta: float
    kind: ClassVar[str] = "log_series"

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise DomainError(f"theta must lie in (0, 1), got {self.theta}")

    def _frozen(self):
        return stats.logser(self.theta)

    def log_pdf(self, x):
        return _scalar_or_array(np.asarray(self._frozen().logpmf(x), dtype=float), x)

    def sample(self, n, seed=None):
        if n < 1:
            raise DomainError(f"sample size must be >= 1, got {n}")
        return as_generator(seed).logseries(self.theta, n)


@dataclass(frozen=True, eq=False)
class QuantileTable:
    """Sorted sample with a piecewise-linear quantile between order statistics."""

    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).reshape(-1))
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    def _require(self) -> None:
        if self.values.size == 0:
            raise StateError("quantile table is empty")

    def ppf(self, u):
        self._require()
        n = self.values.size
        if n == 1:
            return np.full(np.shape(u), self.values[0])
        pos = np.asarray(u, dtype=float) * (n - 1)
        return np.interp(pos, np.arange(n, dtype=float), self.values)

    def quantile(self, u):
        self._require()
        arr = _check_probs(u)
        return _scalar_or_array(self.ppf(arr), u)

    def cdf(self, x):
        self._require()
        n = self.values.size
        x = np.asarray(x, dtype=float)
        if n == 1:
            return _scalar_or_array(np.where(x >= self.values[0], 1.0, 0.0), x)
        levels = np.arange(n, dtype=float) / (n - 1)
        return _scalar_or_array(np.interp(x, self.values, levels, left=0.0, right=1.0), x)

    def sample(self, n: int, seed: SeedLike = None) -> np.ndarray:
        self._require()
        return self.ppf(as_generator(seed).random(n))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "quantile_table", "values": self.values.tolist()}


def build_quantile_table(samples) -> QuantileTable:
    arr = np.asarray(samples, dtype=float).reshape(-1)
    if arr.size == 0:
        raise DomainError("cannot build a quantile table from an empty sample")
    return QuantileTable(arr)


@dataclass(frozen=True, eq=False)
class SplicedMarginal(Distribution):
    """GPD lower tail, interpolated empirical centre, GPD upper tail.

    ``F(x) = p_l (1 - G_l(x_l - x))``            for x <= x_l
    ``F(x) = p_l + (1 - p_l - p_u) H(x)``        for x_l < x <= x_u
    ``F(x) = 1 - p_u + p_u G_u(x - x_u)``        for x > x_u

    H interpolates linearly between the central order statistics, which
    always include the two boundaries.
    """

    p_l: float
    p_u: float
    x_l: float
    x_u: float
    lower: GPD
    upper: GPD
    central: np.ndarray
    kind: ClassVar[str] = "spliced"

    def __post_init__(self):
        if not (0 < self.p_l < 1 and 0 < self.p_u < 1 and self.p_l + self.p_u < 1):
            raise DomainError(f"need p_l, p_u in (0,1) with p_l + p_u < 1, got {self.p_l}, {self.p_u}")
        if not self.x_l < self.x_u:
            raise DomainError(f"need x_l < x_u, got {self.x_l}, {self.x_u}")
        if isinstance(self.lower, dict):
            object.__setattr__(self, "lower", distribution_from_dict(self.lower))
        if isinstance(self.upper, dict):
            object.__setattr__(self, "upper", distribution_from_dict(self.upper))
        c = np.sort(np.asarray(self.central, dtype=float).reshape(-1))
        tol = 1e-12 * max(1.0, abs(self.x_l), abs(self.x_u))
        if c.size and (c[0] < self.x_l - tol or c[-1] > self.x_u + tol):
            raise DomainError("central sample must lie in [x_l, x_u]")
        c = np.clip(c, self.x_l, self.x_u)
        if c.size == 0 or c[0] > self.x_l:
            c = np.concatenate([[self.x_l], c])
        if c[-1] < self.x_u:
            c = np.concatenate([c, [self.x_u]])
        object.__setattr__(self, "central", c)

    @cached_property
    def _levels(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.central.size)

    def _h(self, x):
        return np.interp(x, self.central, self._levels, left=0.0, right=1.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        low = self.p_l * (1.0 - self.lower.cdf(self.x_l - x))
        mid = self.p_l + (1.0 - self.p_l - self.p_u) * self._h(x)
        high = 1.0 - self.p_u + self.p_u * self.upper.cdf(x - self.x_u)
        out = np.where(x <= self.x_l, low, np.where(x <= self.x_u, mid, high))
        return _scalar_or_array(out, x)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        pc = 1.0 - self.p_l - self.p_u
        with np.errstate(divide="ignore", invalid="ignore"):
            low = self.x_l - self.lower.ppf(np.clip(1.0 - u / self.p_l, 0.0, 1.0))
            mid = np.interp((u - self.p_l) / pc, self._levels, self.central)
            high = self.x_u + self.upper.ppf(np.clip((u - 1.0 + self.p_u) / self.p_u, 0.0, 1.0))
        return np.where(u <= self.p_l, low, np.where(u <= 1.0 - self.p_u, mid, high))

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            low = math.log(self.p_l) + self.lower.log_pdf(self.x_l - x)
            high = math.log(self.p_u) + self.upper.log_pdf(x - self.x_u)
            k = np.clip(np.searchsorted(self.central, x, side="right") - 1, 0, self.central.size - 2)
            width = np.diff(self.central)[k]
            dens = (1.0 - self.p_l - self.p_u) / ((self.central.size - 1) * width)
            mid = np.log(dens)
        out = np.where(x <= self.x_l, low, np.where(x <= self.x_u, mid, high))
        return _scalar_or_array(out, x)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SplicedMarginal":
        d = dict(d)
        d["lower"] = distribution_from_dict(d["lower"])
        d["upper"] = distribution_from_dict(d["upper"])
        d["central"] = np.asarray(d["central"], dtype=float)
        return cls(**d)


@dataclass(frozen=True, eq=False)
class CompoundMarginal(Distribution):
    """Random sum of ``frequency`` i.i.d. ``severity`` draws.

    Quantiles come from a stored Monte Carlo table of ``table_size`` draws,
    generated once from ``table_seed``.
    """

    frequency: NegBinomial
    severity: Lognormal
    table_size: int = 10_000_000
    table_seed: int = 0
    kind: ClassVar[str] = "compound"

    _CHUNK_SEVERITIES: ClassVar[int] = 4_000_000

    def __post_init__(self):
        if isinstance(self.frequency, dict):
            object.__setattr__(self, "frequency", distribution_from_dict(self.frequency))
        if isinstance(self.severity, dict):
            object.__setattr__(self, "severity", distribution_from_dict(self.severity))
        if not isinstance(self.frequency, NegBinomial) or not isinstance(self.severity, Lognormal):
            raise DomainError("compound marginal needs a NegBinomial frequency and a Lognormal severity")
        if self.table_size < 1:
            raise DomainError(f"table_size must be >= 1, got {self.table_size}")

    def mean(self) -> float:
        return self.frequency.mean() * self.severity.mean()

    def sample(self, n: int, seed: SeedLike = None) -> np.ndarray:
        if n < 1:
            raise DomainError(f"sample size must be >= 1, got {n}")
        rng = as_generator(seed)
        counts = self.frequency.sample(n, rng)
        out = np.zeros(n)
        mean_count = max(self.frequency.mean(), 1.0)
        step = max(1, int(self._CHUNK_SEVERITIES / (2.0 * mean_count)))
        mu, sigma = self.severity.mu, self.severity.sigma
        for start in range(0, n, step):
            c = counts[start : start + step]
            total = int(c.sum())
            if total == 0:
                continue
            owner = np.repeat(np.arange(c.size), c)
            sev = np.exp(mu + sigma * rng.standard_normal(total))
            out[start : start + c.size] = np.bincount(owner, weights=sev, minlength=c.size)
        return out

    @cached_property
    def table(self) -> QuantileTable:
        return QuantileTable(self.sample(self.table_size, self.table_seed))

    def ppf(self, u):
        return self.table.ppf(u)

    def cdf(self, x):
        return self.table.cdf(x)

    def log_pdf(self, x):
        raise NotImplementedError("compound marginals have no closed-form density")


# functional surface


def quantile(spec, u):
    """Checked quantile ``inf{x : F(x) >= u}`` of any law or quantile table."""
    return spec.quantile(u)


def cdf(spec, x):
    return spec.cdf(x)


def sample(spec, n: int, seed: SeedLike = None) -> np.ndarray:
    return spec.sample(n, seed)


def log_pdf(spec, x):
    return spec.log_pdf(x)
