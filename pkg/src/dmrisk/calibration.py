"""Estimation pipeline for the case studies.

Marginals: 10-day loss ratios, GPD tails spliced onto an interpolated empirical
centre, negative binomial / lognormal frequency-severity fits and inverse
Gaussian MLE. Dependence: Kendall tau matrices mapped to correlations,
profile likelihood for the t-copula degrees of freedom, Gumbel fits by ML
and by Cramer-von Mises distance.
"""
from __future__ import annotations

import csv
import datetime as dt
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import optimize, special, stats

from dmrisk.copulas import repair_correlation, validate_correlation
from dmrisk.distributions import GPD, InverseGaussian, Lognormal, NegBinomial, SplicedMarginal
from dmrisk.dm import Aggregation, aggregate
from dmrisk.errors import DomainError, InputError, NumericError

__all__ = [
    "PanelData",
    "GPDFit",
    "NuFit",
    "GumbelFit",
    "FrequencySeverityFit",
    "read_panel_csv",
    "read_records_csv",
    "returns_transform",
    "partition_by_aggregate",
    "fit_gpd_mle",
    "build_spliced",
    "kendall_tau_matrix",
    "to_correlation",
    "pseudo_observations",
    "t_copula_loglik",
    "fit_t_nu_profile",
    "gumbel_log_density",
    "fit_gumbel",
    "fit_frequency_severity",
    "fit_inverse_gaussian",
    "replace_zeros",
]


# data ingestion


@dataclass(frozen=True, eq=False)
class PanelData:
    """T x d observations with column labels and a date index."""

    values: np.ndarray
    labels: tuple = ()
    dates: tuple = ()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] < 2:
            raise DomainError(f"panel needs a T x d matrix with d >= 2, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("panel contains missing or non-finite values")
        labels = tuple(self.labels) or tuple(f"x{k + 1}" for k in range(v.shape[1]))
        if len(labels) != v.shape[1]:
            raise DomainError("labels do not match the number of columns")
        if self.dates and len(self.dates) != v.shape[0]:
            raise DomainError("dates do not match the number of rows")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dates", tuple(self.dates))

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def _parse_date(text: str, path, line: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise InputError(f"expected an ISO date, got {text!r}", path, line, 1) from None


def read_panel_csv(path) -> PanelData:
    """Header row, ISO dates in the first column, one numeric column per series.

    Rows with an empty cell are dropped; anything else that does not parse
    raises an InputError pointing at its line and column.
    """
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise InputError(f"cannot open data file: {exc.strerror}", path) from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError("file is empty", path, 1) from None
        if len(header) < 3:
            raise InputError("need a date column and at least two series", path, 1)
        dates, rows = [], []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputError(f"expected {len(header)} fields, got {len(row)}", path, line, len(row) + 1)
            if any(cell.strip() == "" for cell in row[1:]):
                continue
            day = _parse_date(row[0], path, line)
            vals = []
            for col, cell in enumerate(row[1:], start=2):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise InputError(f"not a number: {cell!r}", path, line, col) from None
            dates.append(day)
            rows.append(vals)
    if not rows:
        raise InputError("no complete data rows", path)
    return PanelData(np.array(rows), tuple(h.strip() for h in header[1:]), tuple(dates))


def read_records_csv(path) -> tuple[list, list, np.ndarray]:
    """Loss records with columns ``period,type,loss``; returns (periods, types, losses)."""
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise InputError(f"cannot open data file: {exc.strerror}", path) from None
    with fh:
        reader = csv.reader(fh)
        header = [h.strip().lower() for h in next(reader, [])]
        if header != ["period", "type", "loss"]:
            raise InputError("header must be period,type,loss", path, 1)
        periods, types, losses = [], [], []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise InputError(f"expected 3 fields, got {len(row)}", path, line, len(row) + 1)
            periods.append(_parse_date(row[0], path, line))
            types.append(row[1].strip())
            try:
                x = float(row[2])
            except ValueError:
                raise InputError(f"not a number: {row[2]!r}", path, line, 3) from None
            if not x >= 0:
                raise InputError("losses must be nonnegative", path, line, 3)
            losses.append(x)
    if not losses:
        raise InputError("no loss records", path)
    return periods, types, np.array(losses)


# transformations


def returns_transform(prices: PanelData, horizon: int = 10) -> PanelData:
    """x_{i,t} = -Price_{i,t+h} / Price_{i,t}, giving T - h rows."""
    if horizon < 1:
        raise DomainError(f"horizon must be >= 1, got {horizon}")
    if prices.T <= horizon:
        raise DomainError(f"need more than {horizon} rows, got {prices.T}")
    p = prices.values
    if np.any(p <= 0):
        raise DomainError("prices must be positive")
    x = -p[horizon:] / p[:-horizon]
    return PanelData(x, prices.labels, prices.dates[: prices.T - horizon] if prices.dates else ())


def partition_by_aggregate(x: PanelData | np.ndarray, agg: Aggregation, cuts=(0.04, 0.08)):
    """Split rows into (extreme, upper, centre) index arrays by the aggregate loss.

    Rows are ranked by aggregate loss, largest first, ties by row index. The
    top floor(c1 D) rows form the extreme set, ranks up to floor(c2 D) the
    upper set, the rest the centre. Each array is returned in row order.
    """
    vals = x.values if isinstance(x, PanelData) else np.asarray(x, dtype=float)
    c1, c2 = float(cuts[0]), float(cuts[1])
    if not 0.0 <= c1 <= c2 < 1.0:
        raise DomainError(f"cuts must satisfy 0 <= c1 <= c2 < 1, got {cuts}")
    D = vals.shape[0]
    loss = np.asarray(aggregate(agg, vals), dtype=float).reshape(-1)
    order = np.lexsort((np.arange(D), -loss))
    n1, n2 = math.floor(round(c1 * D, 9)), math.floor(round(c2 * D, 9))
    return np.sort(order[:n1]), np.sort(order[n1:n2]), np.sort(order[n2:])


# generalized Pareto tails


@dataclass(frozen=True)
class GPDFit:
    xi: float
    scale: float
    se_xi: float
    se_scale: float
    n: int
    loglik: float
    iterations: int = 0

    def law(self) -> GPD:
        return GPD(self.xi, self.scale)


def _gpd_nll(params, y):
    xi, log_s = params
    s = math.exp(log_s)
    z = xi * y / s
    if np.any(z <= -1.0):
        # outside the support: a steep finite wall keeps the line search stable
        return 1e10 * (1.0 + float(np.max(-1.0 - z)))
    if abs(xi) < 1e-12:
        return y.size * log_s + float(y.sum()) / s
    return y.size * log_s + (1.0 + 1.0 / xi) * float(np.log1p(z).sum())


def fit_gpd_mle(excesses, fix_xi: float | None = None) -> GPDFit:
    """Maximum likelihood GPD fit to positive threshold excesses.

    Quasi-Newton (L-BFGS-B) over (xi, log scale) with xi kept in (-0.5, 1),
    where the usual asymptotic standard errors apply. ``fix_xi=0`` gives the
    exponential fit with scale equal to the sample mean.
    """
    y = np.asarray(excesses, dtype=float).reshape(-1)
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise DomainError("excesses must be positive and finite")
    n = y.size
    if n < 30:
        raise DomainError(f"need at least 30 excesses, got {n}")
    if fix_xi is not None:
        if fix_xi != 0.0:
            raise DomainError("only the exponential restriction xi = 0 is supported")
        s = float(y.mean())
        return GPDFit(0.0, s, 0.0, s / math.sqrt(n), n, -n * math.log(s) - n)
    mean, var = float(y.mean()), float(y.var(ddof=1))
    xi0 = float(np.clip(0.5 * (1.0 - mean * mean / var), -0.4, 0.9))
    s0 = 0.5 * mean * (mean * mean / var + 1.0)
    if xi0 < 0:
        s0 = max(s0, -xi0 * float(y.max()) * 1.05)
    res = optimize.minimize(
        _gpd_nll,
        x0=[xi0, math.log(s0)],
        args=(y,),
        method="L-BFGS-B",
        bounds=[(-0.5 + 1e-6, 1.0 - 1e-6), (None, None)],
    )
    if not res.success or not np.isfinite(res.fun) or res.fun >= 1e10:
        raise NumericError(
            f"GPD likelihood did not converge: {res.message}; start (xi, scale) = ({xi0:.4g}, {s0:.4g}), "
            f"last (xi, scale) = ({res.x[0]:.4g}, {math.exp(res.x[1]):.4g}), n = {n}"
        )
    xi, s = float(res.x[0]), math.exp(float(res.x[1]))
    # inverse Fisher information, valid for xi > -1/2
    se_xi = (1.0 + xi) / math.sqrt(n)
    se_s = s * math.sqrt(2.0 * (1.0 + xi) / n)
    return GPDFit(xi, s, se_xi, se_s, n, -float(res.fun), int(res.nit))


@dataclass(frozen=True, eq=False)
class SplicedFit:
    marginal: SplicedMarginal
    lower: GPDFit
    upper: GPDFit


def build_spliced(column, p_l: float = 0.1, p_u: float = 0.1) -> SplicedFit:
    """Spliced marginal with boundaries at order statistics floor(D p_l) and ceil(D (1 - p_u))."""
    x = np.sort(np.asarray(column, dtype=float).reshape(-1))
    D = x.size
    if D < 100:
        raise DomainError(f"need at least 100 observations, got {D}")
    if not (0 < p_l < 1 and 0 < p_u < 1 and p_l + p_u < 1):
        raise DomainError(f"need p_l, p_u in (0, 1) with p_l + p_u < 1, got {p_l}, {p_u}")
    t_l = max(1, math.floor(round(D * p_l, 9)))
    t_u = min(D, math.ceil(round(D * (1.0 - p_u), 9)))
    x_l, x_u = float(x[t_l - 1]), float(x[t_u - 1])
    if not x_l < x_u:
        raise DomainError("boundaries coincide; the data has too many ties")
    low = x_l - x[x < x_l]
    high = x[x > x_u] - x_u
    lower, upper = fit_gpd_mle(low), fit_gpd_mle(high)
    central = x[(x >= x_l) & (x <= x_u)]
    return SplicedFit(SplicedMarginal(p_l, p_u, x_l, x_u, lower.law(), upper.law(), central), lower, upper)


# rank correlation


def pseudo_observations(x) -> np.ndarray:
    """Column ranks divided by n + 1 (average ranks for ties)."""
    x = np.asarray(x.values if isinstance(x, PanelData) else x, dtype=float)
    return stats.rankdata(x, axis=0) / (x.shape[0] + 1.0)


def kendall_tau_matrix(x, threads: int = 1) -> np.ndarray:
    """Pairwise sample Kendall tau (tau-b), computed in parallel over pairs."""
    v = np.asarray(x.values if isinstance(x, PanelData) else x, dtype=float)
    if v.ndim != 2 or v.shape[0] < 2:
        raise DomainError("need at least two rows")
    if np.any(np.ptp(v, axis=0) == 0):
        raise DomainError("a column is constant; Kendall tau is undefined")
    d = v.shape[1]
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]

    def one(pair):
        return stats.kendalltau(v[:, pair[0]], v[:, pair[1]]).statistic

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            taus = list(ex.map(one, pairs))
    else:
        taus = [one(p) for p in pairs]
    out = np.eye(d)
    for (i, j), t in zip(pairs, taus):
        out[i, j] = out[j, i] = t
    return out


def to_correlation(tau) -> np.ndarray | float:
    """rho = sin(pi tau / 2) entrywise; a matrix that is not PSD is repaired."""
    t = np.asarray(tau, dtype=float)
    if np.any(np.abs(t) > 1.0):
        raise DomainError("Kendall tau must lie in [-1, 1]")
    rho = np.sin(0.5 * np.pi * t)
    if t.ndim == 0:
        return float(rho)
    if t.ndim == 2:
        np.fill_diagonal(rho, 1.0)
        if np.linalg.eigvalsh(0.5 * (rho + rho.T)).min() < 0:
            rho = repair_correlation(rho)
    return rho


# t copula degrees of freedom


def t_copula_loglik(U, P, nu: float) -> float:
    """Log-likelihood of a t copula with correlation P and nu degrees of freedom."""
    U = np.asarray(U, dtype=float)
    n, d = U.shape
    z = special.stdtrit(nu, U)
    L = np.linalg.cholesky(P)
    w = np.linalg.solve(L, z.T)
    q = np.sum(w * w, axis=0)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    const = special.gammaln(0.5 * (nu + d)) + (d - 1) * special.gammaln(0.5 * nu) - d * special.gammaln(0.5 * (nu + 1.0))
    ll = n * (const - 0.5 * logdet)
    ll -= 0.5 * (nu + d) * float(np.sum(np.log1p(q / nu)))
    ll += 0.5 * (nu + 1.0) * float(np.sum(np.log1p(z * z / nu)))
    return float(ll)


@dataclass(frozen=True)
class NuFit:
    nu: float
    loglik: float
    at_boundary: bool
    ci: tuple  # profile-likelihood 95% interval, clipped to the search bounds
    n: int


def fit_t_nu_profile(U, P, bounds=(0.5, 200.0)) -> NuFit:
    """Maximise the t-copula likelihood in nu for a fixed correlation matrix.

    Bounded Brent search on log(nu). An estimate within 0.1% of either end of
    the log range is flagged as a boundary solution.
    """
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[1] < 2 or np.any(U <= 0) or np.any(U >= 1):
        raise DomainError("U must be an n x d matrix (d >= 2) with entries in (0, 1)")
    P = validate_correlation(P)
    if P.shape[0] != U.shape[1]:
        raise DomainError("P does not match the dimension of U")
    lo, hi = math.log(bounds[0]), math.log(bounds[1])

    def nll(log_nu):
        v = t_copula_loglik(U, P, math.exp(log_nu))
        if not np.isfinite(v):
            raise NumericError(f"t-copula likelihood is not finite at nu = {math.exp(log_nu):.4g}")
        return -v

    res = optimize.minimize_scalar(nll, bounds=(lo, hi), method="bounded", options={"xatol": 1e-6})
    x = float(res.x)
    best = -float(res.fun)
    # the bounded search never evaluates the ends; compare explicitly
    for end in (lo, hi):
        v = -nll(end)
        if v > best:
            x, best = end, v
    at_boundary = min(x - lo, hi - x) <= 1e-3 * (hi - lo)
    target = best - 0.5 * stats.chi2.ppf(0.95, 1)

    def side(a, b):
        fa = -nll(a) - target
        if fa >= 0:
            return a
        return optimize.brentq(lambda t: -nll(t) - target, a, b, xtol=1e-6)

    ci = (math.exp(side(lo, x)) if x > lo else math.exp(lo), math.exp(side(hi, x)) if x < hi else math.exp(hi))
    return NuFit(math.exp(x), best, bool(at_boundary), ci, U.shape[0])


# Gumbel copula


def _stirling_tables(d: int):
    s1 = np.zeros((d + 1, d + 1))  # signed first kind
    s2 = np.zeros((d + 1, d + 1))
    s1[0, 0] = s2[0, 0] = 1.0
    for n in range(d):
        for k in range(1, n + 2):
            s1[n + 1, k] = s1[n, k - 1] - n * s1[n, k]
            s2[n + 1, k] = k * s2[n, k] + s2[n, k - 1]
    return s1, s2


def _gumbel_poly_coeffs(d: int, a: float) -> np.ndarray:
    """a_dk(a) = (-1)^(d-k) sum_{j=k}^d a^j s(d, j) S(j, k), k = 1..d."""
    s1, s2 = _stirling_tables(d)
    out = np.zeros(d)
    for k in range(1, d + 1):
        total = sum(a**j * s1[d, j] * s2[j, k] for j in range(k, d + 1))
        out[k - 1] = (-1.0) ** (d - k) * total
    return out


def gumbel_log_density(U, theta: float) -> np.ndarray:
    """Log density of the exchangeable d-dimensional Gumbel copula at each row of U."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    n, d = U.shape
    if theta < 1:
        raise DomainError("Gumbel theta must be >= 1")
    a = 1.0 / theta
    lu = -np.log(U)
    t = np.sum(lu**theta, axis=1)
    coef = np.maximum(_gumbel_poly_coeffs(d, a), 0.0)
    k = np.arange(1, d + 1)
    with np.errstate(divide="ignore"):
        terms = np.log(coef)[None, :] + k[None, :] * (a * np.log(t))[:, None]
    log_poly = special.logsumexp(terms, axis=1)
    return (
        d * math.log(theta)
        - t**a
        + np.sum((theta - 1.0) * np.log(lu) + lu, axis=1)
        - d * np.log(t)
        + log_poly
    )


def _empirical_copula(U: np.ndarray, points: np.ndarray, chunk: int = 512) -> np.ndarray:
    out = np.empty(points.shape[0])
    for s in range(0, points.shape[0], chunk):
        p = points[s : s + chunk]
        out[s : s + chunk] = np.mean(np.all(U[None, :, :] <= p[:, None, :], axis=2), axis=1)
    return out


@dataclass(frozen=True)
class GumbelFit:
    theta: float
    objective: float
    at_boundary: bool
    method: str
    n: int


def fit_gumbel(U, method: str = "mle", bounds=(1.0, 50.0)) -> GumbelFit:
    """Gumbel parameter by maximum likelihood or minimal Cramer-von Mises distance.

    The CvM criterion is sum_k (C_theta(U_k) - C_n(U_k))^2 with C_n the
    empirical copula. Estimates within 1e-3 of a bound are flagged.
    """
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[1] < 2 or np.any(U <= 0) or np.any(U >= 1):
        raise DomainError("U must be an n x d matrix (d >= 2) with entries in (0, 1)")
    lo, hi = float(bounds[0]), float(bounds[1])
    if method == "mle":

        def obj(th):
            return -float(np.sum(gumbel_log_density(U, th)))

    elif method == "cvm":
        emp = _empirical_copula(U, U)
        lu = -np.log(U)

        def obj(th):
            model = np.exp(-np.sum(lu**th, axis=1) ** (1.0 / th))
            return float(np.sum((model - emp) ** 2))

    else:
        raise DomainError(f"method must be 'mle' or 'cvm', got {method!r}")
    res = optimize.minimize_scalar(obj, bounds=(lo, hi), method="bounded", options={"xatol": 1e-7})
    th, val = float(res.x), float(res.fun)
    for end in (lo, hi):
        v = obj(end)
        if v < val:
            th, val = end, v
    if not np.isfinite(val):
        raise NumericError(f"Gumbel {method} objective is not finite at theta = {th}")
    flag = min(th - lo, hi - th) <= 1e-3
    return GumbelFit(th, val if method == "cvm" else -val, bool(flag), method, U.shape[0])


# frequency and severity


@dataclass(frozen=True)
class FrequencySeverityFit:
    frequency: NegBinomial
    severity: Lognormal
    se_r: float
    se_p: float
    se_mu: float
    se_sigma: float
    n_periods: int
    n_losses: int
    r_at_bound: bool = False

    def to_dict(self) -> dict:
        return {
            "frequency": self.frequency.to_dict(),
            "severity": self.severity.to_dict(),
            "se": {"r": self.se_r, "p": self.se_p, "mu": self.se_mu, "sigma": self.se_sigma},
            "n_periods": self.n_periods,
            "n_losses": self.n_losses,
            "r_at_bound": self.r_at_bound,
        }


def _nb_loglik(r: float, p: float, k: np.ndarray) -> float:
    return float(
        np.sum(special.gammaln(k + r) - special.gammaln(r) - special.gammaln(k + 1.0) + r * math.log(p) + k * math.log1p(-p))
    )


def _hessian(f, x, rel: float = 1e-4) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    h = rel * np.maximum(np.abs(x), 1e-8)
    n = x.size
    H = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i], ej[j] = h[i], h[j]
            H[i, j] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4.0 * h[i] * h[j])
    return H


def fit_frequency_severity(counts, losses, r_bounds=(1e-4, 1e6)) -> FrequencySeverityFit:
    """Negative binomial counts by ML and lognormal severities by log-moment estimates.

    The NB likelihood is maximised jointly in (r, p); for fixed r the optimum
    is p = r / (r + mean count), so the search runs over r alone. The
    lognormal uses the mean and the unbiased variance of the log losses.
    """
    k = np.asarray(counts, dtype=float).reshape(-1)
    x = np.asarray(losses, dtype=float).reshape(-1)
    if k.size == 0 or np.any(k < 0) or np.any(k != np.round(k)):
        raise DomainError("counts must be nonnegative integers")
    if not np.any(k > 0):
        raise DomainError("all counts are zero; the negative binomial is degenerate")
    if x.size < 2 or np.any(x <= 0):
        raise DomainError("need at least two positive losses")
    kbar = float(k.mean())

    def prof(log_r):
        r = math.exp(log_r)
        return -_nb_loglik(r, r / (r + kbar), k)

    lo, hi = math.log(r_bounds[0]), math.log(r_bounds[1])
    res = optimize.minimize_scalar(prof, bounds=(lo, hi), method="bounded", options={"xatol": 1e-9})
    r = math.exp(float(res.x))
    p = r / (r + kbar)
    at_bound = float(res.x) > hi - 1e-3 or float(res.x) < lo + 1e-3
    try:
        H = _hessian(lambda v: _nb_loglik(v[0], v[1], k), [r, p])
        cov = np.linalg.inv(-H)
        se_r, se_p = (math.sqrt(c) if c > 0 else float("nan") for c in np.diag(cov))
    except np.linalg.LinAlgError:
        se_r = se_p = float("nan")
    logs = np.log(x)
    mu = float(logs.mean())
    sigma = float(logs.std(ddof=1))
    n = logs.size
    return FrequencySeverityFit(
        NegBinomial(r, p),
        Lognormal(mu, sigma),
        se_r,
        se_p,
        sigma / math.sqrt(n),
        sigma / math.sqrt(2.0 * (n - 1)),
        k.size,
        n,
        bool(at_bound),
    )


@dataclass(frozen=True)
class IGFit:
    law: InverseGaussian
    se_mu: float
    se_lam: float
    n: int


def fit_inverse_gaussian(x) -> IGFit:
    """Closed-form ML: mu = mean, 1/lam = mean(1/x - 1/mu)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size < 2 or np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise DomainError("need at least two positive observations")
    mu = float(x.mean())
    lam = x.size / float(np.sum(1.0 / x - 1.0 / mu))
    n = x.size
    return IGFit(InverseGaussian(mu, lam), math.sqrt(mu**3 / (lam * n)), lam * math.sqrt(2.0 / n), n)


def replace_zeros(x, seed: int = 0) -> tuple[np.ndarray, int]:
    """Replace exact zeros by Uniform(0, 1) draws from a fixed seed; returns (array, count)."""
    v = np.array(x, dtype=float)
    mask = v == 0.0
    v[mask] = np.random.default_rng(seed).random(int(mask.sum()))
    return v, int(mask.sum())


# manifest builders used by the command line


def _fit_dict(obj) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(obj).items()}


def calibrate_spliced(prices: PanelData, horizon: int = 10, p_l: float = 0.1, p_u: float = 0.1, cuts=(0.04, 0.08), threads: int = 1) -> dict:
    """Index-price pipeline: returns, partition, spliced marginals and tail dependence."""
    x = returns_transform(prices, horizon)
    agg = Aggregation("sum_shifted", shift=1.0)
    ext, up, centre = partition_by_aggregate(x, agg, cuts)
    marginals, tails = [], []
    for k in range(x.d):
        fit = build_spliced(x.values[:, k], p_l, p_u)
        marginals.append(fit.marginal.to_dict())
        tails.append({"label": x.labels[k], "x_l": fit.marginal.x_l, "x_u": fit.marginal.x_u, "lower": _fit_dict(fit.lower), "upper": _fit_dict(fit.upper)})
    out = {
        "kind": "spliced",
        "D": x.T,
        "labels": list(x.labels),
        "partition": {"extreme": int(ext.size), "upper": int(up.size), "centre": int(centre.size)},
        "tails": tails,
        "problem": {"marginals": marginals, "aggregation": agg.to_dict()},
        "central_correlation": np.corrcoef(x.values[centre], rowvar=False).tolist(),
        "tail_copulas": {},
    }
    for name, rows in (("upper", up), ("extreme", ext)):
        block = x.values[rows]
        entry = {"n": int(rows.size), "provenance": "estimated"}
        if rows.size >= 3 and np.all(np.ptp(block, axis=0) > 0):
            corr = np.corrcoef(block, rowvar=False)
            entry["gaussian_linear"] = repair_correlation(corr).tolist() if np.linalg.eigvalsh(corr).min() < 0 else corr.tolist()
            P = to_correlation(kendall_tau_matrix(block, threads))
            entry["gaussian_kendall"] = P.tolist()
            nu = fit_t_nu_profile(pseudo_observations(block), P)
            entry["t_kendall"] = {"nu": nu.nu, "corr": P.tolist(), "at_boundary": nu.at_boundary, "ci": list(nu.ci)}
        else:
            entry["provenance"] = "too few rows; use the shipped fixtures"
        out["tail_copulas"][name] = entry
    return out


def calibrate_compound(periods, types, losses, zero_seed: int = 0) -> dict:
    """Loss-record pipeline: per-type frequency/severity fits and dependence of period totals."""
    labels = sorted(set(types))
    plist = sorted(set(periods))
    pidx = {p: i for i, p in enumerate(plist)}
    counts = np.zeros((len(plist), len(labels)))
    totals = np.zeros_like(counts)
    t_arr = np.array([labels.index(t) for t in types])
    p_arr = np.array([pidx[p] for p in periods])
    np.add.at(counts, (p_arr, t_arr), 1.0)
    np.add.at(totals, (p_arr, t_arr), losses)
    fits = []
    for j, lab in enumerate(labels):
        sev = losses[(t_arr == j) & (losses > 0)]
        fit = fit_frequency_severity(counts[:, j], sev)
        fits.append({"type": lab, **fit.to_dict()})
    filled, n_zero = replace_zeros(totals, zero_seed)
    out = {
        "kind": "compound",
        "labels": labels,
        "n_periods": len(plist),
        "marginals": fits,
        "problem": {
            "marginals": [{"kind": "compound", "frequency": f["frequency"], "severity": f["severity"]} for f in fits],
        },
        "zero_replacement": {"seed": zero_seed, "count": n_zero},
    }
    if len(labels) >= 2:
        U = pseudo_observations(filled)
        corr = np.corrcoef(filled, rowvar=False)
        P = to_correlation(kendall_tau_matrix(filled))
        nu = fit_t_nu_profile(U, P)
        out["copulas"] = {
            "gaussian_linear": (repair_correlation(corr) if np.linalg.eigvalsh(corr).min() < 0 else corr).tolist(),
            "gaussian_kendall": P.tolist(),
            "t_kendall": {"nu": nu.nu, "at_boundary": nu.at_boundary, "ci": list(nu.ci)},
            "gumbel_mle": _fit_dict(fit_gumbel(U, "mle")),
            "gumbel_cvm": _fit_dict(fit_gumbel(U, "cvm")),
        }
    return out


def calibrate_inverse_gaussian(panel: PanelData) -> dict:
    fits = [fit_inverse_gaussian(panel.values[:, k]) for k in range(panel.d)]
    return {
        "kind": "inverse_gaussian",
        "labels": list(panel.labels),
        "marginals": [{"mu": f.law.mu, "lam": f.law.lam, "se_mu": f.se_mu, "se_lam": f.se_lam, "n": f.n} for f in fits],
        "problem": {"marginals": [f.law.to_dict() for f in fits]},
    }
