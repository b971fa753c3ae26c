"""Projected stochastic gradient ascent for the worst-case AV@R.

Each iteration draws N_t aggregate losses under the current weights, forms
the empirical VaR/AV@R, estimates the gradient with respect to gamma through
likelihood ratios of kernel density tables, and takes a projected step

    gamma^i_{t+1} = Pi(gamma^i_t + t^{-a} Delta^i_t),

where Pi is the Euclidean projection onto the simplex.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dmrisk import kernels
from dmrisk.density import DensityTable, eval_density, fit_kde, mix_tables, silverman_bandwidth
from dmrisk.dm import ComponentSampleBank, DMSpec, GammaMatrix, aggregate, dm_sample
from dmrisk.errors import DomainError, StateError

__all__ = [
    "SAConfig",
    "SATrace",
    "ComponentDensities",
    "empirical_var_avar",
    "avar_standard_error",
    "lr_gradient",
    "project_simplex",
    "project_columns",
    "fit_component_densities",
    "sa_solve",
    "select_copulas",
]


@dataclass(frozen=True)
class SAConfig:
    p: float = 0.95
    a: float = 0.6
    n_per_iter: int = 100_000
    t_min: int = 10
    t_max: int = 50
    threshold: float = 0.01
    seed: int | np.random.SeedSequence = 0
    stop: bool = True  # False runs all t_max iterations (trajectory export)

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise DomainError(f"p must lie in (0, 1), got {self.p}")
        if not 0.5 < self.a <= 1.0:
            raise DomainError(f"step exponent a must lie in (0.5, 1], got {self.a}")
        if self.n_per_iter < 2:
            raise DomainError("n_per_iter must be >= 2")
        if not 1 <= self.t_min <= self.t_max:
            raise DomainError(f"need 1 <= t_min <= t_max, got {self.t_min}, {self.t_max}")
        if not self.threshold > 0:
            raise DomainError("threshold must be positive")


@dataclass
class SATrace:
    gammas: list = field(default_factory=list)
    avar: list = field(default_factory=list)
    var: list = field(default_factory=list)
    avar_se: list = field(default_factory=list)
    grads: list = field(default_factory=list)
    t_star: int = 0

    @property
    def final_gamma(self) -> GammaMatrix:
        return GammaMatrix(self.gammas[-1])

    @property
    def final_grad(self) -> np.ndarray:
        return self.grads[-1]

    def sd_last(self, k: int = 10) -> float:
        """Sample SD of the AV@R estimates over the last k iterations."""
        tail = np.asarray(self.avar[-k:])
        return float(np.std(tail, ddof=1)) if tail.size > 1 else float("nan")

    def to_csv(self, path) -> None:
        K, m = np.asarray(self.gammas[0]).shape
        header = ["iteration", "avar", "var", "avar_se"]
        header += [f"gamma_{j + 1}_{i + 1}" for i in range(m) for j in range(K)]
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t, (g, c, v, se) in enumerate(zip(self.gammas, self.avar, self.var, self.avar_se), start=1):
                w.writerow([t, repr(float(c)), repr(float(v)), repr(float(se))] + [repr(float(x)) for x in np.asarray(g).T.ravel()])


def empirical_var_avar(losses, p: float) -> tuple[float, float]:
    """VaR as the ceil(Np)-th order statistic and AV@R = v + mean((L - v)^+)/(1 - p)."""
    x = np.asarray(losses, dtype=float).reshape(-1)
    if x.size < 1:
        raise DomainError("need at least one loss")
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    n = x.size
    k = max(1, math.ceil(round(n * p, 9)))
    v = float(np.partition(x, k - 1)[k - 1])
    c = v + float(np.maximum(x - v, 0.0).sum()) / (n * (1.0 - p))
    return v, c


def avar_standard_error(losses, p: float, v: float | None = None) -> float:
    """Delta-method standard error of the empirical AV@R."""
    x = np.asarray(losses, dtype=float).reshape(-1)
    if v is None:
        v, _ = empirical_var_avar(x, p)
    return float(np.std(np.maximum(x - v, 0.0), ddof=1) / ((1.0 - p) * math.sqrt(x.size)))


def lr_gradient(losses, v: float, f_table: DensityTable, g_tables, alpha, p: float, weights=None) -> np.ndarray:
    """Likelihood-ratio gradient of the AV@R, an m x K matrix.

    Delta_ij = 1/(N(1-p)) sum_l alpha_i g_ij(L_l)/f(L_l) (L_l - v)^+ w_l,
    with optional per-sample weights w_l (importance sampling).
    """
    x = np.asarray(losses, dtype=float).reshape(-1)
    alpha = np.asarray(alpha, dtype=float)
    m = len(g_tables)
    K = len(g_tables[0]) if m else 0
    if alpha.size != m + 1:
        raise DomainError(f"alpha has {alpha.size} entries, tables imply {m + 1}")
    if not np.isfinite(v):
        raise DomainError("VaR estimate must be finite")
    tail = x >= v
    xt = x[tail]
    excess = xt - v
    if weights is not None:
        excess = excess * np.asarray(weights, dtype=float).reshape(-1)[tail]
    f = eval_density(f_table, xt)
    scale = 1.0 / (x.size * (1.0 - p))
    out = np.zeros((m, K))
    for i in range(m):
        if alpha[i + 1] == 0.0:
            continue
        for j in range(K):
            g = eval_density(g_tables[i][j], xt)
            out[i, j] = alpha[i + 1] * scale * float(np.sum(g / f * excess))
    return out


def project_simplex(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0 or not np.all(np.isfinite(y)):
        raise DomainError("projection needs a nonempty finite vector")
    return kernels.project_simplex(y)


def project_columns(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return np.column_stack([project_simplex(a[:, i]) for i in range(a.shape[1])])


@dataclass(frozen=True, eq=False)
class ComponentDensities:
    """Kernel tables g_0 and g_ij on one shared grid."""

    g0: DensityTable
    g: tuple  # g[i][j], i = 0..m-1

    @property
    def grid(self) -> np.ndarray:
        return self.g0.grid

    def mixture(self, gamma: GammaMatrix, alpha) -> DensityTable:
        w = gamma.weights(alpha)
        tables = [self.g0] + [t for row in self.g for t in row]
        weights = [float(alpha[0])] + list(w.ravel())
        return mix_tables(weights, tables)


def fit_component_densities(bank: ComponentSampleBank, G: int = 1000, bandwidth: float | None = None) -> ComponentDensities:
    """Fit every component table on a common grid that covers all bank arrays."""
    arrays = [bank.psi0] + [bank.psi[i, j] for i in range(bank.m) for j in range(bank.K)]
    hs = [silverman_bandwidth(a) if bandwidth is None else bandwidth for a in arrays]
    if min(hs) <= 0:
        raise DomainError("a component array has zero variance; cannot fit its density")
    lo = min(float(a.min()) - 3.0 * h for a, h in zip(arrays, hs))
    hi = max(float(a.max()) + 3.0 * h for a, h in zip(arrays, hs))
    grid = np.linspace(lo, hi, G)
    tables = [fit_kde(a, G, bandwidth=h, grid=grid) for a, h in zip(arrays, hs)]
    g = tuple(tuple(tables[1 + i * bank.K + j] for j in range(bank.K)) for i in range(bank.m))
    return ComponentDensities(tables[0], g)


def sa_solve(
    spec: DMSpec,
    cfg: SAConfig,
    densities: ComponentDensities | None,
    gamma_init: GammaMatrix | None = None,
) -> SATrace:
    """Run projected stochastic gradient ascent from ``gamma_init`` (uniform by default)."""
    if densities is None:
        raise StateError("density tables are missing; fit them from a component bank first")
    if len(densities.g) != spec.m or len(densities.g[0]) != spec.K:
        raise DomainError("density tables do not match the spec dimensions")
    gamma = (gamma_init or GammaMatrix.uniform(spec.K, spec.m)).values.copy()
    alpha = spec.alpha
    root = cfg.seed if isinstance(cfg.seed, np.random.SeedSequence) else np.random.SeedSequence(cfg.seed)
    streams = root.spawn(cfg.t_max)
    trace = SATrace()
    prev = None
    for t in range(1, cfg.t_max + 1):
        gm = GammaMatrix(gamma)
        x = dm_sample(spec, gm, cfg.n_per_iter, np.random.default_rng(streams[t - 1]))
        losses = aggregate(spec.aggregation, x)
        v, c = empirical_var_avar(losses, cfg.p)
        grad = lr_gradient(losses, v, densities.mixture(gm, alpha), densities.g, alpha, cfg.p)
        trace.gammas.append(gamma.copy())
        trace.avar.append(c)
        trace.var.append(v)
        trace.avar_se.append(avar_standard_error(losses, cfg.p, v))
        trace.grads.append(grad)
        trace.t_star = t
        if cfg.stop and prev is not None and t >= cfg.t_min and np.abs(gamma - prev).sum() < cfg.threshold:
            break
        if t == cfg.t_max:
            break
        prev = gamma
        step = t ** (-cfg.a)
        gamma = project_columns(gamma + step * grad.T)
        # clean rounding so columns sum to one within 1e-12
        gamma = gamma / gamma.sum(axis=0, keepdims=True)
    return trace


def select_copulas(gamma, grad=None, k_star: int = 1) -> list[int]:
    """Pick ``k_star`` candidates by iterated row/column elimination of gamma.

    The largest remaining entry selects its row (candidate); that row and its
    column are removed. Once every column is used, rows already selected are
    dropped and all columns come back. Ties go to the larger gradient entry,
    then to the larger row total of gamma, then to the lower candidate index.
    Returns 0-based candidate indices in selection order.
    """
    g = np.asarray(gamma.values if isinstance(gamma, GammaMatrix) else gamma, dtype=float)
    K, m = g.shape
    if not 1 <= k_star <= K:
        raise DomainError(f"K* must lie in 1..{K}, got {k_star}")
    dlt = None if grad is None else np.asarray(grad, dtype=float)
    if dlt is not None and dlt.shape == (m, K):
        dlt = dlt.T
    if dlt is not None and dlt.shape != (K, m):
        raise DomainError(f"gradient shape {np.shape(grad)} does not match gamma {g.shape}")
    totals = g.sum(axis=1)
    selected: list[int] = []
    while len(selected) < k_star:
        rows = [r for r in range(K) if r not in selected]
        cols = list(range(m))
        while cols and rows and len(selected) < k_star:
            best = None
            for r in rows:
                for c in cols:
                    key = (g[r, c], -np.inf if dlt is None else dlt[r, c], totals[r], -r)
                    if best is None or _better(key, best[0]):
                        best = (key, r, c)
            _, r, c = best
            selected.append(r)
            rows.remove(r)
            cols.remove(c)
    return selected


def _better(a, b, tol: float = 1e-12) -> bool:
    if abs(a[0] - b[0]) > tol:
        return a[0] > b[0]
    if a[1] != b[1]:
        return a[1] > b[1]
    if abs(a[2] - b[2]) > tol:
        return a[2] > b[2]
    return a[3] > b[3]
