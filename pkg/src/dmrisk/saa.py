"""Sample average approximation of the worst-case AV@R on a simplex grid.

For fixed component banks the sampled objective of a weight matrix gamma is

    c(gamma) = min_u  u + 1/(1-p) sum_c w_c mean((Psi^c - u)^+),

with w = (alpha_0, alpha_i gamma^i_j). The minimiser solves the sampled
first-order condition pbar(u) ~ p, which is found by bisection; since the
banks never change, every grid point costs a few binary searches.
"""
from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from dmrisk import kernels
from dmrisk.dm import ComponentSampleBank, GammaMatrix
from dmrisk.errors import DomainError, NumericError

__all__ = [
    "SAAConfig",
    "SAAResult",
    "PreparedBank",
    "pbar",
    "bisect_u",
    "saa_avar",
    "saa_standard_error",
    "simplex_grid",
    "saa_search",
]


@dataclass(frozen=True)
class SAAConfig:
    p: float = 0.95
    eps: float | None = None  # defaults to half an empirical CDF step, 0.5/N
    h: float = 0.1
    rounds: int = 0
    N: int = 10_000_000
    max_grid: int = 250_000
    threads: int = 1

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise DomainError(f"p must lie in (0, 1), got {self.p}")
        if self.eps is not None and not self.eps > 0:
            raise DomainError("eps must be positive")
        if not 0.0 < self.h <= 1.0:
            raise DomainError(f"grid step h must lie in (0, 1], got {self.h}")
        if self.rounds < 0 or self.threads < 1 or self.N < 1:
            raise DomainError("rounds >= 0, threads >= 1 and N >= 1 are required")


@dataclass(frozen=True, eq=False)
class PreparedBank:
    """Sorted component arrays with suffix sums, in the order psi0, psi[0, :], psi[1, :], ..."""

    bank: ComponentSampleBank

    @cached_property
    def sorted(self) -> np.ndarray:
        b = self.bank
        flat = np.concatenate([b.psi0[None, :], b.psi.reshape(-1, b.N)])
        return np.sort(flat, axis=1)

    @cached_property
    def suffix(self) -> np.ndarray:
        s = self.sorted
        out = np.zeros((s.shape[0], s.shape[1] + 1))
        out[:, :-1] = np.cumsum(s[:, ::-1], axis=1)[:, ::-1]
        return out

    @cached_property
    def bracket(self) -> tuple[float, float]:
        pooled = self.sorted.ravel()
        lo, hi = np.quantile(pooled, [0.01, 0.999])
        if hi <= lo:
            hi = lo + max(1.0, abs(lo)) * 1e-6
        return float(lo), float(hi)

    def weights(self, gamma: GammaMatrix, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float)
        if gamma.K != self.bank.K or gamma.m != self.bank.m:
            raise DomainError(f"gamma shape {gamma.values.shape} does not match bank ({self.bank.K}, {self.bank.m})")
        return np.concatenate([[alpha[0]], gamma.weights(alpha).ravel()])


def _prepared(bank) -> PreparedBank:
    return bank if isinstance(bank, PreparedBank) else PreparedBank(bank)


def pbar(u: float, gamma: GammaMatrix, bank, alpha) -> float:
    """Mixture of component empirical CDFs at u."""
    pb = _prepared(bank)
    return float(kernels.pbar_eval(float(u), pb.sorted, pb.weights(gamma, alpha)))


def bisect_u(gamma: GammaMatrix, bank, alpha, p: float, eps: float | None = None) -> float:
    """Root of the sampled first-order condition pbar(u) = p.

    Bisection keeps pbar(lo) < p <= pbar(hi). It stops when either endpoint
    is within ``eps`` of p, or when the bracket cannot be split further, in
    which case the upper endpoint is returned so that P(< u) <= p <= P(<= u).
    """
    pb = _prepared(bank)
    eps = 0.5 / pb.bank.N if eps is None else eps
    lo, hi = pb.bracket
    u, _, _, status = kernels.saa_point(pb.sorted, pb.suffix, pb.weights(gamma, alpha), p, eps, lo, hi)
    if status != kernels.OK:
        raise NumericError("could not bracket the quantile within 64 doublings")
    return float(u)


def saa_avar(gamma: GammaMatrix, u: float, bank, alpha, p: float) -> float:
    """u + 1/(1-p) sum_c w_c mean((Psi^c - u)^+)."""
    pb = _prepared(bank)
    w = pb.weights(gamma, alpha)
    n = pb.bank.N
    idx = np.array([np.searchsorted(pb.sorted[c], u, side="right") for c in range(w.size)])
    excess = pb.suffix[np.arange(w.size), idx] - (n - idx) * u
    return float(u + np.dot(w, excess) / (n * (1.0 - p)))


def saa_standard_error(gamma: GammaMatrix, u: float, bank, alpha, p: float) -> float:
    """Standard error of the sampled AV@R treating components as independent samples."""
    pb = _prepared(bank)
    w = pb.weights(gamma, alpha)
    var = 0.0
    for c in range(w.size):
        if w[c] > 0:
            var += w[c] ** 2 * np.var(np.maximum(pb.sorted[c] - u, 0.0), ddof=1) / pb.bank.N
    return float(math.sqrt(var) / (1.0 - p))


def _steps(h: float) -> int:
    n = round(1.0 / h)
    if n < 1 or abs(n * h - 1.0) > 1e-9:
        raise DomainError(f"1/h must be an integer, got h={h}")
    return n


def simplex_grid(K: int, h: float) -> np.ndarray:
    """All points of the (K-1)-simplex with coordinates in {0, h, ..., 1}, lexicographic."""
    if K < 1:
        raise DomainError("K must be >= 1")
    n = _steps(h)
    pts = [c for c in itertools.product(range(n + 1), repeat=K - 1) if sum(c) <= n]
    out = np.array([list(c) + [n - sum(c)] for c in pts], dtype=float) / n
    return out.reshape(-1, K)


def _neighbourhood(center: np.ndarray, step: float, radius: float) -> np.ndarray:
    """Simplex points on the step grid within sup-distance ``radius`` of center."""
    K = center.size
    r = int(round(radius / step))
    base = np.round(center / step).astype(int)
    n = int(round(1.0 / step))
    pts = []
    for off in itertools.product(range(-r, r + 1), repeat=K - 1):
        head = base[:-1] + np.array(off, dtype=int)
        last = n - head.sum()
        if np.all(head >= 0) and last >= 0 and abs(last - base[-1]) <= r:
            pts.append(list(head) + [last])
    return np.array(pts, dtype=float) / n


@dataclass
class SAAResult:
    gamma: GammaMatrix  # over the selected candidates
    avar: float
    var: float
    avar_se: float
    selected: tuple
    grid: np.ndarray = field(repr=False)  # (G, K* m) flattened column-wise
    values: np.ndarray = field(repr=False)
    quantiles: np.ndarray = field(repr=False)

    def gamma_full(self, K: int) -> GammaMatrix:
        full = np.zeros((K, self.gamma.m))
        full[list(self.selected), :] = self.gamma.values
        return GammaMatrix(full)

    def to_csv(self, path) -> None:
        ks = len(self.selected)
        m = self.gamma.m
        header = [f"gamma_{self.selected[j] + 1}_{i + 1}" for i in range(m) for j in range(ks)] + ["avar", "var"]
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for g, c, u in zip(self.grid, self.values, self.quantiles):
                w.writerow([repr(float(x)) for x in g] + [repr(float(c)), repr(float(u))])


def _evaluate(pb: PreparedBank, rows: np.ndarray, alpha, p, eps, threads: int):
    lo, hi = pb.bracket
    # rows hold gamma flattened column-wise; convert to component weights
    K, m = pb.bank.K, pb.bank.m
    w = np.empty((rows.shape[0], 1 + K * m))
    w[:, 0] = alpha[0]
    for i in range(m):
        w[:, 1 + i * K : 1 + (i + 1) * K] = alpha[i + 1] * rows[:, i * K : (i + 1) * K]
    if threads <= 1 or rows.shape[0] < 2 * threads:
        us, cs, _, st = kernels.saa_grid(pb.sorted, pb.suffix, w, p, eps, lo, hi)
    else:
        chunks = np.array_split(np.arange(rows.shape[0]), threads)
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(lambda ix: kernels.saa_grid(pb.sorted, pb.suffix, w[ix], p, eps, lo, hi), chunks))
        us = np.concatenate([q[0] for q in parts])
        cs = np.concatenate([q[1] for q in parts])
        st = np.concatenate([q[3] for q in parts])
    if np.any(st != kernels.OK):
        raise NumericError("could not bracket the quantile within 64 doublings")
    return us, cs


def _product(per_column: list[np.ndarray], cap: int) -> np.ndarray:
    total = math.prod(len(g) for g in per_column)
    if total > cap:
        raise DomainError(
            f"SAA grid has {total} points, above the cap of {cap}; use a larger h or fewer selected copulas"
        )
    return np.array([np.concatenate(c) for c in itertools.product(*per_column)])


def _argmax(grid: np.ndarray, values: np.ndarray) -> int:
    best = np.flatnonzero(values == values.max())
    # ties: lexicographically smallest gamma
    return int(min(best, key=lambda r: tuple(grid[r])))


def saa_search(bank: ComponentSampleBank, alpha, p: float, selected: Sequence[int], cfg: SAAConfig) -> SAAResult:
    """Maximise the sampled AV@R over the product of simplex grids on the selected candidates."""
    selected = tuple(int(s) for s in selected)
    if not selected:
        raise DomainError("need at least one selected candidate")
    sub = bank if tuple(bank.columns) == selected else bank.restrict(selected)
    pb = PreparedBank(sub)
    alpha = np.asarray(alpha, dtype=float)
    K, m = len(selected), sub.m
    eps = 0.5 / sub.N if cfg.eps is None else cfg.eps
    base = simplex_grid(K, cfg.h)
    grid = _product([base] * m, cfg.max_grid)
    us, cs = _evaluate(pb, grid, alpha, p, eps, cfg.threads)
    grids, values, quants = [grid], [cs], [us]
    best = _argmax(grid, cs)
    incumbent = grid[best]
    step = cfg.h
    for _ in range(cfg.rounds):
        fine = step / 2.0
        cols = [_neighbourhood(incumbent[i * K : (i + 1) * K], fine, step) for i in range(m)]
        g2 = _product(cols, cfg.max_grid)
        u2, c2 = _evaluate(pb, g2, alpha, p, eps, cfg.threads)
        grids.append(g2)
        values.append(c2)
        quants.append(u2)
        all_g = np.vstack(grids)
        all_c = np.concatenate(values)
        incumbent = all_g[_argmax(all_g, all_c)]
        step = fine
    all_g = np.vstack(grids)
    all_c = np.concatenate(values)
    all_u = np.concatenate(quants)
    k = _argmax(all_g, all_c)
    gamma = GammaMatrix(all_g[k].reshape(m, K).T)
    se = saa_standard_error(gamma, all_u[k], pb, alpha, p)
    return SAAResult(gamma, float(all_c[k]), float(all_u[k]), se, selected, all_g, all_c, all_u)
