"""Importance sampling for the DM loss model.

The proposal h keeps every candidate copula and replaces two ingredients:
the inverse Gaussian marginals are Esscher tilted and the Gaussian central
copula gets a mean shift. Likelihood ratios f/h are read from kernel tables
fitted to component banks drawn under both measures.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from dmrisk._rng import SeedLike, open_unit, seed_sequence
from dmrisk.copulas import GaussianCopula, _factor
from dmrisk.density import EPS, DensityTable, eval_density
from dmrisk.distributions import InverseGaussian
from dmrisk.dm import DMSpec, GammaMatrix, aggregate, component_losses, dm_sample
from dmrisk.errors import DomainError, NumericError
from dmrisk.sa import ComponentDensities, fit_component_densities, lr_gradient

__all__ = [
    "ISSpec",
    "ISDensities",
    "esscher_ig",
    "is_marginals",
    "shifted_gaussian_sampler",
    "fit_is_densities",
    "is_sample",
    "weighted_quantile",
    "is_var_avar_gradient",
]


@dataclass(frozen=True)
class ISSpec:
    """Esscher tilts per marginal and a mean shift of the Gaussian central copula.

    ``tilt_marginals`` and ``shift_central`` switch each change of measure on or off.
    """

    tilts: tuple = ()
    shift: tuple = ()
    tilt_marginals: bool = True
    shift_central: bool = True

    def __post_init__(self):
        object.__setattr__(self, "tilts", tuple(float(w) for w in self.tilts))
        object.__setattr__(self, "shift", tuple(float(s) for s in self.shift))

    def to_dict(self) -> dict:
        return {
            "tilts": list(self.tilts),
            "shift": list(self.shift),
            "tilt_marginals": self.tilt_marginals,
            "shift_central": self.shift_central,
        }


def esscher_ig(mu: float, lam: float, w: float) -> InverseGaussian:
    """Esscher transform of IG(mu, lam) with parameter w: IG(mu sqrt(lam)/sqrt(lam - 2 mu^2 w), lam)."""
    bound = lam / (2.0 * mu * mu)
    if w >= bound:
        raise DomainError(f"Esscher parameter {w} is inadmissible; need w < lam/(2 mu^2) = {bound:.6g}")
    return InverseGaussian(mu * math.sqrt(lam) / math.sqrt(lam - 2.0 * mu * mu * w), lam)


def is_marginals(spec: DMSpec, iss: ISSpec) -> tuple:
    if not iss.tilt_marginals or not iss.tilts:
        return spec.marginals
    if len(iss.tilts) != spec.d:
        raise DomainError(f"need {spec.d} tilt parameters, got {len(iss.tilts)}")
    out = []
    for f, w in zip(spec.marginals, iss.tilts):
        if w == 0.0:
            out.append(f)
        elif isinstance(f, InverseGaussian):
            out.append(esscher_ig(f.mu, f.lam, w))
        else:
            raise DomainError(f"Esscher tilting is only implemented for inverse Gaussian marginals, got {f.kind}")
    return tuple(out)


def shifted_gaussian_sampler(spec: DMSpec, iss: ISSpec):
    """Sampler for the mean-shifted Gaussian central copula, or None when unchanged."""
    if not iss.shift_central or not iss.shift or not any(iss.shift):
        return None
    if not isinstance(spec.central, GaussianCopula):
        raise DomainError("a mean shift needs a Gaussian central copula")
    shift = np.asarray(iss.shift, dtype=float)
    if shift.size != spec.d:
        raise DomainError(f"need {spec.d} shift entries, got {shift.size}")
    factor = _factor(spec.central.corr)

    def draw(n: int, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal((n, spec.d)) @ factor.T + shift
        return open_unit(special.ndtr(z))

    return draw


@dataclass(frozen=True, eq=False)
class ISDensities:
    """Component tables under the model (``f``) and the proposal (``h``) on one grid."""

    f: ComponentDensities
    h: ComponentDensities


def fit_is_densities(spec: DMSpec, iss: ISSpec, N: int, seed: SeedLike = 0, G: int = 1000) -> ISDensities:
    ss = seed_sequence(seed)
    s_f, s_h = ss.spawn(2)
    bank_f = component_losses(spec, N, s_f)
    if is_marginals(spec, iss) is spec.marginals and shifted_gaussian_sampler(spec, iss) is None:
        f = fit_component_densities(bank_f, G)
        return ISDensities(f, f)
    bank_h = component_losses(spec, N, s_h, marginals=is_marginals(spec, iss), central_sampler=shifted_gaussian_sampler(spec, iss))
    # one grid for both measures so ratios are taken pointwise
    lo = min(bank_f.psi0.min(), bank_f.psi.min(), bank_h.psi0.min(), bank_h.psi.min())
    hi = max(bank_f.psi0.max(), bank_f.psi.max(), bank_h.psi0.max(), bank_h.psi.max())
    f = fit_component_densities(bank_f, G)
    h = fit_component_densities(bank_h, G)
    grid = np.linspace(min(f.grid[0], h.grid[0], lo), max(f.grid[-1], h.grid[-1], hi), G)
    return ISDensities(_regrid(f, grid), _regrid(h, grid))


def _regrid(cd: ComponentDensities, grid: np.ndarray) -> ComponentDensities:
    def move(t: DensityTable) -> DensityTable:
        return DensityTable(grid, eval_density(t, grid), t.bandwidth, t.n)

    return ComponentDensities(move(cd.g0), tuple(tuple(move(t) for t in row) for row in cd.g))


def is_sample(spec: DMSpec, iss: ISSpec, gamma: GammaMatrix, n: int, seed: SeedLike, dens: ISDensities):
    """Draw n aggregate losses from the proposal h with their log likelihood ratios log(f/h).

    Returns ``(losses, log_ratios, floor_fraction)``; the last entry is the share
    of draws where either table sat at its floor, a sign that h does not dominate f.
    """
    x = dm_sample(
        spec,
        gamma,
        n,
        seed,
        marginals=is_marginals(spec, iss),
        central_sampler=shifted_gaussian_sampler(spec, iss),
    )
    y = aggregate(spec.aggregation, x)
    alpha = spec.alpha
    f = eval_density(dens.f.mixture(gamma, alpha), y)
    h = eval_density(dens.h.mixture(gamma, alpha), y)
    floor = float(np.mean((f <= EPS * 1.0000001) | (h <= EPS * 1.0000001)))
    return y, np.log(f) - np.log(h), floor


def weighted_quantile(y, weights, p: float) -> float:
    """inf{s : (1/N) sum_l w_l 1[y_l <= s] >= p}."""
    y = np.asarray(y, dtype=float)
    w = np.asarray(weights, dtype=float)
    order = np.argsort(y, kind="stable")
    cum = np.cumsum(w[order]) / y.size
    idx = int(np.searchsorted(cum, p, side="left"))
    if idx >= y.size:
        raise NumericError(f"weighted empirical CDF tops out at {cum[-1]:.6g} < p = {p}")
    return float(y[order][idx])


def is_var_avar_gradient(losses, log_ratios, g_tables, f_table: DensityTable, alpha, p: float):
    """Likelihood-ratio weighted VaR, AV@R and gradient; reduces to the crude estimators when L = 1."""
    y = np.asarray(losses, dtype=float)
    lr = np.exp(np.asarray(log_ratios, dtype=float))
    v = weighted_quantile(y, lr, p)
    c = v + float(np.sum(np.maximum(y - v, 0.0) * lr)) / (y.size * (1.0 - p))
    grad = lr_gradient(y, v, f_table, g_tables, alpha, p, weights=lr)
    return v, c, grad
