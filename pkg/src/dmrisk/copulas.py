"""Copula families used as central and candidate tail copulas.

Elliptical families are sampled through a factor of the correlation matrix,
Archimedean families through their frailty (Marshall-Olkin) representation:

    Clayton  gamma(1/theta) frailty
    Gumbel   positive stable(1/theta) frailty
    Frank    log-series(1 - exp(-theta)) frailty
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np
from scipy import special

from dmrisk._rng import SeedLike, as_generator, open_unit
from dmrisk.distributions import PositiveStable
from dmrisk.errors import DomainError

__all__ = [
    "Copula",
    "GaussianCopula",
    "TCopula",
    "GroupedTCopula",
    "ClaytonCopula",
    "GumbelCopula",
    "FrankCopula",
    "IndependenceCopula",
    "copula_sample",
    "archimedean_cdf",
    "validate_correlation",
    "repair_correlation",
    "symmetrize_upper",
    "copula_from_dict",
]

PSD_TOL = 1e-10
REPAIR_TOL = 1e-8

_REGISTRY: dict[str, type["Copula"]] = {}


def symmetrize_upper(a) -> np.ndarray:
    """Mirror the upper triangle onto the lower one."""
    a = np.asarray(a, dtype=float)
    return np.triu(a) + np.triu(a, 1).T


def repair_correlation(a, floor: float = 0.0) -> np.ndarray:
    """Clip eigenvalues at ``floor`` and rescale back to unit diagonal."""
    a = 0.5 * (np.asarray(a, dtype=float) + np.asarray(a, dtype=float).T)
    w, v = np.linalg.eigh(a)
    b = (v * np.maximum(w, floor)) @ v.T
    s = 1.0 / np.sqrt(np.diag(b))
    b = b * s[:, None] * s[None, :]
    np.fill_diagonal(b, 1.0)
    return 0.5 * (b + b.T)


def validate_correlation(a) -> np.ndarray:
    """Return a valid correlation matrix or raise :class:`DomainError`.

    Eigenvalues in [-1e-8, 0) are treated as rounding noise and repaired;
    anything more negative is rejected.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
        raise DomainError(f"correlation matrix must be square with d >= 2, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("correlation matrix has non-finite entries")
    if np.max(np.abs(a - a.T)) > PSD_TOL:
        raise DomainError("correlation matrix is not symmetric")
    if np.max(np.abs(np.diag(a) - 1.0)) > PSD_TOL:
        raise DomainError("correlation matrix must have unit diagonal")
    if np.max(np.abs(a)) > 1.0 + PSD_TOL:
        raise DomainError("correlation entries must lie in [-1, 1]")
    lam_min = float(np.linalg.eigvalsh(a).min())
    if lam_min < -REPAIR_TOL:
        raise DomainError(f"correlation matrix is not positive semidefinite: eigenvalue {lam_min:.6g}")
    if lam_min < 0.0:
        a = repair_correlation(a)
    return a


def _factor(a: np.ndarray) -> np.ndarray:
    """Lower factor L with L L^T = a; falls back to eigenvectors when singular."""
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(a)
        return v * np.sqrt(np.maximum(w, 0.0))


class Copula:
    """Base class; concrete families are frozen dataclasses."""

    kind: ClassVar[str] = ""

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if cls.kind:
            _REGISTRY[cls.kind] = cls

    @property
    def d(self) -> int:
        raise NotImplementedError

    def _draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def sample(self, n: int, seed: SeedLike = None) -> np.ndarray:
        if n < 1:
            raise DomainError(f"sample size must be >= 1, got {n}")
        return open_unit(self._draw(n, as_generator(seed)))

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


def copula_from_dict(d: dict[str, Any]) -> Copula:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _REGISTRY:
        raise DomainError(f"unknown copula kind {kind!r}")
    return _REGISTRY[kind].from_dict(d)


def _check_dim(d: int) -> None:
    if int(d) != d or d < 2:
        raise DomainError(f"copula dimension must be an integer >= 2, got {d}")


@dataclass(frozen=True, eq=False)
class GaussianCopula(Copula):
    corr: np.ndarray
    kind: ClassVar[str] = "gaussian"

    def __post_init__(self):
        object.__setattr__(self, "corr", validate_correlation(self.corr))

    @property
    def d(self) -> int:
        return self.corr.shape[0]

    def _normals(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal((n, self.d)) @ _factor(self.corr).T

    def _draw(self, n, rng):
        return special.ndtr(self._normals(n, rng))

    def to_dict(self):
        return {"kind": self.kind, "corr": self.corr.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["corr"], dtype=float))


@dataclass(frozen=True, eq=False)
class GroupedTCopula(Copula):
    """t copula whose coordinates are split into groups with their own nu.

    One common uniform Q drives every group: W_g = chi2_{nu_g}^{-1}(Q).
    With a single group this is the ordinary t copula.
    """

    nu: tuple
    groups: tuple
    corr: np.ndarray
    kind: ClassVar[str] = "grouped_t"

    def __post_init__(self):
        nu = tuple(float(v) for v in np.atleast_1d(self.nu))
        groups = tuple(int(g) for g in np.atleast_1d(self.groups))
        if any(not v > 0 for v in nu):
            raise DomainError(f"degrees of freedom must be positive, got {nu}")
        corr = validate_correlation(self.corr)
        if len(groups) != corr.shape[0]:
            raise DomainError(f"group labels ({len(groups)}) do not match dimension {corr.shape[0]}")
        if min(groups) < 0 or max(groups) >= len(nu):
            raise DomainError(f"group labels must lie in 0..{len(nu) - 1}")
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "corr", corr)

    @property
    def d(self) -> int:
        return self.corr.shape[0]

    def _draw(self, n, rng):
        z = rng.standard_normal((n, self.d)) @ _factor(self.corr).T
        if len(self.nu) == 1:
            # no coupling to preserve; a direct chi-square draw is much cheaper than chdtri
            w = rng.chisquare(self.nu[0], n) / self.nu[0]
            return special.stdtr(self.nu[0], z / np.sqrt(w)[:, None])
        q = open_unit(rng.random(n))
        out = np.empty_like(z)
        labels = np.asarray(self.groups)
        for g, nu in enumerate(self.nu):
            cols = np.flatnonzero(labels == g)
            if cols.size == 0:
                continue
            w = special.chdtri(nu, q) / nu
            out[:, cols] = special.stdtr(nu, z[:, cols] / np.sqrt(w)[:, None])
        return out

    def to_dict(self):
        return {"kind": self.kind, "nu": list(self.nu), "groups": list(self.groups), "corr": self.corr.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["nu"]), tuple(d["groups"]), np.asarray(d["corr"], dtype=float))


class TCopula(GroupedTCopula):
    """Student t copula: a grouped t copula with a single group."""

    kind: ClassVar[str] = "t"

    def __init__(self, nu: float, corr):
        corr = np.asarray(corr, dtype=float)
        GroupedTCopula.__init__(self, (float(nu),), (0,) * corr.shape[0], corr)

    def __repr__(self):
        return f"TCopula(nu={self.nu[0]}, d={self.d})"

    def to_dict(self):
        return {"kind": self.kind, "nu": self.nu[0], "corr": self.corr.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["nu"]), np.asarray(d["corr"], dtype=float))


@dataclass(frozen=True)
class IndependenceCopula(Copula):
    dim: int
    kind: ClassVar[str] = "independence"

    def __post_init__(self):
        _check_dim(self.dim)

    @property
    def d(self) -> int:
        return self.dim

    def _draw(self, n, rng):
        return rng.random((n, self.dim))

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["dim"]))


@dataclass(frozen=True)
class ClaytonCopula(Copula):
    theta: float
    dim: int = 2
    kind: ClassVar[str] = "clayton"

    def __post_init__(self):
        _check_dim(self.dim)
        if not 0.0 < self.theta < np.inf:
            raise DomainError(f"Clayton theta must lie in (0, inf), got {self.theta}")

    @property
    def d(self) -> int:
        return self.dim

    def _draw(self, n, rng):
        v = rng.gamma(1.0 / self.theta, 1.0, n)
        e = rng.standard_exponential((n, self.dim))
        return np.exp(-np.log1p(e / v[:, None]) / self.theta)

    def to_dict(self):
        return {"kind": self.kind, "theta": self.theta, "dim": self.dim}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["theta"]), int(d.get("dim", 2)))


@dataclass(frozen=True)
class GumbelCopula(Copula):
    theta: float
    dim: int = 2
    kind: ClassVar[str] = "gumbel"

    def __post_init__(self):
        _check_dim(self.dim)
        if not 1.0 <= self.theta < np.inf:
            raise DomainError(f"Gumbel theta must lie in [1, inf), got {self.theta}")

    @property
    def d(self) -> int:
        return self.dim

    def _draw(self, n, rng):
        if self.theta == 1.0:
            return rng.random((n, self.dim))
        s = PositiveStable(1.0 / self.theta).sample(n, rng)
        e = rng.standard_exponential((n, self.dim))
        with np.errstate(divide="ignore", over="ignore"):
            return np.exp(-((e / s[:, None]) ** (1.0 / self.theta)))

    def to_dict(self):
        return {"kind": self.kind, "theta": self.theta, "dim": self.dim}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["theta"]), int(d.get("dim", 2)))


@dataclass(frozen=True)
class FrankCopula(Copula):
    """Standard Frank family, generator -log((exp(-theta t) - 1)/(exp(-theta) - 1))."""

    theta: float
    dim: int = 2
    kind: ClassVar[str] = "frank"

    def __post_init__(self):
        _check_dim(self.dim)
        if not 0.0 <= self.theta < np.inf:
            raise DomainError(f"Frank theta must lie in [0, inf), got {self.theta}")

    @property
    def d(self) -> int:
        return self.dim

    def _draw(self, n, rng):
        if self.theta < 1e-10:
            return rng.random((n, self.dim))
        v = rng.logseries(-np.expm1(-self.theta), n).astype(float)
        e = rng.standard_exponential((n, self.dim))
        return -np.log1p(np.expm1(-self.theta) * np.exp(-e / v[:, None])) / self.theta

    def to_dict(self):
        return {"kind": self.kind, "theta": self.theta, "dim": self.dim}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["theta"]), int(d.get("dim", 2)))


def copula_sample(spec: Copula, n: int, seed: SeedLike = None) -> np.ndarray:
    """Draw an (n, d) matrix of uniforms from ``spec``."""
    return spec.sample(n, seed)


def archimedean_cdf(spec: Copula, u) -> Any:
    """Closed-form C(u) for Clayton, Gumbel, Frank and independence.

    ``u`` is a length-d vector or an (n, d) matrix of points in (0, 1]^d.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 0 or u.shape[-1] != spec.d:
        raise DomainError(f"expected points of dimension {spec.d}, got shape {u.shape}")
    if np.any(~(u > 0.0)) or np.any(u > 1.0):
        raise DomainError("copula arguments must lie in (0, 1]")
    if isinstance(spec, IndependenceCopula):
        out = np.prod(u, axis=-1)
    elif isinstance(spec, ClaytonCopula):
        out = (np.sum(u ** (-spec.theta), axis=-1) - spec.d + 1.0) ** (-1.0 / spec.theta)
    elif isinstance(spec, GumbelCopula):
        out = np.exp(-np.sum((-np.log(u)) ** spec.theta, axis=-1) ** (1.0 / spec.theta))
    elif isinstance(spec, FrankCopula):
        th = spec.theta
        if th < 1e-10:
            out = np.prod(u, axis=-1)
        else:
            num = np.prod(np.expm1(-th * u), axis=-1)
            out = -np.log1p(num / np.expm1(-th) ** (spec.d - 1)) / th
    else:
        raise DomainError(f"no closed-form CDF for copula kind {spec.kind!r}")
    return float(out) if np.ndim(out) == 0 else out
