"""Distorted Mix copulas: distortions, the factor sampler and component banks.

A DM copula mixes m + 1 copulas, each composed with distortions:

    C(u) = sum_i alpha_i C_i(D_i1(u_1), ..., D_id(u_d)),   sum_i alpha_i D_ik(v) = v.

Slot 0 holds the central copula C_0. Every tail slot i >= 1 holds a mixture
of candidates sum_j gamma^i_j C_j, and the K x m matrix gamma is the decision
variable of the worst-case problem.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from dmrisk._rng import SeedLike, as_generator, open_unit, seed_sequence
from dmrisk.copulas import Copula, copula_from_dict
from dmrisk.distributions import Distribution, distribution_from_dict
from dmrisk.errors import DomainError

__all__ = [
    "DistortionSet",
    "Aggregation",
    "DMSpec",
    "GammaMatrix",
    "ComponentSampleBank",
    "distortion_eval",
    "dm_sample",
    "single_copula_losses",
    "component_losses",
    "aggregate",
    "mixture_cdf",
    "save_bank",
    "load_bank",
]

_BISECT_TOL = 1e-12


def _bisect_inverse(fn: Callable[[np.ndarray], np.ndarray], v: np.ndarray) -> np.ndarray:
    """Invert a nondecreasing map of [0, 1] onto itself by bisection."""
    lo = np.zeros_like(v)
    hi = np.ones_like(v)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = fn(mid) < v
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.max(hi - lo, initial=0.0) < _BISECT_TOL:
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class DistortionSet:
    """Weights alpha_0..alpha_m with one distortion per slot, shared by all coordinates.

    ``family`` is one of

    * ``"example1"``  - the rational pair D_1, D_2 with alpha_1 = alpha_2 = ``alpha``
      and D_0 defined residually; weights are (1 - 2 alpha, alpha, alpha)
    * ``"piecewise"`` - stacked linear pieces, slot i maps [a_i, a_i + alpha_i] onto [0, 1]
    * ``"identity"``  - D_i(v) = v for every slot
    """

    family: str
    weights: tuple
    dim: int = 2

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        if self.family not in ("example1", "piecewise", "identity"):
            raise DomainError(f"unknown distortion family {self.family!r}")
        if self.dim < 2:
            raise DomainError(f"dimension must be >= 2, got {self.dim}")
        if len(w) < 1 or any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-12:
            raise DomainError(f"weights must be nonnegative and sum to 1, got {w}")
        if self.family == "example1":
            if len(w) != 3 or w[1] != w[2] or not 0 < w[1] < 0.5:
                raise DomainError("example1 distortions need weights (1 - 2a, a, a) with 0 < a < 1/2")
        if self.family == "piecewise" and any(x <= 0 for x in w):
            raise DomainError("piecewise distortions need strictly positive weights")

    @classmethod
    def example1(cls, alpha: float = 0.1, dim: int = 2) -> "DistortionSet":
        return cls("example1", (1.0 - 2.0 * alpha, alpha, alpha), dim)

    @classmethod
    def piecewise(cls, tail_weights: Sequence[float], dim: int) -> "DistortionSet":
        tw = [float(a) for a in tail_weights]
        return cls("piecewise", (1.0 - sum(tw), *tw), dim)

    @property
    def alpha(self) -> np.ndarray:
        return np.asarray(self.weights)

    @property
    def m(self) -> int:
        return len(self.weights) - 1

    def _check_slot(self, i: int) -> None:
        if not 0 <= i <= self.m:
            raise DomainError(f"distortion slot must lie in 0..{self.m}, got {i}")

    def forward(self, i: int, v) -> np.ndarray:
        self._check_slot(i)
        v = np.clip(np.asarray(v, dtype=float), 0.0, 1.0)
        if self.family == "identity":
            return v.copy()
        if self.family == "piecewise":
            a = sum(self.weights[:i])
            return np.clip((v - a) / self.weights[i], 0.0, 1.0)
        a = self.weights[1]
        if i == 1:
            return (v - a * v * v) / (a + (1.0 - 2.0 * a) * v)
        if i == 2:
            return a * v * v / (a + (1.0 - 2.0 * a) * (1.0 - v))
        d1 = (v - a * v * v) / (a + (1.0 - 2.0 * a) * v)
        d2 = a * v * v / (a + (1.0 - 2.0 * a) * (1.0 - v))
        return (v - a * d1 - a * d2) / (1.0 - 2.0 * a)

    def inverse(self, i: int, v) -> np.ndarray:
        """D_i^{-1}(v); on a flat piece the left end of the preimage is returned."""
        self._check_slot(i)
        v = np.clip(np.asarray(v, dtype=float), 0.0, 1.0)
        if self.family == "identity":
            return v.copy()
        if self.family == "piecewise":
            a = sum(self.weights[:i])
            return np.where(v <= 0.0, 0.0, a + self.weights[i] * v)
        a = self.weights[1]
        b = 1.0 - 2.0 * a
        if i == 1:
            s = 1.0 - v * b
            return np.clip((s - np.sqrt(np.maximum(s * s - 4.0 * a * a * v, 0.0))) / (2.0 * a), 0.0, 1.0)
        if i == 2:
            return np.clip((-v * b + np.sqrt(v * v * b * b + 4.0 * a * v * (1.0 - a))) / (2.0 * a), 0.0, 1.0)
        return _bisect_inverse(lambda x: self.forward(0, x), v)

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "weights": list(self.weights), "dim": self.dim}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DistortionSet":
        return cls(d["family"], tuple(d["weights"]), int(d.get("dim", 2)))


def distortion_eval(dset: DistortionSet, i: int, k: int, v, inverse: bool = False):
    """D_ik(v) or its inverse. Coordinates share distortions, so ``k`` is only range-checked."""
    if not 0 <= k < dset.dim:
        raise DomainError(f"coordinate index must lie in 0..{dset.dim - 1}, got {k}")
    arr = np.asarray(v, dtype=float)
    if np.any((arr < 0.0) | (arr > 1.0)):
        raise DomainError("distortion arguments must lie in [0, 1]")
    out = dset.inverse(i, arr) if inverse else dset.forward(i, arr)
    return float(out) if np.ndim(v) == 0 else out


@dataclass(frozen=True)
class Aggregation:
    """Aggregate loss map Psi.

    ``sum``            scale * sum x_k
    ``sum_shifted``    scale * sum (x_k + shift)
    ``excess_of_loss`` scale * sum (x_k - k_k)^+
    """

    kind: str = "sum"
    shift: float = 0.0
    retentions: tuple = ()
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("sum", "sum_shifted", "excess_of_loss"):
            raise DomainError(f"unknown aggregation {self.kind!r}")
        object.__setattr__(self, "retentions", tuple(float(r) for r in self.retentions))
        if not self.scale > 0:
            raise DomainError(f"scale must be positive, got {self.scale}")

    def __call__(self, x) -> Any:
        return aggregate(self, x)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "shift": self.shift, "retentions": list(self.retentions), "scale": self.scale}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Aggregation":
        return cls(d.get("kind", "sum"), float(d.get("shift", 0.0)), tuple(d.get("retentions", ())), float(d.get("scale", 1.0)))


def aggregate(agg: Aggregation, x):
    """Apply Psi row-wise to an (n, d) matrix, or to a single length-d vector."""
    x = np.asarray(x, dtype=float)
    if agg.kind == "sum":
        out = x.sum(axis=-1)
    elif agg.kind == "sum_shifted":
        out = (x + agg.shift).sum(axis=-1)
    else:
        k = np.asarray(agg.retentions)
        if k.size != x.shape[-1]:
            raise DomainError(f"need {x.shape[-1]} retentions, got {k.size}")
        out = np.maximum(x - k, 0.0).sum(axis=-1)
    out = agg.scale * out
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class DMSpec:
    distortions: DistortionSet
    central: Copula
    candidates: tuple
    marginals: tuple
    aggregation: Aggregation = field(default_factory=Aggregation)

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        object.__setattr__(self, "marginals", tuple(self.marginals))
        d = self.distortions.dim
        if not self.candidates:
            raise DomainError("need at least one candidate copula")
        for c in (self.central, *self.candidates):
            if c.d != d:
                raise DomainError(f"copula {c!r} has dimension {c.d}, expected {d}")
        if len(self.marginals) != d:
            raise DomainError(f"need {d} marginals, got {len(self.marginals)}")

    @property
    def d(self) -> int:
        return self.distortions.dim

    @property
    def m(self) -> int:
        return self.distortions.m

    @property
    def K(self) -> int:
        return len(self.candidates)

    @property
    def alpha(self) -> np.ndarray:
        return self.distortions.alpha

    def to_dict(self) -> dict[str, Any]:
        return {
            "distortions": self.distortions.to_dict(),
            "central": self.central.to_dict(),
            "candidates": [c.to_dict() for c in self.candidates],
            "marginals": [f.to_dict() for f in self.marginals],
            "aggregation": self.aggregation.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DMSpec":
        return cls(
            DistortionSet.from_dict(d["distortions"]),
            copula_from_dict(d["central"]),
            tuple(copula_from_dict(c) for c in d["candidates"]),
            tuple(distribution_from_dict(f) for f in d["marginals"]),
            Aggregation.from_dict(d.get("aggregation", {})),
        )

    def spec_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=float).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class GammaMatrix:
    """K x m weights; column i is the candidate mixture of tail slot i."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.size == 0:
            raise DomainError(f"gamma must be a nonempty K x m matrix, got shape {v.shape}")
        if np.any(~np.isfinite(v)) or np.any(v < 0):
            raise DomainError("gamma entries must be finite and nonnegative")
        if np.max(np.abs(v.sum(axis=0) - 1.0)) > 1e-12:
            raise DomainError(f"gamma columns must sum to 1, got {v.sum(axis=0)}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def uniform(cls, K: int, m: int) -> "GammaMatrix":
        return cls(np.full((K, m), 1.0 / K))

    @classmethod
    def vertex(cls, js: Sequence[int], K: int) -> "GammaMatrix":
        """Column i puts all mass on candidate js[i]."""
        v = np.zeros((K, len(js)))
        v[list(js), range(len(js))] = 1.0
        return cls(v)

    @property
    def K(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def weights(self, alpha) -> np.ndarray:
        """Mixture weights alpha_i gamma^i_j as an m x K matrix."""
        alpha = np.asarray(alpha, dtype=float)
        return alpha[1:, None] * self.values.T


def _transform(spec: DMSpec, slot: int, v: np.ndarray, marginals) -> np.ndarray:
    x = np.empty_like(v)
    u = open_unit(spec.distortions.inverse(slot, v))
    for k, f in enumerate(marginals):
        x[:, k] = f.ppf(u[:, k])
    return x


def _check_gamma(spec: DMSpec, gamma: GammaMatrix) -> None:
    if gamma.K != spec.K or gamma.m != spec.m:
        raise DomainError(f"gamma has shape {gamma.values.shape}, spec needs ({spec.K}, {spec.m})")


def dm_sample(
    spec: DMSpec,
    gamma: GammaMatrix,
    n: int,
    seed: SeedLike = None,
    *,
    central: Copula | None = None,
    central_sampler: Callable[[int, np.random.Generator], np.ndarray] | None = None,
    marginals: Sequence[Distribution] | None = None,
) -> np.ndarray:
    """Draw n joint loss vectors from the DM model with weights ``gamma``.

    Slot Z1 ~ alpha; for Z1 >= 1 the candidate Z2 ~ gamma^{Z1}; V comes from the
    selected copula and X_k = F_k^{-1}(D_{Z1}^{-1}(V_k)). The keyword overrides
    swap the central copula and the marginals, as importance sampling needs.
    """
    _check_gamma(spec, gamma)
    if n < 1:
        raise DomainError(f"sample size must be >= 1, got {n}")
    rng = as_generator(seed)
    marginals = spec.marginals if marginals is None else tuple(marginals)
    central = spec.central if central is None else central
    alpha = spec.alpha
    z1 = rng.choice(alpha.size, size=n, p=alpha)
    z2 = np.full(n, -1)
    for i in range(1, spec.m + 1):
        rows = np.flatnonzero(z1 == i)
        if rows.size:
            z2[rows] = rng.choice(spec.K, size=rows.size, p=gamma.values[:, i - 1])
    x = np.empty((n, spec.d))
    rows = np.flatnonzero(z1 == 0)
    if rows.size:
        v = central_sampler(rows.size, rng) if central_sampler else central.sample(rows.size, rng)
        x[rows] = _transform(spec, 0, v, marginals)
    for i in range(1, spec.m + 1):
        for j in range(spec.K):
            rows = np.flatnonzero((z1 == i) & (z2 == j))
            if rows.size:
                x[rows] = _transform(spec, i, spec.candidates[j].sample(rows.size, rng), marginals)
    return x


@dataclass(frozen=True, eq=False)
class ComponentSampleBank:
    """Draws of the aggregate loss for each mixture component.

    ``psi0`` holds N draws from G_0 and ``psi[i-1, j]`` N draws from G_ij.
    ``columns`` lists the candidate indices stored in the second axis.
    """

    psi0: np.ndarray
    psi: np.ndarray
    seed: Any = None
    columns: tuple = ()
    spec_hash: str = ""

    def __post_init__(self):
        psi0 = np.ascontiguousarray(self.psi0, dtype=float)
        psi = np.ascontiguousarray(self.psi, dtype=float)
        if psi.ndim != 3 or psi.shape[2] != psi0.size:
            raise DomainError(f"bank arrays disagree: psi0 {psi0.shape}, psi {psi.shape}")
        object.__setattr__(self, "psi0", psi0)
        object.__setattr__(self, "psi", psi)
        cols = tuple(int(c) for c in self.columns) or tuple(range(psi.shape[1]))
        if len(cols) != psi.shape[1]:
            raise DomainError("columns do not match the stored candidates")
        object.__setattr__(self, "columns", cols)

    @property
    def N(self) -> int:
        return self.psi0.size

    @property
    def m(self) -> int:
        return self.psi.shape[0]

    @property
    def K(self) -> int:
        return self.psi.shape[1]

    def restrict(self, columns: Sequence[int]) -> "ComponentSampleBank":
        """Keep only the listed candidates (given as original indices)."""
        pos = [self.columns.index(c) for c in columns]
        return ComponentSampleBank(self.psi0, self.psi[:, pos, :], self.seed, tuple(columns), self.spec_hash)

    def pooled(self, gamma: GammaMatrix, alpha, n: int, seed: SeedLike = None) -> np.ndarray:
        """Resample n draws from the gamma-weighted mixture of the stored arrays."""
        w = np.concatenate([[alpha[0]], gamma.weights(alpha).ravel()])
        rng = as_generator(seed)
        comp = rng.choice(w.size, size=n, p=w / w.sum())
        idx = rng.integers(0, self.N, size=n)
        flat = np.concatenate([self.psi0[None, :], self.psi.reshape(-1, self.N)])
        return flat[comp, idx]


def single_copula_losses(copula: Copula, marginals: Sequence[Distribution], agg: Aggregation, n: int, seed: SeedLike = None) -> np.ndarray:
    """Aggregate losses when one copula describes the whole dependence (no distortion)."""
    if n < 1:
        raise DomainError(f"sample size must be >= 1, got {n}")
    if copula.d != len(marginals):
        raise DomainError(f"copula has dimension {copula.d}, got {len(marginals)} marginals")
    v = copula.sample(n, as_generator(seed))
    x = np.column_stack([f.ppf(v[:, k]) for k, f in enumerate(marginals)])
    return aggregate(agg, x)


def component_losses(
    spec: DMSpec,
    N: int,
    seed: SeedLike = 0,
    columns: Sequence[int] | None = None,
    *,
    marginals: Sequence[Distribution] | None = None,
    central_sampler: Callable[[int, np.random.Generator], np.ndarray] | None = None,
) -> ComponentSampleBank:
    """Sample Psi^0 ~ G_0 and Psi^{ij} ~ G_ij, N draws each.

    Component streams are spawned from ``seed`` by position, so a bank built
    for a subset of ``columns`` reproduces the same arrays as the full bank.
    """
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    cols = tuple(range(spec.K)) if columns is None else tuple(int(c) for c in columns)
    if any(not 0 <= c < spec.K for c in cols):
        raise DomainError(f"columns must lie in 0..{spec.K - 1}")
    marginals = spec.marginals if marginals is None else tuple(marginals)
    ss = seed_sequence(seed)
    children = ss.spawn(1 + spec.m * spec.K)

    def draw(slot: int, cop_sample) -> np.ndarray:
        return aggregate(spec.aggregation, _transform(spec, slot, cop_sample, marginals))

    rng0 = np.random.default_rng(children[0])
    v0 = central_sampler(N, rng0) if central_sampler else spec.central.sample(N, rng0)
    psi0 = draw(0, v0)
    psi = np.empty((spec.m, len(cols), N))
    for i in range(1, spec.m + 1):
        for pos, j in enumerate(cols):
            rng = np.random.default_rng(children[1 + (i - 1) * spec.K + j])
            psi[i - 1, pos] = draw(i, spec.candidates[j].sample(N, rng))
    seed_repr = seed if isinstance(seed, (int, np.integer)) else None
    return ComponentSampleBank(psi0, psi, seed_repr, cols, spec.spec_hash())


def mixture_cdf(gamma: GammaMatrix, bank: ComponentSampleBank, alpha, s):
    """alpha_0 G0(s) + sum_ij alpha_i gamma^i_j Gij(s) from the empirical bank CDFs."""
    alpha = np.asarray(alpha, dtype=float)
    if gamma.K != bank.K or gamma.m != bank.m:
        raise DomainError("gamma and bank dimensions disagree")
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    n = bank.N
    out = alpha[0] * np.searchsorted(np.sort(bank.psi0), s_arr, side="right") / n
    w = gamma.weights(alpha)
    for i in range(bank.m):
        for j in range(bank.K):
            if w[i, j] > 0:
                out = out + w[i, j] * np.searchsorted(np.sort(bank.psi[i, j]), s_arr, side="right") / n
    return float(out[0]) if np.ndim(s) == 0 else out


def save_bank(bank: ComponentSampleBank, path) -> Path:
    """Write ``path.bin`` (little-endian float64, psi0 then psi) and ``path.json``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.concatenate([bank.psi0, bank.psi.ravel()]).astype("<f8")
    path.with_suffix(".bin").write_bytes(data.tobytes())
    meta = {
        "N": bank.N,
        "m": bank.m,
        "K": bank.K,
        "columns": list(bank.columns),
        "seed": bank.seed,
        "spec_hash": bank.spec_hash,
        "dtype": "<f8",
    }
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2))
    return path.with_suffix(".bin")


def load_bank(path) -> ComponentSampleBank:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    data = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype="<f8").astype(float)
    n, m, k = meta["N"], meta["m"], meta["K"]
    if data.size != n * (1 + m * k):
        raise DomainError(f"bank file has {data.size} values, sidecar implies {n * (1 + m * k)}")
    return ComponentSampleBank(data[:n], data[n:].reshape(m, k, n), meta["seed"], tuple(meta["columns"]), meta["spec_hash"])
