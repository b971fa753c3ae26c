"""Shipped parameter sets for the worked example and the two case studies.

Matrices are read from CSV files under ``dmrisk/data``. They are printed to
four decimals, so a few are not exactly positive semidefinite or symmetric;
``load_correlation`` symmetrises from the upper triangle and the copula
constructors repair small negative eigenvalues.
"""
from __future__ import annotations

import csv
import json
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy import special

from dmrisk.copulas import (
    ClaytonCopula,
    FrankCopula,
    GaussianCopula,
    GroupedTCopula,
    GumbelCopula,
    IndependenceCopula,
    TCopula,
    repair_correlation,
    symmetrize_upper,
)
from dmrisk.distributions import GPD, CompoundMarginal, InverseGaussian, Lognormal, NegBinomial, SplicedMarginal
from dmrisk.dm import Aggregation, DistortionSet, DMSpec, GammaMatrix
from dmrisk.errors import DomainError

__all__ = [
    "FIXTURE_VERSION",
    "load_matrix",
    "load_correlation",
    "example1_spec",
    "finance_spec",
    "finance_marginals",
    "cyber_spec",
    "cyber_marginals",
    "paper_gamma",
    "build_spec",
]

FIXTURE_VERSION = "1"

FINANCE_D = 3348
FINANCE_GROUPS = (0, 0, 0, 1, 1, 2, 2)


def _open(case: str, name: str):
    return resources.files("dmrisk").joinpath("data", case, name).open("r")


@lru_cache(maxsize=None)
def _matrix(case: str, name: str) -> tuple:
    with _open(case, name) as fh:
        rows = [[float(x) for x in r] for r in csv.reader(fh) if r]
    return tuple(tuple(r) for r in rows)


def load_matrix(case: str, name: str) -> np.ndarray:
    """Raw numeric CSV fixture, e.g. ``load_matrix("finance", "sigma_1.csv")``."""
    return np.array(_matrix(case, name))


def load_correlation(case: str, name: str) -> np.ndarray:
    """Correlation fixture symmetrised from its upper triangle."""
    return symmetrize_upper(load_matrix(case, name))


def _table(case: str, name: str) -> list[dict]:
    with _open(case, name) as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def _json(case: str, name: str) -> dict:
    with _open(case, name) as fh:
        return json.load(fh)


def paper_gamma(case: str) -> GammaMatrix:
    """Printed SA weights: example1 after 17 iterations, finance and cyber after 10."""
    name = {"example1": "gamma_17.csv", "finance": "gamma_10.csv", "cyber": "gamma_10.csv"}[case]
    g = load_matrix(case, name)
    # printed to four decimals; renormalise columns so they lie on the simplex
    return GammaMatrix(g / g.sum(axis=0, keepdims=True))


# worked example


def example1_spec(mu=(1.0, 1.0), lam=(0.5, 1.2), alpha: float = 0.1, rho: float = 0.7, nu: float = 1.0) -> DMSpec:
    """Two inverse Gaussian losses, Gaussian centre, five candidate tail copulas."""
    corr = np.array([[1.0, rho], [rho, 1.0]])
    candidates = (
        TCopula(nu, corr),
        ClaytonCopula(0.7565),
        GumbelCopula(1.7095),
        FrankCopula(1.2),
        IndependenceCopula(2),
    )
    return DMSpec(
        DistortionSet.example1(alpha),
        GaussianCopula(corr),
        candidates,
        tuple(InverseGaussian(m, l) for m, l in zip(mu, lam)),
        Aggregation("sum"),
    )


# finance case study


def _synthetic_centre(x_l: float, x_u: float, p_l: float, p_u: float, n: int) -> np.ndarray:
    """Evenly spaced quantiles of a normal law with x_l, x_u at levels p_l, 1 - p_u."""
    z_l, z_u = special.ndtri(p_l), special.ndtri(1.0 - p_u)
    scale = (x_u - x_l) / (z_u - z_l)
    loc = x_l - scale * z_l
    levels = np.linspace(p_l, 1.0 - p_u, n)
    out = loc + scale * special.ndtri(levels)
    out[0], out[-1] = x_l, x_u
    return out


def finance_marginals(p_l: float = 0.1, p_u: float = 0.1) -> tuple:
    """Spliced marginals from the printed GPD fits.

    The raw index prices are not bundled, so the central empirical part is
    replaced by normal quantiles through the two boundaries, one knot per
    central observation.
    """
    n = int(round(FINANCE_D * (1.0 - p_l - p_u))) + 1
    out = []
    for row in _table("finance", "table1_gpd.csv"):
        out.append(
            SplicedMarginal(
                p_l,
                p_u,
                row["x_l"],
                row["x_u"],
                GPD(row["xi_l"], row["scale_l"]),
                GPD(row["xi_u"], row["scale_u"]),
                _synthetic_centre(row["x_l"], row["x_u"], p_l, p_u, n),
            )
        )
    return tuple(out)


def _grouped_corr(entry: dict) -> np.ndarray:
    """Within-group blocks as printed, cross-group entries from the matching t fit."""
    base = load_correlation("finance", entry["cross_from"]).copy()
    labels = np.asarray(FINANCE_GROUPS)
    for g, block in enumerate(entry["blocks"]):
        idx = np.flatnonzero(labels == g)
        base[np.ix_(idx, idx)] = np.asarray(block, dtype=float)
    w = np.linalg.eigvalsh(base)
    return base if w.min() >= 0 else repair_correlation(base)


def finance_candidates() -> tuple:
    meta = _json("finance", "grouped_t.json")
    nu = meta["t_nu"]
    gt = meta["copulas"]

    def grouped(name):
        return GroupedTCopula(tuple(gt[name]["nu"]), FINANCE_GROUPS, _grouped_corr(gt[name]))

    c = load_correlation
    return (
        GaussianCopula(c("finance", "sigma_1.csv")),
        GaussianCopula(c("finance", "sigma_2.csv")),
        TCopula(nu["C3"], c("finance", "p_t1.csv")),
        TCopula(nu["C4"], c("finance", "p_t2.csv")),
        TCopula(nu["C5"], c("finance", "p_t3.csv")),
        grouped("C6"),
        grouped("C7"),
        grouped("C8"),
        GaussianCopula(c("finance", "sigma_3.csv")),
        GaussianCopula(c("finance", "sigma_4.csv")),
        TCopula(nu["C11"], c("finance", "p_t1e.csv")),
        TCopula(nu["C12"], c("finance", "p_t2e.csv")),
        TCopula(nu["C13"], c("finance", "p_t3e.csv")),
        grouped("C14"),
        grouped("C15"),
        grouped("C16"),
    )


FINANCE_AGGREGATION = Aggregation("sum_shifted", shift=1.0)


def finance_spec(tail: float = 0.04) -> DMSpec:
    """Seven spliced index losses, Gaussian centre, sixteen candidates on two tail slots."""
    return DMSpec(
        DistortionSet.piecewise((tail, tail), 7),
        GaussianCopula(load_correlation("finance", "sigma_central.csv")),
        finance_candidates(),
        finance_marginals(),
        FINANCE_AGGREGATION,
    )


# cyber case study


def cyber_marginals(table_size: int = 1_000_000, table_seed: int = 0) -> tuple:
    """Compound negative binomial / lognormal losses in millions (via the aggregation scale)."""
    return tuple(
        CompoundMarginal(
            NegBinomial(row["r"], row["p"]),
            Lognormal(row["mu"], row["sigma"]),
            table_size=table_size,
            table_seed=table_seed + k,
        )
        for k, row in enumerate(_table("cyber", "table2_marginals.csv"))
    )


CYBER_AGGREGATION = Aggregation("sum", scale=1e-6)


def cyber_candidates() -> tuple:
    meta = _json("cyber", "copulas.json")
    s1 = load_correlation("cyber", "sigma_1.csv")
    s2 = load_correlation("cyber", "sigma_2.csv")
    return (
        GaussianCopula(s1),
        GaussianCopula(s2),
        TCopula(meta["t_nu"]["C3"], load_correlation("cyber", "p_1.csv")),
        TCopula(meta["t_nu"]["C4"], s2),
        GumbelCopula(meta["gumbel_theta"]["C5"], 5),
        GumbelCopula(meta["gumbel_theta"]["C6"], 5),
    )


def cyber_spec(table_size: int = 1_000_000, tail: float = 0.04) -> DMSpec:
    """Five breach types, Gaussian centre, six candidates (the two vine copulas are left out)."""
    return DMSpec(
        DistortionSet.piecewise((tail, tail), 5),
        GaussianCopula(load_correlation("cyber", "sigma_1.csv")),
        cyber_candidates(),
        cyber_marginals(table_size),
        CYBER_AGGREGATION,
    )


_BUILDERS = {
    "example1": example1_spec,
    "finance": finance_spec,
    "cyber": cyber_spec,
}


def build_spec(name: str, **kwargs) -> DMSpec:
    if name not in _BUILDERS:
        raise DomainError(f"unknown fixture {name!r}; choose from {sorted(_BUILDERS)}")
    return _BUILDERS[name](**kwargs)
