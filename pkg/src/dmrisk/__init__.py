"""Worst-case AV@R of an aggregate loss under Distorted Mix copula uncertainty."""
from dmrisk.copulas import (
    ClaytonCopula,
    FrankCopula,
    GaussianCopula,
    GroupedTCopula,
    GumbelCopula,
    IndependenceCopula,
    TCopula,
)
from dmrisk.distributions import GPD, CompoundMarginal, InverseGaussian, Lognormal, NegBinomial, SplicedMarginal
from dmrisk.dm import Aggregation, DistortionSet, DMSpec, GammaMatrix, component_losses, dm_sample
from dmrisk.errors import DMRiskError, DomainError, InputError, NumericError
from dmrisk.kernels import BACKEND
from dmrisk.sa import SAConfig, empirical_var_avar, fit_component_densities, sa_solve, select_copulas
from dmrisk.saa import SAAConfig, saa_search

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Aggregation",
    "ClaytonCopula",
    "CompoundMarginal",
    "DMRiskError",
    "DMSpec",
    "DistortionSet",
    "DomainError",
    "FrankCopula",
    "GPD",
    "GammaMatrix",
    "GaussianCopula",
    "GroupedTCopula",
    "GumbelCopula",
    "IndependenceCopula",
    "InputError",
    "InverseGaussian",
    "Lognormal",
    "NegBinomial",
    "NumericError",
    "SAAConfig",
    "SAConfig",
    "SplicedMarginal",
    "TCopula",
    "component_losses",
    "dm_sample",
    "empirical_var_avar",
    "fit_component_densities",
    "sa_solve",
    "saa_search",
    "select_copulas",
]
