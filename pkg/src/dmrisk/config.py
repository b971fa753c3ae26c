"""Run configuration: TOML (or JSON) validated into pydantic models.

Every section rejects unknown keys. The problem section either names a
shipped fixture or spells out the model with the same dictionaries that
``DMSpec.to_dict`` produces.
"""
from __future__ import annotations

import hashlib
import json
import re
import sys
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from dmrisk.dm import DMSpec
from dmrisk.errors import DomainError, InputError

__all__ = [
    "ProblemConfig",
    "SASection",
    "SAASection",
    "ISSection",
    "BenchmarkSection",
    "CalibrateSection",
    "RunConfig",
    "load_config",
    "parse_config",
]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ProblemConfig(_Strict):
    fixture: Optional[Literal["example1", "finance", "cyber"]] = None
    fixture_options: dict[str, Any] = Field(default_factory=dict)
    p: float = Field(0.95, gt=0.0, lt=1.0)
    distortions: Optional[dict[str, Any]] = None
    central: Optional[dict[str, Any]] = None
    candidates: Optional[list[dict[str, Any]]] = None
    marginals: Optional[list[dict[str, Any]]] = None
    aggregation: Optional[dict[str, Any]] = None

    @model_validator(mode="after")
    def _one_source(self):
        explicit = [self.distortions, self.central, self.candidates, self.marginals]
        if self.fixture is None and any(x is None for x in explicit):
            raise ValueError("give either a fixture name or distortions, central, candidates and marginals")
        if self.fixture is not None and any(x is not None for x in explicit):
            raise ValueError("a fixture cannot be combined with an explicit model")
        return self

    def build(self) -> DMSpec:
        if self.fixture is not None:
            from dmrisk.fixtures import build_spec

            try:
                return build_spec(self.fixture, **self.fixture_options)
            except TypeError as exc:
                raise DomainError(f"bad fixture_options for {self.fixture}: {exc}") from None
        blob = {
            "distortions": self.distortions,
            "central": self.central,
            "candidates": self.candidates,
            "marginals": self.marginals,
            "aggregation": self.aggregation or {},
        }
        try:
            return DMSpec.from_dict(blob)
        except (KeyError, TypeError) as exc:
            raise DomainError(f"incomplete model description: {exc}") from None


class SASection(_Strict):
    a: float = Field(0.6, gt=0.5, le=1.0)
    n_per_iter: int = Field(100_000, ge=2)
    t_min: int = Field(10, ge=1)
    t_max: int = Field(50, ge=1)
    threshold: float = Field(0.01, gt=0.0)
    density_samples: int = Field(1_000_000, ge=100)
    grid: int = Field(1000, ge=16)
    gamma_init: Optional[list[list[float]]] = None  # K x m, uniform when omitted


class SAASection(_Strict):
    samples: int = Field(1_000_000, ge=1)
    h: float = Field(0.1, gt=0.0, le=1.0)
    k_star: int = Field(2, ge=1)
    rounds: int = Field(0, ge=0)
    eps: Optional[float] = Field(None, gt=0.0)
    max_grid: int = Field(250_000, ge=1)


class ISSection(_Strict):
    tilts: list[float] = Field(default_factory=list)
    shift: list[float] = Field(default_factory=list)
    samples: int = Field(100_000, ge=2)
    density_samples: int = Field(1_000_000, ge=100)


class BenchmarkSection(_Strict):
    copula: str = "central"  # "central" or a 1-based candidate number
    samples: int = Field(1_000_000, ge=2)

    @model_validator(mode="after")
    def _copula_name(self):
        if self.copula != "central" and not self.copula.isdigit():
            raise ValueError("benchmark copula must be 'central' or a candidate number")
        return self


class CalibrateSection(_Strict):
    kind: Literal["spliced", "compound", "inverse_gaussian"]
    data: str
    horizon: int = Field(10, ge=1)
    p_l: float = Field(0.1, gt=0.0, lt=1.0)
    p_u: float = Field(0.1, gt=0.0, lt=1.0)
    cuts: tuple[float, float] = (0.04, 0.08)
    zero_seed: int = 0


class RunConfig(_Strict):
    seed: int = Field(0, ge=0, lt=2**64)
    threads: int = Field(1, ge=1)
    output: str = "out"
    problem: Optional[ProblemConfig] = None
    sa: SASection = Field(default_factory=SASection)
    saa: SAASection = Field(default_factory=SAASection)
    is_: Optional[ISSection] = Field(None, alias="is")
    benchmark: Optional[BenchmarkSection] = None
    calibrate: Optional[CalibrateSection] = None

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    @model_validator(mode="after")
    def _sa_range(self):
        if self.sa.t_min > self.sa.t_max:
            raise ValueError("sa.t_min must not exceed sa.t_max")
        return self

    def config_hash(self) -> str:
        blob = json.dumps(self.model_dump(by_alias=True, exclude={"output", "threads"}), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_overrides(self, seed=None, threads=None, out=None, samples=None) -> "RunConfig":
        """Apply command-line overrides; ``samples`` sets every Monte Carlo sample size."""
        data = self.model_dump(by_alias=True)
        if seed is not None:
            data["seed"] = seed
        if threads is not None:
            data["threads"] = threads
        if out is not None:
            data["output"] = str(out)
        if samples is not None:
            data["sa"]["n_per_iter"] = samples
            data["sa"]["density_samples"] = samples
            data["saa"]["samples"] = samples
            if data.get("benchmark") is not None:
                data["benchmark"]["samples"] = samples
            if data.get("is") is not None:
                data["is"]["samples"] = samples
                data["is"]["density_samples"] = samples
        return parse_config(data)


def _location(exc: Exception, text: str):
    """Best-effort (line, column) for TOML and JSON parse errors."""
    line = getattr(exc, "lineno", None)
    col = getattr(exc, "colno", None)
    if line is None:
        msg = str(exc)
        m = re.search(r"line (\d+), column (\d+)", msg)
        if m:
            line, col = int(m.group(1)), int(m.group(2))
    return line, col


def _format_validation(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def parse_config(data: dict, path=None) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise InputError(f"invalid configuration: {_format_validation(exc)}", path) from None


def load_config(path) -> RunConfig:
    """Read TOML, or JSON when the file ends in .json or starts with '{'."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read configuration: {exc.strerror}", path) from None
    is_json = path.suffix.lower() == ".json" or text.lstrip().startswith("{")
    try:
        data = json.loads(text) if is_json else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        line, col = _location(exc, text)
        raise InputError(f"parse error: {exc}", path, line, col) from None
    return parse_config(data, path)
