"""
Pydantic Models for experiments, estimates and reports
"""
import math
from enum import Enum
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ChainKind(str, Enum):
    """Markov chains with an exact stationary solver"""
    BALL_REPLACEMENT = "ball_replacement"
    EDGE_RECONNECT = "edge_reconnect"


class ExperimentName(str, Enum):
    """Named verification experiments"""
    EXACT_SMALL = "exact-small"
    DEGREE_GAMMA = "degree-gamma"
    EDGE_POISSON = "edge-poisson"
    DENSITY_CONVERGENCE = "density-convergence"
    SPAG_CHECK = "spag-check"
    UI_DIAGNOSTIC = "ui-diagnostic"
    MOMENT_IDENTITY = "moment-identity"
    CONFIG_MODEL = "config-model"
    GRAPHON_CONSISTENCY = "graphon-consistency"


class OutputFormat(str, Enum):
    """Report file formats"""
    JSON = "json"
    CSV = "csv"


class DensityEstimate(BaseModel):
    """Monte Carlo estimate with its standard error"""
    model_config = ConfigDict(frozen=True)

    mean: float = Field(..., description="Estimated probability")
    stderr: float = Field(..., ge=0, description="Standard error of the mean")
    samples: int = Field(..., ge=1, description="Number of i.i.d. samples")

    @classmethod
    def from_indicators(cls, values: Any) -> "DensityEstimate":
        """Plug-in mean and standard error of an i.i.d. sample"""
        values = np.asarray(values, dtype=float)
        size = values.size
        mean = float(values.mean())
        stderr = float(values.std(ddof=1) / math.sqrt(size)) if size > 1 else 0.0
        return cls(mean=mean, stderr=stderr, samples=size)

    @classmethod
    def pool(cls, estimates: Sequence["DensityEstimate"]) -> "DensityEstimate":
        """Merge estimates over disjoint sample sets (order independent)"""
        total = sum(e.samples for e in estimates)
        mean = sum(e.mean * e.samples for e in estimates) / total
        if total <= 1:
            return cls(mean=mean, stderr=0.0, samples=total)
        # rebuild the pooled sum of squares from each part's sample variance
        squares = 0.0
        for e in estimates:
            part_variance = e.stderr**2 * e.samples
            squares += (e.samples - 1) * part_variance + e.samples * (e.mean - mean) ** 2
        variance = squares / (total - 1)
        return cls(mean=mean, stderr=math.sqrt(max(variance, 0.0) / total), samples=total)


class GofReport(BaseModel):
    """Outcome of a goodness-of-fit test"""
    statistic: float = Field(..., description="Test statistic")
    p_value: float = Field(..., ge=0, le=1, description="Upper-tail p-value")
    dof: int = Field(..., ge=1, description="Degrees of freedom")
    bins: List[Tuple[int, Optional[int]]] = Field(
        default=[], description="Merged bins as [low, high] value ranges; high None means open tail"
    )
    sample_size: int = Field(..., ge=0, description="Number of observations")

    def passes(self, floor: float) -> bool:
        return self.p_value > floor


class PoissonGammaSpec(BaseModel):
    """Serialized Poisson-Gamma limit multigraphon"""
    type: Literal["poisson_gamma"] = "poisson_gamma"
    kappa: float = Field(..., gt=0, description="Gamma shape parameter")
    rho: float = Field(..., gt=0, description="Edge density")


class EmpiricalSpec(BaseModel):
    """Serialized edge-stationary multigraphon built from a degree CDF"""
    type: Literal["empirical"] = "empirical"
    rho: float = Field(..., gt=0, description="Edge density rho(W)")
    cdf_grid: List[Tuple[float, float]] = Field(..., min_length=1, description="Step CDF as [z, F(z)] pairs")


MultigraphonSpec = Annotated[Union[PoissonGammaSpec, EmpiricalSpec], Field(discriminator="type")]


class ExperimentConfig(BaseModel):
    """Configuration of one experiment run"""
    experiment: ExperimentName = Field(..., description="Experiment to run")
    n: int = Field(..., ge=1, description="Vertex count")
    m: Optional[int] = Field(None, ge=1, description="Edge count")
    rho: Optional[float] = Field(None, gt=0, description="Edge density; m = floor(rho n^2 / 2)")
    kappa: float = Field(default=1.0, gt=0, description="Preferential attachment parameter")
    seed: int = Field(default=0, ge=0, lt=2**64, description="Master seed")
    samples: Optional[int] = Field(None, ge=1, description="Monte Carlo sample budget")
    replicas: int = Field(default=10, ge=1, description="Seed replicas for statistical experiments")
    sizes: Optional[List[int]] = Field(None, description="Vertex counts for an n-sweep")
    out: Optional[Path] = Field(None, description="Report path; stdout when missing")
    format: OutputFormat = Field(default=OutputFormat.JSON, description="Report format")

    @field_validator("sizes", mode="before")
    @classmethod
    def _split_sizes(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [int(part) for part in value.replace(" ", "").split(",") if part]
        return value

    @model_validator(mode="after")
    def _check_size(self) -> "ExperimentConfig":
        if self.m is not None and self.rho is not None:
            raise ValueError("give exactly one of m and rho")
        if self.m is None and self.rho is None:
            raise ValueError("one of m and rho is required")
        if self.experiment == ExperimentName.EXACT_SMALL and self.m is None:
            raise ValueError("exact-small needs an explicit m")
        if self.sizes is not None and any(size < 1 for size in self.sizes):
            raise ValueError("sizes must be positive")
        if self.edge_count_for(self.n) < 1:
            raise ValueError("rho n^2 / 2 must be at least 1")
        return self

    def edge_count_for(self, n: int) -> int:
        """m for a given n: the explicit m, else floor(rho n^2 / 2)"""
        if self.m is not None:
            return self.m
        return int(math.floor(self.rho * n * n / 2))

    @property
    def edge_count(self) -> int:
        return self.edge_count_for(self.n)

    def density_for(self, n: int) -> float:
        """rho for a given n: the explicit rho, else 2m / n^2"""
        if self.rho is not None:
            return self.rho
        return 2.0 * self.m / (n * n)

    @property
    def density(self) -> float:
        return self.density_for(self.n)

    @property
    def sweep(self) -> List[int]:
        return list(self.sizes) if self.sizes else [self.n]


class ReportRow(BaseModel):
    """One tidy observation: experiment, n, statistic, value"""
    experiment: str
    n: int
    statistic: str
    value: float


class CheckResult(BaseModel):
    """A pass/fail assertion inside an experiment"""
    name: str = Field(..., description="Assertion name")
    passed: bool = Field(..., description="Whether the assertion holds")
    detail: str = Field(default="", description="Observed values behind the verdict")


class ExperimentReport(BaseModel):
    """Deterministic report of one experiment"""
    experiment: str = Field(..., description="Experiment name")
    provenance: Dict[str, Any] = Field(default={}, description="Merged configuration that produced the report")
    rows: List[ReportRow] = Field(default=[], description="Plot-ready observations")
    checks: List[CheckResult] = Field(default=[], description="Assertions evaluated by the experiment")

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)


class DensityOutput(BaseModel):
    """JSON printed by the density subcommand"""
    pattern: str
    mean: float
    stderr: float
    samples: int
