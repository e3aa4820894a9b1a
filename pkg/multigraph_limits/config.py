"""
Runtime settings, config-file loading and the acceptance threshold table
"""
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from multigraph_limits.errors import ConfigError

# Load environment variables
load_dotenv()


class Settings(BaseSettings):
    """Process-wide settings read from the environment (prefix MGL_)"""

    model_config = SettingsConfigDict(env_prefix="MGL_", env_file=".env", extra="ignore")

    workers: int = Field(default=1, ge=1, description="Process pool size for replicas and Monte Carlo streams")
    log_level: str = Field(default="INFO", description="Log level name")
    log_json: bool = Field(default=False, description="Render log events as JSON lines")
    validate_matrices: bool = Field(
        default=False, description="Validate every adjacency matrix on construction (debug mode)"
    )
    enumeration_budget: int = Field(default=10**8, description="Map evaluations allowed in exact_homdensity")
    word_budget: int = Field(default=10**7, description="Urn words allowed in exact enumerations")
    state_budget: int = Field(default=10**5, description="Markov chain states allowed in enumerate_and_solve")
    dense_solve_limit: int = Field(default=2000, description="Largest state space solved with dense LU")


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Cached settings instance"""
    return Settings()


class Thresholds(BaseModel):
    """Acceptance thresholds shared by the experiments and the statistical tests"""

    exact_tolerance: float = Field(default=1e-10, description="Max entrywise gap for exact identities")
    ks_scale: float = Field(
        default=1.2, description="Median KS distance must stay below ks_scale / sqrt(n); 0.06 at n=400"
    )
    sigma_multiplier: float = Field(default=3.0, description="Allowed deviation in standard errors")
    moment_sigma_multiplier: float = Field(default=4.0, description="Allowed deviation for moment checks")
    p_value_floor: float = Field(default=1e-3, description="GOF p-value below which a replicate fails")
    passing_fraction: float = Field(default=0.8, description="Share of GOF replicates that must pass (8 of 10)")
    density_slack: float = Field(default=0.01, description="Additive slack for density convergence")
    spag_tolerance: float = Field(default=1e-12, description="Pointwise tolerance of the SPAG identity")
    ui_tail_tolerance: float = Field(
        default=0.05, description="Largest truncated mean at the top threshold, relative to the plain mean"
    )
    graphon_density_tolerance: float = Field(default=1e-6, description="Gap between rho(W) and rho")
    graphon_degree_tolerance: float = Field(default=1e-8, description="Gap between D(W,x) and F^-1(x)")
    normalization_tail: float = Field(default=1e-10, description="Allowed missing mass of sum_k W(x,y,k)")


THRESHOLDS = Thresholds()


def load_config_file(path: Optional[Path]) -> Dict[str, Any]:
    """Read a flat key=value config file; keys use the CLI flag names"""
    if path is None:
        return {}
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    values = dotenv_values(path)
    return {key.strip().lower().replace("-", "_"): value for key, value in values.items() if value is not None}


EXCLUSIVE_KEYS: Tuple[Tuple[str, ...], ...] = (("m", "rho"),)


def merge_config(defaults: Dict[str, Any], file_values: Dict[str, Any], flags: Dict[str, Any]) -> Dict[str, Any]:
    """CLI flags > config file > defaults; unset flags are None

    Setting one key of an exclusive group (m / rho) in a higher layer drops
    the other keys of that group inherited from lower layers.
    """
    merged = dict(defaults)
    for layer in (file_values, {key: value for key, value in flags.items() if value is not None}):
        for group in EXCLUSIVE_KEYS:
            if any(key in layer for key in group):
                for key in group:
                    if key not in layer:
                        merged.pop(key, None)
        merged.update(layer)
    return merged
