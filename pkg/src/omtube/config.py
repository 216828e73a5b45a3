"""JSON run configuration validated with pydantic.

The pydantic models mirror the config file; ``RunConfig`` converts itself to
the frozen runtime objects the numerical modules work with.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import TYPE_CHECKING, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import InputError
from .model import DriftModel, DriftPreset, SdeSystem, validate_system
from .simulate import SimConfig

if TYPE_CHECKING:
    from .harness import ExperimentConfig

logger = logging.getLogger(__name__)

DEFAULT_BIN_EDGES = [0.0, 0.25] + [round(0.3 + 0.05 * k, 2) for k in range(25)]


class DriftSpec(BaseModel):
    """Either a named preset or explicit coefficients a_0..a_m."""

    model_config = ConfigDict(extra="forbid")

    preset: Optional[DriftPreset] = None
    coeffs: Optional[List[float]] = Field(default=None, min_length=1, max_length=11)
    theta: float = Field(default=1.0, description="OU rate, ignored by other presets")

    @model_validator(mode="after")
    def _one_source(self) -> DriftSpec:
        if (self.preset is None) == (self.coeffs is None):
            raise ValueError("give exactly one of 'preset' or 'coeffs'")
        return self

    def to_model(self) -> DriftModel:
        if self.preset is not None:
            return DriftModel.from_preset(self.preset, self.theta)
        return DriftModel(tuple(self.coeffs or ()))


class SimSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dt: float = Field(default=1e-4, gt=0)
    horizon: float = Field(default=1.5, gt=0)
    seed: int = Field(default=1, ge=0, lt=2**64)
    scheme_kappa: float = Field(default=0.0, ge=0, le=1)
    implicit_tol: float = Field(default=1e-12, gt=0)


class ExperimentSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_paths: int = Field(default=30000, ge=0)
    bin_edges: List[float] = Field(default_factory=lambda: list(DEFAULT_BIN_EDGES))
    audit_size: int = Field(default=100, ge=0)

    @field_validator("bin_edges")
    @classmethod
    def _increasing(cls, edges: list[float]) -> list[float]:
        if len(edges) < 2:
            raise ValueError("need at least two bin edges")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("bin edges must be strictly increasing")
        return edges


class RunConfig(BaseModel):
    """Top-level config file: system parameters plus simulation and experiment blocks."""

    model_config = ConfigDict(extra="forbid")

    drift: DriftSpec = Field(default_factory=lambda: DriftSpec(preset=DriftPreset.DOUBLE_WELL))
    c: float = 1.0
    l: float = 5.0
    x0: float = -1.0
    xf: float = 1.0
    kappa: float = Field(default=0.5, ge=0, le=1)
    sim: SimSettings = Field(default_factory=SimSettings)
    experiment: ExperimentSettings = Field(default_factory=ExperimentSettings)

    def to_system(self) -> SdeSystem:
        system = SdeSystem(
            self.drift.to_model(), self.c, self.l, self.x0, self.xf, self.kappa
        )
        return validate_system(system)

    def to_sim_config(self, seed: Optional[int] = None) -> SimConfig:
        s = self.sim
        return SimConfig(
            s.dt,
            s.horizon,
            s.seed if seed is None else seed,
            s.scheme_kappa,
            s.implicit_tol,
        )

    def to_experiment_config(self, seed: Optional[int] = None) -> ExperimentConfig:
        from .harness import ExperimentConfig

        e = self.experiment
        return ExperimentConfig(
            system=self.to_system(),
            sim=self.to_sim_config(seed),
            n_paths=e.n_paths,
            horizon=self.sim.horizon,
            bin_edges=tuple(e.bin_edges),
            audit_size=e.audit_size,
        )


def load_config(path: Optional[Path]) -> RunConfig:
    """Read and validate a JSON config; ``None`` yields the double-well defaults."""
    if path is None:
        return RunConfig()
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: not valid JSON ({e})") from e
    logger.debug("loaded config from %s", path)
    return RunConfig.model_validate(raw)
