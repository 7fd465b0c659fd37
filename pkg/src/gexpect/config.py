"""Run configuration: YAML (or JSON) document -> validated RunConfig."""

from __future__ import annotations

from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import pde
from .choquet import DEFAULT_K, ThresholdQuadrature
from .claims import TerminalClaim, claim_from_dict
from .errors import ConfigurationError, InputError
from .expectation import Model, SolverParams
from .generators import GeneratorSpec
from .report import content_hash
from .sde import CoefficientField, TimeGrid

CONFIG_VERSION = 1


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(_Section):
    coefficients: dict = Field(default_factory=lambda: {"diffusion": {"kind": "constant", "matrix": 1.0}})
    x0: float = 0.0
    T: float = Field(1.0, gt=0)
    steps: int = Field(100, gt=0)

    @field_validator("coefficients")
    @classmethod
    def _coeff(cls, v):
        CoefficientField.from_dict(v, "model.coefficients")
        return v


class BackendSection(_Section):
    name: Literal["pde", "lsmc"] = "pde"
    nx: int = Field(pde.DEFAULT_NX, ge=5)
    eps_factor: float = Field(pde.DEFAULT_EPS_FACTOR, gt=0)
    richardson: bool = True
    n_paths: int = Field(100_000, ge=2)
    seed: int = Field(0, ge=0)
    antithetic: bool = True
    basis: Literal["auto", "polynomial", "hats"] = "auto"
    degree: int = Field(4, ge=0)
    bins: int = Field(64, ge=2)

    @field_validator("nx")
    @classmethod
    def _odd(cls, v):
        if v % 2 == 0:
            raise ValueError("nx must be odd so x0 sits on a node")
        return v


class QuadratureSection(_Section):
    K: int = Field(DEFAULT_K, ge=3)
    rule: Literal["auto", "uniform", "adapted"] = "auto"


class CapacitySection(_Section):
    threshold: float = 0.5


class SimulateSection(_Section):
    save_paths: bool = False


class VerifySection(_Section):
    expected: Literal["equal", "unequal", "informational", "auto"] = "auto"
    margin: float | None = Field(None, gt=0)


class MatrixSection(_Section):
    cells: list[str] | Literal["default"] = "default"


class RunConfig(_Section):
    version: Literal[1] = CONFIG_VERSION
    model: ModelSection = Field(default_factory=ModelSection)
    generator: dict = Field(default_factory=lambda: {"kind": "zero"})
    claim: dict | None = None
    backend: BackendSection = Field(default_factory=BackendSection)
    quadrature: QuadratureSection = Field(default_factory=QuadratureSection)
    capacity: CapacitySection = Field(default_factory=CapacitySection)
    simulate: SimulateSection = Field(default_factory=SimulateSection)
    verify: VerifySection = Field(default_factory=VerifySection)
    matrix: MatrixSection = Field(default_factory=MatrixSection)

    @field_validator("generator")
    @classmethod
    def _gen(cls, v):
        GeneratorSpec.from_dict(v, "generator")
        return v

    @field_validator("claim")
    @classmethod
    def _claim(cls, v):
        if v is not None:
            claim_from_dict(v, "claim")
        return v

    # -- resolved objects -------------------------------------------------
    def to_dict(self):
        return self.model_dump(mode="json")

    @property
    def hash(self):
        return content_hash(self.to_dict())

    def build_model(self) -> Model:
        m = self.model
        return Model(CoefficientField.from_dict(m.coefficients, "model.coefficients"), m.x0, TimeGrid(m.T, m.steps))

    def build_generator(self) -> GeneratorSpec:
        return GeneratorSpec.from_dict(self.generator, "generator")

    def build_claim(self) -> TerminalClaim:
        if self.claim is None:
            raise ConfigurationError("claim: missing required section for this command")
        return claim_from_dict(self.claim, "claim")

    def build_params(self) -> SolverParams:
        b = self.backend
        return SolverParams(b.nx, b.eps_factor, b.richardson, b.n_paths, b.seed, b.antithetic, b.basis, b.degree,
                            b.bins)

    def build_quadrature(self, claim) -> ThresholdQuadrature:
        return ThresholdQuadrature.for_claim(claim, self.quadrature.K, self.quadrature.rule)


def _path(loc):
    return ".".join(str(p) for p in loc)


def parse_config(text: str) -> RunConfig:
    """Validated config with defaults applied; errors name the offending key."""
    try:
        data = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise InputError(f"config is not valid YAML/JSON: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise InputError("config must be a mapping at the top level")
    return config_from_dict(data)


def config_from_dict(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = _path(err["loc"])
        if err["type"] == "extra_forbidden":
            raise ConfigurationError(f"{loc}: unknown key") from None
        if err["type"] == "missing":
            raise ConfigurationError(f"{loc}: missing required field") from None
        msg = err["msg"]
        ctx = err.get("ctx", {})
        if isinstance(ctx.get("error"), ConfigurationError):
            msg = str(ctx["error"])
            raise ConfigurationError(msg) from None
        raise ConfigurationError(f"{loc}: {msg}") from None


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
