"""Run configuration: a TOML file validated against a closed schema.

Example::

    seed = 7

    [chain]
    a = 0.5
    innovation = { kind = "gaussian", mean = 0.0, std = 1.0 }

    [grid]
    n_nodes = 400

    [mc]
    x0 = 1.0
    n_max = 30
    n_paths = 1_000_000

Unknown keys anywhere are rejected.  ``fixture = "two_state"`` replaces the
chain by the hand-solvable two-state kernel for the spectrum, renewal and
oracle commands.
"""
from typing import Literal

import tomli
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import innovations as inn
from .chain import ChainParams
from .errors import ConfigError


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ChainConfig(_Strict):
    a: float
    innovation: dict[str, float | str]

    @field_validator("innovation")
    @classmethod
    def _known_law(cls, block):
        inn.from_config(block)
        return block

    def params(self):
        return ChainParams(self.a, inn.from_config(self.innovation))


class GridConfig(_Strict):
    n_nodes: int = Field(400, ge=4)
    cap: float | Literal["auto"] = "auto"
    r: float | None = None
    scheme: Literal["midpoint", "gauss_legendre_composite"] = "midpoint"
    policy: Literal["kill", "reflect"] = "kill"
    refine: bool = True


class SpectralConfig(_Strict):
    tol: float = Field(1e-12, gt=0)
    max_iter: int = Field(100_000, ge=1)


class RenewalConfig(_Strict):
    bracket: tuple[float, float] | None = None
    tol: float = Field(1e-12, gt=0)


class MCConfig(_Strict):
    x0: float = 1.0
    n_max: int = Field(30, ge=1)
    n_paths: int = Field(1_000_000, ge=100)
    level: float = 0.0
    window: tuple[int, int] = (10, 30)


class FVConfig(_Strict):
    n_particles: int = Field(10_000, ge=1000)
    n_steps: int = Field(500, ge=1)
    burn_in: int = Field(100, ge=0)
    bins: list[float] | None = None


class OracleConfig(_Strict):
    kind: Literal["laplace", "gaussian", "pareto", "two_state"] | None = None


class CompareConfig(_Strict):
    pipelines: list[Literal["spectral", "renewal", "mc", "fv", "oracle"]] = ["spectral", "renewal", "mc", "fv", "oracle"]
    renewal_abs: float = 1e-6
    slope_sigmas: float = 3.0
    fv_rel: float = 0.05
    oracle_abs: float = 1e-3


class RunConfig(_Strict):
    seed: int = Field(0, ge=0, lt=2**64)
    threads: int = Field(1, ge=1)
    fixture: Literal["two_state"] | None = None
    chain: ChainConfig | None = None
    grid: GridConfig = GridConfig()
    spectral: SpectralConfig = SpectralConfig()
    renewal: RenewalConfig = RenewalConfig()
    mc: MCConfig = MCConfig()
    fv: FVConfig = FVConfig()
    oracle: OracleConfig = OracleConfig()
    compare: CompareConfig = CompareConfig()

    @model_validator(mode="after")
    def _chain_or_fixture(self):
        if self.chain is None and self.fixture is None:
            raise ValueError("either [chain] or fixture must be given")
        if self.fv.burn_in >= self.fv.n_steps:
            raise ValueError("fv.burn_in must be below fv.n_steps")
        return self

    def params(self):
        if self.chain is None:
            raise ConfigError("this command needs a [chain] table")
        return self.chain.params()


def _message(exc):
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"])
        msg = err["msg"]
        ctx = err.get("ctx", {}).get("error")
        if isinstance(ctx, ConfigError):
            msg = str(ctx)
        parts.append(f"{loc}: {msg}" if loc else msg)
    return "; ".join(parts)


def parse_config(data):
    """Validate a mapping; the chain parameters are checked eagerly."""
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_message(exc)) from None
    if cfg.chain is not None:
        cfg.params()
    return cfg


def load_config(path):
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML: {exc}") from None
    return parse_config(data)
