"""Innovation laws for the AR(1) recursion X_n = a X_{n-1} + xi_n.

Each law is an immutable value exposing density, CDF, survival function and
quantile; sampling goes through the quantile so every draw consumes exactly
one uniform from the stream.
"""
from dataclasses import dataclass, asdict, replace
import enum
import math

import numpy as np
from scipy import special

from .errors import ConfigError


class TailClass(enum.Enum):
    BOUNDED_ABOVE = "BoundedAbove"
    ALL_MOMENTS_FINITE = "AllMomentsFinite"
    REGULARLY_VARYING = "RegularlyVarying"


@dataclass(frozen=True)
class TailInfo:
    tail_class: TailClass
    ess_sup: float
    r_star: float | None = None
    tail_index: float | None = None
    all_power_moments: bool = True

    def as_dict(self):
        d = asdict(self)
        d["tail_class"] = self.tail_class.value
        return d


def open_uniform(rng, size=None):
    """Uniforms on the open interval (0, 1)."""
    return rng.random(size) + 2.0**-54


class InnovationModel:
    """Base class; concrete laws are the frozen dataclasses below."""

    kind = None

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        return 1.0 - self.cdf(x)

    def quantile(self, u):
        raise NotImplementedError

    def shifted(self, c):
        """Same law translated by ``c``."""
        raise NotImplementedError

    @property
    def ess_sup(self):
        return math.inf

    @property
    def iqr(self):
        return float(self.quantile(0.75) - self.quantile(0.25))

    @property
    def nondegenerate(self):
        return bool(self.cdf(0.0) > 0.0 and self.sf(0.0) > 0.0)

    def sample(self, rng, size=None):
        return self.quantile(open_uniform(rng, size))

    def to_config(self):
        d = {"kind": self.kind}
        d.update(asdict(self))
        return d


@dataclass(frozen=True)
class Gaussian(InnovationModel):
    mean: float = 0.0
    std: float = 1.0
    kind = "gaussian"

    def __post_init__(self):
        if not self.std > 0:
            raise ConfigError("gaussian std must be positive")

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.std
        return np.exp(-0.5 * z * z) / (self.std * math.sqrt(2 * math.pi))

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=float) - self.mean) / self.std)

    def sf(self, x):
        return special.ndtr((self.mean - np.asarray(x, dtype=float)) / self.std)

    def quantile(self, u):
        return self.mean + self.std * special.ndtri(u)

    def shifted(self, c):
        return replace(self, mean=self.mean + c)


@dataclass(frozen=True)
class Laplace(InnovationModel):
    """Density exp(-|x - loc| / scale) / (2 scale)."""

    scale: float = 1.0
    loc: float = 0.0
    kind = "laplace"

    def __post_init__(self):
        if not self.scale > 0:
            raise ConfigError("laplace scale must be positive")

    def pdf(self, x):
        z = np.abs(np.asarray(x, dtype=float) - self.loc) / self.scale
        return np.exp(-z) / (2 * self.scale)

    def cdf(self, x):
        z = (np.asarray(x, dtype=float) - self.loc) / self.scale
        return np.where(z < 0, 0.5 * np.exp(np.minimum(z, 0.0)), 1.0 - 0.5 * np.exp(-np.maximum(z, 0.0)))

    def sf(self, x):
        z = (np.asarray(x, dtype=float) - self.loc) / self.scale
        return np.where(z > 0, 0.5 * np.exp(-np.maximum(z, 0.0)), 1.0 - 0.5 * np.exp(np.minimum(z, 0.0)))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        lower = self.loc + self.scale * np.log(2 * np.minimum(u, 0.5))
        upper = self.loc - self.scale * np.log(2 * (1 - np.maximum(u, 0.5)))
        return np.where(u < 0.5, lower, upper)

    def shifted(self, c):
        return replace(self, loc=self.loc + c)


@dataclass(frozen=True)
class Uniform(InnovationModel):
    lo: float = -1.0
    hi: float = 1.0
    kind = "uniform"

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ConfigError("uniform requires lo < hi")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.lo) & (x <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def sf(self, x):
        return np.clip((self.hi - np.asarray(x, dtype=float)) / (self.hi - self.lo), 0.0, 1.0)

    def quantile(self, u):
        return self.lo + (self.hi - self.lo) * np.asarray(u, dtype=float)

    def shifted(self, c):
        return replace(self, lo=self.lo + c, hi=self.hi + c)

    @property
    def ess_sup(self):
        return float(self.hi)


@dataclass(frozen=True)
class TwoSidedPareto(InnovationModel):
    """Exponential left half, Pareto (Lomax) right half, each of mass 1/2.

    Density ``left_rate * exp(left_rate * y) / 2`` for y < 0 and
    ``tail_index * scale**tail_index / (y + scale)**(tail_index + 1) / 2``
    for y >= 0, where y = x - loc.
    """

    tail_index: float = 1.0
    scale: float = 1.0
    left_rate: float = 1.0
    loc: float = 0.0
    kind = "pareto"

    def __post_init__(self):
        if not (self.tail_index > 0 and self.scale > 0 and self.left_rate > 0):
            raise ConfigError("pareto tail_index, scale and left_rate must be positive")

    def pdf(self, x):
        y = np.asarray(x, dtype=float) - self.loc
        r, s = self.tail_index, self.scale
        left = 0.5 * self.left_rate * np.exp(self.left_rate * np.minimum(y, 0.0))
        right = 0.5 * r * s**r / (np.maximum(y, 0.0) + s) ** (r + 1)
        return np.where(y < 0, left, right)

    def cdf(self, x):
        y = np.asarray(x, dtype=float) - self.loc
        return np.where(y < 0, 0.5 * np.exp(self.left_rate * np.minimum(y, 0.0)), 1.0 - self._right_sf(y))

    def sf(self, x):
        y = np.asarray(x, dtype=float) - self.loc
        return np.where(y < 0, 1.0 - 0.5 * np.exp(self.left_rate * np.minimum(y, 0.0)), self._right_sf(y))

    def _right_sf(self, y):
        s = self.scale
        return 0.5 * (s / (np.maximum(y, 0.0) + s)) ** self.tail_index

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        lower = np.log(2 * np.minimum(u, 0.5)) / self.left_rate
        upper = self.scale * ((2 * (1 - np.maximum(u, 0.5))) ** (-1.0 / self.tail_index) - 1.0)
        return self.loc + np.where(u < 0.5, lower, upper)

    def shifted(self, c):
        return replace(self, loc=self.loc + c)


_KINDS = {cls.kind: cls for cls in (Gaussian, Laplace, Uniform, TwoSidedPareto)}
_KINDS["two_sided_pareto"] = TwoSidedPareto


def from_config(block):
    """Build a model from a key-value block such as
    ``{"kind": "gaussian", "mean": 0.0, "std": 1.0}``."""
    block = dict(block)
    try:
        cls = _KINDS[block.pop("kind")]
    except KeyError as exc:
        raise ConfigError(f"unknown or missing innovation kind: {exc}") from None
    try:
        return cls(**{k: float(v) for k, v in block.items()})
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {cls.kind}: {exc}") from None


def density(model, x):
    return model.pdf(x)


def cdf(model, x):
    return model.cdf(x)


def sample(model, rng, size=None):
    return model.sample(rng, size)


def classify_tail(model, a=None):
    """Tail classification of ``model``; for laws bounded above and a given
    contraction ``a`` also the invariant upper end R / (1 - a)."""
    if isinstance(model, Uniform):
        R = model.ess_sup
        r_star = R / (1 - a) if a is not None else None
        return TailInfo(TailClass.BOUNDED_ABOVE, R, r_star)
    if isinstance(model, TwoSidedPareto):
        return TailInfo(TailClass.REGULARLY_VARYING, math.inf, tail_index=model.tail_index,
                        all_power_moments=False)
    return TailInfo(TailClass.ALL_MOMENTS_FINITE, math.inf)
