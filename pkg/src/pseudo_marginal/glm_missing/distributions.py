#
# MIT License
#
# Copyright (c) 2023 pseudo-marginal-glm-missing team
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in all
# copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.
#
"""Log densities and samplers for the distribution families used by the engine.

All densities are evaluated in log domain; a linear-domain density is never exposed.
Family names and parameter orders defined here are the canonical spelling used in
configuration files:

    Normal(mean, variance)
    LogNormal(meanlog, variance of the log)
    SkewNormal(location, scale, shape)
    ScaledT(df, location, scale)            location + scale * T(df)
    InverseGamma(shape, rate)               b^a / Gamma(a) x^(-a-1) exp(-b / x)
    Beta(a, b)
    Bernoulli(p)                            p in [0, 1]
    NegativeBinomial(n, p)                  Gamma(x+n) / (Gamma(n) x!) p^n (1-p)^x
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import betaln, gammaln, log_ndtr, xlog1py, xlogy

from .rng import RngStream

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

ArrayLike = Union[float, np.ndarray]

LOG_ZERO = -np.inf
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


class Family(str, Enum):
    """Supported distribution families."""

    normal = "Normal"
    lognormal = "LogNormal"
    skew_normal = "SkewNormal"
    scaled_t = "ScaledT"
    inverse_gamma = "InverseGamma"
    beta = "Beta"
    bernoulli = "Bernoulli"
    negative_binomial = "NegativeBinomial"

    @classmethod
    def parse(cls, name: Union[str, "Family"]) -> "Family":
        """Parse a family name, accepting the spellings found in model write-ups.
        Args:
            name: family name, case and separator insensitive.
        Returns:
            the family.
        Raises:
            ValueError: in case the family is not supported.
        """
        if isinstance(name, Family):
            return name
        key = "".join(character for character in name.lower() if character.isalnum())
        if key in _FAMILY_ALIASES:
            return _FAMILY_ALIASES[key]
        raise ValueError(
            f"distribution family {name} not supported, supported families: {', '.join(family.value for family in cls)}"
        )


_FAMILY_ALIASES: Dict[str, Family] = {
    **{family.value.lower(): family for family in Family},
    "gaussian": Family.normal,
    "t": Family.scaled_t,
    "studentt": Family.scaled_t,
    "invgamma": Family.inverse_gamma,
    "binomial1": Family.bernoulli,
    "negbinomial": Family.negative_binomial,
    "nbinom": Family.negative_binomial,
}


class ParameterKind(Enum):
    """Admissible range of a distribution parameter."""

    real = "real"
    positive = "positive"
    probability = "probability"
    unit_interval = "unit_interval"


def parameter_is_valid(kind: ParameterKind, value: ArrayLike) -> np.ndarray:
    """Elementwise check of a parameter value against its kind."""
    value = np.asarray(value, dtype=float)
    with np.errstate(invalid="ignore"):
        if kind is ParameterKind.real:
            return np.isfinite(value)
        if kind is ParameterKind.positive:
            return np.isfinite(value) & (value > 0.0)
        if kind is ParameterKind.probability:
            return (value > 0.0) & (value < 1.0)
        return (value >= 0.0) & (value <= 1.0)


def _shape(params: Sequence[ArrayLike], size: Optional[Union[int, Tuple[int, ...]]]):
    if size is not None:
        return size
    return np.broadcast(*[np.asarray(param) for param in params]).shape


class DistributionFamily:
    """Base class of a family: vectorised log density and sampler.

    Parameters are assumed valid here; validation happens in `DistributionSpec` for
    fixed parameters and in `log_density`/`draw` for parameters computed at run time.
    """

    family: Family
    parameter_names: Tuple[str, ...]
    parameter_kinds: Tuple[ParameterKind, ...]
    discrete: bool = False

    @property
    def arity(self) -> int:
        return len(self.parameter_names)

    def in_support(self, x: np.ndarray, *params: ArrayLike) -> np.ndarray:
        return np.isfinite(x)

    def unchecked_log_density(self, x: np.ndarray, *params: ArrayLike) -> np.ndarray:
        raise NotImplementedError(f"log density not implemented for {self.family}")

    def draw(
        self,
        generator: np.random.Generator,
        *params: ArrayLike,
        size: Optional[Union[int, Tuple[int, ...]]] = None,
    ) -> np.ndarray:
        raise NotImplementedError(f"sampler not implemented for {self.family}")

    def log_density(self, x: ArrayLike, *params: ArrayLike) -> np.ndarray:
        """Log density at x, log-zero outside the support.
        Args:
            x: evaluation points.
            params: family parameters, broadcastable against x.
        Returns:
            the log density, never NaN.
        """
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            inside = self.in_support(x, *params)
            value = self.unchecked_log_density(np.where(inside, x, self._safe_point), *params)
            value = np.where(inside, value, LOG_ZERO)
        return np.where(np.isnan(value), LOG_ZERO, value)

    @property
    def _safe_point(self) -> float:
        return 0.5


class NormalFamily(DistributionFamily):
    family = Family.normal
    parameter_names = ("mean", "variance")
    parameter_kinds = (ParameterKind.real, ParameterKind.positive)

    def unchecked_log_density(self, x, mean, variance):
        return -_HALF_LOG_2PI - 0.5 * np.log(variance) - 0.5 * (x - mean) ** 2 / variance

    def draw(self, generator, mean, variance, size=None):
        return generator.normal(mean, np.sqrt(variance), size=size)


class LogNormalFamily(DistributionFamily):
    family = Family.lognormal
    parameter_names = ("meanlog", "variance")
    parameter_kinds = (ParameterKind.real, ParameterKind.positive)

    def in_support(self, x, *params):
        return np.isfinite(x) & (x > 0.0)

    def unchecked_log_density(self, x, meanlog, variance):
        log_x = np.log(x)
        return (
            -log_x
            - _HALF_LOG_2PI
            - 0.5 * np.log(variance)
            - 0.5 * (log_x - meanlog) ** 2 / variance
        )

    def draw(self, generator, meanlog, variance, size=None):
        return generator.lognormal(meanlog, np.sqrt(variance), size=size)


class SkewNormalFamily(DistributionFamily):
    family = Family.skew_normal
    parameter_names = ("location", "scale", "shape")
    parameter_kinds = (ParameterKind.real, ParameterKind.positive, ParameterKind.real)

    def unchecked_log_density(self, x, location, scale, shape):
        t = (x - location) / scale
        return np.log(2.0) - np.log(scale) - _HALF_LOG_2PI - 0.5 * t**2 + log_ndtr(shape * t)

    def draw(self, generator, location, scale, shape, size=None):
        # conditioning representation: delta * |U0| + sqrt(1 - delta^2) * V
        shape_ = _shape((location, scale, shape), size)
        delta = np.asarray(shape) / np.sqrt(1.0 + np.asarray(shape) ** 2)
        u0 = generator.standard_normal(shape_)
        v = generator.standard_normal(shape_)
        return location + scale * (delta * np.abs(u0) + np.sqrt(1.0 - delta**2) * v)


class ScaledTFamily(DistributionFamily):
    family = Family.scaled_t
    parameter_names = ("df", "location", "scale")
    parameter_kinds = (ParameterKind.positive, ParameterKind.real, ParameterKind.positive)

    def unchecked_log_density(self, x, df, location, scale):
        t = (x - location) / scale
        return (
            gammaln(0.5 * (df + 1.0))
            - gammaln(0.5 * df)
            - 0.5 * np.log(df * np.pi)
            - np.log(scale)
            - 0.5 * (df + 1.0) * np.log1p(t**2 / df)
        )

    def draw(self, generator, df, location, scale, size=None):
        shape_ = _shape((df, location, scale), size)
        return location + scale * generator.standard_t(df, size=shape_)


class InverseGammaFamily(DistributionFamily):
    family = Family.inverse_gamma
    parameter_names = ("shape", "rate")
    parameter_kinds = (ParameterKind.positive, ParameterKind.positive)

    def in_support(self, x, *params):
        return np.isfinite(x) & (x > 0.0)

    def unchecked_log_density(self, x, shape, rate):
        return shape * np.log(rate) - gammaln(shape) - (shape + 1.0) * np.log(x) - rate / x

    def draw(self, generator, shape, rate, size=None):
        return rate / generator.gamma(shape, 1.0, size=size)


class BetaFamily(DistributionFamily):
    family = Family.beta
    parameter_names = ("a", "b")
    parameter_kinds = (ParameterKind.positive, ParameterKind.positive)

    def in_support(self, x, *params):
        return (x > 0.0) & (x < 1.0)

    def unchecked_log_density(self, x, a, b):
        return xlogy(a - 1.0, x) + xlog1py(b - 1.0, -x) - betaln(a, b)

    def draw(self, generator, a, b, size=None):
        return generator.beta(a, b, size=size)


class BernoulliFamily(DistributionFamily):
    family = Family.bernoulli
    parameter_names = ("p",)
    parameter_kinds = (ParameterKind.unit_interval,)
    discrete = True

    def in_support(self, x, *params):
        return (x == 0.0) | (x == 1.0)

    def unchecked_log_density(self, x, p):
        return xlogy(x, p) + xlog1py(1.0 - x, -p)

    def draw(self, generator, p, size=None):
        shape_ = _shape((p,), size)
        return (generator.random(shape_) < p).astype(float)

    @property
    def _safe_point(self) -> float:
        return 0.0


class NegativeBinomialFamily(DistributionFamily):
    family = Family.negative_binomial
    parameter_names = ("n", "p")
    parameter_kinds = (ParameterKind.positive, ParameterKind.probability)
    discrete = True

    def in_support(self, x, *params):
        return np.isfinite(x) & (x >= 0.0) & (x == np.floor(x))

    def unchecked_log_density(self, x, n, p):
        return (
            gammaln(x + n)
            - gammaln(n)
            - gammaln(x + 1.0)
            + n * np.log(p)
            + xlog1py(x, -p)
        )

    def draw(self, generator, n, p, size=None):
        # gamma-mixed Poisson, valid for real-valued n
        shape_ = _shape((n, p), size)
        rate = generator.gamma(n, (1.0 - np.asarray(p)) / np.asarray(p), size=shape_)
        return generator.poisson(rate).astype(float)

    @property
    def _safe_point(self) -> float:
        return 0.0


FAMILY_FACTORY: Dict[Family, DistributionFamily] = {
    family_class.family: family_class()
    for family_class in (
        NormalFamily,
        LogNormalFamily,
        SkewNormalFamily,
        ScaledTFamily,
        InverseGammaFamily,
        BetaFamily,
        BernoulliFamily,
        NegativeBinomialFamily,
    )
}


def get_family(family: Union[str, Family]) -> DistributionFamily:
    """Get the implementation of a family by name."""
    return FAMILY_FACTORY[Family.parse(family)]


def parameters_are_valid(family: Union[str, Family], params: Sequence[ArrayLike]) -> np.ndarray:
    """Elementwise validity of (possibly array valued) parameters of a family.
    Args:
        family: distribution family.
        params: parameter values, broadcastable between each other.
    Returns:
        boolean array with the broadcast shape of the parameters.
    """
    implementation = get_family(family)
    if len(params) != implementation.arity:
        raise ValueError(
            f"{implementation.family.value} expects {implementation.arity} parameters, got {len(params)}"
        )
    valid = np.ones(np.broadcast(*[np.asarray(param) for param in params]).shape, dtype=bool)
    for kind, value in zip(implementation.parameter_kinds, params):
        valid = valid & parameter_is_valid(kind, value)
    return valid


def log_density(family: Union[str, Family], x: ArrayLike, params: Sequence[ArrayLike]) -> np.ndarray:
    """Vectorised log density with run-time parameters.

    Invalid parameter values yield log-zero instead of an error, so that proposals
    falling outside the admissible region are rejected by the chain.
    Args:
        family: distribution family.
        x: evaluation points.
        params: parameter values, broadcastable against x.
    Returns:
        the log density.
    """
    implementation = get_family(family)
    valid = parameters_are_valid(family, params)
    safe_params = [
        np.where(valid, param, _fallback(kind))
        for kind, param in zip(implementation.parameter_kinds, params)
    ]
    value = implementation.log_density(x, *safe_params)
    return np.where(valid, value, LOG_ZERO)


def draw(
    family: Union[str, Family],
    params: Sequence[ArrayLike],
    generator: np.random.Generator,
    size: Optional[Union[int, Tuple[int, ...]]] = None,
) -> np.ndarray:
    """Vectorised sampler with run-time parameters.

    Entries whose parameters are invalid are drawn from a placeholder and returned as
    NaN; their log density is log-zero.
    Args:
        family: distribution family.
        params: parameter values.
        generator: numpy generator consumed by the draw.
        size: optional output shape.
    Returns:
        the draws as floats.
    """
    implementation = get_family(family)
    valid = parameters_are_valid(family, params)
    safe_params = [
        np.where(valid, param, _fallback(kind))
        for kind, param in zip(implementation.parameter_kinds, params)
    ]
    values = np.asarray(implementation.draw(generator, *safe_params, size=size), dtype=float)
    return np.where(valid, values, np.nan)


def _fallback(kind: ParameterKind) -> float:
    return 0.5 if kind in (ParameterKind.probability, ParameterKind.unit_interval) else 1.0


@dataclass(frozen=True)
class DistributionSpec:
    """A distribution family with fixed parameters."""

    family: Family
    params: Tuple[float, ...]

    def __post_init__(self) -> None:
        family = Family.parse(self.family)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "params", tuple(float(value) for value in self.params))
        implementation = FAMILY_FACTORY[family]
        if len(self.params) != implementation.arity:
            raise ValueError(
                f"{family.value} expects {implementation.arity} parameters ({', '.join(implementation.parameter_names)}), got {len(self.params)}"
            )
        for name, kind, value in zip(
            implementation.parameter_names, implementation.parameter_kinds, self.params
        ):
            if not bool(parameter_is_valid(kind, value)):
                raise ValueError(
                    f"invalid {family.value} parameter {name}={value}, expected a {kind.value} value"
                )

    @classmethod
    def from_dict(cls, configuration: Dict) -> "DistributionSpec":
        return cls(Family.parse(configuration["family"]), tuple(configuration["params"]))

    def to_dict(self) -> Dict:
        return {"family": self.family.value, "params": list(self.params)}

    def __str__(self) -> str:
        return f"{self.family.value}({', '.join(f'{value:g}' for value in self.params)})"


def log_pdf(spec: DistributionSpec, x: ArrayLike) -> ArrayLike:
    """Natural-log density (or mass) of a distribution.
    Args:
        spec: the distribution.
        x: evaluation point(s).
    Returns:
        the log density, log-zero outside the support.
    """
    value = FAMILY_FACTORY[spec.family].log_density(x, *spec.params)
    return float(value) if np.ndim(value) == 0 else value


def sample(
    spec: DistributionSpec,
    stream: Union[RngStream, np.random.Generator],
    size: Optional[Union[int, Tuple[int, ...]]] = None,
) -> ArrayLike:
    """Draw from a distribution.
    Args:
        spec: the distribution.
        stream: a stream identity (a fresh generator is positioned at its start) or a
            generator to consume.
        size: optional output shape.
    Returns:
        a draw, or an array of draws when size is given.
    """
    generator = stream.generator() if isinstance(stream, RngStream) else stream
    value = FAMILY_FACTORY[spec.family].draw(generator, *spec.params, size=size)
    return float(value) if size is None else np.asarray(value, dtype=float)
