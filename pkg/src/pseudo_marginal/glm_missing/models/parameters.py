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
"""Parameter vectors and the transforms to the unconstrained space the chain walks."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Mapping, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit, logit

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

BLOCKS = ("alpha", "beta", "phi")


class Transform(str, Enum):
    """Map from the unconstrained walk space to the parameter space."""

    identity = "Identity"
    log = "Log"
    logit = "Logit"

    @classmethod
    def parse(cls, name: Union[str, "Transform", None]) -> "Transform":
        if name is None:
            return cls.identity
        if isinstance(name, Transform):
            return name
        for transform in cls:
            if transform.value.lower() == str(name).lower():
                return transform
        raise ValueError(
            f"transform {name} not supported, supported transforms: {', '.join(t.value for t in cls)}"
        )

    def to_constrained(self, u: np.ndarray) -> np.ndarray:
        if self is Transform.log:
            return np.exp(u)
        if self is Transform.logit:
            return expit(u)
        return u

    def to_unconstrained(self, v: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            if self is Transform.log:
                return np.log(v)
            if self is Transform.logit:
                return logit(v)
        return v

    def log_abs_derivative(self, u: np.ndarray) -> np.ndarray:
        """log |d to_constrained / du|."""
        if self is Transform.log:
            return u
        if self is Transform.logit:
            # log sigma(u) + log(1 - sigma(u))
            return -np.logaddexp(0.0, -u) - np.logaddexp(0.0, u)
        return np.zeros_like(u)


def _apply(transforms: Sequence[Transform], values: np.ndarray, method: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if len(transforms) != values.shape[-1]:
        raise ValueError(
            f"got {values.shape[-1]} coordinates for {len(transforms)} transforms"
        )
    output = np.empty_like(values)
    for position, transform in enumerate(transforms):
        output[..., position] = getattr(transform, method)(values[..., position])
    return output


def log_jacobian(
    theta_unconstrained: np.ndarray, transforms: Sequence[Transform]
) -> float:
    """Log absolute Jacobian determinant of the unconstrained-to-constrained map.
    Args:
        theta_unconstrained: coordinates on the walk space.
        transforms: one transform per coordinate.
    Returns:
        sum of the per-coordinate log absolute derivatives.
    """
    transforms = [Transform.parse(transform) for transform in transforms]
    return float(np.sum(_apply(transforms, theta_unconstrained, "log_abs_derivative")))


@dataclass(frozen=True)
class ParamVector:
    """Concatenated parameter blocks on the constrained scale.

    alpha holds the covariate-model parameters, beta the regression coefficients and
    phi the missingness-mechanism parameters; `names` and `transforms` follow the
    concatenation order alpha, beta, phi.
    """

    alpha: np.ndarray
    beta: np.ndarray
    phi: np.ndarray
    transforms: Tuple[Transform, ...]
    names: Tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        for block in BLOCKS:
            values = np.array(getattr(self, block), dtype=float, ndmin=1)
            values.setflags(write=False)
            object.__setattr__(self, block, values)
        size = self.alpha.size + self.beta.size + self.phi.size
        transforms = tuple(Transform.parse(transform) for transform in self.transforms)
        object.__setattr__(self, "transforms", transforms)
        if len(transforms) != size:
            raise ValueError(f"{len(transforms)} transforms given for {size} parameters")
        if not self.names:
            object.__setattr__(
                self,
                "names",
                tuple(
                    f"{block}{position}"
                    for block in BLOCKS
                    for position in range(getattr(self, block).size)
                ),
            )
        if len(self.names) != size:
            raise ValueError(f"{len(self.names)} names given for {size} parameters")

    @property
    def sizes(self) -> Tuple[int, int, int]:
        return (self.alpha.size, self.beta.size, self.phi.size)

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate([self.alpha, self.beta, self.phi])

    def __len__(self) -> int:
        return len(self.names)

    def as_dict(self) -> Dict[str, float]:
        return {name: float(value) for name, value in zip(self.names, self.flat)}

    def with_flat(self, values: np.ndarray) -> "ParamVector":
        """Same layout, new constrained values."""
        values = np.asarray(values, dtype=float)
        if values.shape != (len(self),):
            raise ValueError(f"expected {len(self)} values, got shape {values.shape}")
        n_alpha, n_beta, _ = self.sizes
        return ParamVector(
            alpha=values[:n_alpha],
            beta=values[n_alpha : n_alpha + n_beta],
            phi=values[n_alpha + n_beta :],
            transforms=self.transforms,
            names=self.names,
        )

    def with_values(self, values: Mapping[str, float]) -> "ParamVector":
        """Same layout with some coordinates replaced by name."""
        unknown = set(values) - set(self.names)
        if unknown:
            raise ValueError(f"unknown parameters: {', '.join(sorted(unknown))}")
        flat = self.flat.copy()
        for position, name in enumerate(self.names):
            if name in values:
                flat[position] = float(values[name])
        return self.with_flat(flat)

    def to_unconstrained(self) -> np.ndarray:
        return _apply(self.transforms, self.flat, "to_unconstrained")

    def from_unconstrained(self, u: np.ndarray) -> "ParamVector":
        """Same layout, values given on the walk space."""
        return self.with_flat(_apply(self.transforms, u, "to_constrained"))

    def log_jacobian(self) -> float:
        return log_jacobian(self.to_unconstrained(), self.transforms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParamVector):
            return NotImplemented
        return (
            self.names == other.names
            and self.transforms == other.transforms
            and self.sizes == other.sizes
            and bool(np.array_equal(self.flat, other.flat))
        )

    def __hash__(self) -> int:
        return hash((self.names, self.transforms, self.flat.tobytes()))
