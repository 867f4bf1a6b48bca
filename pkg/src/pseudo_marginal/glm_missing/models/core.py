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
"""Generative model: conditional likelihood, sequential covariate model, missingness
mechanism, priors and parameter transforms, evaluated as log densities over a Dataset."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..distributions import (
    FAMILY_FACTORY,
    LOG_ZERO,
    DistributionSpec,
    Family,
    ParameterKind,
    log_density,
    log_pdf,
    sample,
)
from ..rng import Channel, RngStream
from .expressions import AffineExpression, CompiledExpression, ExpressionValue
from .parameters import ParamVector, Transform

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

PROBABILITY_EPSILON = 1e-12

_reported_clamps = set()


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Dataset:
    """Responses, covariates and the inclusion indicator (1 = observed).

    Missing cells of `x` hold a sentinel that is never read: every evaluation goes
    through `complete`, which overwrites them with fill values.
    """

    y: np.ndarray
    x: np.ndarray
    mask: np.ndarray
    column_names: Tuple[str, ...]
    response_name: str = "y"
    missing_rows: np.ndarray = field(init=False, repr=False)
    missing_columns: np.ndarray = field(init=False, repr=False)
    missing_by_column: Tuple[Tuple[int, np.ndarray], ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        y = np.array(self.y, dtype=float, ndmin=1)
        x = np.array(self.x, dtype=float, ndmin=2)
        mask = np.array(self.mask, dtype=bool, ndmin=2)
        if x.shape != mask.shape:
            raise ValueError(f"covariates shape {x.shape} differs from mask shape {mask.shape}")
        if y.shape != (x.shape[0],):
            raise ValueError(f"{y.shape[0]} responses given for {x.shape[0]} rows")
        if len(self.column_names) != x.shape[1]:
            raise ValueError(f"{len(self.column_names)} column names given for {x.shape[1]} columns")
        if len(set(self.column_names)) != len(self.column_names):
            raise ValueError(f"duplicated column names: {self.column_names}")
        if not np.all((y == 0.0) | (y == 1.0)):
            raise ValueError(f"response {self.response_name} must be binary (0/1)")
        if not np.all(np.isfinite(x[mask])):
            raise ValueError("observed covariate cells must be finite")
        x = np.where(mask, x, 0.0)
        # column-major order keeps the cells of a column contiguous
        columns, rows = np.nonzero(~mask.T)
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "x", _readonly(x))
        object.__setattr__(self, "mask", _readonly(mask))
        object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "missing_rows", _readonly(rows))
        object.__setattr__(self, "missing_columns", _readonly(columns))
        object.__setattr__(
            self,
            "missing_by_column",
            tuple(
                (int(column), _readonly(rows[columns == column]))
                for column in np.unique(columns)
            ),
        )

    @property
    def n_rows(self) -> int:
        return self.x.shape[0]

    @property
    def n_columns(self) -> int:
        return self.x.shape[1]

    @property
    def n_missing(self) -> int:
        return int(self.missing_rows.size)

    @property
    def missing_cells(self) -> List[Tuple[int, int]]:
        return list(zip(self.missing_rows.tolist(), self.missing_columns.tolist()))

    def column_index(self, name: str) -> int:
        try:
            return self.column_names.index(name)
        except ValueError:
            raise ValueError(f"unknown column {name}, available: {', '.join(self.column_names)}")

    def rows_missing(self, column: int) -> np.ndarray:
        return self.missing_rows[self.missing_columns == column]

    def columns_with_missing(self) -> List[int]:
        return [column for column, _ in self.missing_by_column]

    def missing_fraction(self) -> Dict[str, float]:
        return {
            name: float(1.0 - self.mask[:, position].mean())
            for position, name in enumerate(self.column_names)
        }

    def complete(self, values: np.ndarray) -> np.ndarray:
        """Fill the missing cells.
        Args:
            values: fill values of shape (..., n_missing) in `missing_cells` order.
        Returns:
            completed covariates of shape (..., n, p).
        """
        values = np.asarray(values, dtype=float)
        if values.shape[-1:] != (self.n_missing,):
            raise ValueError(f"fill has {values.shape[-1:]} values for {self.n_missing} missing cells")
        completed = np.broadcast_to(self.x, values.shape[:-1] + self.x.shape).copy()
        completed[..., self.missing_rows, self.missing_columns] = values
        return completed

    def fill_values(self, completed: np.ndarray) -> np.ndarray:
        """Inverse of `complete`: the missing-cell values of completed covariates."""
        return completed[..., self.missing_rows, self.missing_columns]

    def permuted(self, order: Sequence[int]) -> "Dataset":
        """Rows reordered."""
        order = np.asarray(order)
        return Dataset(self.y[order], self.x[order], self.mask[order], self.column_names, self.response_name)


@dataclass(frozen=True, eq=False)
class MissingFill:
    """Values for exactly the missing cells of a dataset.

    `values` follows `Dataset.missing_cells` order; a leading batch dimension holds
    several fills at once.
    """

    cells: Tuple[Tuple[int, int], ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float, ndmin=1)
        if values.shape[-1] != len(self.cells):
            raise ValueError(f"{values.shape[-1]} values given for {len(self.cells)} missing cells")
        object.__setattr__(self, "cells", tuple(tuple(cell) for cell in self.cells))
        object.__setattr__(self, "values", _readonly(values))

    @classmethod
    def for_dataset(cls, data: Dataset, values: np.ndarray) -> "MissingFill":
        return cls(tuple(data.missing_cells), values)

    @classmethod
    def from_mapping(cls, data: Dataset, mapping: Mapping[Tuple[int, int], float]) -> "MissingFill":
        """Build a fill from a sparse (row, column) -> value map.
        Raises:
            ValueError: in case the keys are not exactly the missing cells.
        """
        cells = data.missing_cells
        if set(mapping) != set(cells):
            raise ValueError("fill keys must be exactly the missing cells of the dataset")
        return cls(tuple(cells), np.array([mapping[cell] for cell in cells], dtype=float))

    def as_mapping(self) -> Dict[Tuple[int, int], float]:
        if self.values.ndim != 1:
            raise ValueError("a batch of fills has no single mapping")
        return {cell: float(value) for cell, value in zip(self.cells, self.values)}

    @property
    def batch_size(self) -> Optional[int]:
        return None if self.values.ndim == 1 else self.values.shape[0]

    def __getitem__(self, index: int) -> "MissingFill":
        return MissingFill(self.cells, self.values[index])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MissingFill):
            return NotImplemented
        return self.cells == other.cells and bool(np.array_equal(self.values, other.values))

    def __hash__(self) -> int:
        return hash((self.cells, self.values.tobytes()))


@dataclass(frozen=True)
class ConditionalDistribution:
    """A distribution family whose parameters are affine expressions."""

    family: Family
    params: Tuple[AffineExpression, ...]

    def __post_init__(self) -> None:
        family = Family.parse(self.family)
        object.__setattr__(self, "family", family)
        arity = FAMILY_FACTORY[family].arity
        if len(self.params) != arity:
            raise ValueError(f"{family.value} expects {arity} parameters, got {len(self.params)}")

    @classmethod
    def parse(
        cls,
        family: Union[str, Family],
        params: Sequence[ExpressionValue],
        parameter_names: Sequence[str],
        column_names: Sequence[str],
    ) -> "ConditionalDistribution":
        return cls(
            Family.parse(family),
            tuple(AffineExpression.parse(value, parameter_names, column_names) for value in params),
        )

    @property
    def columns(self) -> Tuple[str, ...]:
        return tuple(dict.fromkeys(column for param in self.params for column in param.columns))

    @property
    def parameters(self) -> Tuple[str, ...]:
        return tuple(dict.fromkeys(name for param in self.params for name in param.parameters))


class CompiledConditional:
    """Conditional distribution bound to parameter and column positions."""

    def __init__(
        self,
        name: str,
        conditional: ConditionalDistribution,
        parameter_index: Mapping[str, int],
        column_index: Mapping[str, int],
    ) -> None:
        self.name = name
        self.family = conditional.family
        self.kinds = FAMILY_FACTORY[conditional.family].parameter_kinds
        self.expressions = [
            CompiledExpression(expression, parameter_index, column_index)
            for expression in conditional.params
        ]

    def parameters(self, values: np.ndarray, x: np.ndarray, rows: np.ndarray) -> List[np.ndarray]:
        """Distribution parameters on the selected rows, probabilities clamped."""
        params = []
        for kind, expression in zip(self.kinds, self.expressions):
            value = expression(values, x, rows)
            if kind is ParameterKind.probability:
                value = self._clamp(value, PROBABILITY_EPSILON, 1.0 - PROBABILITY_EPSILON)
            elif kind is ParameterKind.unit_interval:
                value = self._clamp(value, 0.0, 1.0)
            params.append(value)
        return params

    def _clamp(self, value: np.ndarray, lower: float, upper: float) -> np.ndarray:
        clamped = np.clip(value, lower, upper)
        if self.name not in _reported_clamps and np.any(clamped != value):
            _reported_clamps.add(self.name)
            logger.warning(
                f"probability parameter of {self.name} outside ({lower}, {upper}), clamping to the admissible range"
            )
        return clamped

    def log_density(self, values: np.ndarray, x: np.ndarray, rows: np.ndarray, column: int) -> np.ndarray:
        """Log density of x[..., rows, column], shape (..., len(rows))."""
        return log_density(self.family, x[..., rows, column], self.parameters(values, x, rows))


class MechanismKind(str, Enum):
    """Missingness mechanism forms."""

    logistic = "logistic"
    mcar = "mcar"


@dataclass(frozen=True)
class Mechanism:
    """Per-cell Bernoulli inclusion with log-odds given by an affine predictor."""

    kind: MechanismKind
    columns: Tuple[str, ...]
    predictor: AffineExpression

    def __post_init__(self) -> None:
        kind = MechanismKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "columns", tuple(self.columns))
        if kind is MechanismKind.mcar and self.predictor.columns:
            raise ValueError(
                f"a missing-completely-at-random mechanism can not depend on columns: {', '.join(self.predictor.columns)}"
            )


@dataclass(frozen=True)
class ModelSpec:
    """Full generative description of the model.

    Attributes:
        column_names: covariate columns, in the order of the sequential covariate model.
        alpha_names: covariate-model parameters.
        beta_names: regression coefficients.
        design: design column of every coefficient, None for the intercept.
        phi_names: mechanism parameters.
        transforms: transform of every parameter by name (Identity if absent).
        priors: independent prior of every parameter on the constrained scale.
        covariate_model: conditional distribution of every column with missing cells.
        mechanism: missingness mechanism, None for an ignorable one.
        is_proposals: importance proposal of every column with missing cells.
    """

    column_names: Tuple[str, ...]
    alpha_names: Tuple[str, ...]
    beta_names: Tuple[str, ...]
    design: Tuple[Optional[str], ...]
    phi_names: Tuple[str, ...]
    transforms: Mapping[str, Transform]
    priors: Mapping[str, DistributionSpec]
    covariate_model: Mapping[str, ConditionalDistribution]
    mechanism: Optional[Mechanism]
    is_proposals: Mapping[str, ConditionalDistribution]

    def __post_init__(self) -> None:
        for name in ("column_names", "alpha_names", "beta_names", "design", "phi_names"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(
            self,
            "transforms",
            {name: Transform.parse(self.transforms.get(name)) for name in self.parameter_names},
        )
        self._validate()
        column_index = {name: position for position, name in enumerate(self.column_names)}
        alpha_index = {name: position for position, name in enumerate(self.alpha_names)}
        phi_index = {name: position for position, name in enumerate(self.phi_names)}
        compiled_covariates = {}
        compiled_proposals = {}
        for table, compiled in (
            (self.covariate_model, compiled_covariates),
            (self.is_proposals, compiled_proposals),
        ):
            for column, conditional in table.items():
                position = column_index[column]
                compiled[position] = CompiledConditional(
                    column,
                    conditional,
                    alpha_index,
                    {name: index for name, index in column_index.items() if index < position},
                )
        object.__setattr__(self, "_covariates", compiled_covariates)
        object.__setattr__(self, "_proposals", compiled_proposals)
        object.__setattr__(
            self,
            "_design_columns",
            np.array([-1 if name is None else column_index[name] for name in self.design]),
        )
        if self.mechanism is not None:
            object.__setattr__(
                self,
                "_mechanism_columns",
                np.array([column_index[name] for name in self.mechanism.columns]),
            )
            object.__setattr__(
                self,
                "_predictor",
                CompiledExpression(self.mechanism.predictor, phi_index, column_index),
            )

    def _validate(self) -> None:
        names = self.parameter_names
        if len(set(names)) != len(names):
            raise ValueError(f"duplicated parameter names: {names}")
        if len(set(self.column_names)) != len(self.column_names):
            raise ValueError(f"duplicated column names: {self.column_names}")
        overlap = set(names) & set(self.column_names)
        if overlap:
            raise ValueError(f"names used both as parameters and columns: {', '.join(sorted(overlap))}")
        if len(self.design) != len(self.beta_names):
            raise ValueError(f"{len(self.design)} design columns given for {len(self.beta_names)} coefficients")
        for column in self.design:
            if column is not None and column not in self.column_names:
                raise ValueError(f"design column {column} not among columns {self.column_names}")
        missing_priors = set(names) - set(self.priors)
        if missing_priors:
            raise ValueError(f"parameters without a prior: {', '.join(sorted(missing_priors))}")
        extra_priors = set(self.priors) - set(names)
        if extra_priors:
            raise ValueError(f"priors for unknown parameters: {', '.join(sorted(extra_priors))}")
        for name in names:
            prior = self.priors[name]
            transform = self.transforms[name]
            if prior.family is Family.beta and transform is not Transform.logit:
                raise ValueError(f"parameter {name} has a Beta prior and needs the Logit transform")
            if prior.family in (Family.inverse_gamma, Family.lognormal) and transform is Transform.identity:
                raise ValueError(f"parameter {name} has a positive prior and needs a Log transform")
        for label, table in (("covariate model", self.covariate_model), ("importance proposal", self.is_proposals)):
            for column, conditional in table.items():
                if column not in self.column_names:
                    raise ValueError(f"{label} for unknown column {column}")
                position = self.column_names.index(column)
                for referenced in conditional.columns:
                    if referenced not in self.column_names:
                        raise ValueError(f"{label} of {column} references unknown column {referenced}")
                    if self.column_names.index(referenced) >= position:
                        raise ValueError(
                            f"{label} of {column} references {referenced}, only earlier columns can be conditioned on"
                        )
                unknown = set(conditional.parameters) - set(self.alpha_names)
                if unknown:
                    raise ValueError(
                        f"{label} of {column} references {', '.join(sorted(unknown))}, not covariate-model parameters"
                    )
        if self.mechanism is not None:
            for column in self.mechanism.columns + self.mechanism.predictor.columns:
                if column not in self.column_names:
                    raise ValueError(f"mechanism references undeclared column {column}")
            unknown = set(self.mechanism.predictor.parameters) - set(self.phi_names)
            if unknown:
                raise ValueError(f"mechanism references {', '.join(sorted(unknown))}, not mechanism parameters")

    @property
    def parameter_names(self) -> Tuple[str, ...]:
        return self.alpha_names + self.beta_names + self.phi_names

    @property
    def parameter_transforms(self) -> Tuple[Transform, ...]:
        return tuple(self.transforms[name] for name in self.parameter_names)

    def param_vector(self, values: Union[Mapping[str, float], Sequence[float]]) -> ParamVector:
        """Build a parameter vector in this model's layout.
        Args:
            values: constrained values by name (all parameters) or in layout order.
        Returns:
            the parameter vector.
        """
        if isinstance(values, Mapping):
            missing = set(self.parameter_names) - set(values)
            if missing:
                raise ValueError(f"missing values for parameters: {', '.join(sorted(missing))}")
            flat = [float(values[name]) for name in self.parameter_names]
        else:
            flat = [float(value) for value in values]
        n_alpha, n_beta = len(self.alpha_names), len(self.beta_names)
        if len(flat) != len(self.parameter_names):
            raise ValueError(f"expected {len(self.parameter_names)} values, got {len(flat)}")
        return ParamVector(
            alpha=flat[:n_alpha],
            beta=flat[n_alpha : n_alpha + n_beta],
            phi=flat[n_alpha + n_beta :],
            transforms=self.parameter_transforms,
            names=self.parameter_names,
        )

    def validate(self, data: Dataset) -> None:
        """Check that the model can be evaluated on a dataset.
        Raises:
            ValueError: in case columns differ or a column with missing cells lacks a
                covariate-model entry or an importance proposal.
        """
        if tuple(data.column_names) != self.column_names:
            raise ValueError(f"dataset columns {data.column_names} differ from model columns {self.column_names}")
        for position in data.columns_with_missing():
            column = self.column_names[position]
            if position not in self._covariates:  # type: ignore
                raise ValueError(f"column {column} has missing cells but no covariate-model entry")
            if position not in self._proposals:  # type: ignore
                raise ValueError(f"column {column} has missing cells but no importance proposal")

    def covariate_conditional(self, column: int) -> CompiledConditional:
        try:
            return self._covariates[column]  # type: ignore
        except KeyError:
            raise ValueError(f"column {self.column_names[column]} has missing cells but no covariate-model entry")

    def proposal_conditional(self, column: int) -> CompiledConditional:
        try:
            return self._proposals[column]  # type: ignore
        except KeyError:
            raise ValueError(f"column {self.column_names[column]} has missing cells but no importance proposal")

    # batched evaluations on completed covariates of shape (..., n, p)

    def linear_predictor(self, x: np.ndarray, beta: np.ndarray) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (len(self.design),):
            raise ValueError(f"beta has {beta.size} coefficients for {len(self.design)} design columns")
        columns = self._design_columns  # type: ignore
        eta = np.zeros(x.shape[:-1])
        for coefficient, column in zip(beta, columns):
            eta = eta + (coefficient if column < 0 else coefficient * x[..., column])
        return eta

    def conditional_log_likelihood(self, data: Dataset, x: np.ndarray, beta: np.ndarray) -> np.ndarray:
        return bernoulli_logit_log_likelihood(data.y, self.linear_predictor(x, beta))

    def covariate_log_density(self, data: Dataset, x: np.ndarray, alpha: np.ndarray) -> np.ndarray:
        total = np.zeros(x.shape[:-2])
        for column, rows in data.missing_by_column:
            conditional = self.covariate_conditional(column)
            total = total + conditional.log_density(alpha, x, rows, column).sum(axis=-1)
        return total

    @property
    def mechanism_columns(self) -> np.ndarray:
        """Positions of the mechanism-governed columns."""
        if self.mechanism is None:
            return np.zeros(0, dtype=int)
        return self._mechanism_columns  # type: ignore

    def mechanism_log_odds(self, x: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """Inclusion log odds of every row, shape (..., n)."""
        if self.mechanism is None:
            raise ValueError("the model has no missingness mechanism")
        return self._predictor(np.asarray(phi, dtype=float), x)  # type: ignore

    def mechanism_log_density(self, data: Dataset, x: np.ndarray, phi: np.ndarray) -> np.ndarray:
        if self.mechanism is None:
            return np.zeros(x.shape[:-2])
        eta = self.mechanism_log_odds(x, phi)
        observed = data.mask[:, self.mechanism_columns]
        # log IL(eta) = -log1p(exp(-eta)), log(1 - IL(eta)) = -log1p(exp(eta))
        per_row = (
            np.where(observed, -np.logaddexp(0.0, -eta[..., None]), -np.logaddexp(0.0, eta[..., None]))
        )
        return per_row.sum(axis=(-2, -1))

    def log_joint(self, data: Dataset, x: np.ndarray, theta: ParamVector) -> np.ndarray:
        """Mechanism + conditional likelihood + covariate model on completed data."""
        return (
            self.mechanism_log_density(data, x, theta.phi)
            + self.conditional_log_likelihood(data, x, theta.beta)
            + self.covariate_log_density(data, x, theta.alpha)
        )

    def draw_from_prior(self, stream: RngStream) -> ParamVector:
        """Draw every parameter independently from its prior."""
        generator = stream.on(Channel.initialisation).generator()
        return self.param_vector([sample(self.priors[name], generator) for name in self.parameter_names])


def bernoulli_logit_log_likelihood(y: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """sum_i y_i eta_i - log(1 + exp(eta_i)), overflow safe."""
    return (y * eta - np.logaddexp(0.0, eta)).sum(axis=-1)


def _completed(data: Dataset, fill: Optional[MissingFill]) -> np.ndarray:
    if fill is None:
        if data.n_missing:
            raise ValueError("a fill is required for a dataset with missing cells")
        return data.x.copy()
    if len(fill.cells) != data.n_missing:
        raise ValueError(f"fill covers {len(fill.cells)} cells, dataset has {data.n_missing} missing cells")
    return data.complete(fill.values)


def _scalar(value: np.ndarray) -> Union[float, np.ndarray]:
    return float(value) if np.ndim(value) == 0 else value


def log_cond_likelihood(
    data: Dataset,
    fill: Optional[MissingFill],
    beta: np.ndarray,
    spec: Optional[ModelSpec] = None,
) -> Union[float, np.ndarray]:
    """Logistic-regression log likelihood of the responses given completed covariates.
    Args:
        data: the dataset.
        fill: values of the missing cells (a batch of fills evaluates a batch).
        beta: regression coefficients.
        spec: model whose design maps coefficients to columns; without it every column
            is a design column, in order.
    Returns:
        the log likelihood.
    Raises:
        ValueError: in case beta does not match the design columns.
    """
    x = _completed(data, fill)
    if spec is not None:
        return _scalar(spec.conditional_log_likelihood(data, x, beta))
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (data.n_columns,):
        raise ValueError(f"beta has {beta.size} coefficients for {data.n_columns} design columns")
    return _scalar(bernoulli_logit_log_likelihood(data.y, x @ beta))


def log_covariate_model(
    data: Dataset, fill: Optional[MissingFill], alpha: np.ndarray, spec: ModelSpec
) -> Union[float, np.ndarray]:
    """Sequential covariate-model log density of the missing cells.

    Rows without missing cells contribute 0.
    Raises:
        ValueError: in case a column with missing cells has no covariate-model entry.
    """
    return _scalar(spec.covariate_log_density(data, _completed(data, fill), np.asarray(alpha, dtype=float)))


def log_mechanism(
    data: Dataset, fill: Optional[MissingFill], phi: np.ndarray, spec: ModelSpec
) -> Union[float, np.ndarray]:
    """Log probability of the inclusion indicator on the mechanism-governed cells."""
    return _scalar(spec.mechanism_log_density(data, _completed(data, fill), np.asarray(phi, dtype=float)))


def log_prior(theta: ParamVector, spec: ModelSpec) -> float:
    """Sum of independent prior log densities on the constrained scale; log-zero when a
    coordinate leaves its support."""
    total = 0.0
    for name, value in theta.as_dict().items():
        total += log_pdf(spec.priors[name], value)
        if total == LOG_ZERO:
            break
    return float(total)

