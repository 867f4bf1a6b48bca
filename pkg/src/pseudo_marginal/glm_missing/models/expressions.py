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
"""Affine parameter expressions used to condition distributions on data and parameters.

An expression is a sum of terms, each term the product of a numeric coefficient, any
number of model parameters and at most one data column, e.g. in a configuration file

    [a_dvtotal, b_dvtotal*dvc]      ->  a_dvtotal + b_dvtotal * x_dvc
    [phi0, phi1*x1, phi2*x2]        ->  phi0 + phi1 * x_1 + phi2 * x_2
    -0.5*x1                         ->  -0.5 * x_1

so that parameters of a distribution stay affine in the data columns.
"""

import logging
import re
from dataclasses import dataclass
from typing import Any, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

ExpressionValue = Union[float, int, str, Sequence[Union[float, int, str]]]

_IDENTIFIER = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")


@dataclass(frozen=True)
class Term:
    """coefficient * prod(parameters) * column."""

    coefficient: float = 1.0
    parameters: Tuple[str, ...] = ()
    column: Optional[str] = None


@dataclass(frozen=True)
class AffineExpression:
    """A sum of terms, affine in the data columns."""

    terms: Tuple[Term, ...]

    @property
    def parameters(self) -> Tuple[str, ...]:
        return tuple(
            dict.fromkeys(name for term in self.terms for name in term.parameters)
        )

    @property
    def columns(self) -> Tuple[str, ...]:
        return tuple(
            dict.fromkeys(term.column for term in self.terms if term.column is not None)
        )

    @classmethod
    def constant(cls, value: float) -> "AffineExpression":
        return cls((Term(float(value)),))

    @classmethod
    def parse(
        cls,
        value: ExpressionValue,
        parameter_names: Sequence[str],
        column_names: Sequence[str],
    ) -> "AffineExpression":
        """Parse an expression from its configuration value.
        Args:
            value: a number, a term string or a list of those.
            parameter_names: names resolved as parameters.
            column_names: names resolved as data columns.
        Returns:
            the parsed expression.
        Raises:
            ValueError: in case a name is unknown, ambiguous or a term is not affine.
        """
        items: List[Union[float, int, str]]
        if isinstance(value, (list, tuple)):
            items = list(value)
        else:
            items = [value]  # type: ignore
        if not items:
            raise ValueError("empty expression")
        parameters = set(parameter_names)
        columns = set(column_names)
        ambiguous = parameters & columns
        if ambiguous:
            raise ValueError(
                f"names used both as parameters and columns: {', '.join(sorted(ambiguous))}"
            )
        return cls(tuple(_parse_term(item, parameters, columns) for item in items))


def _parse_term(item: Union[float, int, str], parameters, columns) -> Term:
    if isinstance(item, bool):
        raise ValueError(f"boolean {item} is not a valid expression term")
    if isinstance(item, (int, float)):
        return Term(float(item))
    if not isinstance(item, str):
        raise ValueError(f"expression term {item!r} must be a number or a string")
    text = item.replace(" ", "")
    coefficient = 1.0
    if text.startswith("-"):
        coefficient, text = -1.0, text[1:]
    elif text.startswith("+"):
        text = text[1:]
    factors: List[str] = []
    column: Optional[str] = None
    for factor in text.split("*"):
        if not factor:
            raise ValueError(f"malformed expression term '{item}'")
        try:
            coefficient *= float(factor)
            continue
        except ValueError:
            pass
        if not _IDENTIFIER.match(factor):
            raise ValueError(f"malformed factor '{factor}' in expression term '{item}'")
        if factor in parameters:
            factors.append(factor)
        elif factor in columns:
            if column is not None:
                raise ValueError(
                    f"expression term '{item}' multiplies two columns, only affine terms are supported"
                )
            column = factor
        else:
            raise ValueError(f"unknown parameter or column '{factor}' in expression term '{item}'")
    return Term(coefficient, tuple(factors), column)


class CompiledExpression:
    """An expression bound to parameter and column positions for fast evaluation."""

    def __init__(
        self,
        expression: AffineExpression,
        parameter_index: Mapping[str, int],
        column_index: Mapping[str, int],
    ) -> None:
        """Bind an expression.
        Args:
            expression: the parsed expression.
            parameter_index: position of every admissible parameter in the vector
                passed at evaluation time.
            column_index: position of every admissible column in the data matrix.
        Raises:
            ValueError: in case the expression references something not admissible.
        """
        self.expression = expression
        self.terms: List[Tuple[float, Tuple[int, ...], int]] = []
        for term in expression.terms:
            for name in term.parameters:
                if name not in parameter_index:
                    raise ValueError(
                        f"parameter '{name}' can not be referenced here, admissible: {', '.join(parameter_index) or 'none'}"
                    )
            if term.column is not None and term.column not in column_index:
                raise ValueError(
                    f"column '{term.column}' can not be referenced here, admissible: {', '.join(column_index) or 'none'}"
                )
            self.terms.append(
                (
                    term.coefficient,
                    tuple(parameter_index[name] for name in term.parameters),
                    -1 if term.column is None else column_index[term.column],
                )
            )

    def __call__(
        self, parameters: np.ndarray, x: np.ndarray, rows: Optional[np.ndarray] = None
    ) -> np.ndarray:
        """Evaluate the expression on a (batch of) completed data matrices.
        Args:
            parameters: parameter vector.
            x: data of shape (..., n, p).
            rows: optional row selection.
        Returns:
            values of shape (..., n) or (..., len(rows)).
        """
        selected = x if rows is None else x[..., rows, :]
        value = np.zeros(selected.shape[:-1])
        for coefficient, parameter_positions, column in self.terms:
            factor = coefficient
            for position in parameter_positions:
                factor = factor * parameters[position]
            if column < 0:
                value = value + factor
            else:
                value = value + factor * selected[..., column]
        return value


def to_configuration(value: ExpressionValue) -> Any:
    """Normalise an expression configuration value for serialisation."""
    if isinstance(value, (list, tuple)):
        return [to_configuration(item) for item in value]
    if isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value
