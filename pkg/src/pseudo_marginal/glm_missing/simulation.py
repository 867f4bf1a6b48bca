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
"""Synthetic datasets drawn from the full generative model."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Union

import numpy as np
import pandas as pd
from scipy.special import expit

from .configuration import RunConfig
from .datasets.core import write_dataset, write_truth
from .diagnostics import missingness_report
from .distributions import draw
from .models.core import CompiledConditional, Dataset
from .models.expressions import CompiledExpression
from .rng import Channel, RngStream

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())


@dataclass(frozen=True)
class SimulatedData:
    data: Dataset
    truth: Dict[str, float]

    @property
    def missingness(self) -> pd.DataFrame:
        return missingness_report(self.data)


def simulate(config: RunConfig, seed: int) -> SimulatedData:
    """Draw covariates, responses and the inclusion indicator at the true parameters.

    Columns are generated in order, each conditioned on the previous ones; the response
    follows the logistic regression and the mask follows the mechanism of the
    `simulation` block (the model mechanism by default). Every draw comes from the
    simulation stream of the seed.
    Args:
        config: configuration with a `simulation` block.
        seed: root seed.
    Returns:
        the dataset, missing cells masked, and the true parameters.
    Raises:
        ValueError: in case the configuration lacks a simulation block or a true value.
    """
    if config.simulation is None:
        raise ValueError("the configuration has no simulation block")
    simulation = config.simulation
    spec = config.model_spec()
    missing_truth = set(spec.parameter_names) - set(simulation.truth)
    if missing_truth:
        raise ValueError(f"simulation truth lacks {', '.join(sorted(missing_truth))}")
    ungenerated = set(config.columns) - set(simulation.columns)
    if ungenerated:
        raise ValueError(f"simulation block does not generate columns {', '.join(sorted(ungenerated))}")
    theta = spec.param_vector(simulation.truth)
    names = list(spec.parameter_names)
    parameter_index = {name: position for position, name in enumerate(names)}
    values = theta.flat
    generator = RngStream(seed, 0, 0, Channel.simulation).generator()
    rows = np.arange(simulation.rows)
    x = np.zeros((simulation.rows, len(config.columns)))
    for position, column in enumerate(config.columns):
        conditional = CompiledConditional(
            column,
            simulation.columns[column].parse(names, config.columns),
            parameter_index,
            {name: index for index, name in enumerate(config.columns) if index < position},
        )
        params = conditional.parameters(values, x, rows)
        x[:, position] = draw(conditional.family, [np.broadcast_to(value, rows.shape) for value in params], generator)
        if not np.all(np.isfinite(x[:, position])):
            raise ValueError(f"simulated column {column} holds non-finite values, check its parameters")
    y = (generator.random(simulation.rows) < expit(spec.linear_predictor(x, theta.beta))).astype(float)
    mask = np.ones_like(x, dtype=bool)
    if simulation.mechanism is not None:
        mechanism = simulation.mechanism.parse(names, config.columns)
        log_odds = CompiledExpression(
            mechanism.predictor, parameter_index, {name: index for index, name in enumerate(config.columns)}
        )(values, x)
        governed = [config.columns.index(column) for column in mechanism.columns]
    elif spec.mechanism is not None:
        log_odds = spec.mechanism_log_odds(x, theta.phi)
        governed = list(spec.mechanism_columns)
    else:
        governed = []
    if governed:
        observed = generator.random((simulation.rows, len(governed))) < expit(log_odds)[:, None]
        mask[:, governed] = observed
    data = Dataset(y, x, mask, tuple(config.columns), config.response)
    fractions = ", ".join(f"{name} {100 * value:.1f}%" for name, value in data.missing_fraction().items())
    logger.info(f"simulated {simulation.rows} rows - missing: {fractions}")
    return SimulatedData(data, dict(theta.as_dict()))


def write_simulation(result: SimulatedData, config: RunConfig, out_dir: Union[str, Path]) -> Dict[str, Path]:
    """Write data.csv, truth.yaml, missingness.csv and a config.yaml pointing at the data."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "data": write_dataset(result.data, out_dir / "data.csv"),
        "truth": write_truth(result.truth, out_dir / "truth.yaml"),
    }
    paths["missingness"] = out_dir / "missingness.csv"
    result.missingness.to_csv(paths["missingness"], index=False, float_format="%.17g", lineterminator="\n")
    copy = RunConfig.from_dict(config.to_dict())
    copy.data = "data.csv"
    paths["config"] = copy.to_yaml(out_dir / "config.yaml")
    for name, path in paths.items():
        logger.info(f"{name} written to {path}")
    return paths
