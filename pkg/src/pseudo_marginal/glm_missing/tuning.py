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
"""Choice of the number of importance samples and profile surfaces of the estimate."""

import logging
from contextlib import nullcontext
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .diagnostics import surface_roughness
from .estimator import estimate_loglik, loglik_variance, worker_pool
from .models.core import Dataset, ModelSpec
from .models.parameters import ParamVector

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

# recommended upper bound on the variance of the log estimate
VARIANCE_THRESHOLD = 2.0


class TuningError(RuntimeError):
    """No number of importance samples produced a usable estimate."""


@dataclass(frozen=True)
class TuningRow:
    n_samples: int
    variance: float
    degenerate: int
    replicates: int


@dataclass(frozen=True)
class TuningReport:
    """Variance of the log estimate over a grid of N."""

    rows: Tuple[TuningRow, ...]
    threshold: float = VARIANCE_THRESHOLD

    @property
    def recommended(self) -> Optional[int]:
        """Smallest N whose variance does not exceed the threshold."""
        for row in self.rows:
            if row.variance <= self.threshold:
                return row.n_samples
        return None

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            {
                "n_samples": [row.n_samples for row in self.rows],
                "variance": [row.variance for row in self.rows],
                "degenerate": [row.degenerate for row in self.rows],
                "replicates": [row.replicates for row in self.rows],
            }
        )
        frame["recommended"] = frame["n_samples"] == self.recommended
        return frame


def tune(
    data: Dataset,
    spec: ModelSpec,
    theta: ParamVector,
    n_grid: Sequence[int],
    replicates: int,
    root_seed: int,
    workers: int = 1,
    threshold: float = VARIANCE_THRESHOLD,
) -> TuningReport:
    """Variance of the log estimate at fixed parameters for every N of a grid.
    Args:
        data: the dataset.
        spec: the model.
        theta: parameters, typically a pilot estimate.
        n_grid: numbers of importance samples, evaluated in increasing order.
        replicates: independent estimates per N.
        root_seed: root seed.
        workers: threads evaluating the importance samples.
        threshold: variance bound of the recommendation.
    Returns:
        the report.
    Raises:
        TuningError: in case every replicate is degenerate at every N.
    """
    grid = sorted(set(int(n) for n in n_grid))
    if not grid:
        raise ValueError("empty grid of importance sample sizes")
    spec.validate(data)
    pool = worker_pool(workers)
    rows = []
    with pool if pool is not None else nullcontext():
        for n_samples in grid:
            result = loglik_variance(data, spec, theta, n_samples, replicates, root_seed, pool)
            logger.info(f"N={n_samples} - log-likelihood variance {result.variance:.4f} - degenerate replicates {result.degenerate}/{replicates}")
            rows.append(TuningRow(n_samples, result.variance, result.degenerate, replicates))
    if all(row.degenerate == row.replicates for row in rows):
        raise TuningError(
            "every log-likelihood estimate is -inf at every N, the importance proposals do not cover the missing data, consider heavier-tailed proposals"
        )
    report = TuningReport(tuple(rows), threshold)
    if report.recommended is None:
        logger.warning(f"no N in {grid} reaches a log-likelihood variance of {threshold}, extend the grid")
    else:
        logger.info(f"recommended number of importance samples: {report.recommended}")
    return report


class SeedMode(str, Enum):
    """Importance fills of a surface: fresh for every point, or common to the grid."""

    fresh = "fresh"
    common = "common"


@dataclass(frozen=True)
class SurfaceGrid:
    """Regular grid over two parameters."""

    param_a: str
    param_b: str
    range_a: Tuple[float, float]
    range_b: Tuple[float, float]
    steps_a: int
    steps_b: int

    def __post_init__(self) -> None:
        if self.param_a == self.param_b:
            raise ValueError(f"surface parameters must differ, got {self.param_a} twice")
        if self.steps_a < 1 or self.steps_b < 1:
            raise ValueError(f"surface steps must be positive, got {self.steps_a} and {self.steps_b}")

    @property
    def values_a(self) -> np.ndarray:
        return np.linspace(self.range_a[0], self.range_a[1], self.steps_a)

    @property
    def values_b(self) -> np.ndarray:
        return np.linspace(self.range_b[0], self.range_b[1], self.steps_b)

    def points(self) -> List[Tuple[float, float]]:
        return [(a, b) for a in self.values_a for b in self.values_b]


def surface(
    data: Dataset,
    spec: ModelSpec,
    theta: ParamVector,
    grid: SurfaceGrid,
    n_samples: int,
    root_seed: int,
    seed_mode: SeedMode = SeedMode.fresh,
    replicates: int = 1,
    workers: int = 1,
) -> pd.DataFrame:
    """Negative log estimate over a grid of two parameters, the others held fixed.

    Fresh mode draws new fills at every point of every replicate; common mode reuses
    the fills of a replicate at every point, so only the parameters move.
    Args:
        data: the dataset.
        spec: the model.
        theta: values of the fixed parameters.
        grid: the two parameters and their grid.
        n_samples: importance samples per estimate.
        root_seed: root seed.
        seed_mode: fresh or common fills.
        replicates: independent replications of the surface.
        workers: threads evaluating the importance samples.
    Returns:
        a frame with columns replicate, the two parameters and neg_log_likelihood.
    """
    for name in (grid.param_a, grid.param_b):
        if name not in theta.names:
            raise ValueError(f"surface parameter {name} not among {theta.names}")
    if replicates < 1:
        raise ValueError(f"the number of replicates must be positive, got {replicates}")
    seed_mode = SeedMode(seed_mode)
    spec.validate(data)
    points = grid.points()
    pool = worker_pool(workers)
    records = []
    with pool if pool is not None else nullcontext():
        for replicate in range(replicates):
            for position, (value_a, value_b) in enumerate(points):
                point = theta.with_values({grid.param_a: value_a, grid.param_b: value_b})
                iteration = replicate if seed_mode is SeedMode.common else replicate * len(points) + position
                estimate = estimate_loglik(data, spec, point, n_samples, iteration, root_seed, pool)
                records.append((replicate, value_a, value_b, -estimate.log_value))
            logger.info(f"surface replicate {replicate + 1}/{replicates} done")
    return pd.DataFrame(records, columns=["replicate", grid.param_a, grid.param_b, "neg_log_likelihood"])


def surface_matrix(frame: pd.DataFrame, grid: SurfaceGrid, replicate: int = 0) -> np.ndarray:
    """One replicate of a surface frame as a (steps_a, steps_b) matrix."""
    values = frame.loc[frame["replicate"] == replicate, "neg_log_likelihood"].to_numpy(dtype=float)
    return values.reshape(grid.steps_a, grid.steps_b)


def replicate_roughness(frame: pd.DataFrame, grid: SurfaceGrid) -> List[float]:
    """Roughness between consecutive replicates of a surface frame."""
    replicates = sorted(frame["replicate"].unique())
    return [
        surface_roughness(surface_matrix(frame, grid, first), surface_matrix(frame, grid, second))
        for first, second in zip(replicates, replicates[1:])
    ]
