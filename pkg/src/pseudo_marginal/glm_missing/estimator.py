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
"""Unbiased importance-sampling estimator of the observed-data likelihood."""

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.special import logsumexp

from .distributions import Family, draw, log_density
from .models.core import Dataset, MissingFill, ModelSpec
from .models.parameters import ParamVector
from .rng import Channel, RngStream

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

# samples per task handed to the worker pool; fixed so that results do not depend on
# the number of workers
BLOCK_SIZE = 64
ENUMERATION_CHUNK = 4096


class EnumerationError(ValueError):
    """The missing completions can not be enumerated."""


@dataclass(frozen=True)
class LogLikEstimate:
    """Log of an unbiased estimate of the observed-data likelihood.

    Attributes:
        log_value: the log estimate, -inf when every importance weight vanished.
        n_samples: number of importance samples.
        stream_id: stream of the first importance sample; sample k used
            `stream_id.at(stream_id.iteration, k)`.
    """

    log_value: float
    n_samples: int
    stream_id: RngStream


class LogLikVariance(NamedTuple):
    """Sample variance of replicated log estimates."""

    variance: float
    degenerate: int
    n_samples: int
    replicates: int


def worker_pool(workers: int) -> Optional[Parallel]:
    """Thread pool evaluating importance-sample blocks, None for sequential runs."""
    if workers is None or workers <= 1:
        return None
    return Parallel(n_jobs=workers, prefer="threads")


def _draw_block(
    data: Dataset, spec: ModelSpec, alpha: np.ndarray, streams: Sequence[RngStream]
) -> Tuple[np.ndarray, np.ndarray]:
    """Complete the data once per stream, columns in index order.
    Returns:
        completed covariates (B, n, p) and the proposal log densities (B,).
    """
    generators = [stream.generator() for stream in streams]
    size = len(generators)
    x = np.broadcast_to(data.x, (size,) + data.x.shape).copy()
    log_q = np.zeros(size)
    with np.errstate(all="ignore"):
        for column, rows in data.missing_by_column:
            proposal = spec.proposal_conditional(column)
            params = [
                np.broadcast_to(value, (size, rows.size))
                for value in proposal.parameters(alpha, x, rows)
            ]
            for position, generator in enumerate(generators):
                x[position, rows, column] = draw(
                    proposal.family, [value[position] for value in params], generator
                )
            log_q = log_q + log_density(proposal.family, x[:, rows, column], params).sum(axis=-1)
    # invalid proposal parameters leave NaN cells and a log-zero density
    log_q = np.where(np.isfinite(log_q), log_q, np.inf)
    return x, log_q


def draw_missing(
    data: Dataset, spec: ModelSpec, theta: ParamVector, stream: RngStream
) -> Tuple[MissingFill, float]:
    """Draw one complete fill of the missing cells from the importance proposals.
    Args:
        data: the dataset.
        spec: the model.
        theta: current parameters (proposals may depend on alpha).
        stream: stream consumed by the draw.
    Returns:
        the fill and its log proposal density.
    """
    if data.n_missing == 0:
        return MissingFill.for_dataset(data, np.empty(0)), 0.0
    x, log_q = _draw_block(data, spec, theta.alpha, [stream])
    return MissingFill.for_dataset(data, data.fill_values(x[0])), float(log_q[0])


def _block_log_weights(
    data: Dataset, spec: ModelSpec, theta: ParamVector, streams: Sequence[RngStream]
) -> np.ndarray:
    x, log_q = _draw_block(data, spec, theta.alpha, streams)
    with np.errstate(all="ignore"):
        log_weights = spec.log_joint(data, x, theta) - log_q
    return np.where(np.isnan(log_weights), -np.inf, log_weights)


def log_weights(
    data: Dataset,
    spec: ModelSpec,
    theta: ParamVector,
    n_samples: int,
    iteration: int,
    root_seed: int,
    parallel: Optional[Parallel] = None,
) -> np.ndarray:
    """Per-sample log importance weights, in sample order.
    Args:
        data: the dataset.
        spec: the model.
        theta: parameters.
        n_samples: number of importance samples N.
        iteration: iteration index of the streams.
        root_seed: root seed of the streams.
        parallel: optional worker pool.
    Returns:
        array of N log weights.
    """
    if n_samples < 1:
        raise ValueError(f"the number of importance samples must be positive, got {n_samples}")
    base = RngStream(root_seed, iteration, 0, Channel.importance)
    blocks = [
        [base.at(iteration, sample) for sample in range(start, min(start + BLOCK_SIZE, n_samples))]
        for start in range(0, n_samples, BLOCK_SIZE)
    ]
    if parallel is None:
        results: List[np.ndarray] = [_block_log_weights(data, spec, theta, block) for block in blocks]
    else:
        results = parallel(delayed(_block_log_weights)(data, spec, theta, block) for block in blocks)
    return np.concatenate(results)


def reduce_log_weights(weights: np.ndarray) -> float:
    """log(mean(exp(weights))), max-subtracted, -inf when every weight is -inf."""
    if not np.any(np.isfinite(weights)):
        return -np.inf
    return float(logsumexp(weights) - np.log(weights.size))


def log_joint_batch(data: Dataset, spec: ModelSpec, theta: ParamVector, fills: MissingFill) -> np.ndarray:
    """Mechanism + conditional likelihood + covariate model of every fill in a batch.
    Args:
        data: the dataset.
        spec: the model.
        theta: parameters.
        fills: a batch of fills, values of shape (B, n_missing).
    Returns:
        B log joint values, -inf where a term is undefined.
    """
    values = np.asarray(fills.values, dtype=float).reshape(-1, data.n_missing)
    with np.errstate(all="ignore"):
        terms = spec.log_joint(data, data.complete(values), theta)
    return np.where(np.isnan(terms), -np.inf, terms)


def estimate_loglik(
    data: Dataset,
    spec: ModelSpec,
    theta: ParamVector,
    n_samples: int,
    iteration: int,
    root_seed: int,
    parallel: Optional[Parallel] = None,
) -> LogLikEstimate:
    """Importance-sampling estimate of the observed-data log likelihood.

    Without missing cells the estimate is the exact log likelihood and no fill is drawn.
    Args:
        data: the dataset.
        spec: the model.
        theta: parameters.
        n_samples: number of importance samples N.
        iteration: iteration index of the streams.
        root_seed: root seed of the streams.
        parallel: optional worker pool.
    Returns:
        the estimate.
    """
    stream = RngStream(root_seed, iteration, 0, Channel.importance)
    if n_samples < 1:
        raise ValueError(f"the number of importance samples must be positive, got {n_samples}")
    if data.n_missing == 0:
        with np.errstate(all="ignore"):
            log_value = float(spec.log_joint(data, data.x, theta))
        return LogLikEstimate(log_value, n_samples, stream)
    weights = log_weights(data, spec, theta, n_samples, iteration, root_seed, parallel)
    return LogLikEstimate(reduce_log_weights(weights), n_samples, stream)


def enumerate_completions(data: Dataset, spec: ModelSpec, cap: int) -> np.ndarray:
    """Every joint assignment of the missing cells, when their support is binary.
    Args:
        data: the dataset.
        spec: the model.
        cap: maximum number of completions.
    Returns:
        array of shape (2**n_missing, n_missing).
    Raises:
        EnumerationError: in case a missing column is not Bernoulli or the count
            exceeds the cap.
    """
    for column, _ in data.missing_by_column:
        family = spec.covariate_conditional(column).family
        if family is not Family.bernoulli:
            raise EnumerationError(
                f"column {data.column_names[column]} follows a {family.value} model, only Bernoulli columns can be enumerated"
            )
    n_missing = data.n_missing
    if n_missing >= 63 or 2**n_missing > cap:
        raise EnumerationError(f"{n_missing} binary missing cells exceed the enumeration cap of {cap} completions")
    codes = np.arange(2**n_missing)[:, None]
    return ((codes >> np.arange(n_missing)) & 1).astype(float)


def exact_loglik(data: Dataset, spec: ModelSpec, theta: ParamVector, cap: int = 2**16) -> float:
    """Observed-data log likelihood by summing over every completion.
    Args:
        data: the dataset.
        spec: the model.
        theta: parameters.
        cap: maximum number of completions.
    Returns:
        the exact log likelihood.
    """
    with np.errstate(all="ignore"):
        if data.n_missing == 0:
            return float(spec.log_joint(data, data.x, theta))
        completions = enumerate_completions(data, spec, cap)
    terms = np.concatenate(
        [
            log_joint_batch(data, spec, theta, MissingFill.for_dataset(data, completions[start : start + ENUMERATION_CHUNK]))
            for start in range(0, completions.shape[0], ENUMERATION_CHUNK)
        ]
    )
    if not np.any(np.isfinite(terms)):
        return -np.inf
    return float(logsumexp(terms))


def loglik_replicates(
    data: Dataset,
    spec: ModelSpec,
    theta: ParamVector,
    n_samples: int,
    replicates: int,
    root_seed: int,
    parallel: Optional[Parallel] = None,
) -> np.ndarray:
    """Independent log estimates at fixed parameters; replicate r uses iteration r."""
    return np.array(
        [
            estimate_loglik(data, spec, theta, n_samples, replicate, root_seed, parallel).log_value
            for replicate in range(replicates)
        ]
    )


def loglik_variance(
    data: Dataset,
    spec: ModelSpec,
    theta: ParamVector,
    n_samples: int,
    replicates: int,
    root_seed: int,
    parallel: Optional[Parallel] = None,
) -> LogLikVariance:
    """Sample variance of the log estimate at fixed parameters.
    Returns:
        the variance (infinite when a replicate is degenerate) and the number of
        degenerate replicates.
    """
    if replicates < 2:
        raise ValueError(f"at least two replicates are needed, got {replicates}")
    values = loglik_replicates(data, spec, theta, n_samples, replicates, root_seed, parallel)
    degenerate = int(np.sum(~np.isfinite(values)))
    if degenerate:
        logger.warning(f"{degenerate} of {replicates} log-likelihood estimates degenerate at N={n_samples}")
        return LogLikVariance(np.inf, degenerate, n_samples, replicates)
    return LogLikVariance(float(np.var(values, ddof=1)), 0, n_samples, replicates)
