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
"""Pseudo-marginal Metropolis-Hastings chain and its exact-likelihood counterpart."""

import logging
from contextlib import nullcontext
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import yaml

from . import __version__
from .estimator import (
    LogLikEstimate,
    enumerate_completions,
    estimate_loglik,
    exact_loglik,
    worker_pool,
)
from .models.core import Dataset, ModelSpec, log_prior
from .models.parameters import ParamVector
from .rng import Channel, RngStream

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

PSEUDO_MARGINAL = "pseudo-marginal"
EXACT = "exact"


@dataclass(frozen=True, eq=False)
class ProposalSpec:
    """Gaussian random walk on the unconstrained space.

    Attributes:
        scales: per-coordinate standard deviations; a zero scale freezes a coordinate.
        matrix: optional dense covariance, replacing the scales.
    """

    scales: np.ndarray
    matrix: Optional[np.ndarray] = None
    cholesky: Optional[np.ndarray] = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        scales = np.array(self.scales, dtype=float, ndmin=1)
        if np.any(~np.isfinite(scales)) or np.any(scales < 0.0):
            raise ValueError(f"proposal scales must be finite and non-negative, got {scales}")
        object.__setattr__(self, "scales", scales)
        if self.matrix is not None:
            matrix = np.array(self.matrix, dtype=float)
            if matrix.shape != (scales.size, scales.size):
                raise ValueError(f"proposal matrix shape {matrix.shape} does not match {scales.size} coordinates")
            if not np.allclose(matrix, matrix.T):
                raise ValueError("proposal matrix must be symmetric")
            try:
                cholesky = np.linalg.cholesky(matrix)
            except np.linalg.LinAlgError:
                raise ValueError("proposal matrix must be positive definite")
            object.__setattr__(self, "matrix", matrix)
            object.__setattr__(self, "cholesky", cholesky)

    @property
    def marginal_scales(self) -> np.ndarray:
        """Standard deviation of every coordinate of the step actually proposed."""
        if self.matrix is not None:
            return np.sqrt(np.diag(self.matrix))
        return self.scales

    def noise(self, generator: np.random.Generator) -> np.ndarray:
        z = generator.standard_normal(self.scales.size)
        if self.cholesky is not None:
            return self.cholesky @ z
        return self.scales * z


@dataclass(frozen=True)
class ChainState:
    """Current state of the chain.

    `stored_log_estimate` is the estimate computed when `theta` was accepted; it is
    reused, never recomputed, until the next acceptance.
    """

    theta: ParamVector
    stored_log_estimate: float
    iteration: int = 0
    accepted_count: int = 0


@dataclass(frozen=True)
class TraceMeta:
    """Run metadata persisted next to a trace."""

    mode: str
    n_samples: Optional[int]
    root_seed: int
    iterations: int
    burn_in: int
    proposal_scales: Dict[str, float]
    initial: Dict[str, float]
    initial_log_estimate: float
    accepted_count: int
    acceptance_rate: float = float("nan")
    # full covariance of the step when configured, proposal_scales are then its marginals
    proposal_matrix: Optional[List[List[float]]] = None
    version: str = __version__

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, configuration: Dict[str, Any]) -> "TraceMeta":
        return cls(**configuration)


@dataclass(eq=False)
class Trace:
    """Stored chain: constrained parameters, log estimates and acceptance flags."""

    names: Tuple[str, ...]
    samples: np.ndarray
    log_estimates: np.ndarray
    accepted: np.ndarray
    meta: TraceMeta

    def __post_init__(self) -> None:
        self.names = tuple(self.names)
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1, len(self.names))
        self.log_estimates = np.asarray(self.log_estimates, dtype=float)
        self.accepted = np.asarray(self.accepted, dtype=bool)
        if not (self.samples.shape[0] == self.log_estimates.size == self.accepted.size):
            raise ValueError("trace columns have different lengths")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted.mean()) if len(self) else float("nan")

    def column(self, name: str) -> np.ndarray:
        return self.samples[:, self.names.index(name)]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.samples, columns=list(self.names))
        frame["log_estimate"] = self.log_estimates
        frame["accepted"] = self.accepted.astype(int)
        return frame

    @staticmethod
    def meta_path(path: Union[str, Path]) -> Path:
        path = Path(path)
        return path.with_name(f"{path.name}.meta.yaml")

    def write(self, path: Union[str, Path]) -> Path:
        """Write the trace CSV and its metadata sidecar.
        Args:
            path: CSV path.
        Returns:
            the sidecar path.
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        sidecar = self.meta_path(path)
        with open(sidecar, "w") as fp:
            yaml.safe_dump(self.meta.to_dict(), fp, sort_keys=False)
        return sidecar

    @classmethod
    def read(cls, path: Union[str, Path]) -> "Trace":
        """Read a trace written by `write`.
        Raises:
            FileNotFoundError: in case the trace does not exist.
            ValueError: in case the CSV lacks the trace columns.
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"trace {path} not found")
        frame = pd.read_csv(path, float_precision="round_trip")
        for column in ("log_estimate", "accepted"):
            if column not in frame.columns:
                raise ValueError(f"{path} is not a trace, column {column} missing")
        names = [column for column in frame.columns if column not in ("log_estimate", "accepted")]
        sidecar = cls.meta_path(path)
        if sidecar.exists():
            with open(sidecar) as fp:
                meta = TraceMeta.from_dict(yaml.safe_load(fp))
        else:
            logger.warning(f"metadata {sidecar} not found, using defaults")
            meta = TraceMeta(
                mode=PSEUDO_MARGINAL,
                n_samples=None,
                root_seed=0,
                iterations=len(frame),
                burn_in=0,
                proposal_scales={},
                initial={},
                initial_log_estimate=float("nan"),
                accepted_count=int(frame["accepted"].sum()),
                acceptance_rate=float(frame["accepted"].mean()),
            )
        return cls(
            tuple(names),
            frame[names].to_numpy(dtype=float),
            frame["log_estimate"].to_numpy(dtype=float),
            frame["accepted"].to_numpy(dtype=int) == 1,
            meta,
        )


def propose(theta: ParamVector, prop: ProposalSpec, stream: RngStream) -> ParamVector:
    """Random-walk proposal on the unconstrained space.

    The walk is symmetric, so the proposal-density ratio of the acceptance rule is 1
    and is not computed.
    Args:
        theta: current parameters.
        prop: the random walk.
        stream: stream consumed by the noise.
    Returns:
        proposed parameters on the constrained scale.
    """
    if prop.scales.size != len(theta):
        raise ValueError(f"proposal has {prop.scales.size} scales for {len(theta)} parameters")
    noise = prop.noise(stream.generator())
    proposed = theta.from_unconstrained(theta.to_unconstrained() + noise).flat
    # frozen coordinates keep their exact value
    return theta.with_flat(np.where(noise == 0.0, theta.flat, proposed))


def log_target_terms(theta: ParamVector, spec: ModelSpec) -> float:
    """Log prior plus log Jacobian of the unconstrained parameterisation."""
    prior = log_prior(theta, spec)
    if not np.isfinite(prior):
        return -np.inf
    return prior + theta.log_jacobian()


def accept_log_ratio(
    current: ChainState,
    proposal: Tuple[ParamVector, Union[LogLikEstimate, float]],
    spec: ModelSpec,
) -> float:
    """Log acceptance ratio of the pseudo-marginal (or exact) rule.
    Args:
        current: chain state with its stored estimate.
        proposal: proposed parameters and their log likelihood (estimate).
        spec: the model.
    Returns:
        the log ratio; -inf auto-rejects, +inf forces acceptance of a finite proposal
        from a degenerate current state.
    """
    theta, estimate = proposal
    log_estimate = estimate.log_value if isinstance(estimate, LogLikEstimate) else float(estimate)
    numerator = log_estimate + log_target_terms(theta, spec)
    if not np.isfinite(numerator):
        return -np.inf
    denominator = current.stored_log_estimate + log_target_terms(current.theta, spec)
    if not np.isfinite(denominator):
        return np.inf
    return float(numerator - denominator)


def _run(
    data: Dataset,
    spec: ModelSpec,
    prop: ProposalSpec,
    init: ParamVector,
    iterations: int,
    root_seed: int,
    log_likelihood: Callable[[ParamVector, int], float],
    mode: str,
    n_samples: Optional[int],
    burn_in: int,
    log_every: int,
) -> Trace:
    if iterations < 1:
        raise ValueError(f"the number of iterations must be positive, got {iterations}")
    spec.validate(data)
    if not np.isfinite(log_target_terms(init, spec)):
        raise ValueError(f"initial parameters {init.as_dict()} have zero prior density")
    state = ChainState(init, log_likelihood(init, 0), 0, 0)
    initial_log_estimate = state.stored_log_estimate
    if not np.isfinite(initial_log_estimate):
        logger.warning("initial log-likelihood estimate is -inf, the first finite proposal will be accepted")
    samples = np.empty((iterations, len(init)))
    log_estimates = np.empty(iterations)
    accepted = np.zeros(iterations, dtype=bool)
    for iteration in range(1, iterations + 1):
        candidate = propose(state.theta, prop, RngStream(root_seed, iteration, 0, Channel.proposal))
        if np.isfinite(log_target_terms(candidate, spec)):
            log_estimate = log_likelihood(candidate, iteration)
            ratio = accept_log_ratio(state, (candidate, log_estimate), spec)
        else:
            log_estimate, ratio = -np.inf, -np.inf
        uniform = RngStream(root_seed, iteration, 0, Channel.acceptance).generator().random()
        with np.errstate(divide="ignore"):
            accept = bool(np.log(uniform) < min(0.0, ratio))
        if accept:
            state = ChainState(candidate, log_estimate, iteration, state.accepted_count + 1)
        else:
            state = ChainState(state.theta, state.stored_log_estimate, iteration, state.accepted_count)
        row = iteration - 1
        samples[row] = state.theta.flat
        log_estimates[row] = state.stored_log_estimate
        accepted[row] = accept
        if log_every and iteration % log_every == 0:
            logger.info(
                f"iteration {iteration}/{iterations} - acceptance rate {state.accepted_count / iteration:.3f} - log estimate {state.stored_log_estimate:.4f}"
            )
    meta = TraceMeta(
        mode=mode,
        n_samples=n_samples,
        root_seed=int(root_seed),
        iterations=int(iterations),
        burn_in=int(burn_in),
        proposal_scales={name: float(scale) for name, scale in zip(init.names, prop.marginal_scales)},
        proposal_matrix=None if prop.matrix is None else prop.matrix.tolist(),
        initial=init.as_dict(),
        initial_log_estimate=float(initial_log_estimate),
        accepted_count=int(state.accepted_count),
        acceptance_rate=float(state.accepted_count / iterations),
    )
    logger.info(f"{mode} chain finished - acceptance rate {state.accepted_count / iterations:.3f}")
    return Trace(init.names, samples, log_estimates, accepted, meta)


def run_chain(
    data: Dataset,
    spec: ModelSpec,
    prop: ProposalSpec,
    init: ParamVector,
    iterations: int,
    n_samples: int,
    root_seed: int,
    workers: int = 1,
    burn_in: int = 0,
    log_every: int = 1000,
) -> Trace:
    """Run the pseudo-marginal chain.

    Iteration i draws its proposal, importance samples and acceptance uniform from the
    streams (root_seed, i, .) so a rerun reproduces the trace exactly, for any number
    of workers.
    Args:
        data: the dataset.
        spec: the model.
        prop: random-walk proposal.
        init: initial parameters.
        iterations: number of transitions recorded.
        n_samples: importance samples per estimate.
        root_seed: root seed.
        workers: threads evaluating the importance samples.
        burn_in: recorded in the metadata, rows are never discarded.
        log_every: progress logging period, 0 disables it.
    Returns:
        the trace.
    Raises:
        ValueError: in case the initial parameters have zero prior density.
    """
    pool = worker_pool(workers)

    def log_likelihood(theta: ParamVector, iteration: int) -> float:
        return estimate_loglik(data, spec, theta, n_samples, iteration, root_seed, pool).log_value

    with pool if pool is not None else nullcontext():
        return _run(data, spec, prop, init, iterations, root_seed, log_likelihood, PSEUDO_MARGINAL, n_samples, burn_in, log_every)


def run_exact_chain(
    data: Dataset,
    spec: ModelSpec,
    prop: ProposalSpec,
    init: ParamVector,
    iterations: int,
    root_seed: int,
    enumeration_cap: int = 2**16,
    burn_in: int = 0,
    log_every: int = 1000,
) -> Trace:
    """Run the marginal chain with the exact observed-data likelihood.

    Same streams and mechanics as `run_chain`, the estimate replaced by enumeration of
    the missing completions.
    Raises:
        EnumerationError: in case the completions can not be enumerated within the cap.
    """
    spec.validate(data)
    if data.n_missing:
        enumerate_completions(data, spec, enumeration_cap)

    def log_likelihood(theta: ParamVector, iteration: int) -> float:
        return exact_loglik(data, spec, theta, enumeration_cap)

    return _run(data, spec, prop, init, iterations, root_seed, log_likelihood, EXACT, None, burn_in, log_every)


def initial_parameters(
    spec: ModelSpec, root_seed: int, overrides: Optional[Dict[str, float]] = None
) -> ParamVector:
    """Initial state: a prior draw with configured values overriding it."""
    theta = spec.draw_from_prior(RngStream(root_seed, 0, 0, Channel.initialisation))
    if overrides:
        theta = theta.with_values(overrides)
    return theta


def chain_seeds(root_seed: int, chains: int) -> List[int]:
    """Distinct root seeds of independent chains."""
    return [root_seed + chain for chain in range(chains)]
