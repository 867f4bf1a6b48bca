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
"""Importance-sampling estimator tests."""

import numpy as np
import pytest
from scipy import stats
from scipy.special import logsumexp

from pseudo_marginal.glm_missing.configuration import (  # type: ignore
    RunConfig,
    shipped_configuration,
)
from pseudo_marginal.glm_missing.estimator import (  # type: ignore
    EnumerationError,
    draw_missing,
    enumerate_completions,
    estimate_loglik,
    exact_loglik,
    log_joint_batch,
    log_weights,
    loglik_variance,
    worker_pool,
)
from pseudo_marginal.glm_missing.models.core import (  # type: ignore
    Dataset,
    MissingFill,
    log_cond_likelihood,
    log_covariate_model,
    log_mechanism,
)
from pseudo_marginal.glm_missing.rng import Channel, RngStream  # type: ignore
from pseudo_marginal.glm_missing.simulation import simulate  # type: ignore


def test_no_missing_cells_is_exact():
    _, spec, _ = _toy()
    data = Dataset([1.0, 0.0, 1.0], [[1.0], [0.0], [1.0]], np.ones((3, 1), dtype=bool), ("x",))
    theta = _toy_theta(spec)
    expected = log_mechanism(data, None, theta.phi, spec) + log_cond_likelihood(data, None, theta.beta, spec)
    for n_samples in (1, 7, 100):
        estimate = estimate_loglik(data, spec, theta, n_samples, 3, 11)
        assert estimate.log_value == pytest.approx(expected, abs=1e-12)
        assert estimate.n_samples == n_samples
    assert exact_loglik(data, spec, theta) == pytest.approx(expected, abs=1e-12)


def test_draw_missing_without_missing_cells():
    _, spec, _ = _toy()
    data = Dataset([1.0], [[1.0]], [[True]], ("x",))
    fill, log_q = draw_missing(data, spec, _toy_theta(spec), RngStream(1))
    assert fill.values.size == 0
    assert log_q == 0.0


def test_draw_missing_scaled_t_proposals():
    config = shipped_configuration("simulation_study.yaml")
    spec = config.model_spec()
    data = simulate(config, seed=2021).data
    theta = spec.param_vector(config.simulation.truth)
    stream = RngStream(2021, 0, 0, Channel.importance)
    fill, log_q = draw_missing(data, spec, theta, stream)
    assert fill.values.shape == (data.n_missing,)
    assert log_q == pytest.approx(stats.t(10.0, 0.0, 1.0).logpdf(fill.values).sum(), rel=1e-12)
    replay, replay_log_q = draw_missing(data, spec, theta, stream)
    assert replay == fill
    assert replay_log_q == log_q


def test_log_weights_follow_per_sample_streams():
    _, spec, data = _toy()
    theta = _toy_theta(spec)
    weights = log_weights(data, spec, theta, 100, 5, 13)
    for sample in (0, 63, 64, 99):
        fill, log_q = draw_missing(data, spec, theta, RngStream(13, 5, sample, Channel.importance))
        expected = log_joint_batch(data, spec, theta, MissingFill(fill.cells, fill.values[None, :]))[0] - log_q
        assert weights[sample] == pytest.approx(expected, abs=1e-12)


def test_exact_loglik_equals_enumerated_sum():
    _, spec, data = _toy()
    theta = _toy_theta(spec)
    assert data.n_missing == 3
    terms = []
    for completion in enumerate_completions(data, spec, 8):
        fill = MissingFill.for_dataset(data, completion)
        terms.append(
            np.exp(
                log_mechanism(data, fill, theta.phi, spec)
                + log_cond_likelihood(data, fill, theta.beta, spec)
                + log_covariate_model(data, fill, theta.alpha, spec)
            )
        )
    assert len(terms) == 8
    assert np.exp(exact_loglik(data, spec, theta)) == pytest.approx(sum(terms), rel=1e-10)


@pytest.mark.parametrize("n_missing", [1, 2])
def test_estimator_is_unbiased(n_missing):
    _, spec, data = _toy()
    data = _first_missing(data, n_missing)
    theta = _toy_theta(spec)
    exact = np.exp(exact_loglik(data, spec, theta))
    # every single-sample weight is an unbiased estimate on its own
    estimates = np.exp(log_weights(data, spec, theta, 100000, 0, 17))
    standard_error = estimates.std(ddof=1) / np.sqrt(estimates.size)
    assert abs(estimates.mean() - exact) < 3.0 * standard_error


@pytest.mark.slow
def test_estimator_is_unbiased_for_several_samples():
    _, spec, data = _toy()
    theta = _toy_theta(spec)
    exact = np.exp(exact_loglik(data, spec, theta))
    replicates, n_samples = 100000, 4
    # consecutive groups of sample streams form independent estimates
    weights = log_weights(data, spec, theta, replicates * n_samples, 0, 19).reshape(replicates, n_samples)
    estimates = np.exp(logsumexp(weights, axis=1) - np.log(n_samples))
    assert estimates[0] == pytest.approx(np.exp(estimate_loglik(data, spec, theta, n_samples, 0, 19).log_value), rel=1e-12)
    standard_error = estimates.std(ddof=1) / np.sqrt(estimates.size)
    assert abs(estimates.mean() - exact) < 3.0 * standard_error


def test_estimate_is_deterministic():
    _, spec, data = _toy()
    theta = _toy_theta(spec)
    first = estimate_loglik(data, spec, theta, 50, 4, 23)
    second = estimate_loglik(data, spec, theta, 50, 4, 23)
    assert first == second
    assert estimate_loglik(data, spec, theta, 50, 5, 23).log_value != first.log_value


def test_worker_count_does_not_change_the_estimate():
    config = shipped_configuration("simulation_study.yaml")
    spec = config.model_spec()
    data = simulate(config, seed=3).data
    theta = spec.param_vector(config.simulation.truth)
    sequential = estimate_loglik(data, spec, theta, 300, 2, 29)
    pool = worker_pool(4)
    with pool:
        parallel = estimate_loglik(data, spec, theta, 300, 2, 29, pool)
    assert parallel.log_value == sequential.log_value
    assert worker_pool(1) is None


def test_invalid_sample_count():
    _, spec, data = _toy()
    with pytest.raises(ValueError):
        estimate_loglik(data, spec, _toy_theta(spec), 0, 0, 1)


def test_variance_without_missing_cells_is_zero():
    _, spec, _ = _toy()
    data = Dataset([1.0, 0.0], [[1.0], [0.0]], np.ones((2, 1), dtype=bool), ("x",))
    result = loglik_variance(data, spec, _toy_theta(spec), 10, 5, 31)
    assert result.variance == 0.0
    assert result.degenerate == 0


def test_variance_is_reproducible_and_needs_two_replicates():
    _, spec, data = _toy()
    theta = _toy_theta(spec)
    assert loglik_variance(data, spec, theta, 4, 20, 37) == loglik_variance(data, spec, theta, 4, 20, 37)
    with pytest.raises(ValueError):
        loglik_variance(data, spec, theta, 4, 1, 37)


def test_variance_decreases_with_sample_count():
    _, spec, data = _toy()
    theta = _toy_theta(spec).with_values({"beta1": 2.0})
    variances = [loglik_variance(data, spec, theta, n, 400, 41).variance for n in (2, 8, 32, 128)]
    inversions = sum(later > earlier for earlier, later in zip(variances, variances[1:]))
    assert inversions <= 1
    assert variances[-1] < variances[0]


@pytest.mark.slow
def test_variance_scales_inversely_with_sample_count():
    config = shipped_configuration("simulation_study.yaml")
    spec = config.model_spec()
    data = simulate(config, seed=2021).data
    theta = spec.param_vector(config.simulation.truth)
    small = loglik_variance(data, spec, theta, 100, 200, 43).variance
    large = loglik_variance(data, spec, theta, 400, 200, 43).variance
    assert 2.0 <= small / large <= 8.0


def test_degenerate_replicates_are_counted():
    # a negative proposal scale leaves every weight at log-zero
    spec = _toy_config("ScaledT", [1.0, 0.0, -1.0]).model_spec()
    _, _, data = _toy()
    result = loglik_variance(data, spec, _toy_theta(spec), 3, 4, 47)
    assert result.variance == np.inf
    assert result.degenerate == 4
    assert estimate_loglik(data, spec, _toy_theta(spec), 3, 0, 47).log_value == -np.inf


def test_exact_proposal_leaves_only_the_likelihood_term():
    config = _toy_config("Bernoulli", ["p_x"])
    spec = config.model_spec()
    _, _, data = _toy()
    theta = _toy_theta(spec).with_values({"p_x": 0.3})
    for sample in range(20):
        fill, log_q = draw_missing(data, spec, theta, RngStream(53, 0, sample, Channel.importance))
        assert log_covariate_model(data, fill, theta.alpha, spec) - log_q == pytest.approx(0.0, abs=1e-12)


def test_enumeration_limits():
    _, spec, data = _toy()
    assert enumerate_completions(data, spec, 8).shape == (8, 3)
    with pytest.raises(EnumerationError):
        enumerate_completions(data, spec, 4)
    with pytest.raises(ValueError):
        exact_loglik(data, spec, _toy_theta(spec), cap=4)
    config = shipped_configuration("simulation_study.yaml")
    continuous = simulate(config, seed=1).data
    with pytest.raises(EnumerationError):
        enumerate_completions(continuous, config.model_spec(), 2**16)


def _toy_config(family=None, params=None):
    config = shipped_configuration("binary_toy.yaml")
    if family is None:
        return config
    configuration = config.to_dict()
    configuration["importance"] = {"x": {"family": family, "params": params}}
    return RunConfig.from_dict(configuration, base_dir=config.base_dir)


def _toy():
    config = _toy_config()
    return config, config.model_spec(), config.load_data()


def _toy_theta(spec):
    return spec.param_vector({"p_x": 0.6, "beta0": 0.4, "beta1": -1.1, "phi0": 0.3})


def _first_missing(data, n_missing):
    """Keep the first n missing cells, observe the others at 1."""
    mask = data.mask.copy()
    for row in data.missing_rows[n_missing:]:
        mask[row, 0] = True
    x = np.where(mask, np.where(data.mask, data.x, 1.0), np.nan)
    return Dataset(data.y, x, mask, data.column_names)
