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
"""Posterior diagnostics unit tests."""

import logging

import numpy as np
import pandas as pd
import pytest
from scipy.optimize import minimize

from pseudo_marginal.glm_missing.configuration import shipped_configuration  # type: ignore
from pseudo_marginal.glm_missing.diagnostics import (  # type: ignore
    complete_case_mle,
    credible_interval,
    format_summary,
    mcse,
    missingness_report,
    rhat_exceeds,
    split_rhat,
    summarize,
    surface_roughness,
    with_mle,
    with_truth,
    write_summary,
)
from pseudo_marginal.glm_missing.models.core import Dataset  # type: ignore
from pseudo_marginal.glm_missing.sampler import Trace, TraceMeta  # type: ignore


def test_split_rhat_closed_form():
    samples = np.arange(1.0, 9.0)
    # halves 1..4 and 5..8: within variance 5/3, between 4 * 8
    expected = np.sqrt((0.75 * 5.0 / 3.0 + 32.0 / 4.0) / (5.0 / 3.0))
    assert split_rhat(samples) == pytest.approx(expected, rel=1e-12)
    assert split_rhat(np.concatenate([[100.0], samples])) == pytest.approx(expected, rel=1e-12)


def test_split_rhat_of_a_repeated_chain():
    half = np.random.default_rng(0).normal(size=100)
    assert split_rhat(np.concatenate([half, half])) == pytest.approx(np.sqrt(99.0 / 100.0), rel=1e-12)


def test_split_rhat_of_a_constant_chain_is_infinite():
    assert split_rhat(np.full(50, 0.3)) == np.inf


def test_credible_interval_interpolation():
    lower, upper = credible_interval(np.arange(1.0, 1001.0))
    assert lower == pytest.approx(25.975, abs=1e-9)
    assert upper == pytest.approx(975.025, abs=1e-9)


def test_credible_intervals_are_nested():
    samples = np.random.default_rng(1).standard_t(5, size=2000)
    intervals = [credible_interval(samples, level) for level in (0.5, 0.9, 0.95)]
    for (inner_lower, inner_upper), (outer_lower, outer_upper) in zip(intervals, intervals[1:]):
        assert outer_lower <= inner_lower <= inner_upper <= outer_upper
    with pytest.raises(ValueError):
        credible_interval(samples, 1.0)


def test_mcse_examples():
    assert mcse(np.full(400, 2.5)) == 0.0
    assert mcse(np.random.default_rng(2).normal(size=10000)) == pytest.approx(0.01, rel=0.5)


def test_mcse_trims_the_leading_remainder():
    samples = np.concatenate([[1e6, -1e6, 5e5], np.tile([0.0, 1.0], 50)])
    # 103 draws: 10 batches of 10, the three leading draws dropped
    assert mcse(samples) == mcse(samples[3:])


def test_minimum_lengths(caplog):
    with pytest.raises(ValueError):
        split_rhat([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        mcse([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        credible_interval([])
    with caplog.at_level(logging.WARNING):
        mcse(np.arange(10.0))
    assert "recommended" in caplog.text


def test_summarize_discards_burn_in():
    generator = np.random.default_rng(3)
    samples = np.column_stack([generator.normal(size=300), generator.normal(2.0, 1.0, size=300)])
    samples[:100] = 50.0
    rows = summarize(_trace(samples), burn_in=100)
    assert [row.name for row in rows] == ["a", "b"]
    assert rows[0].estimate == pytest.approx(samples[100:, 0].mean())
    assert (rows[1].cred_lower, rows[1].cred_upper) == credible_interval(samples[100:, 1])
    assert rows[1].mcse == mcse(samples[100:, 1])
    assert not any(row.degenerate for row in rows)
    for burn_in in (-1, 300, 400):
        with pytest.raises(ValueError):
            summarize(_trace(samples), burn_in=burn_in)


def test_summary_marks_degenerate_chains(tmp_path):
    generator = np.random.default_rng(4)
    samples = np.column_stack([generator.normal(size=200), np.full(200, 1.5)])
    rows = with_truth(summarize(_trace(samples), burn_in=0), {"a": 0.0, "b": 3.0})
    assert rows[1].degenerate and rows[1].rhat == np.inf
    assert rows[0].covered is True
    assert rows[1].covered is False
    assert rhat_exceeds(rows, 1.1) == ["b"]
    text = format_summary(rows, acceptance_rate=0.25)
    assert "inf *" in text
    assert "acceptance rate: 0.250" in text
    assert "covered" in text
    csv_path, text_path = write_summary(with_mle(rows, {"a": 0.1}), tmp_path / "summary.csv", 0.25)
    frame = pd.read_csv(csv_path)
    assert list(frame.columns) == [
        "param",
        "estimate",
        "mcse",
        "cred_lower",
        "cred_upper",
        "rhat",
        "degenerate",
        "truth",
        "covered",
        "mle",
    ]
    assert "mle" in text_path.read_text()


def test_summary_frame_drops_empty_extras(tmp_path):
    samples = np.random.default_rng(5).normal(size=(100, 1))
    csv_path, _ = write_summary(summarize(_trace(samples, names=("a",)), burn_in=0), tmp_path / "summary.csv")
    assert "truth" not in pd.read_csv(csv_path).columns


def test_complete_case_mle_matches_direct_optimisation():
    config = shipped_configuration("simulation_study.yaml")
    spec = config.model_spec()
    generator = np.random.default_rng(6)
    x = generator.normal(size=(400, 2))
    y = (generator.random(400) < 1.0 / (1.0 + np.exp(-(0.5 + x[:, 0] - 0.7 * x[:, 1])))).astype(float)
    mask = np.ones_like(x, dtype=bool)
    mask[:50, 1] = False
    data = Dataset(y, np.where(mask, x, np.nan), mask, ("x1", "x2"))
    estimates = complete_case_mle(data, spec)

    design = np.column_stack([np.ones(350), x[50:]])

    def negative_log_likelihood(beta):
        eta = design @ beta
        return -np.sum(y[50:] * eta - np.logaddexp(0.0, eta))

    optimum = minimize(negative_log_likelihood, np.zeros(3), method="BFGS", options={"gtol": 1e-10}).x
    assert list(estimates) == ["beta0", "beta1", "beta2"]
    np.testing.assert_allclose(list(estimates.values()), optimum, atol=1e-3)


def test_complete_case_mle_needs_both_classes():
    spec = shipped_configuration("simulation_study.yaml").model_spec()
    data = Dataset([1.0, 1.0, 0.0], [[0.1, 0.2], [0.3, 0.4], [0.5, np.nan]], [[True, True], [True, True], [True, False]], ("x1", "x2"))
    with pytest.raises(ValueError):
        complete_case_mle(data, spec)


def test_missingness_report():
    data = Dataset([1.0, 0.0, 1.0, 0.0], np.zeros((4, 2)), [[True, False], [True, False], [True, True], [True, False]], ("x1", "x2"))
    report = missingness_report(data)
    assert report["column"].tolist() == ["x1", "x2"]
    assert report["missing"].tolist() == [0, 3]
    assert report["percent"].tolist() == [0.0, 75.0]


def test_surface_roughness(caplog):
    a = np.array([[1.0, 2.0], [3.0, np.inf]])
    b = np.array([[1.5, 1.0], [3.0, 4.0]])
    with caplog.at_level(logging.WARNING):
        assert surface_roughness(a, b) == pytest.approx(0.5)
    assert "skipped" in caplog.text
    assert np.isnan(surface_roughness(np.full(2, np.nan), np.zeros(2)))
    with pytest.raises(ValueError):
        surface_roughness(np.zeros(2), np.zeros(3))


def _trace(samples, names=("a", "b")):
    samples = np.asarray(samples, dtype=float)
    meta = TraceMeta(
        mode="exact",
        n_samples=None,
        root_seed=0,
        iterations=samples.shape[0],
        burn_in=0,
        proposal_scales={},
        initial={},
        initial_log_estimate=0.0,
        accepted_count=samples.shape[0],
    )
    return Trace(names, samples, np.zeros(samples.shape[0]), np.ones(samples.shape[0], dtype=bool), meta)
