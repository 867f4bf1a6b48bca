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
"""Posterior summaries and convergence diagnostics."""

import logging
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from sklearn.linear_model import LogisticRegression

from .models.core import Dataset, ModelSpec
from .sampler import Trace

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

# below these lengths the computation is undefined
MIN_RHAT_LENGTH = 4
MIN_MCSE_LENGTH = 4
MIN_INTERVAL_LENGTH = 1
# below these lengths the results are unreliable
RECOMMENDED_RHAT_LENGTH = 4
RECOMMENDED_MCSE_LENGTH = 100
RECOMMENDED_INTERVAL_LENGTH = 40


def _vector(samples: Sequence[float], minimum: int, recommended: int, what: str) -> np.ndarray:
    values = np.asarray(samples, dtype=float).ravel()
    if values.size < minimum:
        raise ValueError(f"{what} needs at least {minimum} samples, got {values.size}")
    if values.size < recommended:
        logger.warning(f"{what} computed on {values.size} samples, at least {recommended} are recommended")
    return values


def split_rhat(samples: Sequence[float]) -> float:
    """Potential scale reduction of one chain split in two halves.

    The first draw of an odd-length chain is dropped.
    Args:
        samples: the chain.
    Returns:
        R-hat, +inf for a degenerate chain (zero within-half variance).
    """
    values = _vector(samples, MIN_RHAT_LENGTH, RECOMMENDED_RHAT_LENGTH, "split R-hat")
    if values.size % 2:
        values = values[1:]
    half = values.size // 2
    halves = values.reshape(2, half)
    within = halves.var(axis=1, ddof=1).mean()
    between = half * halves.mean(axis=1).var(ddof=1)
    if within == 0.0:
        return np.inf
    return float(np.sqrt((within * (half - 1) / half + between / half) / within))


def mcse(samples: Sequence[float]) -> float:
    """Batch-means Monte Carlo standard error of the mean.

    floor(sqrt(n)) batches of floor(n / batches) draws; the leading remainder is trimmed.
    """
    values = _vector(samples, MIN_MCSE_LENGTH, RECOMMENDED_MCSE_LENGTH, "MCSE")
    batches = int(np.floor(np.sqrt(values.size)))
    size = values.size // batches
    means = values[values.size - batches * size :].reshape(batches, size).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(batches))


def credible_interval(samples: Sequence[float], level: float = 0.95) -> Tuple[float, float]:
    """Equal-tail interval from empirical quantiles, linear interpolation between order statistics."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    values = _vector(samples, MIN_INTERVAL_LENGTH, RECOMMENDED_INTERVAL_LENGTH, "credible interval")
    tail = (1.0 - level) / 2.0
    lower, upper = np.quantile(values, [tail, 1.0 - tail])
    return float(lower), float(upper)


@dataclass(frozen=True)
class SummaryRow:
    """Posterior summary of one parameter on the constrained scale."""

    name: str
    estimate: float
    mcse: float
    cred_lower: float
    cred_upper: float
    rhat: float
    degenerate: bool = False
    truth: Optional[float] = None
    covered: Optional[bool] = None
    mle: Optional[float] = None


def summarize(trace: Trace, burn_in: int, level: float = 0.95) -> List[SummaryRow]:
    """Summaries of every parameter after discarding the first `burn_in` rows.
    Args:
        trace: the chain.
        burn_in: number of leading rows discarded.
        level: credible level.
    Returns:
        one row per parameter, in trace order.
    Raises:
        ValueError: in case burn_in is negative or leaves no rows.
    """
    if burn_in < 0 or burn_in >= len(trace):
        raise ValueError(f"burn-in {burn_in} must be in [0, {len(trace)})")
    rows = []
    for name, samples in zip(trace.names, trace.samples[burn_in:].T):
        rhat = split_rhat(samples)
        degenerate = not np.isfinite(rhat)
        if degenerate:
            logger.warning(f"parameter {name} never moved after burn-in, R-hat is undefined")
        lower, upper = credible_interval(samples, level)
        rows.append(SummaryRow(name, float(samples.mean()), mcse(samples), lower, upper, rhat, degenerate))
    return rows


def with_truth(rows: Sequence[SummaryRow], truth: Mapping[str, float]) -> List[SummaryRow]:
    """Attach true values and interval coverage, for simulated data."""
    return [
        replace(
            row,
            truth=float(truth[row.name]),
            covered=bool(row.cred_lower <= truth[row.name] <= row.cred_upper),
        )
        if row.name in truth
        else row
        for row in rows
    ]


def with_mle(rows: Sequence[SummaryRow], mle: Mapping[str, float]) -> List[SummaryRow]:
    """Attach complete-case maximum-likelihood estimates."""
    return [replace(row, mle=float(mle[row.name])) if row.name in mle else row for row in rows]


def summary_frame(rows: Sequence[SummaryRow]) -> pd.DataFrame:
    frame = pd.DataFrame([asdict(row) for row in rows])
    frame = frame.rename(columns={"name": "param"})
    return frame.dropna(axis=1, how="all")


def format_summary(rows: Sequence[SummaryRow], acceptance_rate: Optional[float] = None) -> str:
    """Aligned text table: param, estimate, 95% cred., R-hat, MCSE and extras."""
    table = pd.DataFrame(
        {
            "param": [row.name for row in rows],
            "estimate": [f"{row.estimate:.3f}" for row in rows],
            "cred.": [f"({row.cred_lower:.3f}, {row.cred_upper:.3f})" for row in rows],
            "R-hat": [f"{row.rhat:.3f}" + (" *" if row.degenerate else "") for row in rows],
            "MCSE": [f"{row.mcse:.4f}" for row in rows],
        }
    )
    if any(row.truth is not None for row in rows):
        table["truth"] = ["" if row.truth is None else f"{row.truth:.3f}" for row in rows]
        table["covered"] = ["" if row.covered is None else ("yes" if row.covered else "no") for row in rows]
    if any(row.mle is not None for row in rows):
        table["mle"] = ["" if row.mle is None else f"{row.mle:.3f}" for row in rows]
    text = table.to_string(index=False)
    if acceptance_rate is not None:
        text += f"\nacceptance rate: {acceptance_rate:.3f}"
    if any(row.degenerate for row in rows):
        text += "\n* degenerate chain"
    return text + "\n"


def write_summary(
    rows: Sequence[SummaryRow], path: Union[str, Path], acceptance_rate: Optional[float] = None
) -> Tuple[Path, Path]:
    """Write the summary as CSV and as aligned text next to it.
    Returns:
        the CSV and text paths.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    summary_frame(rows).to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    text_path = path.with_suffix(".txt")
    text_path.write_text(format_summary(rows, acceptance_rate))
    return path, text_path


def rhat_exceeds(rows: Sequence[SummaryRow], threshold: float) -> List[str]:
    """Names of parameters whose R-hat exceeds the threshold, degenerate ones included."""
    return [row.name for row in rows if row.rhat > threshold]


def complete_case_mle(data: Dataset, spec: ModelSpec) -> Dict[str, float]:
    """Unpenalised logistic-regression estimates on the fully observed rows.
    Args:
        data: the dataset.
        spec: the model, mapping coefficients to design columns.
    Returns:
        estimate of every regression coefficient.
    Raises:
        ValueError: in case the complete rows do not hold both response classes.
    """
    rows = data.mask.all(axis=1)
    y = data.y[rows]
    if np.unique(y).size < 2:
        raise ValueError(f"the {int(rows.sum())} complete rows do not hold both response classes")
    intercepts = [name for name, column in zip(spec.beta_names, spec.design) if column is None]
    if len(intercepts) > 1:
        raise ValueError(f"more than one intercept coefficient: {', '.join(intercepts)}")
    slopes = [(name, data.column_index(column)) for name, column in zip(spec.beta_names, spec.design) if column is not None]
    x = data.x[rows][:, [column for _, column in slopes]]
    if not slopes:
        x = np.zeros((int(rows.sum()), 1))
    model = LogisticRegression(penalty=None, fit_intercept=bool(intercepts), tol=1e-8, max_iter=10000)
    model.fit(x, y)
    estimates = {name: float(value) for (name, _), value in zip(slopes, model.coef_[0])}
    if intercepts:
        estimates[intercepts[0]] = float(model.intercept_[0])
    logger.info(f"complete-case fit on {int(rows.sum())} of {data.n_rows} rows")
    return {name: estimates[name] for name in spec.beta_names}


def missingness_report(data: Dataset) -> pd.DataFrame:
    """Per-column count and percentage of missing cells."""
    missing = (~data.mask).sum(axis=0)
    return pd.DataFrame(
        {
            "column": list(data.column_names),
            "missing": missing.astype(int),
            "percent": 100.0 * missing / data.n_rows,
        }
    )


def surface_roughness(grid_a: np.ndarray, grid_b: np.ndarray) -> float:
    """Mean absolute difference between two replications of a surface.

    Points where either replication is not finite are skipped; nan if none is left.
    """
    grid_a = np.asarray(grid_a, dtype=float)
    grid_b = np.asarray(grid_b, dtype=float)
    if grid_a.shape != grid_b.shape:
        raise ValueError(f"surfaces of shapes {grid_a.shape} and {grid_b.shape} can not be compared")
    finite = np.isfinite(grid_a) & np.isfinite(grid_b)
    if not np.all(finite):
        logger.warning(f"{int((~finite).sum())} of {finite.size} surface points are not finite and were skipped")
    if not np.any(finite):
        return float("nan")
    return float(np.abs(grid_a[finite] - grid_b[finite]).mean())
