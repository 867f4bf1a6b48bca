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
"""Dataset routines: CSV ingestion with missingness masks and writing."""

import csv
import logging
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd
import yaml

from ..models.core import Dataset

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

MISSING_TOKENS = ("", "NA")


def _parse_column(name: str, values: pd.Series) -> pd.Series:
    """Parse a column of strings, missing tokens to NaN.
    Raises:
        ValueError: in case a token is neither numeric nor a missing token.
    """
    stripped = values.str.strip()
    missing = stripped.isin(MISSING_TOKENS)
    parsed = pd.to_numeric(stripped.where(~missing), errors="coerce")
    invalid = parsed.isna() & ~missing
    if invalid.any():
        row = int(invalid.idxmax())
        raise ValueError(f"column {name} holds non-numeric value '{values[row]}' in data row {row + 1}")
    return parsed


def _ragged_line(path: Path) -> Optional[int]:
    """Line number of the first record whose field count differs from the header."""
    with open(path, newline="") as fp:
        reader = csv.reader(fp)
        width = None
        for record in reader:
            if not record:
                continue
            if width is None:
                width = len(record)
            elif len(record) != width:
                return reader.line_num
    return None


def load_dataset(
    path: Union[str, Path], response: str = "y", columns: Optional[Sequence[str]] = None
) -> Dataset:
    """Load a dataset from a CSV file with a header row.

    Empty cells and "NA" mark missing covariates; any other non-numeric token is an error.
    Args:
        path: CSV path.
        response: name of the binary response column, completely observed.
        columns: covariate columns in model order, all the other columns by default.
    Returns:
        the dataset.
    Raises:
        FileNotFoundError: in case the file does not exist.
        TypeError: in case the file is not a CSV.
        ValueError: in case of ragged rows, unknown columns, invalid tokens or a
            non-binary response.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset {path} not found")
    if path.suffix.lower() != ".csv":
        raise TypeError(f"{path} type is not supported for dataset")
    try:
        # headerless read so that a data row longer than the header is a parser error
        raw = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, index_col=False)
    except pd.errors.EmptyDataError:
        raise ValueError(f"{path} is empty")
    except pd.errors.ParserError as error:
        raise ValueError(f"{path} has ragged rows: {error}")
    # pandas pads short rows with empty fields, indistinguishable from missing cells
    line = _ragged_line(path)
    if line is not None:
        raise ValueError(f"{path} has ragged rows, first at line {line}")
    frame = raw.iloc[1:].reset_index(drop=True)
    frame.columns = [str(name).strip() for name in raw.iloc[0]]
    if response not in frame.columns:
        raise ValueError(f"response column {response} not in {path}, columns: {list(frame.columns)}")
    if columns is None:
        columns = [column for column in frame.columns if column != response]
    unknown = [column for column in columns if column not in frame.columns]
    if unknown:
        raise ValueError(f"columns {', '.join(unknown)} not in {path}, columns: {list(frame.columns)}")
    y = _parse_column(response, frame[response])
    if y.isna().any() or not y.isin([0.0, 1.0]).all():
        raise ValueError(f"response {response} must be completely observed and binary (0/1)")
    parsed = pd.concat([_parse_column(column, frame[column]) for column in columns], axis=1)
    x = parsed.to_numpy(dtype=float).reshape(len(frame), len(columns))
    mask = ~np.isnan(x)
    data = Dataset(y.to_numpy(dtype=float), np.where(mask, x, 0.0), mask, tuple(columns), response)
    logger.info(f"loaded {path}: {data.n_rows} rows, {data.n_columns} covariates, {data.n_missing} missing cells")
    return data


def write_dataset(data: Dataset, path: Union[str, Path]) -> Path:
    """Write a dataset as CSV, missing cells left empty.

    Values are written with 17 significant digits so that a reload is exact.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({data.response_name: data.y.astype(int)})
    for position, column in enumerate(data.column_names):
        frame[column] = pd.Series(data.x[:, position]).where(data.mask[:, position])
    frame.to_csv(path, index=False, na_rep="", float_format="%.17g", lineterminator="\n")
    return path


def write_truth(truth: Dict[str, float], path: Union[str, Path]) -> Path:
    """Write true parameter values as a YAML mapping."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fp:
        yaml.safe_dump({name: float(value) for name, value in truth.items()}, fp, sort_keys=False)
    return path


def load_truth(path: Union[str, Path]) -> Dict[str, float]:
    """Read a YAML mapping of parameter name to value.
    Raises:
        FileNotFoundError: in case the file does not exist.
        ValueError: in case the content is not a flat mapping of numbers.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"parameter file {path} not found")
    with open(path) as fp:
        content = yaml.safe_load(fp)
    if not isinstance(content, dict):
        raise ValueError(f"{path} must hold a mapping of parameter names to values")
    values: Dict[str, float] = {}
    for name, value in content.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"parameter {name} in {path} has non-numeric value {value!r}")
        values[str(name)] = float(value)
    return values
