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
"""Dataset loading unit tests."""

import importlib_resources
import numpy as np
import pytest

from pseudo_marginal.glm_missing.datasets.core import (  # type: ignore
    load_dataset,
    load_truth,
    write_dataset,
    write_truth,
)
from pseudo_marginal.glm_missing.models.core import Dataset  # type: ignore


def test_load_dataset_missing_tokens():
    with importlib_resources.as_file(
        importlib_resources.files("pseudo_marginal") / "glm_missing/tests/missing_example.csv"
    ) as file_path:
        data = load_dataset(file_path)

    assert data.column_names == ("x1", "x2")
    np.testing.assert_array_equal(data.y, [1.0, 0.0, 1.0, 0.0])
    np.testing.assert_array_equal(data.mask, [[True, True], [True, False], [True, False], [True, True]])
    assert data.missing_cells == [(1, 1), (2, 1)]
    assert data.x[3, 0] == pytest.approx(0.25)
    assert data.x[3, 1] == pytest.approx(-0.3)


def test_load_dataset_column_selection():
    with importlib_resources.as_file(
        importlib_resources.files("pseudo_marginal") / "glm_missing/tests/missing_example.csv"
    ) as file_path:
        data = load_dataset(file_path, columns=["x2", "x1"])
        with pytest.raises(ValueError):
            load_dataset(file_path, columns=["x3"])
        with pytest.raises(ValueError):
            load_dataset(file_path, response="outcome")

    assert data.column_names == ("x2", "x1")
    assert data.missing_cells == [(1, 0), (2, 0)]


@pytest.mark.parametrize("name", ["ragged_example.csv", "invalid_token_example.csv"])
def test_load_dataset_malformed(name):
    with importlib_resources.as_file(
        importlib_resources.files("pseudo_marginal") / f"glm_missing/tests/{name}"
    ) as file_path:
        with pytest.raises(ValueError):
            load_dataset(file_path)


def test_load_dataset_short_rows_and_bad_responses(tmp_path):
    short = tmp_path / "short.csv"
    short.write_text("y,x1,x2\n1,0.5,1.0\n0,1.5\n")
    with pytest.raises(ValueError, match="ragged rows, first at line 3"):
        load_dataset(short)
    blank_line = tmp_path / "blank_line.csv"
    blank_line.write_text("y,x1\n1,0.5\n\n0,\n")
    data = load_dataset(blank_line)
    assert data.n_rows == 2
    assert data.missing_cells == [(1, 0)]
    missing_response = tmp_path / "missing_response.csv"
    missing_response.write_text("y,x\n1,0.5\n,1.0\n")
    with pytest.raises(ValueError):
        load_dataset(missing_response)
    counts = tmp_path / "counts.csv"
    counts.write_text("y,x\n2,0.5\n0,1.0\n")
    with pytest.raises(ValueError):
        load_dataset(counts)
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ValueError):
        load_dataset(empty)


def test_load_dataset_file_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path / "absent.csv")
    other = tmp_path / "data.json"
    other.write_text("{}")
    with pytest.raises(TypeError):
        load_dataset(other)


def test_write_then_load_keeps_every_cell(tmp_path):
    generator = np.random.default_rng(0)
    x = generator.normal(size=(20, 3))
    mask = generator.random(size=(20, 3)) > 0.25
    data = Dataset((generator.random(20) < 0.5).astype(float), np.where(mask, x, np.nan), mask, ("a", "b", "c"))
    path = write_dataset(data, tmp_path / "data.csv")
    loaded = load_dataset(path)
    np.testing.assert_array_equal(loaded.mask, data.mask)
    np.testing.assert_allclose(loaded.x[loaded.mask], data.x[data.mask], rtol=1e-14)
    np.testing.assert_array_equal(loaded.y, data.y)
    assert path.read_text().splitlines()[0] == "y,a,b,c"


def test_truth_files(tmp_path):
    path = write_truth({"alpha": 1, "beta0": -2.5}, tmp_path / "truth.yaml")
    assert load_truth(path) == {"alpha": 1.0, "beta0": -2.5}
    bad = tmp_path / "bad.yaml"
    bad.write_text("alpha: one\n")
    with pytest.raises(ValueError):
        load_truth(bad)
    listed = tmp_path / "listed.yaml"
    listed.write_text("- 1.0\n- 2.0\n")
    with pytest.raises(ValueError):
        load_truth(listed)
    with pytest.raises(FileNotFoundError):
        load_truth(tmp_path / "absent.yaml")
