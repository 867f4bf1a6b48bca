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
"""Random stream tests."""

import numpy as np
import pytest

from pseudo_marginal.glm_missing.rng import Channel, RngStream  # type: ignore


def test_stream_identity_fixes_the_draws():
    first = RngStream(2021, 17, 3, Channel.proposal).generator().standard_normal(50)
    second = RngStream(2021, 17, 3, Channel.proposal).generator().standard_normal(50)
    np.testing.assert_array_equal(first, second)


def test_state_layout():
    state = RngStream(11, 5, 7, Channel.acceptance).generator().bit_generator.state["state"]
    np.testing.assert_array_equal(state["key"], [11, int(Channel.acceptance)])
    np.testing.assert_array_equal(state["counter"], [0, 0, 7, 5])


def test_positions_and_channels_are_distinct():
    base = RngStream(3)
    streams = [base, base.at(1), base.at(0, 1), base.on(Channel.proposal), RngStream(4)]
    draws = [set(stream.generator().integers(0, 2**63, size=1000).tolist()) for stream in streams]
    for i, left in enumerate(draws):
        for right in draws[i + 1 :]:
            assert not left & right


def test_at_and_on_keep_the_other_coordinates():
    stream = RngStream(9, 2, 4, Channel.simulation)
    assert stream.at(8) == RngStream(9, 8, 0, Channel.simulation)
    assert stream.on(Channel.importance) == RngStream(9, 2, 4, Channel.importance)


@pytest.mark.parametrize("field", ["root_seed", "iteration", "sample"])
def test_out_of_range_coordinates(field):
    for value in (-1, 2**64):
        with pytest.raises(ValueError):
            RngStream(**{"root_seed": 0, field: value})
