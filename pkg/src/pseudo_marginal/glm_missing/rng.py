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
"""Counter-based random streams for reproducible parallel Monte Carlo."""

import logging
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

_UINT64 = 2**64


class Channel(IntEnum):
    """Independent purposes a chain draws random numbers for."""

    importance = 0
    proposal = 1
    acceptance = 2
    initialisation = 3
    simulation = 4


@dataclass(frozen=True)
class RngStream:
    """Identity of a random stream.

    A stream is a Philox generator keyed by the root seed and the channel, whose
    256-bit counter starts at the (iteration, sample) position. Each stream owns
    2**128 counter blocks, so streams of distinct positions never overlap and can be
    created in any order, on any worker.
    """

    root_seed: int
    iteration: int = 0
    sample: int = 0
    channel: Channel = Channel.importance

    def __post_init__(self) -> None:
        for name in ("root_seed", "iteration", "sample"):
            value = getattr(self, name)
            if not 0 <= int(value) < _UINT64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {value}")

    @property
    def key(self) -> int:
        return int(self.root_seed) + (int(self.channel) << 64)

    @property
    def counter(self) -> int:
        return (int(self.iteration) << 192) + (int(self.sample) << 128)

    def generator(self) -> np.random.Generator:
        """Create the generator positioned at the start of this stream.
        Returns:
            a numpy generator, deterministic given the stream identity.
        """
        return np.random.Generator(np.random.Philox(counter=self.counter, key=self.key))

    def at(self, iteration: int, sample: int = 0) -> "RngStream":
        """Same root seed and channel, another position."""
        return RngStream(self.root_seed, iteration, sample, self.channel)

    def on(self, channel: Channel) -> "RngStream":
        """Same position, another channel."""
        return RngStream(self.root_seed, self.iteration, self.sample, channel)
