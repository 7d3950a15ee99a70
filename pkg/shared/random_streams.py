"""Named, counter-based random streams.

Every consumer of randomness asks for a stream by name (and optional integer path,
e.g. a replicate or resample index). Streams are numpy Philox generators keyed by a
SeedSequence whose spawn key is derived from the names, so the same
(seed, name path) always yields the same numbers regardless of which other streams
were drawn first or in which worker process.
"""

import zlib
from typing import Tuple, Union

import numpy as np

PathPart = Union[str, int]


def _encode(part: PathPart) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


class RandomStreams:
    """Factory of deterministic generators under a base seed and a name path."""

    def __init__(self, seed: int, path: Tuple[PathPart, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(path)

    def child(self, *parts: PathPart) -> "RandomStreams":
        return RandomStreams(self.seed, self.path + tuple(parts))

    def generator(self, *parts: PathPart) -> np.random.Generator:
        key = tuple(_encode(p) for p in self.path + tuple(parts))
        sequence = np.random.SeedSequence(self.seed, spawn_key=key)
        return np.random.Generator(np.random.Philox(sequence))

    def integer_seed(self, *parts: PathPart) -> int:
        """A 31-bit seed for libraries that take an integer ``random_state``."""
        return int(self.generator(*parts).integers(0, 2**31 - 1))

    def __repr__(self) -> str:
        return f"RandomStreams(seed={self.seed}, path={self.path})"
