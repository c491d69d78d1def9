"""Seeded random streams with labeled child derivation.

A ``RandomSource`` is a value: it names a stream by ``(seed, stream_label)``
and never holds mutable state. Call :meth:`RandomSource.generator` to get a
fresh numpy ``Generator`` positioned at the start of that stream.

Algorithm (fixed, so reports reproduce across builds):

* the stream key is the first 8 bytes (little endian) of
  ``blake2b(f"{seed}\\x1f{stream_label}", digest_size=8)``;
* the generator is ``numpy.random.PCG64`` seeded with that key;
* ``child(*parts)`` appends ``"/".join(map(str, parts))`` to the label.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1


def stream_key(seed: int, stream_label: str) -> int:
    """64-bit key identifying the stream ``(seed, stream_label)``."""
    payload = f"{seed}\x1f{stream_label}".encode("utf-8")
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class RandomSource:
    seed: int
    stream_label: str = ""

    def __post_init__(self) -> None:
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
            raise TypeError(f"seed must be an integer, got {type(self.seed).__name__}")
        if not 0 <= int(self.seed) <= MASK64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        object.__setattr__(self, "seed", int(self.seed))

    def child(self, *parts: object) -> RandomSource:
        if not parts:
            raise ValueError("child() needs at least one label part")
        label = "/".join(str(p) for p in parts)
        full = f"{self.stream_label}/{label}" if self.stream_label else label
        return RandomSource(self.seed, full)

    @property
    def key(self) -> int:
        return stream_key(self.seed, self.stream_label)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.key))
