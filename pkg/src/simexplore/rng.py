"""Splittable, order-independent random streams.

A stream is identified by a master seed and a path of integer keys. Child
streams are derived from ``(tag, index)`` pairs, so the numbers a consumer
sees depend only on where it sits in the derivation tree and never on the
order in which sibling streams were used.
"""
from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _tag_key(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


class RngStream:
    """A single-owner random stream backed by a Philox generator.

    Parameters
    ----------
    seed : int
        Master seed; reduced modulo 2**64.
    path : tuple of int
        Derivation keys below the master seed.
    """

    __slots__ = ("seed", "path", "_gen")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed) & _MASK64
        self.path = tuple(int(k) for k in path)
        self._gen: np.random.Generator | None = None

    def _seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.seed, spawn_key=self.path)

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            self._gen = np.random.Generator(np.random.Philox(self._seed_sequence()))
        return self._gen

    def child(self, tag: str, index: int = 0) -> RngStream:
        """Derive the substream for ``(tag, index)``.

        Deriving a child never consumes randomness from the parent.
        """
        if index < 0:
            raise ValueError("substream index must be non-negative")
        return RngStream(self.seed, self.path + (_tag_key(tag), int(index)))

    def seed_int(self) -> int:
        """A 64-bit integer seed that is a pure function of this stream's identity.

        Used to hand a stream to code that only accepts integer seeds (external
        executables, paired runs).
        """
        lo, hi = self._seed_sequence().generate_state(2, np.uint32)
        return (int(hi) << 32) | int(lo)

    # thin conveniences over the generator
    def random(self, size=None):
        return self.generator.random(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def exponential(self, scale=1.0, size=None):
        return self.generator.exponential(scale, size)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path})"
