"""Counter-based random streams.

Every draw in the package flows through an ``RngStream``.  A stream is a
(key, counter) pair over the Philox bit generator: each draw call seeds a
fresh generator at ``counter * 2**64`` and bumps the counter, so replaying
the same call sequence from the same state is bit-identical, and restoring
a stream from a checkpoint is O(1).  Child streams derive their key by
hashing the parent key with a label, which keeps parallel workers and
submodules statistically independent without coordination.
"""

from __future__ import annotations

import hashlib

import numpy as np

_BLOCK = 1 << 64  # one draw call owns 2**64 Philox blocks


def _key_from_seed(seed: int) -> int:
    digest = hashlib.sha256(b"d2e-rng:" + str(int(seed)).encode()).digest()
    return int.from_bytes(digest[:16], "little")


class RngStream:
    """Deterministic, splittable stream of float64 randomness."""

    __slots__ = ("key", "counter")

    def __init__(self, seed: int = 0, counter: int = 0, *, _key: int | None = None):
        self.key = _key_from_seed(seed) if _key is None else int(_key)
        self.counter = int(counter)

    def _generator(self) -> np.random.Generator:
        bit = np.random.Philox(counter=self.counter * _BLOCK, key=self.key)
        self.counter += 1
        return np.random.Generator(bit)

    def normal(self, shape: tuple[int, ...] | int = ()) -> np.ndarray:
        return self._generator().standard_normal(shape, dtype=np.float64)

    def uniform(self, low: float = 0.0, high: float = 1.0,
                shape: tuple[int, ...] | int = ()) -> np.ndarray:
        return self._generator().uniform(low, high, shape)

    def integers(self, low: int, high: int,
                 shape: tuple[int, ...] | int = ()) -> np.ndarray:
        return self._generator().integers(low, high, size=shape)

    def gumbel(self, shape: tuple[int, ...] | int = ()) -> np.ndarray:
        # -log(-log u) with u in (0, 1); clip away exact 0 for safety
        u = self._generator().uniform(0.0, 1.0, shape)
        return -np.log(-np.log(np.clip(u, 1e-300, 1.0 - 1e-16)))

    def split(self, label: str) -> "RngStream":
        """Derive an independent child stream; same (parent, label) pairs agree."""
        digest = hashlib.sha256(
            self.key.to_bytes(16, "little") + b"/" + label.encode()
        ).digest()
        return RngStream(_key=int.from_bytes(digest[:16], "little"))

    # State is a plain tuple so checkpoints can store and restore it exactly.
    def get_state(self) -> tuple[int, int]:
        return (self.key, self.counter)

    @classmethod
    def from_state(cls, state: tuple[int, int]) -> "RngStream":
        key, counter = state
        return cls(counter=counter, _key=key)

    def __repr__(self) -> str:
        return f"RngStream(key={self.key:#x}, counter={self.counter})"
