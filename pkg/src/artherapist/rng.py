"""Deterministic random streams with stable named substreams.

All randomness in the engine and the simulator flows through RandomStream
so that a 64-bit seed fully determines every randomized choice. Substreams
are derived from the parent seed and a tag (never from generator state),
so consumers cannot perturb each other by drawing in a different order.

Non-goals: cryptographic strength, cross-language reproducibility.
"""

from __future__ import annotations

import hashlib
import random
from typing import Sequence, TypeVar

MASK64 = (1 << 64) - 1

T = TypeVar("T")


def derive_seed(seed: int, tag: str) -> int:
    """Stable 64-bit child seed for (seed, tag).

    Uses blake2b, never Python's built-in hash(), which is randomized
    per process.
    """
    digest = hashlib.blake2b(f"{seed & MASK64}:{tag}".encode("utf-8"), digest_size=8)
    return int.from_bytes(digest.digest(), "big")


class RandomStream:
    """Seeded wrapper around random.Random plus tagged splitting."""

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self._rng = random.Random(self.seed)

    def split(self, tag: str) -> "RandomStream":
        """Independent child stream; depends only on (seed, tag)."""
        return RandomStream(derive_seed(self.seed, tag))

    def random(self) -> float:
        return self._rng.random()

    def uniform(self, low: float, high: float) -> float:
        return self._rng.uniform(low, high)

    def lognormal(self, log_mean: float, log_sd: float) -> float:
        return self._rng.lognormvariate(log_mean, log_sd)

    def choice(self, seq: Sequence[T]) -> T:
        return self._rng.choice(seq)

    def sample(self, seq: Sequence[T], k: int) -> list[T]:
        return self._rng.sample(seq, k)

    def shuffle(self, items: list) -> None:
        self._rng.shuffle(items)
