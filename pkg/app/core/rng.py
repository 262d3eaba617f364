"""Counter-based random streams keyed by (seed, label).

Every stream is a Philox generator whose 128-bit key is a hash of the seed and
the label, so draws never depend on evaluation order, process or thread count.
"""

import hashlib

import numpy as np

from app.core.exceptions import PinnError

SEED_MASK = (1 << 64) - 1


def _philox_key(seed: int, label: str) -> int:
    h = hashlib.blake2b(digest_size=16)
    h.update((seed & SEED_MASK).to_bytes(8, "little", signed=False))
    h.update(label.encode("utf-8"))
    return int.from_bytes(h.digest(), "little", signed=False)


class RngStream:
    """Deterministic stream of draws for one (seed, label) pair."""

    def __init__(self, seed: int, label: str):
        if not label:
            raise PinnError("rng stream label must be nonempty")
        if seed < 0:
            raise PinnError(f"rng seed must be unsigned, got {seed}")
        self.seed = int(seed) & SEED_MASK
        self.label = label
        self.calls = 0
        self._gen = np.random.Generator(np.random.Philox(key=_philox_key(self.seed, label)))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, label={self.label!r}, calls={self.calls})"

    def child(self, suffix: str | int) -> "RngStream":
        """Independent sub-stream, e.g. one per trial index."""
        return RngStream(self.seed, f"{self.label}/{suffix}")

    def random(self, size: int | tuple[int, ...] | None = None) -> np.ndarray | float:
        self.calls += 1
        return self._gen.random(size)

    def uniform(
        self, low: float, high: float, size: int | tuple[int, ...] | None = None,
    ) -> np.ndarray | float:
        self.calls += 1
        return self._gen.uniform(low, high, size)

    def normal(self, size: int | tuple[int, ...] | None = None) -> np.ndarray | float:
        self.calls += 1
        return self._gen.standard_normal(size)

    def integers(self, high: int, size: int | tuple[int, ...] | None = None) -> np.ndarray | int:
        self.calls += 1
        return self._gen.integers(0, high, size)

    def signs(self, size: int | tuple[int, ...]) -> np.ndarray:
        """Rademacher draws in {-1.0, +1.0}."""
        self.calls += 1
        return np.where(self._gen.integers(0, 2, size) == 1, 1.0, -1.0)


def make_rng_stream(seed: int, label: str) -> RngStream:
    return RngStream(seed, label)
