"""Seeded, counter-based random streams with named substreams."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_U53 = float(2**53)


@dataclass(frozen=True)
class RandomSeed:
    """A 64-bit seed plus a label naming the substream derived from it.

    Streams are Philox (counter-based) generators keyed by a hash of
    ``(value, stream_label)``, so equal pairs replay bit-identical samples and
    distinct labels give independent streams without shared state.
    """

    value: int
    stream_label: bytes = b""

    def __post_init__(self) -> None:
        if not 0 <= int(self.value) < 2**64:
            raise ValueError(f"seed value must fit in u64, got {self.value}")
        if isinstance(self.stream_label, str):
            object.__setattr__(self, "stream_label", self.stream_label.encode())

    def child(self, label: str | bytes | int) -> RandomSeed:
        if isinstance(label, int):
            label = str(label)
        if isinstance(label, str):
            label = label.encode()
        sep = b"/" if self.stream_label else b""
        return RandomSeed(self.value, self.stream_label + sep + label)

    def key(self) -> np.ndarray:
        h = hashlib.blake2b(digest_size=16, person=b"l1fd-rng")
        h.update(int(self.value).to_bytes(8, "little"))
        h.update(self.stream_label)
        return np.frombuffer(h.digest(), dtype="<u8").copy()

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.key()))

    def to_json(self) -> dict:
        return {"value": int(self.value), "stream_label": self.stream_label.decode()}

    @classmethod
    def from_json(cls, obj: dict) -> RandomSeed:
        return cls(int(obj["value"]), obj.get("stream_label", "").encode())


def as_seed(seed: RandomSeed | int | None) -> RandomSeed:
    if isinstance(seed, RandomSeed):
        return seed
    return RandomSeed(0 if seed is None else int(seed))


def open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform draws strictly inside (0, 1) on a 2^-53 lattice."""
    return (rng.integers(0, 2**53, size=size, dtype=np.int64) + 0.5) / _U53
