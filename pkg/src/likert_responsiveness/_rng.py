"""Keyed, counter-based random streams.

Every random draw in the package comes from a Philox generator whose key is
derived from a run seed plus a tuple of labels (trial index, item id, ...).
Streams are therefore independent of call order and worker scheduling.
"""

from __future__ import annotations

import hashlib

import numpy as np

_U64 = (1 << 64) - 1


def stable_hash64(value: str | int) -> int:
    """Platform-independent 64-bit hash of a string or integer."""
    data = value.encode("utf-8") if isinstance(value, str) else str(int(value)).encode()
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def _key(seed: int, labels: tuple) -> int:
    h = hashlib.blake2b(digest_size=16)
    h.update(int(seed & _U64).to_bytes(8, "little"))
    for label in labels:
        part = label.encode("utf-8") if isinstance(label, str) else int(label).to_bytes(16, "little", signed=True)
        h.update(len(part).to_bytes(4, "little"))
        h.update(part)
    return int.from_bytes(h.digest(), "little")


def keyed_rng(seed: int, *labels: str | int) -> np.random.Generator:
    """Return a generator keyed by ``(seed, *labels)``."""
    return np.random.Generator(np.random.Philox(key=_key(seed, labels)))
