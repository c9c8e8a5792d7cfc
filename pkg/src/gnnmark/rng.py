"""Labelled, hash-split random streams.

Every stochastic step in the toolkit draws from an :class:`RngStream`
identified by ``(master_seed, label)``.  The stream seed is derived as::

    SHA-256(f"{master_seed}:{label}".encode("utf-8"))

interpreted as a big-endian 256-bit integer and handed to
:class:`numpy.random.SeedSequence`, which seeds a PCG64 generator.  The hash is
fixed; changing it changes every artifact produced by the toolkit.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


def stream_entropy(master_seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{master_seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest, "big")


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    label: str = ""

    def child(self, name: str | int) -> "RngStream":
        label = f"{self.label}/{name}" if self.label else str(name)
        return RngStream(self.master_seed, label)

    def generator(self) -> np.random.Generator:
        """A fresh generator; two calls return generators with identical output."""
        ss = np.random.SeedSequence(stream_entropy(self.master_seed, self.label))
        return np.random.Generator(np.random.PCG64(ss))

    def __str__(self) -> str:
        return f"{self.master_seed}:{self.label}"
