"""64-bit seed derivation.

``mix(a, b) = splitmix64(splitmix64(a) ^ b)`` where ``splitmix64`` is the
finaliser of Steele, Lea & Flood's SplitMix64 generator (golden-gamma
increment followed by two xor-shift-multiply rounds). Replication ``r`` of
a run with base seed ``s`` uses ``mix(s, r)``; its data stream is
``mix(seed_r, 0)`` and estimator ``name`` gets ``mix(seed_r, crc32(name))``,
so adding an estimator never changes another's randomness or the data.
"""
from __future__ import annotations

import zlib

MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def mix(a: int, b: int) -> int:
    return splitmix64(splitmix64(a & MASK) ^ (b & MASK))


def rep_seed(base_seed: int, rep: int) -> int:
    return mix(base_seed, rep)


def data_seed(seed_r: int) -> int:
    return mix(seed_r, 0)


def stream_id(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def estimator_seed(seed_r: int, name: str) -> int:
    return mix(seed_r, stream_id(name))
