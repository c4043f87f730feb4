# core/seeds.py

import hashlib
from typing import Union

import numpy as np

U64_MAX = 2**64 - 1

Key = Union[str, int, float]


def _key_text(k: Key) -> str:
    if isinstance(k, float):
        return repr(round(k, 12))
    return str(k)


def derive_seed(master: int, *path: Key) -> int:
    if not 0 <= int(master) <= U64_MAX:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {master}")
    text = ":".join([str(int(master))] + [_key_text(k) for k in path])
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def rng_for(master: int, *path: Key) -> np.random.Generator:
    if not path:
        return np.random.default_rng(int(master))
    return np.random.default_rng(derive_seed(master, *path))
