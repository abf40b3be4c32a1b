"""Affine cipher over Z26: keys, encryption, and the key <-> class-index codec.

All arithmetic is exact integer arithmetic. Letter sequences may be any
integer sequence or numpy integer array; array inputs give array outputs.
"""
from __future__ import annotations

from functools import lru_cache
from math import gcd
from typing import NamedTuple, Sequence

import numpy as np

from .errors import KeyIndexRangeError, KeyValidationError, NoInverseError

M = 26
ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
VALID_A = tuple(a for a in range(1, M) if gcd(a, M) == 1)
NUM_KEYS = len(VALID_A) * M  # 312

_RANK = {a: i for i, a in enumerate(VALID_A)}


class AffineKey(NamedTuple):
    a: int
    b: int

    def validate(self) -> "AffineKey":
        if not (0 <= self.b < M):
            raise KeyValidationError(f"shift b={self.b} outside 0..25")
        if self.a not in _RANK:
            raise KeyValidationError(f"multiplier a={self.a} is not coprime to 26")
        return self

    @property
    def index(self) -> int:
        return key_to_index(self)

    def __str__(self) -> str:
        return f"(a={self.a}, b={self.b})"


def _as_key(k) -> AffineKey:
    if not isinstance(k, AffineKey):
        k = AffineKey(*k)
    return k.validate()


def map_char(c: str) -> int:
    """Map an uppercase letter to its alphabet position, ``'A' -> 0``."""
    if len(c) != 1 or not ("A" <= c <= "Z"):
        raise ValueError(f"not an uppercase ASCII letter: {c!r}")
    return ord(c) - ord("A")


def render(letters: Sequence[int]) -> str:
    """Inverse of :func:`map_char` applied elementwise."""
    return "".join(ALPHABET[int(x)] for x in letters)


def mod_inverse(a: int) -> int:
    # Z26 is tiny, so search rather than run extended Euclid.
    for candidate in range(M):
        if (a * candidate) % M == 1:
            return candidate
    raise NoInverseError(f"{a} has no inverse modulo 26")


def _apply(seq, mult: int, add: int):
    if isinstance(seq, np.ndarray):
        return ((mult * seq.astype(np.int64) + add) % M).astype(seq.dtype)
    return [(mult * int(x) + add) % M for x in seq]


def encrypt(plaintext, key) -> list[int] | np.ndarray:
    """Apply ``y = (a*x + b) mod 26`` to every letter."""
    a, b = _as_key(key)
    return _apply(plaintext, a, b)


def decrypt(ciphertext, key) -> list[int] | np.ndarray:
    """Apply ``x = a^-1 * (y - b) mod 26`` to every letter."""
    a, b = _as_key(key)
    inv = mod_inverse(a)
    return _apply(ciphertext, inv, -inv * b)


def compose(first, second) -> AffineKey:
    """Key equivalent to encrypting with ``first`` and then with ``second``."""
    a1, b1 = _as_key(first)
    a2, b2 = _as_key(second)
    return AffineKey((a2 * a1) % M, (a2 * b1 + b2) % M)


def key_to_index(key) -> int:
    a, b = _as_key(key)
    return _RANK[a] * M + b


def index_to_key(index: int) -> AffineKey:
    index = int(index)
    if not (0 <= index < NUM_KEYS):
        raise KeyIndexRangeError(f"key index {index} outside 0..{NUM_KEYS - 1}")
    rank, b = divmod(index, M)
    return AffineKey(VALID_A[rank], b)


@lru_cache(maxsize=None)
def enumerate_keys() -> tuple[AffineKey, ...]:
    """All 312 valid keys in class-index order."""
    return tuple(AffineKey(a, b) for a in VALID_A for b in range(M))


@lru_cache(maxsize=None)
def encryption_table() -> np.ndarray:
    """``table[k, x]`` is the ciphertext letter of ``x`` under key index ``k``."""
    keys = np.array(enumerate_keys(), dtype=np.int64)
    x = np.arange(M, dtype=np.int64)
    table = (keys[:, :1] * x[None, :] + keys[:, 1:]) % M
    table.setflags(write=False)
    return table
