"""Ciphertext-only brute force: score all 312 decryptions against English letter statistics."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import cipher
from .dataset import PAD, corpus_digest
from .errors import EmptyCorpusError, InputError, MalformedFileError

FLOOR = 1e-6


@dataclass(frozen=True)
class ReferenceFrequencies:
    freq: np.ndarray
    source_digest: str

    def to_json(self) -> str:
        return json.dumps({"freq": [float(x) for x in self.freq], "source_digest": self.source_digest}, indent=2)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ReferenceFrequencies":
        try:
            obj = json.loads(Path(path).read_text())
            freq = np.asarray(obj["freq"], dtype=np.float64)
            digest = str(obj["source_digest"])
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise MalformedFileError(f"cannot read reference table {path}: {exc}") from exc
        if freq.shape != (cipher.M,) or np.any(freq <= 0) or abs(freq.sum() - 1) > 1e-9:
            raise MalformedFileError(f"{path} is not a valid 26-letter frequency table")
        return cls(freq, digest)


@dataclass(frozen=True)
class AttackResult:
    best_index: int
    scores: np.ndarray  # (312,) chi-square per key index

    @property
    def best_key(self) -> cipher.AffineKey:
        return cipher.index_to_key(self.best_index)

    def ranked(self, top: int = 5) -> list[tuple[int, cipher.AffineKey, float]]:
        order = np.argsort(self.scores, kind="stable")[:top]
        return [(int(i), cipher.index_to_key(int(i)), float(self.scores[i])) for i in order]


def compute_reference(corpus) -> ReferenceFrequencies:
    """Letter distribution of ``corpus`` with a 1e-6 additive floor, renormalised."""
    corpus = np.asarray(corpus, dtype=np.uint8)
    if corpus.size == 0:
        raise EmptyCorpusError("cannot build reference frequencies from an empty corpus")
    counts = np.bincount(corpus, minlength=cipher.M)[:cipher.M].astype(np.float64)
    freq = counts / counts.sum() + FLOOR
    return ReferenceFrequencies(freq / freq.sum(), corpus_digest(corpus))


def chi_square(observed, reference: ReferenceFrequencies, n: int) -> float:
    """Pearson statistic of ``n`` letters distributed as ``observed``."""
    expected = n * reference.freq
    return float(np.sum((n * np.asarray(observed) - expected) ** 2 / expected))


def brute_force_attack(ciphertext, reference: ReferenceFrequencies) -> AttackResult:
    """Score the decryption under every key; the lowest chi-square wins.

    Decrypting with key k maps ciphertext letter ``enc_k(x)`` back to ``x``,
    so the decrypted letter counts are the ciphertext counts permuted through
    the encryption table; no per-key text is materialised.
    """
    tokens = np.asarray(ciphertext, dtype=np.int64)
    tokens = tokens[tokens != PAD]
    if tokens.size == 0:
        raise InputError("ciphertext has no letters")
    if tokens.min() < 0 or tokens.max() >= cipher.M:
        raise InputError("ciphertext tokens must lie in 0..25")
    n = tokens.size
    counts = np.bincount(tokens, minlength=cipher.M).astype(np.float64)
    decrypted_counts = counts[cipher.encryption_table()]  # (312, 26)
    expected = n * reference.freq
    scores = np.sum((decrypted_counts - expected) ** 2 / expected, axis=1)
    return AttackResult(int(np.argmin(scores)), scores)


def attack_accuracy(ciphertexts: np.ndarray, key_index: np.ndarray, reference: ReferenceFrequencies) -> float:
    hits = sum(
        brute_force_attack(row, reference).best_index == int(k)
        for row, k in zip(ciphertexts, key_index)
    )
    return hits / len(key_index)
