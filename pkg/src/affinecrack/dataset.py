"""Corpus preprocessing and generation of split (ciphertext, key, plaintext) datasets.

Token ids 0-25 are letters, 26 is padding. A dataset is stored in a single
``.afds`` container: an 8-byte header (magic + manifest length), a JSON
manifest, then per partition the ciphertext tokens (uint8), plaintext tokens
(uint8) and key indices (little-endian uint16).
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from . import cipher
from .errors import (
    ConfigError,
    DigestMismatchError,
    EmptyCorpusError,
    FormatVersionError,
    InsufficientCorpusError,
    MalformedFileError,
)

PAD = 26
VOCAB_SIZE = 27
STUDY_LENGTHS = (100, 500, 1000, 10000)
RNG_ALGORITHM = "numpy.random.PCG64"
FORMAT_VERSION = 1
MAGIC = b"AFDS"
PARTITIONS = ("train", "validation", "test")
_HEADER = struct.Struct("<4sI")


def bundled_corpus_path() -> Path:
    """Path of the bundled public-domain English corpus (Shakespeare plays)."""
    return Path(str(resources.files("affinecrack") / "data" / "shakespeare.txt"))


def preprocess_corpus(raw_text: str) -> np.ndarray:
    """Uppercase, keep ASCII letters only, and map them to 0..25."""
    raw = raw_text.encode("ascii", errors="ignore")
    buf = np.frombuffer(raw.upper(), dtype=np.uint8)
    letters = buf[(buf >= ord("A")) & (buf <= ord("Z"))] - ord("A")
    if letters.size == 0:
        raise EmptyCorpusError("input contains no letters")
    return letters.astype(np.uint8)


def read_corpus(path: str | Path | None = None) -> np.ndarray:
    path = bundled_corpus_path() if path is None else Path(path)
    return preprocess_corpus(path.read_text(encoding="utf-8", errors="ignore"))


def corpus_digest(corpus: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(corpus, dtype=np.uint8).tobytes()).hexdigest()


def pad_or_truncate(tokens, length: int) -> np.ndarray:
    tokens = np.asarray(tokens, dtype=np.uint8)[:length]
    if tokens.size < length:
        tokens = np.concatenate([tokens, np.full(length - tokens.size, PAD, np.uint8)])
    return tokens


@dataclass(frozen=True)
class DatasetConfig:
    seq_len: int
    num_samples: int = 20_000
    split_fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0
    corpus_path: str | None = None  # None selects the bundled corpus

    def __post_init__(self):
        object.__setattr__(self, "split_fractions", tuple(float(f) for f in self.split_fractions))
        if self.seq_len < 1:
            raise ConfigError(f"seq_len must be positive, got {self.seq_len}")
        if self.num_samples < 1:
            raise ConfigError(f"num_samples must be positive, got {self.num_samples}")
        if len(self.split_fractions) != 3 or min(self.split_fractions) < 0:
            raise ConfigError(f"bad split fractions {self.split_fractions}")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {self.split_fractions}")
        if not (0 <= self.seed < 2**64):
            raise ConfigError("seed must be a 64-bit unsigned integer")

    def partition_sizes(self) -> tuple[int, int, int]:
        """Validation and test sizes are rounded half-up; train takes the remainder."""
        n = self.num_samples
        n_val = int(np.floor(n * self.split_fractions[1] + 0.5))
        n_test = int(np.floor(n * self.split_fractions[2] + 0.5))
        n_val = min(n_val, n)
        n_test = min(n_test, n - n_val)
        return n - n_val - n_test, n_val, n_test


class Sample(NamedTuple):
    ciphertext: np.ndarray
    key_index: int
    plaintext: np.ndarray

    @property
    def key(self) -> cipher.AffineKey:
        return cipher.index_to_key(self.key_index)


@dataclass
class Partition:
    """A column-oriented block of samples sharing one sequence length."""

    ciphertext: np.ndarray  # (n, L) uint8
    key_index: np.ndarray  # (n,) uint16
    plaintext: np.ndarray  # (n, L) uint8
    _features: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return int(self.key_index.shape[0])

    def __getitem__(self, i: int) -> Sample:
        return Sample(self.ciphertext[i], int(self.key_index[i]), self.plaintext[i])

    def __iter__(self) -> Iterator[Sample]:
        return (self[i] for i in range(len(self)))

    @property
    def seq_len(self) -> int:
        return int(self.ciphertext.shape[1])

    def features(self) -> np.ndarray:
        if self._features is None:
            self._features = letter_frequencies(self.ciphertext)
        return self._features

    def __eq__(self, other) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return (
            np.array_equal(self.ciphertext, other.ciphertext)
            and np.array_equal(self.key_index, other.key_index)
            and np.array_equal(self.plaintext, other.plaintext)
        )


@dataclass(eq=True)
class SplitDataset:
    train: Partition
    validation: Partition
    test: Partition
    config: DatasetConfig
    corpus_digest: str

    def partition(self, name: str) -> Partition:
        if name == "val":
            name = "validation"
        if name not in PARTITIONS:
            raise ConfigError(f"unknown partition {name!r}")
        return getattr(self, name)

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)


def sample_plaintexts(corpus: np.ndarray, cfg: DatasetConfig, rng: np.random.Generator) -> np.ndarray:
    """Contiguous windows of ``cfg.seq_len`` letters at uniform random offsets.

    Windows may overlap. Returns an ``(num_samples, seq_len)`` uint8 array.
    """
    corpus = np.asarray(corpus, dtype=np.uint8)
    n_offsets = corpus.size - cfg.seq_len + 1
    if n_offsets < 1:
        raise InsufficientCorpusError(
            f"corpus has {corpus.size} letters, fewer than seq_len={cfg.seq_len}"
        )
    starts = rng.integers(0, n_offsets, size=cfg.num_samples)
    return corpus[starts[:, None] + np.arange(cfg.seq_len)[None, :]]


def random_key(rng: np.random.Generator) -> cipher.AffineKey:
    a = cipher.VALID_A[int(rng.integers(len(cipher.VALID_A)))]
    b = int(rng.integers(cipher.M))
    return cipher.AffineKey(a, b)


def encrypt_batch(plaintext: np.ndarray, key_index: np.ndarray) -> np.ndarray:
    """Encrypt each row of a token matrix with its own key; PAD stays PAD."""
    table = np.concatenate(
        [cipher.encryption_table(), np.full((cipher.NUM_KEYS, 1), PAD)], axis=1
    ).astype(np.uint8)
    return table[key_index.astype(np.int64)[:, None], plaintext]


def letter_frequencies(tokens) -> np.ndarray:
    """Normalised letter counts ignoring PAD.

    Accepts one sequence (returns shape ``(26,)``) or a batch (``(n, 26)``).
    An all-PAD sequence gives the zero vector.
    """
    tokens = np.asarray(tokens)
    single = tokens.ndim == 1
    batch = np.atleast_2d(tokens).astype(np.int64)
    n = batch.shape[0]
    offsets = (np.arange(n, dtype=np.int64) * VOCAB_SIZE)[:, None]
    counts = np.bincount((batch + offsets).ravel(), minlength=n * VOCAB_SIZE)
    counts = counts.reshape(n, VOCAB_SIZE)[:, :cipher.M].astype(np.float64)
    totals = counts.sum(axis=1, keepdims=True)
    freqs = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
    return freqs[0] if single else freqs


def build_dataset(cfg: DatasetConfig, corpus: np.ndarray | None = None) -> SplitDataset:
    """Sample plaintexts, key and encrypt each, shuffle, and split."""
    if corpus is None:
        corpus = read_corpus(cfg.corpus_path)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    plain = sample_plaintexts(corpus, cfg, rng)
    keys = np.array(
        [cipher.key_to_index(random_key(rng)) for _ in range(cfg.num_samples)], dtype=np.uint16
    )
    ciph = encrypt_batch(plain, keys)

    order = rng.permutation(cfg.num_samples)
    plain, keys, ciph = plain[order], keys[order], ciph[order]

    n_train, n_val, _ = cfg.partition_sizes()
    bounds = [0, n_train, n_train + n_val, cfg.num_samples]
    parts = [
        Partition(ciph[lo:hi], keys[lo:hi], plain[lo:hi])
        for lo, hi in zip(bounds[:-1], bounds[1:])
    ]
    return SplitDataset(*parts, config=cfg, corpus_digest=corpus_digest(corpus))


def _manifest(ds: SplitDataset, payload: bytes) -> dict:
    return {
        "format": "afds",
        "format_version": FORMAT_VERSION,
        "config": asdict(ds.config),
        "corpus_digest": ds.corpus_digest,
        "rng_algorithm": RNG_ALGORITHM,
        "seq_len": ds.config.seq_len,
        "counts": dict(zip(PARTITIONS, ds.sizes)),
        "payload_bytes": len(payload),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }


def save_dataset(ds: SplitDataset, path: str | Path) -> None:
    chunks = []
    for name in PARTITIONS:
        part = ds.partition(name)
        chunks.append(np.ascontiguousarray(part.ciphertext, dtype=np.uint8).tobytes())
        chunks.append(np.ascontiguousarray(part.plaintext, dtype=np.uint8).tobytes())
        chunks.append(np.ascontiguousarray(part.key_index, dtype="<u2").tobytes())
    payload = b"".join(chunks)
    manifest = json.dumps(_manifest(ds, payload), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, len(manifest)))
        fh.write(manifest)
        fh.write(payload)


def read_manifest(blob: bytes, magic: bytes = MAGIC) -> tuple[dict, bytes]:
    """Split a container into its JSON manifest and raw payload."""
    if len(blob) < _HEADER.size:
        raise MalformedFileError("file too short for header")
    got_magic, n = _HEADER.unpack_from(blob)
    if got_magic != magic:
        raise MalformedFileError(f"bad magic {got_magic!r}, expected {magic!r}")
    end = _HEADER.size + n
    if len(blob) < end:
        raise MalformedFileError("truncated manifest")
    try:
        manifest = json.loads(blob[_HEADER.size:end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedFileError(f"unreadable manifest: {exc}") from exc
    return manifest, blob[end:]


def load_dataset(path: str | Path, expected_corpus_digest: str | None = None) -> SplitDataset:
    manifest, payload = read_manifest(Path(path).read_bytes())
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatVersionError(f"unsupported dataset format version {version!r}")
    try:
        cfg_fields = dict(manifest["config"])
        cfg_fields["split_fractions"] = tuple(cfg_fields["split_fractions"])
        cfg = DatasetConfig(**cfg_fields)
        counts = [int(manifest["counts"][name]) for name in PARTITIONS]
        expected_bytes = int(manifest["payload_bytes"])
        digest = manifest["corpus_digest"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFileError(f"incomplete manifest: {exc}") from exc

    L = cfg.seq_len
    if len(payload) != expected_bytes or expected_bytes != sum(n * (2 * L + 2) for n in counts):
        raise MalformedFileError(
            f"payload is {len(payload)} bytes, manifest declares {expected_bytes}"
        )
    if hashlib.sha256(payload).hexdigest() != manifest.get("payload_sha256"):
        raise DigestMismatchError("payload digest does not match manifest")
    if expected_corpus_digest is not None and digest != expected_corpus_digest:
        raise DigestMismatchError("dataset was generated from a different corpus")

    parts, pos = [], 0
    for n in counts:
        ciph = np.frombuffer(payload, np.uint8, n * L, pos).reshape(n, L)
        pos += n * L
        plain = np.frombuffer(payload, np.uint8, n * L, pos).reshape(n, L)
        pos += n * L
        keys = np.frombuffer(payload, "<u2", n, pos).astype(np.uint16)
        pos += 2 * n
        parts.append(Partition(ciph.copy(), keys, plain.copy()))
    return SplitDataset(*parts, config=cfg, corpus_digest=digest)
