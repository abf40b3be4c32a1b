"""Two-branch key classifier with explicit forward and backward passes.

The modular branch embeds every ciphertext token, flattens the ``L x embed``
matrix and applies two dense+ReLU layers. The statistical branch applies two
dense+ReLU layers to the 26-bin letter-frequency vector. Both feature vectors
are concatenated and mapped linearly onto 312 key logits.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .cipher import M, NUM_KEYS
from .dataset import VOCAB_SIZE, read_manifest
from .errors import ConfigError, FormatVersionError, MalformedFileError, ShapeError, VocabError
from .tensor import grad_check, relu, relu_backward, softmax_cross_entropy

FORMAT_VERSION = 1
MAGIC = b"AFNN"
_HEADER = struct.Struct("<4sI")


@dataclass(frozen=True)
class ModelConfig:
    seq_len: int
    embed_dim: int = 16
    hidden_dim: int = 128
    vocab_size: int = VOCAB_SIZE
    num_classes: int = NUM_KEYS

    def __post_init__(self):
        if self.seq_len < 1 or self.embed_dim < 1 or self.hidden_dim < 1:
            raise ConfigError(f"dimensions must be positive: {self}")
        if self.vocab_size != VOCAB_SIZE or self.num_classes != NUM_KEYS:
            raise ConfigError("vocab_size must be 27 and num_classes 312")

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        L, D, H = self.seq_len, self.embed_dim, self.hidden_dim
        return {
            "embedding": (self.vocab_size, D),
            "mod_W1": (L * D, H),
            "mod_b1": (H,),
            "mod_W2": (H, H),
            "mod_b2": (H,),
            "stat_W1": (M, H),
            "stat_b1": (H,),
            "stat_W2": (H, H),
            "stat_b2": (H,),
            "head_W": (2 * H, self.num_classes),
            "head_b": (self.num_classes,),
        }


@dataclass
class ModelParams:
    """Learnable arrays; the same container also carries gradients."""

    embedding: np.ndarray
    mod_W1: np.ndarray
    mod_b1: np.ndarray
    mod_W2: np.ndarray
    mod_b2: np.ndarray
    stat_W1: np.ndarray
    stat_b1: np.ndarray
    stat_W2: np.ndarray
    stat_b2: np.ndarray
    head_W: np.ndarray
    head_b: np.ndarray

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        for name in self.names():
            yield name, getattr(self, name)

    @classmethod
    def zeros_like(cls, other: "ModelParams") -> "ModelParams":
        return cls(**{n: np.zeros_like(a) for n, a in other.items()})

    def copy(self) -> "ModelParams":
        return ModelParams(**{n: a.copy() for n, a in self.items()})

    def to_vector(self) -> np.ndarray:
        return np.concatenate([a.ravel() for _, a in self.items()])

    @classmethod
    def from_vector(cls, vec: np.ndarray, cfg: ModelConfig) -> "ModelParams":
        arrays, pos = {}, 0
        for name, shape in cfg.param_shapes().items():
            size = int(np.prod(shape))
            arrays[name] = vec[pos:pos + size].reshape(shape).copy()
            pos += size
        if pos != vec.size:
            raise ShapeError(f"vector of length {vec.size} does not match config ({pos})")
        return cls(**arrays)

    def check_shapes(self, cfg: ModelConfig) -> None:
        for name, shape in cfg.param_shapes().items():
            got = getattr(self, name).shape
            if got != shape:
                raise ShapeError(f"{name} has shape {got}, config expects {shape}")

    def equals(self, other: "ModelParams") -> bool:
        return all(np.array_equal(a, getattr(other, n)) for n, a in self.items())


ParamGrads = ModelParams


class ForwardCache(NamedTuple):
    tokens: np.ndarray
    flat: np.ndarray
    mod_z1: np.ndarray
    mod_h1: np.ndarray
    mod_z2: np.ndarray
    mod_h2: np.ndarray
    freqs: np.ndarray
    stat_z1: np.ndarray
    stat_h1: np.ndarray
    stat_z2: np.ndarray
    stat_h2: np.ndarray
    features: np.ndarray
    logits: np.ndarray


def init_params(cfg: ModelConfig, rng: np.random.Generator) -> ModelParams:
    """He-scaled normal weights, zero biases, embedding uniform in [-0.05, 0.05]."""
    arrays = {}
    for name, shape in cfg.param_shapes().items():
        if name == "embedding":
            arrays[name] = rng.uniform(-0.05, 0.05, size=shape)
        elif len(shape) == 1:
            arrays[name] = np.zeros(shape)
        else:
            arrays[name] = rng.standard_normal(shape) * np.sqrt(2.0 / shape[0])
    return ModelParams(**arrays)


def _check_inputs(cfg: ModelConfig, tokens: np.ndarray, freqs: np.ndarray) -> None:
    if tokens.ndim != 2 or tokens.shape[1] != cfg.seq_len:
        raise ShapeError(f"tokens must have shape (batch, {cfg.seq_len}), got {tokens.shape}")
    if freqs.shape != (tokens.shape[0], M):
        raise ShapeError(f"freqs must have shape ({tokens.shape[0]}, {M}), got {freqs.shape}")
    if tokens.size and (tokens.min() < 0 or tokens.max() >= cfg.vocab_size):
        raise VocabError(f"token ids must lie in 0..{cfg.vocab_size - 1}")


def forward(params: ModelParams, cfg: ModelConfig, tokens, freqs) -> tuple[np.ndarray, ForwardCache]:
    tokens = np.asarray(tokens)
    freqs = np.asarray(freqs, dtype=np.float64)
    _check_inputs(cfg, tokens, freqs)
    tokens = tokens.astype(np.intp)
    batch = tokens.shape[0]

    flat = params.embedding[tokens].reshape(batch, cfg.seq_len * cfg.embed_dim)
    mod_z1 = flat @ params.mod_W1 + params.mod_b1
    mod_h1 = relu(mod_z1)
    mod_z2 = mod_h1 @ params.mod_W2 + params.mod_b2
    mod_h2 = relu(mod_z2)

    stat_z1 = freqs @ params.stat_W1 + params.stat_b1
    stat_h1 = relu(stat_z1)
    stat_z2 = stat_h1 @ params.stat_W2 + params.stat_b2
    stat_h2 = relu(stat_z2)

    features = np.concatenate([mod_h2, stat_h2], axis=1)
    logits = features @ params.head_W + params.head_b
    cache = ForwardCache(
        tokens, flat, mod_z1, mod_h1, mod_z2, mod_h2,
        freqs, stat_z1, stat_h1, stat_z2, stat_h2, features, logits,
    )
    return logits, cache


def backward(params: ModelParams, cfg: ModelConfig, cache: ForwardCache, dlogits) -> ParamGrads:
    dlogits = np.asarray(dlogits, dtype=np.float64)
    if dlogits.shape != cache.logits.shape:
        raise ShapeError(f"dlogits shape {dlogits.shape} != logits shape {cache.logits.shape}")
    H = cfg.hidden_dim

    head_W = cache.features.T @ dlogits
    head_b = dlogits.sum(axis=0)
    dfeatures = dlogits @ params.head_W.T

    dz = relu_backward(cache.stat_z2, dfeatures[:, H:])
    stat_W2 = cache.stat_h1.T @ dz
    stat_b2 = dz.sum(axis=0)
    dz = relu_backward(cache.stat_z1, dz @ params.stat_W2.T)
    stat_W1 = cache.freqs.T @ dz
    stat_b1 = dz.sum(axis=0)

    dz = relu_backward(cache.mod_z2, dfeatures[:, :H])
    mod_W2 = cache.mod_h1.T @ dz
    mod_b2 = dz.sum(axis=0)
    dz = relu_backward(cache.mod_z1, dz @ params.mod_W2.T)
    mod_W1 = cache.flat.T @ dz
    mod_b1 = dz.sum(axis=0)
    dflat = dz @ params.mod_W1.T

    # scatter-add: each embedding row collects the gradient of every position holding that token
    embedding = np.zeros_like(params.embedding)
    np.add.at(embedding, cache.tokens.ravel(), dflat.reshape(-1, cfg.embed_dim))

    return ParamGrads(
        embedding=embedding,
        mod_W1=mod_W1, mod_b1=mod_b1, mod_W2=mod_W2, mod_b2=mod_b2,
        stat_W1=stat_W1, stat_b1=stat_b1, stat_W2=stat_W2, stat_b2=stat_b2,
        head_W=head_W, head_b=head_b,
    )


def loss_and_grad(params: ModelParams, cfg: ModelConfig, tokens, freqs, labels) -> tuple[float, ParamGrads]:
    """Mean cross-entropy of a batch and the gradient of every parameter."""
    logits, cache = forward(params, cfg, tokens, freqs)
    loss, dlogits = softmax_cross_entropy(logits, labels)
    return loss, backward(params, cfg, cache, dlogits)


class GradCheckResult(NamedTuple):
    errors: dict[str, float]
    skipped: dict[str, int]

    @property
    def worst(self) -> tuple[str, float]:
        name = max(self.errors, key=self.errors.get)
        return name, self.errors[name]


def _relu_pattern(cache: ForwardCache) -> bytes:
    zs = (cache.mod_z1, cache.mod_z2, cache.stat_z1, cache.stat_z2)
    return b"".join(np.packbits(z > 0).tobytes() for z in zs)


def grad_check_network(
    params: ModelParams, cfg: ModelConfig, tokens, freqs, labels, eps: float = 1e-4
) -> GradCheckResult:
    """Finite-difference check of :func:`backward`, per parameter group.

    Coordinates whose +-eps step changes any ReLU on/off state are skipped
    (and counted): the loss has a kink inside the step there.
    """
    _, grads = loss_and_grad(params, cfg, tokens, freqs, labels)
    base = _relu_pattern(forward(params, cfg, tokens, freqs)[1])
    errors, skipped = {}, {}
    for name, arr in params.items():
        probe = params.copy()
        target = getattr(probe, name)
        last = {}

        def loss_at(theta):
            target[...] = theta.reshape(arr.shape)
            logits, cache = forward(probe, cfg, tokens, freqs)
            last["pattern"] = _relu_pattern(cache)
            return softmax_cross_entropy(logits, labels).loss

        def crossed(_theta):
            crossed.count += last["pattern"] != base
            return last["pattern"] != base

        crossed.count = 0
        errors[name] = grad_check(loss_at, arr.ravel(), getattr(grads, name).ravel(), eps, skip=crossed)
        skipped[name] = crossed.count
    return GradCheckResult(errors, skipped)


def argmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise argmax; ties resolve to the lowest index."""
    return np.argmax(logits, axis=1)


def predict(params: ModelParams, cfg: ModelConfig, tokens, freqs) -> np.ndarray:
    logits, _ = forward(params, cfg, tokens, freqs)
    return argmax_rows(logits)


def save_params(params: ModelParams, cfg: ModelConfig, path: str | Path) -> None:
    params.check_shapes(cfg)
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in params.items())
    manifest = {
        "format": "afnn",
        "format_version": FORMAT_VERSION,
        "model_config": asdict(cfg),
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in params.items()],
        "dtype": "<f8",
        "payload_bytes": len(payload),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, len(blob)))
        fh.write(blob)
        fh.write(payload)


def load_params(path: str | Path, seq_len: int | None = None) -> tuple[ModelParams, ModelConfig]:
    """Read a checkpoint; ``seq_len``, if given, must match the stored model."""
    manifest, payload = read_manifest(Path(path).read_bytes(), magic=MAGIC)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise FormatVersionError(f"unsupported checkpoint version {manifest.get('format_version')!r}")
    try:
        cfg = ModelConfig(**manifest["model_config"])
        declared = [(a["name"], tuple(a["shape"])) for a in manifest["arrays"]]
    except (KeyError, TypeError) as exc:
        raise MalformedFileError(f"incomplete checkpoint manifest: {exc}") from exc
    if seq_len is not None and cfg.seq_len != seq_len:
        raise ShapeError(f"checkpoint was trained with L={cfg.seq_len}, not L={seq_len}")
    if declared != list(cfg.param_shapes().items()):
        raise ShapeError("checkpoint array shapes disagree with its model config")

    expected = 8 * sum(int(np.prod(s)) for _, s in declared)
    if len(payload) != expected or manifest.get("payload_bytes") != expected:
        raise MalformedFileError(f"payload is {len(payload)} bytes, expected {expected}")
    if hashlib.sha256(payload).hexdigest() != manifest.get("payload_sha256"):
        raise MalformedFileError("checkpoint payload digest mismatch")
    vec = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return ModelParams.from_vector(vec, cfg), cfg
