"""Adam, mini-batch training, and evaluation of the key classifier."""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .dataset import Partition, SplitDataset
from .errors import ConfigError, EmptyDataError, NumericError, ShapeError
from .network import ModelConfig, ModelParams, argmax_rows, backward, forward, init_params
from .tensor import softmax_cross_entropy

log = logging.getLogger(__name__)

CURVE_HEADER = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc")
EVAL_BATCH = 512


@dataclass
class AdamState:
    m: ModelParams
    v: ModelParams
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, params: ModelParams, lr: float = 1e-3, **kw) -> "AdamState":
        return cls(ModelParams.zeros_like(params), ModelParams.zeros_like(params), lr=lr, **kw)


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState) -> tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update. ``params`` and ``state`` are updated in place."""
    for name, g in grads.items():
        if g.shape != getattr(params, name).shape:
            raise ShapeError(f"gradient {name} has shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {name}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    for name, g in grads.items():
        m = getattr(state.m, name)
        v = getattr(state.v, name)
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        theta = getattr(params, name)
        theta -= state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)
    return params, state


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 128
    lr: float = 1e-3
    seed: int = 0
    shuffle_each_epoch: bool = True
    select_best_val: bool = False

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or not self.lr > 0:
            raise ConfigError(f"invalid training config {self}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    seconds: float = 0.0

    def csv_row(self) -> list[str]:
        return [str(self.epoch)] + [
            f"{x:.6g}" for x in (self.train_loss, self.train_acc, self.val_loss, self.val_acc)
        ]


@dataclass
class TrainReport:
    model_config: dict
    train_config: dict
    epochs: list[EpochRecord] = field(default_factory=list)
    test_loss: float = float("nan")
    test_accuracy: float = float("nan")
    best_epoch: int | None = None
    total_seconds: float = 0.0

    def curves_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CURVE_HEADER)
        for rec in self.epochs:
            writer.writerow(rec.csv_row())
        return buf.getvalue()

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _batches(n: int, batch_size: int, order: np.ndarray):
    for lo in range(0, n, batch_size):
        yield order[lo:lo + batch_size]


def run_epoch(
    params: ModelParams,
    state: AdamState,
    partition: Partition,
    mcfg: ModelConfig,
    tcfg: TrainConfig,
    rng: np.random.Generator,
) -> tuple[ModelParams, AdamState, float, float]:
    """One pass over ``partition`` in mini-batches; the last short batch is kept.

    Loss and accuracy are measured on each batch before its update and
    averaged with weights equal to the batch sizes.
    """
    n = len(partition)
    if n == 0:
        raise EmptyDataError("cannot train on an empty partition")
    order = rng.permutation(n) if tcfg.shuffle_each_epoch else np.arange(n)
    tokens, freqs, labels = partition.ciphertext, partition.features(), partition.key_index
    loss_sum, correct = 0.0, 0
    for idx in _batches(n, tcfg.batch_size, order):
        logits, cache = forward(params, mcfg, tokens[idx], freqs[idx])
        loss, dlogits = softmax_cross_entropy(logits, labels[idx])
        loss_sum += loss * idx.size
        correct += int(np.count_nonzero(argmax_rows(logits) == labels[idx]))
        adam_step(params, backward(params, mcfg, cache, dlogits), state)
    return params, state, loss_sum / n, correct / n


def predict_partition(params: ModelParams, mcfg: ModelConfig, partition: Partition) -> np.ndarray:
    preds = np.empty(len(partition), dtype=np.int64)
    for lo in range(0, len(partition), EVAL_BATCH):
        sl = slice(lo, lo + EVAL_BATCH)
        logits, _ = forward(params, mcfg, partition.ciphertext[sl], partition.features()[sl])
        preds[sl] = argmax_rows(logits)
    return preds


def evaluate(params: ModelParams, mcfg: ModelConfig, partition: Partition) -> tuple[float, float]:
    n = len(partition)
    if n == 0:
        raise EmptyDataError("cannot evaluate on an empty partition")
    loss_sum, correct = 0.0, 0
    labels = partition.key_index
    for lo in range(0, n, EVAL_BATCH):
        sl = slice(lo, lo + EVAL_BATCH)
        logits, _ = forward(params, mcfg, partition.ciphertext[sl], partition.features()[sl])
        loss_sum += softmax_cross_entropy(logits, labels[sl]).loss * logits.shape[0]
        correct += int(np.count_nonzero(argmax_rows(logits) == labels[sl]))
    return loss_sum / n, correct / n


def seed_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent generators for parameter init and batch shuffling."""
    init_ss, shuffle_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init_ss), np.random.default_rng(shuffle_ss)


def train(
    dataset: SplitDataset,
    mcfg: ModelConfig,
    tcfg: TrainConfig,
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> tuple[ModelParams, TrainReport]:
    if dataset.config.seq_len != mcfg.seq_len:
        raise ConfigError(
            f"dataset has L={dataset.config.seq_len} but model expects L={mcfg.seq_len}"
        )
    init_rng, shuffle_rng = seed_streams(tcfg.seed)
    params = init_params(mcfg, init_rng)
    state = AdamState.fresh(params, lr=tcfg.lr)
    report = TrainReport(model_config=asdict(mcfg), train_config=asdict(tcfg))
    best = (-1.0, None, None)
    started = time.perf_counter()

    for epoch in range(1, tcfg.epochs + 1):
        t0 = time.perf_counter()
        _, _, tr_loss, tr_acc = run_epoch(params, state, dataset.train, mcfg, tcfg, shuffle_rng)
        if len(dataset.validation):
            va_loss, va_acc = evaluate(params, mcfg, dataset.validation)
        else:
            va_loss, va_acc = float("nan"), float("nan")
        rec = EpochRecord(epoch, tr_loss, tr_acc, va_loss, va_acc, time.perf_counter() - t0)
        report.epochs.append(rec)
        log.info(
            "epoch %d/%d train_loss=%.4f train_acc=%.4f val_loss=%.4f val_acc=%.4f (%.1fs)",
            epoch, tcfg.epochs, tr_loss, tr_acc, va_loss, va_acc, rec.seconds,
        )
        if on_epoch is not None:
            on_epoch(rec)
        if tcfg.select_best_val and va_acc > best[0]:
            best = (va_acc, epoch, params.copy())

    if tcfg.select_best_val and best[2] is not None:
        report.best_epoch = best[1]
        params = best[2]
    if len(dataset.test):
        report.test_loss, report.test_accuracy = evaluate(params, mcfg, dataset.test)
    report.total_seconds = time.perf_counter() - started
    return params, report
