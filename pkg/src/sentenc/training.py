"""Siamese contrastive training: in-batch negatives ranking loss over cosine
similarities, AdamW with decoupled weight decay, linear warmup/decay schedule.

Both sentences of a pair are encoded by the same parameters (tied weights);
gradients from both towers accumulate into one shared gradient buffer.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .corpus import ParaphrasePair
from .encoder import EncoderModel, _backward, _forward
from .numeric import SeededRng, logsumexp

logger = logging.getLogger(__name__)


class DivergenceError(Exception):
    """Non-finite loss or gradient; training aborted."""


@dataclass
class TrainConfig:
    batch_size: int = 64
    epochs: int = 3
    peak_lr: float = 1e-3  # the original full-scale run used 2e-6
    warmup_ratio: float = 0.10
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    temperature: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.warmup_ratio <= 1.0:
            raise ValueError("warmup_ratio must be in [0, 1]")
        if self.peak_lr <= 0:
            raise ValueError("peak_lr must be positive")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


@dataclass
class TrainBatch:
    anchor_texts: list[str]
    positive_texts: list[str]
    anchors: np.ndarray  # K x dim
    positives: np.ndarray  # K x dim


@dataclass
class OptimizerState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def for_model(cls, model: EncoderModel) -> "OptimizerState":
        return cls(m=model.zero_grads(), v=model.zero_grads())


@dataclass
class StepRecord:
    step: int
    epoch: int
    lr: float
    loss: float


def similarity_matrix(batch: TrainBatch, temperature: float = 1.0) -> np.ndarray:
    """K x K matrix of cosine(anchor_i, positive_j) / temperature."""
    a, b = batch.anchors, batch.positives
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    if np.any(na == 0.0) or np.any(nb == 0.0):
        raise DivergenceError("zero-norm sentence embedding in batch")
    return ((a / na[:, None]) @ (b / nb[:, None]).T) / temperature


def mnr_loss(s: np.ndarray) -> float:
    """Multiple negatives ranking loss: mean over rows of
    logsumexp(row) - diagonal entry. Always >= 0."""
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError("similarity matrix must be square")
    k = s.shape[0]
    return float(sum(logsumexp(s[i]) - s[i, i] for i in range(k)) / k)


def mnr_loss_grad(s: np.ndarray) -> np.ndarray:
    """d loss / d s_ij = (softmax_row_i(s)_j - delta_ij) / K; rows sum to 0."""
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError("similarity matrix must be square")
    k = s.shape[0]
    shifted = s - s.max(axis=1, keepdims=True)
    softmax = np.exp(shifted)
    softmax /= softmax.sum(axis=1, keepdims=True)
    return (softmax - np.eye(k)) / k


def adamw_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: OptimizerState,
    lr: float,
    config: TrainConfig,
) -> None:
    """One AdamW update in place: Adam moments with bias correction plus
    decoupled weight decay."""
    for g in grads.values():
        if not np.all(np.isfinite(g)):
            raise DivergenceError("non-finite gradient; aborting optimizer step")
    state.step += 1
    t = state.step
    b1, b2 = config.beta1, config.beta2
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p -= lr * (m_hat / (np.sqrt(v_hat) + config.eps) + config.weight_decay * p)


def lr_schedule(step: int, total_steps: int, peak: float, warmup_ratio: float) -> float:
    """Linear ramp 0 -> peak over the first ceil(warmup_ratio * total_steps)
    steps, then linear decay peak -> 0 at total_steps."""
    if total_steps < 1:
        raise ValueError("total_steps must be >= 1")
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    warmup = math.ceil(warmup_ratio * total_steps)
    if warmup > 0 and step <= warmup:
        return peak * step / warmup
    if total_steps == warmup:
        return peak if step == warmup else 0.0
    return peak * (total_steps - step) / (total_steps - warmup)


def _dedupe_positives(batches: list[list[ParaphrasePair]]) -> None:
    """Best-effort swap so no batch holds two identical positive texts;
    duplicates that cannot be swapped away are kept with a warning."""
    for bi, batch in enumerate(batches):
        seen: set[str] = set()
        for pi, pair in enumerate(batch):
            if pair.b not in seen:
                seen.add(pair.b)
                continue
            swapped = False
            for bj in range(bi + 1, len(batches)):
                other = batches[bj]
                other_texts = {p.b for p in other}
                for pj, cand in enumerate(other):
                    if cand.b in seen:
                        continue
                    if pair.b in other_texts - {cand.b}:
                        continue
                    batch[pi], other[pj] = cand, pair
                    seen.add(cand.b)
                    swapped = True
                    break
                if swapped:
                    break
            if not swapped:
                logger.warning(
                    "batch %d keeps duplicate positive text %r (false negative)",
                    bi,
                    pair.b,
                )


def make_batches(
    pairs: list[ParaphrasePair], k: int, rng: SeededRng
) -> list[list[ParaphrasePair]]:
    """Shuffle, chunk into batches of K, drop a trailing 1-pair chunk unless
    it is the only batch (a 1-pair batch has zero gradient either way)."""
    if not pairs:
        raise ValueError("empty training dataset")
    shuffled = rng.shuffle(pairs)
    batches = [shuffled[i : i + k] for i in range(0, len(shuffled), k)]
    if len(batches) > 1 and len(batches[-1]) < 2:
        batches.pop()
    _dedupe_positives(batches)
    return batches


def batches_per_epoch(n_pairs: int, k: int) -> int:
    n_batches = math.ceil(n_pairs / k)
    if n_batches > 1 and n_pairs % k == 1:
        n_batches -= 1
    return n_batches


def encode_batch(
    pairs: list[ParaphrasePair], model: EncoderModel
) -> tuple[TrainBatch, list, list]:
    anchors, positives, a_caches, b_caches = [], [], [], []
    for pair in pairs:
        emb, cache = _forward(pair.a, model)
        anchors.append(emb)
        a_caches.append(cache)
        emb, cache = _forward(pair.b, model)
        positives.append(emb)
        b_caches.append(cache)
    batch = TrainBatch(
        [p.a for p in pairs],
        [p.b for p in pairs],
        np.stack(anchors),
        np.stack(positives),
    )
    return batch, a_caches, b_caches


def batch_loss_and_grads(
    pairs: list[ParaphrasePair], model: EncoderModel, temperature: float
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss of one batch plus analytic parameter gradients through both towers."""
    batch, a_caches, b_caches = encode_batch(pairs, model)
    s = similarity_matrix(batch, temperature)
    loss = mnr_loss(s)
    ds = mnr_loss_grad(s)

    a, b = batch.anchors, batch.positives
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    an = a / na[:, None]
    bn = b / nb[:, None]
    cos = an @ bn.T
    # d cos(a_i, b_j) / d a_i = (b_j/|b_j| - cos * a_i/|a_i|) / |a_i|
    da = (ds @ bn - (ds * cos).sum(axis=1, keepdims=True) * an) / na[:, None]
    db = (ds.T @ an - (ds * cos).sum(axis=0)[:, None] * bn) / nb[:, None]
    da /= temperature
    db /= temperature

    grads = model.zero_grads()
    for i in range(len(pairs)):
        _backward(da[i], a_caches[i], model, grads)
        _backward(db[i], b_caches[i], model, grads)
    return loss, grads


def train(
    pairs: list[ParaphrasePair], model: EncoderModel, config: TrainConfig
) -> list[StepRecord]:
    """Fine-tune the model in place; returns the per-step loss history."""
    if config.epochs == 0:
        return []
    if not pairs:
        raise ValueError("empty training dataset")
    rng = SeededRng(config.seed).substream("training")
    state = OptimizerState.for_model(model)
    total_steps = config.epochs * batches_per_epoch(len(pairs), config.batch_size)
    history: list[StepRecord] = []
    step = 0
    for epoch in range(config.epochs):
        batches = make_batches(pairs, config.batch_size, rng.substream(f"epoch{epoch}"))
        for batch_pairs in batches:
            step += 1
            loss, grads = batch_loss_and_grads(batch_pairs, model, config.temperature)
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite loss at step {step}")
            lr = lr_schedule(step, total_steps, config.peak_lr, config.warmup_ratio)
            adamw_step(model.params, grads, state, lr, config)
            history.append(StepRecord(step, epoch, lr, loss))
    return history


def write_loss_csv(history: list[StepRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("step,epoch,lr,loss\n")
        for rec in history:
            handle.write(f"{rec.step},{rec.epoch},{rec.lr!r},{rec.loss!r}\n")
