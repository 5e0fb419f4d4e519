"""Trainable sentence encoder: tokenizer, embeddings, self-attention blocks,
and four pooling strategies (cls / mean / max / LSTM last hidden state).

Forward passes cache intermediates; backward passes are fully analytic and
verified against central finite differences in the test suite. The LSTM
pooling layer decouples the sentence embedding size from the token width:
under lstm pooling the output has `lstm_hidden` dimensions, otherwise
`embed_dim`.
"""

from __future__ import annotations

import json
import os
import re
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable

import numpy as np

from .numeric import SeededRng

PAD_TOKEN, UNK_TOKEN, CLS_TOKEN = "<pad>", "<unk>", "<cls>"
SPECIAL_TOKENS = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN)
PAD_ID, UNK_ID, CLS_ID = 0, 1, 2

POOLING_STRATEGIES = ("cls", "mean", "max", "lstm")

LAYER_NORM_EPS = 1e-5

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


class EncoderError(Exception):
    """Invalid encoder configuration or input."""


def word_tokens(text: str) -> list[str]:
    """Lowercased word-level tokens with punctuation split off."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Vocabulary:
    tokens: list[str]  # in id order; specials first
    index: dict[str, int] = field(repr=False)

    @classmethod
    def from_tokens(cls, tokens: list[str]) -> "Vocabulary":
        index = {t: i for i, t in enumerate(tokens)}
        if len(index) != len(tokens):
            raise EncoderError("duplicate tokens in vocabulary")
        for tok, want in zip(SPECIAL_TOKENS, range(3)):
            if index.get(tok) != want:
                raise EncoderError("special tokens missing or misplaced")
        return cls(tokens, index)

    def __len__(self) -> int:
        return len(self.tokens)


def build_vocabulary(sentences: Iterable[str], min_count: int = 1) -> Vocabulary:
    """Frequency-filtered word vocabulary with deterministic id assignment
    (frequency descending, ties lexicographic)."""
    counts: Counter[str] = Counter()
    for sentence in sentences:
        counts.update(word_tokens(sentence))
    kept = sorted(
        (t for t, c in counts.items() if c >= min_count),
        key=lambda t: (-counts[t], t),
    )
    return Vocabulary.from_tokens(list(SPECIAL_TOKENS) + kept)


def tokenize(text: str, vocab: Vocabulary, max_len: int) -> list[int]:
    """[CLS] + token ids (UNK for out-of-vocabulary), truncated to max_len."""
    ids = [CLS_ID] + [vocab.index.get(t, UNK_ID) for t in word_tokens(text)]
    return ids[:max_len]


def embed_tokens(ids: list[int], embedding: np.ndarray) -> np.ndarray:
    """Row lookup into the embedding matrix; one vector per token id."""
    ids = list(ids)
    if any(i < 0 or i >= embedding.shape[0] for i in ids):
        raise EncoderError("token id out of range for embedding matrix")
    return embedding[ids]


@dataclass
class EncoderConfig:
    embed_dim: int = 64
    num_blocks: int = 1
    ffn_dim: int = 128
    pooling: str = "lstm"
    lstm_hidden: int = 128
    max_len: int = 64

    def __post_init__(self):
        if self.pooling not in POOLING_STRATEGIES:
            raise EncoderError(f"unknown pooling strategy {self.pooling!r}")
        if self.embed_dim < 1 or self.ffn_dim < 1 or self.lstm_hidden < 1:
            raise EncoderError("dimensions must be positive")
        if self.num_blocks < 0:
            raise EncoderError("num_blocks must be >= 0")
        if self.max_len < 2:
            raise EncoderError("max_len must be >= 2")

    @property
    def output_dim(self) -> int:
        return self.lstm_hidden if self.pooling == "lstm" else self.embed_dim


@dataclass
class EncoderModel:
    config: EncoderConfig
    vocab: Vocabulary
    params: dict[str, np.ndarray]

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(p) for name, p in self.params.items()}


def _glorot(rng: SeededRng, fan_in: int, fan_out: int, shape) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


def init_model(config: EncoderConfig, vocab: Vocabulary, rng: SeededRng) -> EncoderModel:
    """Seeded uniform(-a, a) init with a = sqrt(6/(fan_in+fan_out)) per matrix;
    LSTM forget-gate bias starts at 1, all other biases at 0."""
    d, f, h = config.embed_dim, config.ffn_dim, config.lstm_hidden
    params: dict[str, np.ndarray] = {}
    params["embed"] = _glorot(rng.substream("embed"), len(vocab), d, (len(vocab), d))
    for b in range(config.num_blocks):
        r = rng.substream(f"block{b}")
        for name in ("wq", "wk", "wv", "wo"):
            params[f"block{b}.{name}"] = _glorot(r.substream(name), d, d, (d, d))
        params[f"block{b}.w1"] = _glorot(r.substream("w1"), d, f, (d, f))
        params[f"block{b}.b1"] = np.zeros(f)
        params[f"block{b}.w2"] = _glorot(r.substream("w2"), f, d, (f, d))
        params[f"block{b}.b2"] = np.zeros(d)
        params[f"block{b}.ln1_g"] = np.ones(d)
        params[f"block{b}.ln1_b"] = np.zeros(d)
        params[f"block{b}.ln2_g"] = np.ones(d)
        params[f"block{b}.ln2_b"] = np.zeros(d)
    r = rng.substream("lstm")
    for gate in ("i", "f", "o", "g"):
        params[f"lstm.w{gate}"] = _glorot(
            r.substream(gate), d + h, h, (h, d + h)
        )
        params[f"lstm.b{gate}"] = np.full(h, 1.0) if gate == "f" else np.zeros(h)
    return EncoderModel(config, vocab, params)


# ---------------------------------------------------------------------------
# layer primitives

def layer_norm_forward(x: np.ndarray, gain: np.ndarray, bias: np.ndarray):
    mean = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    invstd = 1.0 / np.sqrt(var + LAYER_NORM_EPS)
    xhat = (x - mean) * invstd
    return gain * xhat + bias, (xhat, invstd, gain)


def layer_norm_backward(dy: np.ndarray, cache):
    xhat, invstd, gain = cache
    dgain = (dy * xhat).sum(axis=0)
    dbias = dy.sum(axis=0)
    dxhat = dy * gain
    dx = invstd * (
        dxhat
        - dxhat.mean(axis=1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)
    )
    return dx, dgain, dbias


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def attention_block_forward(x: np.ndarray, params: dict[str, np.ndarray], prefix: str):
    """Single-head scaled dot-product attention + residual + layer norm +
    position-wise ReLU FFN + residual + layer norm. Returns (output, cache)."""
    d = x.shape[1]
    wq, wk, wv, wo = (params[f"{prefix}.{n}"] for n in ("wq", "wk", "wv", "wo"))
    q, k, v = x @ wq, x @ wk, x @ wv
    scores = (q @ k.T) / np.sqrt(d)
    attn = _softmax_rows(scores)
    heads = attn @ v
    proj = heads @ wo
    res1 = x + proj
    norm1, ln1_cache = layer_norm_forward(
        res1, params[f"{prefix}.ln1_g"], params[f"{prefix}.ln1_b"]
    )
    pre_act = norm1 @ params[f"{prefix}.w1"] + params[f"{prefix}.b1"]
    hidden = np.maximum(pre_act, 0.0)
    ffn = hidden @ params[f"{prefix}.w2"] + params[f"{prefix}.b2"]
    res2 = norm1 + ffn
    out, ln2_cache = layer_norm_forward(
        res2, params[f"{prefix}.ln2_g"], params[f"{prefix}.ln2_b"]
    )
    cache = (x, q, k, v, attn, heads, norm1, pre_act, hidden, ln1_cache, ln2_cache)
    return out, cache


def attention_block_backward(
    dout: np.ndarray,
    cache,
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    prefix: str,
) -> np.ndarray:
    x, q, k, v, attn, heads, norm1, pre_act, hidden, ln1_cache, ln2_cache = cache
    d = x.shape[1]
    wq, wk, wv, wo = (params[f"{prefix}.{n}"] for n in ("wq", "wk", "wv", "wo"))

    dres2, dg2, db2 = layer_norm_backward(dout, ln2_cache)
    grads[f"{prefix}.ln2_g"] += dg2
    grads[f"{prefix}.ln2_b"] += db2
    dffn = dres2
    dnorm1 = dres2.copy()

    dhidden = dffn @ params[f"{prefix}.w2"].T
    grads[f"{prefix}.w2"] += hidden.T @ dffn
    grads[f"{prefix}.b2"] += dffn.sum(axis=0)
    dpre = dhidden * (pre_act > 0.0)
    dnorm1 += dpre @ params[f"{prefix}.w1"].T
    grads[f"{prefix}.w1"] += norm1.T @ dpre
    grads[f"{prefix}.b1"] += dpre.sum(axis=0)

    dres1, dg1, db1 = layer_norm_backward(dnorm1, ln1_cache)
    grads[f"{prefix}.ln1_g"] += dg1
    grads[f"{prefix}.ln1_b"] += db1
    dproj = dres1
    dx = dres1.copy()

    dheads = dproj @ wo.T
    grads[f"{prefix}.wo"] += heads.T @ dproj
    dattn = dheads @ v.T
    dv = attn.T @ dheads
    # rowwise softmax Jacobian
    dscores = attn * (dattn - (dattn * attn).sum(axis=1, keepdims=True))
    dq = (dscores @ k) / np.sqrt(d)
    dk = (dscores.T @ q) / np.sqrt(d)
    dx += dq @ wq.T + dk @ wk.T + dv @ wv.T
    grads[f"{prefix}.wq"] += x.T @ dq
    grads[f"{prefix}.wk"] += x.T @ dk
    grads[f"{prefix}.wv"] += x.T @ dv
    return dx


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def lstm_forward(y: np.ndarray, params: dict[str, np.ndarray]):
    """Unidirectional LSTM over token vectors; h_0 = c_0 = 0.

    Returns (hidden_states, cell_states, cache) with one row per time step.
    """
    wi, wf, wo, wg = (params[f"lstm.w{g}"] for g in ("i", "f", "o", "g"))
    bi, bf, bo, bg = (params[f"lstm.b{g}"] for g in ("i", "f", "o", "g"))
    h_dim = wi.shape[0]
    n = y.shape[0]
    hs = np.zeros((n, h_dim))
    cs = np.zeros((n, h_dim))
    steps = []
    h_prev = np.zeros(h_dim)
    c_prev = np.zeros(h_dim)
    for t in range(n):
        z = np.concatenate([y[t], h_prev])
        i = _sigmoid(wi @ z + bi)
        f = _sigmoid(wf @ z + bf)
        o = _sigmoid(wo @ z + bo)
        g = np.tanh(wg @ z + bg)
        c = f * c_prev + i * g
        tanh_c = np.tanh(c)
        h = o * tanh_c
        hs[t], cs[t] = h, c
        steps.append((z, i, f, o, g, c_prev, tanh_c))
        h_prev, c_prev = h, c
    return hs, cs, steps


def lstm_backward(
    dh_last: np.ndarray,
    steps,
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    input_dim: int,
) -> np.ndarray:
    """Backprop through time with upstream gradient on the final hidden state."""
    wi, wf, wo, wg = (params[f"lstm.w{g}"] for g in ("i", "f", "o", "g"))
    n = len(steps)
    dy = np.zeros((n, input_dim))
    dh = dh_last.copy()
    dc = np.zeros_like(dh_last)
    for t in range(n - 1, -1, -1):
        z, i, f, o, g, c_prev, tanh_c = steps[t]
        do = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c**2)
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dc = dc * f
        da_i = di * i * (1.0 - i)
        da_f = df * f * (1.0 - f)
        da_o = do * o * (1.0 - o)
        da_g = dg * (1.0 - g**2)
        grads["lstm.wi"] += np.outer(da_i, z)
        grads["lstm.wf"] += np.outer(da_f, z)
        grads["lstm.wo"] += np.outer(da_o, z)
        grads["lstm.wg"] += np.outer(da_g, z)
        grads["lstm.bi"] += da_i
        grads["lstm.bf"] += da_f
        grads["lstm.bo"] += da_o
        grads["lstm.bg"] += da_g
        dz = wi.T @ da_i + wf.T @ da_f + wo.T @ da_o + wg.T @ da_g
        dy[t] = dz[:input_dim]
        dh = dz[input_dim:]
    return dy


# ---------------------------------------------------------------------------
# full encoder

def pool(y: np.ndarray, strategy: str, params: dict[str, np.ndarray] | None = None):
    """Reduce per-token vectors to one sentence vector. Returns (vector, cache)."""
    if strategy == "cls":
        return y[0].copy(), None
    if strategy == "mean":
        return y.mean(axis=0), None
    if strategy == "max":
        argmax = y.argmax(axis=0)  # ties resolve to the first index
        return y[argmax, np.arange(y.shape[1])], argmax
    if strategy == "lstm":
        if params is None:
            raise EncoderError("lstm pooling requires LSTM parameters")
        hs, _, steps = lstm_forward(y, params)
        return hs[-1].copy(), steps
    raise EncoderError(f"unknown pooling strategy {strategy!r}")


def _forward(text: str, model: EncoderModel):
    cfg = model.config
    ids = tokenize(text, model.vocab, cfg.max_len)
    x = embed_tokens(ids, model.params["embed"])
    block_caches = []
    for b in range(cfg.num_blocks):
        x, cache = attention_block_forward(x, model.params, f"block{b}")
        block_caches.append(cache)
    emb, pool_cache = pool(x, cfg.pooling, model.params)
    return emb, (ids, block_caches, x, pool_cache)


def encode(text: str, model: EncoderModel) -> np.ndarray:
    """Sentence embedding: tokenize -> embed -> attention blocks -> pool."""
    emb, _ = _forward(text, model)
    return emb


def _backward(demb: np.ndarray, cache, model: EncoderModel, grads) -> None:
    cfg = model.config
    ids, block_caches, y, pool_cache = cache
    n, d = y.shape
    if cfg.pooling == "cls":
        dy = np.zeros_like(y)
        dy[0] = demb
    elif cfg.pooling == "mean":
        dy = np.tile(demb / n, (n, 1))
    elif cfg.pooling == "max":
        dy = np.zeros_like(y)
        dy[pool_cache, np.arange(d)] = demb
    else:  # lstm
        dy = lstm_backward(demb, pool_cache, model.params, grads, d)
    for b in range(cfg.num_blocks - 1, -1, -1):
        dy = attention_block_backward(
            dy, block_caches[b], model.params, grads, f"block{b}"
        )
    np.add.at(grads["embed"], ids, dy)


def model_backward(
    texts: list[str],
    upstream: list[np.ndarray],
    model: EncoderModel,
    grads: dict[str, np.ndarray] | None = None,
) -> dict[str, np.ndarray]:
    """Analytic gradients of sum_i <upstream_i, encode(text_i)> for every
    parameter tensor, accumulated over the batch."""
    if len(texts) != len(upstream):
        raise EncoderError("texts and upstream gradients differ in length")
    if grads is None:
        grads = model.zero_grads()
    out_dim = model.config.output_dim
    for text, demb in zip(texts, upstream):
        demb = np.asarray(demb, dtype=np.float64)
        if demb.shape != (out_dim,):
            raise EncoderError(
                f"upstream gradient shape {demb.shape} != ({out_dim},)"
            )
        _, fcache = _forward(text, model)
        _backward(demb, fcache, model, grads)
    return grads


def finite_difference_grad(
    loss_fn: Callable[[EncoderModel], float], model: EncoderModel, eps: float = 1e-5
) -> dict[str, np.ndarray]:
    """Central-difference gradient of loss_fn per scalar parameter."""
    if eps <= 0:
        raise EncoderError("eps must be positive")
    grads = {}
    for name, tensor in model.params.items():
        grad = np.zeros_like(tensor)
        flat = tensor.reshape(-1)
        gflat = grad.reshape(-1)
        for idx in range(flat.shape[0]):
            orig = flat[idx]
            flat[idx] = orig + eps
            up = loss_fn(model)
            flat[idx] = orig - eps
            down = loss_fn(model)
            flat[idx] = orig
            gflat[idx] = (up - down) / (2.0 * eps)
        grads[name] = grad
    return grads


# ---------------------------------------------------------------------------
# checkpointing

def save_model(model: EncoderModel, path: str | os.PathLike) -> None:
    """Write config, vocabulary and all parameter tensors as a JSON document.

    Floats are serialized with shortest round-trip repr, so load(save(m))
    reproduces every parameter bit-exactly.
    """
    doc = {
        "config": asdict(model.config),
        "vocab": model.vocab.tokens,
        "params": {
            name: {"shape": list(t.shape), "data": t.reshape(-1).tolist()}
            for name, t in model.params.items()
        },
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(doc, handle)


def load_model(path: str | os.PathLike) -> EncoderModel:
    with open(path, encoding="utf-8") as handle:
        doc = json.load(handle)
    config = EncoderConfig(**doc["config"])
    vocab = Vocabulary.from_tokens(doc["vocab"])
    params = {
        name: np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in doc["params"].items()
    }
    model = EncoderModel(config, vocab, params)
    for tensor in params.values():
        if not np.all(np.isfinite(tensor)):
            raise EncoderError(f"non-finite parameters in checkpoint {path}")
    return model
