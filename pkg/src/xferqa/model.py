"""Bigram-CNN sentence-pair scorer: parameters, forward/backward, checkpoints.

Each sentence runs through width-2 convolution -> tanh -> window-2 average
pooling -> width-2 convolution -> tanh -> global average pooling. The
question and answer encodings plus their elementwise product feed a
logistic output unit. Embeddings are frozen, so the trainable surface is
the two filter banks, their biases, and the output weights.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .embeddings import SentenceMatrix
from .errors import DataError, NumericError
from .numkernel import (
    avg_pool2,
    avg_pool2_backward,
    bce_loss,
    bce_sigmoid_backward,
    conv_bigram,
    conv_bigram_backward,
    global_avg_pool,
    global_avg_pool_backward,
    sigmoid,
)

CHECKPOINT_FORMAT_VERSION = 1

DIM_PRESETS = {
    "desk": dict(embed_dim=8, n_filters_1=8),
    "paper": dict(embed_dim=300, n_filters_1=40),
}


@dataclass(frozen=True)
class ModelDims:
    """Architecture sizes; n_filters_2 defaults to n_filters_1."""

    embed_dim: int = 8
    n_filters_1: int = 8
    n_filters_2: int | None = None
    max_len: int = 40

    def __post_init__(self):
        if self.n_filters_2 is None:
            object.__setattr__(self, "n_filters_2", self.n_filters_1)
        for name in ("embed_dim", "n_filters_1", "n_filters_2", "max_len"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def preset(cls, name: str, **overrides) -> "ModelDims":
        if name not in DIM_PRESETS:
            raise ValueError(f"unknown dims preset {name!r}; choose from {sorted(DIM_PRESETS)}")
        return cls(**{**DIM_PRESETS[name], **overrides})

    def to_dict(self) -> dict:
        return {
            "embed_dim": self.embed_dim,
            "n_filters_1": self.n_filters_1,
            "n_filters_2": self.n_filters_2,
            "max_len": self.max_len,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelDims":
        return cls(**d)


def param_shapes(dims: ModelDims) -> tuple[tuple[str, tuple[int, ...]], ...]:
    """Canonical (name, shape) order for all trainable arrays."""
    return (
        ("conv1_filters", (dims.n_filters_1, 2 * dims.embed_dim)),
        ("conv1_bias", (dims.n_filters_1,)),
        ("conv2_filters", (dims.n_filters_2, 2 * dims.n_filters_1)),
        ("conv2_bias", (dims.n_filters_2,)),
        ("lr_weights", (3 * dims.n_filters_2,)),
        ("lr_bias", (1,)),
    )


@dataclass
class ModelParams:
    """All trainable weights of the scorer."""

    conv1_filters: np.ndarray
    conv1_bias: np.ndarray
    conv2_filters: np.ndarray
    conv2_bias: np.ndarray
    lr_weights: np.ndarray
    lr_bias: np.ndarray

    def arrays(self) -> tuple[tuple[str, np.ndarray], ...]:
        return tuple((name, getattr(self, name)) for name in _PARAM_NAMES)

    def copy(self) -> "ModelParams":
        return type(self)(**{name: arr.copy() for name, arr in self.arrays()})

    def to_vector(self) -> np.ndarray:
        return np.concatenate([arr.ravel() for _, arr in self.arrays()])

    @classmethod
    def from_vector(cls, dims: ModelDims, vec: np.ndarray) -> "ModelParams":
        fields = {}
        offset = 0
        for name, shape in param_shapes(dims):
            size = int(np.prod(shape))
            fields[name] = np.asarray(vec[offset : offset + size], dtype=np.float64).reshape(shape)
            offset += size
        if offset != vec.size:
            raise ValueError(f"vector has {vec.size} entries, expected {offset}")
        return cls(**fields)


_PARAM_NAMES = ("conv1_filters", "conv1_bias", "conv2_filters", "conv2_bias", "lr_weights", "lr_bias")


class Gradients(ModelParams):
    """Cotangents of ModelParams, shape-identical by construction."""


def zero_gradients(dims: ModelDims) -> Gradients:
    return Gradients(**{name: np.zeros(shape) for name, shape in param_shapes(dims)})


def dims_of(params: ModelParams) -> ModelDims:
    """Recover the dims implied by parameter shapes (max_len stays default)."""
    n1, two_e = params.conv1_filters.shape
    n2 = params.conv2_filters.shape[0]
    return ModelDims(embed_dim=two_e // 2, n_filters_1=n1, n_filters_2=n2)


def init_params(dims: ModelDims, seed: int) -> ModelParams:
    """Uniform Glorot init for weight matrices, zero biases, deterministic per seed."""
    rng = np.random.default_rng(seed)

    def glorot(shape, fan_in, fan_out):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, shape)

    return ModelParams(
        conv1_filters=glorot((dims.n_filters_1, 2 * dims.embed_dim), 2 * dims.embed_dim, dims.n_filters_1),
        conv1_bias=np.zeros(dims.n_filters_1),
        conv2_filters=glorot((dims.n_filters_2, 2 * dims.n_filters_1), 2 * dims.n_filters_1, dims.n_filters_2),
        conv2_bias=np.zeros(dims.n_filters_2),
        lr_weights=glorot((3 * dims.n_filters_2,), 3 * dims.n_filters_2, 1),
        lr_bias=np.zeros(1),
    )


def _encode_forward(params: ModelParams, sent: SentenceMatrix):
    # Padding rows beyond the populated prefix never enter any pooling mean;
    # sentences shorter than 2 tokens fall back to one zero padding row.
    length = max(sent.true_len, 2)
    x = sent.data[:length]
    h1 = conv_bigram(x, params.conv1_filters, params.conv1_bias)
    p1 = avg_pool2(h1)
    if p1.shape[0] < 2:
        p1_in = np.vstack([p1, np.zeros((2 - p1.shape[0], p1.shape[1]))])
    else:
        p1_in = p1
    h2 = conv_bigram(p1_in, params.conv2_filters, params.conv2_bias)
    enc = global_avg_pool(h2)
    return enc, (x, h1, p1, p1_in, h2)


def encode(params: ModelParams, sent: SentenceMatrix) -> np.ndarray:
    """Sentence encoding of length n_filters_2."""
    return _encode_forward(params, sent)[0]


def _encode_backward(params: ModelParams, cache, d_enc: np.ndarray, grads: Gradients) -> None:
    x, h1, p1, p1_in, h2 = cache
    d_h2 = global_avg_pool_backward(d_enc, h2.shape[0])
    d_p1_in, d_f2, d_b2 = conv_bigram_backward(p1_in, params.conv2_filters, h2, d_h2)
    grads.conv2_filters += d_f2
    grads.conv2_bias += d_b2
    d_p1 = d_p1_in[: p1.shape[0]]
    d_h1 = avg_pool2_backward(d_p1, h1.shape[0])
    _, d_f1, d_b1 = conv_bigram_backward(x, params.conv1_filters, h1, d_h1)
    grads.conv1_filters += d_f1
    grads.conv1_bias += d_b1
    # d_x is dropped: embeddings are frozen.


def _score_forward(params: ModelParams, q: SentenceMatrix, a: SentenceMatrix):
    enc_q, cache_q = _encode_forward(params, q)
    enc_a, cache_a = _encode_forward(params, a)
    v = np.concatenate([enc_q, enc_a, enc_q * enc_a])
    z = float(params.lr_weights @ v) + float(params.lr_bias[0])
    return sigmoid(z), (enc_q, enc_a, v, cache_q, cache_a)


def score(params: ModelParams, q: SentenceMatrix, a: SentenceMatrix) -> float:
    """Probability in (0, 1) that the answer is correct for the question."""
    return _score_forward(params, q, a)[0]


def loss_and_grad(params: ModelParams, batch: Sequence) -> tuple[float, Gradients]:
    """Mean binary cross-entropy over a batch and its exact gradient.

    Batch items are (q, a, label) or (q, a, label, question_id) tuples of
    SentenceMatrix, SentenceMatrix, {0,1}. Raises NumericError, naming the
    question, if any per-item loss is non-finite.
    """
    if not batch:
        raise ValueError("batch is empty")
    grads = zero_gradients(dims_of(params))
    n = len(batch)
    total = 0.0
    for item in batch:
        q, a, label = item[0], item[1], item[2]
        qid = item[3] if len(item) > 3 else "?"
        p, (enc_q, enc_a, v, cache_q, cache_a) = _score_forward(params, q, a)
        loss = bce_loss(p, label)
        if not math.isfinite(loss):
            raise NumericError(f"non-finite loss on question '{qid}'")
        total += loss
        d_z = bce_sigmoid_backward(p, label) / n
        grads.lr_weights += d_z * v
        grads.lr_bias += d_z
        d_v = d_z * params.lr_weights
        k = enc_q.size
        d_enc_q = d_v[:k] + d_v[2 * k :] * enc_a
        d_enc_a = d_v[k : 2 * k] + d_v[2 * k :] * enc_q
        _encode_backward(params, cache_q, d_enc_q, grads)
        _encode_backward(params, cache_a, d_enc_a, grads)
    return total / n, grads


def save_checkpoint(params: ModelParams, dims: ModelDims, path) -> None:
    """Write params and dims as JSON; the round trip is bit-exact."""
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "dims": dims.to_dict(),
        "arrays": {
            name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in params.arrays()
        },
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def load_checkpoint(path) -> tuple[ModelParams, ModelDims]:
    """Read a checkpoint, validating version, shapes, and finiteness."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON: {exc}") from exc
    if doc.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint format_version {doc.get('format_version')!r}")
    try:
        dims = ModelDims.from_dict(doc["dims"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: bad dims header: {exc}") from exc
    arrays = doc.get("arrays", {})
    fields = {}
    for name, shape in param_shapes(dims):
        entry = arrays.get(name)
        if entry is None:
            raise DataError(f"{path}: missing array {name!r}")
        if tuple(entry.get("shape", ())) != shape:
            raise DataError(
                f"{path}: array {name!r} has shape {entry.get('shape')}, expected {list(shape)}"
            )
        arr = np.array(entry["data"], dtype=np.float64)
        if arr.size != int(np.prod(shape)):
            raise DataError(f"{path}: array {name!r} has {arr.size} values, expected {int(np.prod(shape))}")
        if not np.all(np.isfinite(arr)):
            raise DataError(f"{path}: array {name!r} contains non-finite values")
        fields[name] = arr.reshape(shape)
    return ModelParams(**fields), dims


def resolve_dims(spec, table_dim: int) -> ModelDims:
    """Resolve a dims request (None, preset name, dict, or ModelDims) against a table.

    The embedding dimension must agree with the table; None picks the desk
    filter geometry at the table's dimension.
    """
    if spec is None:
        return ModelDims(embed_dim=table_dim, n_filters_1=DIM_PRESETS["desk"]["n_filters_1"])
    if isinstance(spec, str):
        dims = ModelDims.preset(spec)
    elif isinstance(spec, dict):
        dims = ModelDims.from_dict({**spec})
    elif isinstance(spec, ModelDims):
        dims = spec
    else:
        raise ValueError(f"cannot interpret dims specification {spec!r}")
    if dims.embed_dim != table_dim:
        raise DataError(
            f"model embed_dim {dims.embed_dim} does not match embedding table dim {table_dim}"
        )
    return dims
