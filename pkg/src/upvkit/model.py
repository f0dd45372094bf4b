"""Relatedness scoring models: (sentence, label) pairs to per-level scores.

Every variant shares the same skeleton: embed tokens, concatenate a
replicated max-pooled label embedding to every position, run one forward
LSTM, pool (attention or last state), optionally concatenate an equally
encoded label-description vector, then decode through one sigmoid head per
requested level.  The description encoder reuses the text LSTM's weights,
which is why enabling it adds no recurrent parameters.

Multi-level heads cascade: each level owns a tanh hidden layer whose output
joins the shared representation as input to the next level, so finer
predictions see what the coarser stage computed.

Word vectors stay frozen throughout; the kernel exploits that by treating
all embedding inputs as constants.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .corpus import tokenize
from .embeddings import EmbeddingTable, label_embedding, lookup
from .neuralcore import (
    AttentionParams,
    LSTMParams,
    Tensor,
    attention,
    concat,
    dense,
    dropout,
    fan_in_uniform,
    last_state,
    lstm_forward,
    reshape,
    sigmoid,
    tanh,
)
from .taxonomy import Taxonomy

HEAD_SETTINGS = ("t3", "t2t3", "t1t2t3")


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    use_attention: bool = True
    use_description: bool = True
    heads: str = "t1t2t3"
    emb_dim: int = 300
    hidden: int = 128
    attn_dim: int = 0  # 0 means "same as hidden"
    head_hidden: int = 64
    max_sample_len: int = 25
    max_descr_len: int = 15
    max_label_len: int = 4
    dropout: float = 0.2

    def __post_init__(self) -> None:
        if self.heads not in HEAD_SETTINGS:
            raise ValueError(f"heads must be one of {HEAD_SETTINGS}")
        for name in ("emb_dim", "hidden", "head_hidden", "max_sample_len", "max_descr_len", "max_label_len"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    @property
    def attention_dim(self) -> int:
        return self.attn_dim or self.hidden

    @property
    def levels(self) -> tuple[str, ...]:
        """Prediction levels in cascade order, coarse to fine."""
        return {"t3": ("t3",), "t2t3": ("t2", "t3"), "t1t2t3": ("t1", "t2", "t3")}[self.heads]

    @property
    def pooled_dim(self) -> int:
        return self.hidden * (2 if self.use_description else 1)


@dataclass
class HeadParams:
    """One cascade level: optional tanh hidden layer plus a scalar read-out."""

    hid_w: Tensor | None
    hid_b: Tensor | None
    out_w: Tensor
    out_b: Tensor

    def tensors(self) -> dict[str, Tensor]:
        out = {}
        if self.hid_w is not None:
            out["hid_w"] = self.hid_w
            out["hid_b"] = self.hid_b
        out["out_w"] = self.out_w
        out["out_b"] = self.out_b
        return out


class Model:
    """Parameter bundle plus caches tied to a taxonomy and embedding table."""

    def __init__(
        self,
        config: ModelConfig,
        taxonomy: Taxonomy,
        table: EmbeddingTable,
        trained_labels: Sequence[str],
        lstm: LSTMParams,
        att_text: AttentionParams | None,
        att_descr: AttentionParams | None,
        heads: dict[str, HeadParams],
        thresholds: dict[str, float] | None = None,
        metadata: dict | None = None,
    ):
        if table.dim != config.emb_dim:
            raise ValueError(f"embedding table dim {table.dim} != config emb_dim {config.emb_dim}")
        unknown = [t for t in trained_labels if t not in taxonomy]
        if unknown:
            raise ValueError(f"trained labels missing from taxonomy: {unknown[:5]}")
        self.config = config
        self.taxonomy = taxonomy
        self.table = table
        self.trained_labels = list(trained_labels)
        self._trained_set = set(trained_labels)
        self.lstm = lstm
        self.att_text = att_text
        self.att_descr = att_descr
        self.heads = heads
        self.thresholds = thresholds
        self.metadata = metadata or {}
        self._label_vec: dict[str, np.ndarray] = {}
        self._descr_enc: dict[str, tuple[np.ndarray, int]] = {}

    # -- construction -------------------------------------------------------

    @classmethod
    def build(
        cls,
        config: ModelConfig,
        taxonomy: Taxonomy,
        table: EmbeddingTable,
        trained_labels: Sequence[str],
        seed: int = 0,
    ) -> "Model":
        rng = np.random.default_rng(seed)
        lstm = LSTMParams.init(config.emb_dim, config.emb_dim, config.hidden, rng)
        att_text = att_descr = None
        if config.use_attention:
            att_text = AttentionParams.init(config.hidden, config.emb_dim, config.attention_dim, rng)
            if config.use_description:
                att_descr = AttentionParams.init(config.hidden, config.emb_dim, config.attention_dim, rng)
        heads: dict[str, HeadParams] = {}
        d = config.pooled_dim
        if config.heads == "t3":
            heads["t3"] = HeadParams(
                hid_w=None,
                hid_b=None,
                out_w=fan_in_uniform(rng, (d, 1)),
                out_b=Tensor(np.zeros(1), requires_grad=True),
            )
        else:
            in_dim = d
            for level in config.levels:
                heads[level] = HeadParams(
                    hid_w=fan_in_uniform(rng, (in_dim, config.head_hidden)),
                    hid_b=Tensor(np.zeros(config.head_hidden), requires_grad=True),
                    out_w=fan_in_uniform(rng, (config.head_hidden, 1)),
                    out_b=Tensor(np.zeros(1), requires_grad=True),
                )
                in_dim = d + config.head_hidden  # next level reads h joined with this hidden
        return cls(config, taxonomy, table, trained_labels, lstm, att_text, att_descr, heads)

    def named_params(self) -> list[tuple[str, Tensor]]:
        """Trainable tensors in a stable order (checkpoint and Adam order)."""
        out = [(f"lstm.{k}", v) for k, v in self.lstm.tensors().items()]
        if self.att_text is not None:
            out += [(f"att_text.{k}", v) for k, v in self.att_text.tensors().items()]
        if self.att_descr is not None:
            out += [(f"att_descr.{k}", v) for k, v in self.att_descr.tensors().items()]
        for level, head in self.heads.items():
            out += [(f"head_{level}.{k}", v) for k, v in head.tensors().items()]
        return out

    def params(self) -> list[Tensor]:
        return [t for _, t in self.named_params()]

    # -- embedding caches ----------------------------------------------------

    def label_vec(self, label: str) -> np.ndarray:
        vec = self._label_vec.get(label)
        if vec is None:
            vec = label_embedding(label, self.taxonomy, self.table, self.config.max_label_len)
            self._label_vec[label] = vec
        return vec

    def descr_encoding(self, label: str) -> tuple[np.ndarray, int]:
        enc = self._descr_enc.get(label)
        if enc is None:
            tokens = tokenize(self.taxonomy.node(label).description)[: self.config.max_descr_len]
            mat = np.stack([lookup(t, self.table) for t in tokens]) if tokens else np.zeros((0, self.table.dim))
            enc = (mat, len(tokens))
            self._descr_enc[label] = enc
        return enc

    # -- forward -------------------------------------------------------------

    def _encode_text_batch(self, token_lists: Sequence[Sequence[str]]) -> tuple[Tensor, np.ndarray]:
        limit = self.config.max_sample_len
        lengths = [min(len(toks), limit) for toks in token_lists]
        if min(lengths) == 0:
            raise ValueError("empty token sequence; drop such inputs upstream")
        T = max(lengths)
        B = len(token_lists)
        X = np.zeros((B, T, self.table.dim))
        mask = np.zeros((B, T), dtype=bool)
        for b, toks in enumerate(token_lists):
            n = lengths[b]
            for t in range(n):
                X[b, t] = lookup(toks[t], self.table)
            mask[b, :n] = True
        return Tensor(X), mask

    def _encode_descr_batch(self, labels: Sequence[str]) -> tuple[Tensor, np.ndarray]:
        encs = [self.descr_encoding(lab) for lab in labels]
        lengths = [n for _, n in encs]
        if min(lengths) == 0:
            raise ValueError("label with empty description cannot be encoded")
        T = max(lengths)
        B = len(labels)
        D = np.zeros((B, T, self.table.dim))
        mask = np.zeros((B, T), dtype=bool)
        for b, (mat, n) in enumerate(encs):
            D[b, :n] = mat[:n]
            mask[b, :n] = True
        return Tensor(D), mask

    def forward_batch(
        self,
        token_lists: Sequence[Sequence[str]],
        labels: Sequence[str],
        mode: str = "infer",
        rng: np.random.Generator | None = None,
    ) -> dict[str, Tensor]:
        """Score a batch of (tokens, label) pairs; returns one Tensor per level.

        ``mode`` is "train" (dropout active, requires ``rng``) or "infer"
        (deterministic).
        """
        if mode not in ("train", "infer"):
            raise ValueError("mode must be 'train' or 'infer'")
        training = mode == "train"
        if training and rng is None:
            raise ValueError("training mode requires an rng for dropout")
        for lab in labels:
            if lab not in self._trained_set:
                raise ValueError(f"label {lab!r} is not among this model's trained labels")
        cfg = self.config

        label_mat = Tensor(np.stack([self.label_vec(lab) for lab in labels]))
        x_seq, mask = self._encode_text_batch(token_lists)
        h_seq = lstm_forward(x_seq, label_mat, mask, self.lstm)
        if cfg.use_attention:
            pooled_text, _ = attention(h_seq, label_mat, mask, self.att_text)
        else:
            pooled_text = last_state(h_seq, mask.sum(axis=1))
        pooled_text = dropout(pooled_text, cfg.dropout, rng, training)

        if cfg.use_description:
            d_seq, d_mask = self._encode_descr_batch(labels)
            hd_seq = lstm_forward(d_seq, label_mat, d_mask, self.lstm)
            if cfg.use_attention:
                pooled_descr, _ = attention(hd_seq, label_mat, d_mask, self.att_descr)
            else:
                pooled_descr = last_state(hd_seq, d_mask.sum(axis=1))
            pooled_descr = dropout(pooled_descr, cfg.dropout, rng, training)
            h = concat([pooled_text, pooled_descr], axis=1)
        else:
            h = pooled_text

        B = len(labels)
        scores: dict[str, Tensor] = {}
        if cfg.heads == "t3":
            head = self.heads["t3"]
            logits = reshape(dense(h, head.out_w, head.out_b), (B,))
            scores["t3"] = sigmoid(logits)
        else:
            stage_in = h
            for level in cfg.levels:
                head = self.heads[level]
                hidden = tanh(dense(stage_in, head.hid_w, head.hid_b))
                hidden = dropout(hidden, cfg.dropout, rng, training)
                logits = reshape(dense(hidden, head.out_w, head.out_b), (B,))
                scores[level] = sigmoid(logits)
                stage_in = concat([h, hidden], axis=1)
        return scores

    def forward(
        self,
        tokens: Sequence[str],
        label: str,
        mode: str = "infer",
        rng: np.random.Generator | None = None,
    ) -> dict[str, float]:
        """Single-pair convenience wrapper around :meth:`forward_batch`."""
        out = self.forward_batch([list(tokens)], [label], mode=mode, rng=rng)
        return {level: float(t.data[0]) for level, t in out.items()}

    def score_pairs(
        self,
        pairs: Sequence[tuple[Sequence[str], str]],
        batch_size: int = 256,
    ) -> dict[str, np.ndarray]:
        """Inference-mode scores for many pairs, batched for throughput."""
        levels = self.config.levels
        out = {level: np.empty(len(pairs)) for level in levels}
        for start in range(0, len(pairs), batch_size):
            chunk = pairs[start : start + batch_size]
            scores = self.forward_batch([p[0] for p in chunk], [p[1] for p in chunk], mode="infer")
            for level in levels:
                out[level][start : start + len(chunk)] = scores[level].data
        return out


def count_params(model: Model) -> dict[str, int]:
    """Trainable parameter counts per group; excludes the frozen embeddings."""
    groups: dict[str, int] = {}
    for name, tensor in model.named_params():
        group = name.split(".")[0]
        groups[group] = groups.get(group, 0) + tensor.size
    groups["total"] = sum(groups.values())
    return groups


# -- checkpointing -----------------------------------------------------------

_MAGIC = b"UPVK"
_VERSION = 1


def save_checkpoint(model: Model, path: str) -> None:
    """Self-describing container: JSON header, raw float64 blocks, digest."""
    named = model.named_params()
    header = {
        "format_version": _VERSION,
        "config": asdict(model.config),
        "labels": model.trained_labels,
        "thresholds": model.thresholds,
        "metadata": model.metadata,
        "params": [{"name": n, "shape": list(t.data.shape)} for n, t in named],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = bytearray()
    blob += _MAGIC
    blob += struct.pack("<I", _VERSION)
    blob += struct.pack("<Q", len(header_bytes))
    blob += header_bytes
    for _, tensor in named:
        blob += np.ascontiguousarray(tensor.data, dtype="<f8").tobytes()
    blob += hashlib.sha256(bytes(blob)).digest()
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def load_checkpoint(path: str, taxonomy: Taxonomy, table: EmbeddingTable) -> Model:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 48 or blob[:4] != _MAGIC:
        raise CheckpointError("not a checkpoint file")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError("digest mismatch: checkpoint corrupted or truncated")
    (version,) = struct.unpack("<I", body[4:8])
    if version != _VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (header_len,) = struct.unpack("<Q", body[8:16])
    header = json.loads(body[16 : 16 + header_len].decode("utf-8"))
    config = ModelConfig(**header["config"])
    model = Model.build(config, taxonomy, table, header["labels"])
    model.thresholds = header["thresholds"]
    model.metadata = header["metadata"]
    offset = 16 + header_len
    named = dict(model.named_params())
    if [p["name"] for p in header["params"]] != [n for n, _ in model.named_params()]:
        raise CheckpointError("parameter manifest does not match the configuration")
    for spec in header["params"]:
        shape = tuple(spec["shape"])
        n_bytes = int(np.prod(shape)) * 8 if shape else 8
        chunk = body[offset : offset + n_bytes]
        if len(chunk) != n_bytes:
            raise CheckpointError("truncated parameter block")
        named[spec["name"]].data = np.frombuffer(chunk, dtype="<f8").reshape(shape).copy()
        offset += n_bytes
    if offset != len(body):
        raise CheckpointError("trailing bytes after parameter blocks")
    return model
