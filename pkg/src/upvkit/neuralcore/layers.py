"""Label-conditioned attention over LSTM states.

Scores come from a tanh projection of each hidden state plus a tanh
projection of the label embedding replicated across positions; masked
positions are excluded before the softmax, so their weights are exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, _accumulate, _result, masked_softmax, matmul, tanh, weighted_pool


def fan_in_uniform(rng: np.random.Generator, shape: tuple[int, ...]) -> Tensor:
    scale = 1.0 / np.sqrt(shape[0])
    return Tensor(rng.uniform(-scale, scale, size=shape), requires_grad=True)


@dataclass
class AttentionParams:
    w_hidden: Tensor  # (H, H) hidden-state projection
    w_label: Tensor  # (label_dim, d_a) label-embedding projection
    w_score: Tensor  # (H + d_a,) scoring vector over the stacked projections

    @classmethod
    def init(cls, hidden: int, label_dim: int, attn_dim: int, rng: np.random.Generator) -> "AttentionParams":
        return cls(
            w_hidden=fan_in_uniform(rng, (hidden, hidden)),
            w_label=fan_in_uniform(rng, (label_dim, attn_dim)),
            w_score=fan_in_uniform(rng, (hidden + attn_dim,)),
        )

    def tensors(self) -> dict[str, Tensor]:
        return {"w_hidden": self.w_hidden, "w_label": self.w_label, "w_score": self.w_score}


def _split_score_vector(w: Tensor, hidden: int) -> tuple[Tensor, Tensor]:
    """View the (H + d_a,) scoring vector as its two halves, with gradients."""
    head = w.data[:hidden]
    tail = w.data[hidden:]

    def backward_head(g):
        full = np.zeros_like(w.data)
        full[:hidden] = g
        _accumulate(w, full)

    def backward_tail(g):
        full = np.zeros_like(w.data)
        full[hidden:] = g
        _accumulate(w, full)

    return _result(head, (w,), backward_head), _result(tail, (w,), backward_tail)


def attention(
    h_seq: Tensor,
    label_vec: Tensor,
    mask: np.ndarray,
    params: AttentionParams,
) -> tuple[Tensor, Tensor]:
    """Pool (B,T,H) states into (B,H) with label-conditioned weights.

    Returns (pooled, alpha); alpha rows sum to one over unmasked positions.
    Raises on a fully masked row.
    """
    hidden = params.w_hidden.data.shape[0]
    proj_h = tanh(matmul(h_seq, params.w_hidden))  # (B,T,H)
    proj_l = tanh(matmul(label_vec, params.w_label))  # (B,d_a)
    w_text, w_lab = _split_score_vector(params.w_score, hidden)
    scores_text = matmul(proj_h, w_text)  # (B,T)
    scores_label = matmul(proj_l, w_lab)  # (B,)
    B = scores_label.data.shape[0]
    from .tensor import add, reshape

    scores = add(scores_text, reshape(scores_label, (B, 1)))
    alpha = masked_softmax(scores, mask)
    pooled = weighted_pool(alpha, h_seq)
    return pooled, alpha
