"""Forward LSTM over label-conditioned token sequences, as one fused op.

The per-position input is the token embedding concatenated with a replicated
label embedding.  Because the label half never varies along the sequence, the
input projection is split into a token part (one big matmul over all steps)
and a label part (computed once per batch), which is what makes CPU training
at full dimensions practical.  Padded steps copy the previous hidden and cell
state unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, _accumulate, _result


@dataclass
class LSTMParams:
    """Gate order along the 4H axis: input, forget, candidate, output."""

    w_xe: Tensor  # token input -> gates, (token_dim, 4H)
    w_xl: Tensor  # label input -> gates, (label_dim, 4H)
    w_h: Tensor  # hidden -> gates, (H, 4H)
    bias: Tensor  # (4H,)

    @property
    def hidden(self) -> int:
        return self.w_h.data.shape[0]

    @classmethod
    def init(cls, token_dim: int, label_dim: int, hidden: int, rng: np.random.Generator) -> "LSTMParams":
        """Small-uniform weights; forget-gate bias starts at one."""
        scale = 0.08

        def uniform(shape):
            return Tensor(rng.uniform(-scale, scale, size=shape), requires_grad=True)

        bias = np.zeros(4 * hidden)
        bias[hidden : 2 * hidden] = 1.0
        return cls(
            w_xe=uniform((token_dim, 4 * hidden)),
            w_xl=uniform((label_dim, 4 * hidden)),
            w_h=uniform((hidden, 4 * hidden)),
            bias=Tensor(bias, requires_grad=True),
        )

    def tensors(self) -> dict[str, Tensor]:
        return {"w_xe": self.w_xe, "w_xl": self.w_xl, "w_h": self.w_h, "bias": self.bias}


def lstm_forward(x_seq: Tensor, label_vec: Tensor, mask: np.ndarray, params: LSTMParams) -> Tensor:
    """Run the recurrence over a batch.

    x_seq: (B, T, token_dim) embedded tokens, zero rows at padding.
    label_vec: (B, label_dim) replicated implicitly across positions.
    mask: (B, T) boolean, True at real tokens.
    Returns the hidden-state sequence (B, T, H).
    """
    B, T, token_dim = x_seq.data.shape
    H = params.hidden
    if params.w_xe.data.shape[0] != token_dim:
        raise ValueError(
            f"input dim {token_dim} does not match weights ({params.w_xe.data.shape[0]})"
        )
    if params.w_xl.data.shape[0] != label_vec.data.shape[1]:
        raise ValueError("label dim does not match weights")

    w_xe, w_xl, w_h, bias = params.w_xe, params.w_xl, params.w_h, params.bias
    m = mask.astype(np.float64)[:, :, None]  # (B,T,1)

    pre_x = (x_seq.data.reshape(B * T, token_dim) @ w_xe.data).reshape(B, T, 4 * H)
    pre_lab = label_vec.data @ w_xl.data + bias.data  # (B, 4H)

    gate_i = np.empty((B, T, H))
    gate_f = np.empty((B, T, H))
    gate_g = np.empty((B, T, H))
    gate_o = np.empty((B, T, H))
    tanh_c = np.empty((B, T, H))
    c_prev_seq = np.empty((B, T, H))
    h_prev_seq = np.empty((B, T, H))
    h_out = np.empty((B, T, H))

    def gate_sigmoid(z):
        # exp may overflow to inf for saturated gates; 1/(1+inf) is exactly 0
        with np.errstate(over="ignore"):
            return 1.0 / (1.0 + np.exp(-z))

    h = np.zeros((B, H))
    c = np.zeros((B, H))
    for t in range(T):
        h_prev_seq[:, t] = h
        c_prev_seq[:, t] = c
        a = pre_x[:, t] + pre_lab + h @ w_h.data
        i = gate_sigmoid(a[:, :H])
        f = gate_sigmoid(a[:, H : 2 * H])
        g = np.tanh(a[:, 2 * H : 3 * H])
        o = gate_sigmoid(a[:, 3 * H :])
        c_hat = f * c + i * g
        tc = np.tanh(c_hat)
        h_hat = o * tc
        mt = m[:, t]
        c = mt * c_hat + (1.0 - mt) * c
        h = mt * h_hat + (1.0 - mt) * h
        gate_i[:, t], gate_f[:, t], gate_g[:, t], gate_o[:, t] = i, f, g, o
        tanh_c[:, t] = tc
        h_out[:, t] = h

    def backward_fn(g_out):
        dA = np.empty((B, T, 4 * H))
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        w_h_T = w_h.data.T
        for t in range(T - 1, -1, -1):
            mt = m[:, t]
            dh = g_out[:, t] + dh_next
            dh_hat = mt * dh
            dh_copy = (1.0 - mt) * dh
            dc = dc_next
            dc_hat = mt * dc
            dc_copy = (1.0 - mt) * dc
            tc = tanh_c[:, t]
            i, f, gg, o = gate_i[:, t], gate_f[:, t], gate_g[:, t], gate_o[:, t]
            do = dh_hat * tc
            dc_hat = dc_hat + dh_hat * o * (1.0 - tc * tc)
            di = dc_hat * gg
            dg = dc_hat * i
            df = dc_hat * c_prev_seq[:, t]
            dc_gate = dc_hat * f
            da_t = dA[:, t]
            da_t[:, :H] = di * i * (1.0 - i)
            da_t[:, H : 2 * H] = df * f * (1.0 - f)
            da_t[:, 2 * H : 3 * H] = dg * (1.0 - gg * gg)
            da_t[:, 3 * H :] = do * o * (1.0 - o)
            dh_next = dh_copy + da_t @ w_h_T
            dc_next = dc_copy + dc_gate

        dA_2d = dA.reshape(B * T, 4 * H)
        if w_xe.requires_grad:
            _accumulate(w_xe, x_seq.data.reshape(B * T, token_dim).T @ dA_2d)
        dA_label = dA.sum(axis=1)  # (B, 4H)
        if w_xl.requires_grad:
            _accumulate(w_xl, label_vec.data.T @ dA_label)
        if bias.requires_grad:
            _accumulate(bias, dA_2d.sum(axis=0))
        if w_h.requires_grad:
            _accumulate(w_h, h_prev_seq.reshape(B * T, H).T @ dA_2d)
        if x_seq.requires_grad:
            _accumulate(x_seq, (dA_2d @ w_xe.data.T).reshape(B, T, token_dim))
        if label_vec.requires_grad:
            _accumulate(label_vec, dA_label @ w_xl.data.T)

    return _result(h_out, (x_seq, label_vec, w_xe, w_xl, w_h, bias), backward_fn)
