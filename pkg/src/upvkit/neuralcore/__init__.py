from .tensor import (  # noqa: F401
    GraphError,
    NonFiniteError,
    Tensor,
    add,
    backward,
    concat,
    dense,
    dropout,
    last_state,
    masked_softmax,
    matmul,
    mean,
    mul,
    reshape,
    set_finite_checks,
    sigmoid,
    tanh,
    weighted_bce,
    weighted_pool,
)
from .lstm import LSTMParams, lstm_forward  # noqa: F401
from .layers import AttentionParams, attention, fan_in_uniform  # noqa: F401
from .optim import AdamState, adam_step, zero_grads  # noqa: F401
from .gradcheck import GradCheckReport, grad_check  # noqa: F401
