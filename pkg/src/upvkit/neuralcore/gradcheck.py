"""Central finite-difference verification of analytic gradients.

The forward function is re-evaluated with every parameter element nudged by
plus and minus epsilon, so it must be a pure function of the parameters (run
it in inference mode, or with a fixed dropout stream).  Errors are relative
to each parameter group's gradient scale, which keeps near-zero entries from
drowning the report in floating-point noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .tensor import Tensor, backward


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_group: dict[str, float]
    worst_group: str

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_error <= tolerance


def grad_check(
    loss_fn: Callable[[], Tensor],
    params: dict[str, Tensor],
    eps: float = 1e-5,
    corrupt: str | None = None,
) -> GradCheckReport:
    """Compare analytic gradients of ``loss_fn`` against central differences.

    ``corrupt`` names a parameter group whose analytic gradient gets an
    injected offset, as a negative control proving the check can fail.
    """
    loss = loss_fn()
    backward(loss)
    analytic = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }
    if corrupt is not None:
        analytic[corrupt] = analytic[corrupt] + 0.05

    per_group: dict[str, float] = {}
    for name, p in params.items():
        flat = p.data.reshape(-1)
        numeric = np.zeros_like(flat)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            hi = loss_fn().item()
            flat[i] = original - eps
            lo = loss_fn().item()
            flat[i] = original
            numeric[i] = (hi - lo) / (2.0 * eps)
        numeric = numeric.reshape(p.data.shape)
        a = analytic[name]
        scale = max(1e-8, float(np.abs(a).max()), float(np.abs(numeric).max()))
        per_group[name] = float(np.abs(a - numeric).max()) / scale

    worst = max(per_group, key=per_group.get)
    return GradCheckReport(
        max_rel_error=per_group[worst], per_group=per_group, worst_group=worst
    )
