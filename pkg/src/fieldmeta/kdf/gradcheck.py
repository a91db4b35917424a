"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import torch


def grad_check(
    loss_fn: Callable[[], torch.Tensor],
    params: Sequence[torch.Tensor],
    eps: float = 1e-5,
    n_coords: int = 60,
    seed: int = 0,
) -> float:
    """Max relative error between autograd and central finite differences.

    Samples ``n_coords`` scalar coordinates across all parameters. The error
    denominator is max(|analytic|, |numeric|, 1) so near-zero gradients are
    compared absolutely. Run the model in double precision for tight bounds.
    """
    params = [p for p in params if p.requires_grad]
    loss = loss_fn()
    grads = torch.autograd.grad(loss, params, allow_unused=True)

    sizes = [p.numel() for p in params]
    total = sum(sizes)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(total, size=min(n_coords, total), replace=False)

    max_rel = 0.0
    with torch.no_grad():
        for flat_index in sorted(int(c) for c in chosen):
            param_index = 0
            offset = flat_index
            while offset >= sizes[param_index]:
                offset -= sizes[param_index]
                param_index += 1
            grad = grads[param_index]
            analytic = 0.0 if grad is None else float(grad.reshape(-1)[offset])

            flat = params[param_index].data.reshape(-1)
            original = float(flat[offset])
            flat[offset] = original + eps
            loss_plus = float(loss_fn())
            flat[offset] = original - eps
            loss_minus = float(loss_fn())
            flat[offset] = original

            numeric = (loss_plus - loss_minus) / (2.0 * eps)
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1.0)
            max_rel = max(max_rel, rel)
    return max_rel
