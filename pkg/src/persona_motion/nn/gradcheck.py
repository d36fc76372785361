"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np


def max_relative_error(loss_fn, params, h=1e-5, rng=None, max_entries=None, floor=1e-6):
    """Largest relative error between analytic and numeric gradients.

    ``loss_fn`` builds a fresh scalar loss Tensor from the current parameter
    values. ``params`` is a list of Parameters (use 64-bit ones). When
    ``max_entries`` is set, that many entries per parameter are probed at
    random, otherwise every entry is.
    """
    for p in params:
        p.grad = None
    loss_fn().backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    worst = 0.0
    for p, grad in zip(params, analytic):
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = (rng or np.random.default_rng(0)).choice(flat.size, max_entries, replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            up = float(loss_fn().data)
            flat[i] = orig - h
            down = float(loss_fn().data)
            flat[i] = orig
            numeric = (up - down) / (2 * h)
            a = float(grad.reshape(-1)[i])
            err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            worst = max(worst, err)
    return worst
