"""Reconstruction loss with velocity and foot-contact terms."""

from __future__ import annotations

import numpy as np

from .. import nn
from ..data.layout import LAYOUT

BCE_FLOOR = 1e-3


def velocity_loss(pred, target):
    """MSE between first differences (along frames) of prediction and target."""
    dp = pred[:, 1:] - pred[:, :-1]
    dt = np.diff(np.asarray(target), axis=1)
    return ((dp - dt) ** 2).mean()


def contact_bce(pred, target, contact=LAYOUT.contact):
    """Binary cross-entropy of predicted contact channels against {0,1} labels.

    Predictions are clamped to [0, 1] (overshoot earns nothing) and log
    arguments floored at ``BCE_FLOOR``, so an exact 0/1 prediction of an
    exact 0/1 label costs exactly zero.
    """
    idx = list(contact)
    p = nn.clamp(pred[:, :, idx], 0.0, 1.0)
    y = np.asarray(target)[:, :, idx]
    ll = y * nn.log(nn.clamp_min(p, BCE_FLOOR)) + (1.0 - y) * nn.log(nn.clamp_min(1.0 - p, BCE_FLOOR))
    return -ll.mean()


def diffusion_loss(pred, target, geo_weight=1.0, contact=LAYOUT.contact):
    """Return a dict with ``mse``, ``velocity``, ``contact``, ``geo`` and ``total`` Tensors."""
    target = np.asarray(target, dtype=pred.dtype)
    mse = ((pred - target) ** 2).mean()
    vel = velocity_loss(pred, target)
    bce = contact_bce(pred, target, contact)
    geo = vel + bce
    return {"mse": mse, "velocity": vel, "contact": bce, "geo": geo, "total": mse + geo * geo_weight}
