"""Training losses with analytic gradients.

The concordance loss is computed per window (1 - CCC of that window) and
averaged over the batch: windows cut from different recordings have
unrelated label statistics, so a single CCC over the flattened batch would
mix them.  L1 and MSE are plain means over all valid steps.  Every function
returns ``(loss, gradient_wrt_predictions)`` and accepts an optional
validity mask matching the prediction shape's leading axes.
"""

from __future__ import annotations

import numpy as np

from ..metrics import EPS

LOSS_NAMES = ("ccc", "l1", "mse")


def _lift(pred, target, mask):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    squeeze = pred.ndim == 1
    if squeeze:
        pred = pred[None]
        target = target[None]
    if pred.shape != target.shape:
        raise ValueError(f"prediction shape {pred.shape} != target {target.shape}")
    if mask is None:
        mask = np.ones(pred.shape, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
        if squeeze and mask.ndim == 1:
            mask = mask[None]
        if mask.shape != pred.shape:
            raise ValueError(f"mask shape {mask.shape} != predictions {pred.shape}")
    return pred, target, mask, squeeze


def ccc_loss(pred, target, mask=None):
    """Mean over windows of (1 - window CCC); shapes (T,) or (B, T)."""
    p, y, m, squeeze = _lift(pred, target, mask)
    mf = m.astype(np.float64)
    n = mf.sum(axis=1)
    if np.any(n < 2):
        raise ValueError("CCC loss needs at least 2 valid steps per window")
    mean_p = (p * mf).sum(axis=1) / n
    mean_y = (y * mf).sum(axis=1) / n
    dp = (p - mean_p[:, None]) * mf
    dy = (y - mean_y[:, None]) * mf
    cov = (dp * dy).sum(axis=1) / n
    var_p = (dp * dp).sum(axis=1) / n
    var_y = (dy * dy).sum(axis=1) / n
    delta = mean_p - mean_y
    denom = var_p + var_y + delta * delta + EPS
    c = 2.0 * cov / denom
    batch = p.shape[0]
    loss = float(np.mean(1.0 - c))
    coeff = 1.0 / (n * denom)
    grad = -(2.0 * dy - c[:, None] * (2.0 * dp + 2.0 * delta[:, None] * mf))
    grad *= coeff[:, None] / batch
    return loss, (grad[0] if squeeze else grad)


def l1_loss(pred, target, mask=None):
    """Mean absolute error over all valid steps; subgradient 0 at equality."""
    p, y, m, squeeze = _lift(pred, target, mask)
    mf = m.astype(np.float64)
    total = mf.sum()
    if total < 1:
        raise ValueError("no valid steps")
    err = (p - y) * mf
    loss = float(np.abs(err).sum() / total)
    grad = np.sign(err) / total
    return loss, (grad[0] if squeeze else grad)


def mse_loss(pred, target, mask=None):
    """Mean squared error over all valid steps."""
    p, y, m, squeeze = _lift(pred, target, mask)
    mf = m.astype(np.float64)
    total = mf.sum()
    if total < 1:
        raise ValueError("no valid steps")
    err = (p - y) * mf
    loss = float((err * err).sum() / total)
    grad = 2.0 * err / total
    return loss, (grad[0] if squeeze else grad)


_BASE = {"ccc": ccc_loss, "l1": l1_loss, "mse": mse_loss}


def get_loss(name: str):
    try:
        return _BASE[name]
    except KeyError:
        raise ValueError(f"unknown loss {name!r}; choose from {LOSS_NAMES}") from None


def check_task_weights(weights, n_dims: int) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n_dims,):
        raise ValueError(f"need {n_dims} task weights, got shape {w.shape}")
    if np.any(w < 0):
        raise ValueError("task weights must be nonnegative")
    if abs(float(w.sum()) - 1.0) > 1e-9:
        raise ValueError(f"task weights must sum to 1, got {w.sum()}")
    return w


def multitask_loss(preds, targets, weights, base: str = "ccc", mask=None):
    """Weighted sum of per-dimension losses over (B, T, K) predictions.

    With weights (1, 0, 0) this reduces exactly to the single-task loss on
    the first dimension: zero-weight terms contribute exactly zero to both
    the value and the gradient.
    """
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    squeeze = preds.ndim == 2
    if squeeze:
        preds = preds[None]
        targets = targets[None]
    if preds.ndim != 3 or preds.shape != targets.shape:
        raise ValueError(
            f"expected matching (B, T, K) arrays, got {preds.shape} vs {targets.shape}"
        )
    k = preds.shape[2]
    w = check_task_weights(weights, k)
    loss_fn = get_loss(base)
    total = 0.0
    grad = np.zeros_like(preds)
    for j in range(k):
        value_j, grad_j = loss_fn(preds[:, :, j], targets[:, :, j], mask)
        total += w[j] * value_j
        grad[:, :, j] = w[j] * grad_j
    return float(total), (grad[0] if squeeze else grad)
