"""Central finite-difference verification of the analytic gradients."""

from __future__ import annotations

import numpy as np

from ..rng import substream
from .layers import Layer
from .model import ModelSpec, SequenceRegressor


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Elementwise |analytic - numeric| / max(1, |numeric|), maximised."""
    denom = np.maximum(1.0, np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def _scalar_loss(forward, upstream):
    return float(np.sum(forward() * upstream))


def check_layer(layer: Layer, x: np.ndarray, seed: int = 0, step: float = 1e-5) -> dict[str, float]:
    """Compare each parameter's analytic gradient against central differences.

    Returns a mapping from parameter name to its worst relative error; the
    key ``"<input>"`` reports the input gradient check.
    """
    x = np.asarray(x, dtype=np.float64)
    rng = substream(seed, "gradcheck-upstream")
    upstream = rng.standard_normal(layer.forward(x).shape)

    for p in layer.parameters():
        p.zero_grad()
    layer.forward(x)
    dx = layer.backward(upstream)

    errors: dict[str, float] = {}
    for p in layer.parameters():
        analytic = p.grad.copy()
        numeric = np.zeros_like(analytic)
        flat = p.value.ravel()
        num_flat = numeric.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = _scalar_loss(lambda: layer.forward(x), upstream)
            flat[i] = orig - step
            down = _scalar_loss(lambda: layer.forward(x), upstream)
            flat[i] = orig
            num_flat[i] = (up - down) / (2.0 * step)
        errors[p.name] = max_rel_error(analytic, numeric)

    numeric_x = np.zeros_like(x)
    flat_x = x.ravel()
    num_flat = numeric_x.ravel()
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + step
        up = _scalar_loss(lambda: layer.forward(x), upstream)
        flat_x[i] = orig - step
        down = _scalar_loss(lambda: layer.forward(x), upstream)
        flat_x[i] = orig
        num_flat[i] = (up - down) / (2.0 * step)
    errors["<input>"] = max_rel_error(dx, numeric_x)
    return errors


def check_function(fn, inputs: list[np.ndarray], analytic_grads, upstream, step: float = 1e-5) -> list[float]:
    """Finite-difference check for a pure array function of several inputs."""
    errors = []
    for arr, analytic in zip(inputs, analytic_grads):
        numeric = np.zeros_like(arr)
        flat = arr.ravel()
        num_flat = numeric.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = float(np.sum(fn() * upstream))
            flat[i] = orig - step
            down = float(np.sum(fn() * upstream))
            flat[i] = orig
            num_flat[i] = (up - down) / (2.0 * step)
        errors.append(max_rel_error(analytic, numeric))
    return errors


def check_model(spec: ModelSpec, t: int = 7, seed: int = 0, step: float = 1e-5) -> dict[str, float]:
    """Gradient-check every parameter of a full model on one input window."""
    model = SequenceRegressor(spec)
    rng = substream(seed, "gradcheck-model")
    x = rng.standard_normal((t, spec.input_dim))
    upstream = rng.standard_normal((t, spec.output_dims))

    model.zero_grad()
    model.forward(x)
    model.backward(upstream)

    errors = {}
    for p in model.parameters():
        analytic = p.grad.copy()
        numeric = np.zeros_like(analytic)
        flat = p.value.ravel()
        num_flat = numeric.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = float(np.sum(model.forward(x) * upstream))
            flat[i] = orig - step
            down = float(np.sum(model.forward(x) * upstream))
            flat[i] = orig
            num_flat[i] = (up - down) / (2.0 * step)
        errors[p.name] = max_rel_error(analytic, numeric)
    return errors
