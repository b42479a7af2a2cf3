"""Differentiable sequence layers with hand-written reverse-mode gradients.

Everything runs in double precision on arrays shaped (batch, time, features).
Each layer caches what its backward pass needs during forward; backward
accumulates into ``Parameter.grad`` (so gradients over loss sums, or over
batches processed in chunks, add up naturally) and returns the gradient with
respect to its input.
"""

from __future__ import annotations

import numpy as np

from ..rng import substream
from .params import Parameter, xavier_uniform


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # exp(-|x|) never overflows; both branches share the one exp call
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0, z)
    out /= 1.0 + z
    return out


def _softmax_last_(x: np.ndarray) -> np.ndarray:
    """In-place row softmax; max-subtraction keeps exp() bounded."""
    x -= x.max(axis=-1, keepdims=True)
    np.exp(x, out=x)
    x /= x.sum(axis=-1, keepdims=True)
    return x


class Layer:
    def parameters(self) -> list[Parameter]:
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _require_cache(self, cache):
        if cache is None:
            raise RuntimeError(f"{type(self).__name__}.backward called before forward")
        return cache


class Linear(Layer):
    def __init__(self, d_in: int, d_out: int, seed: int, name: str, bias: bool = True):
        self.name = name
        self.weight = Parameter(
            xavier_uniform(substream(seed, "init", f"{name}.weight"), d_in, d_out),
            f"{name}.weight",
        )
        self.bias = Parameter(np.zeros(d_out), f"{name}.bias") if bias else None
        self._x = None

    def parameters(self):
        return [self.weight] + ([self.bias] if self.bias is not None else [])

    def forward(self, x):
        self._x = x
        y = x @ self.weight.value
        if self.bias is not None:
            y = y + self.bias.value
        return y

    def backward(self, grad):
        x = self._require_cache(self._x)
        flat_x = x.reshape(-1, x.shape[-1])
        flat_g = grad.reshape(-1, grad.shape[-1])
        self.weight.grad += flat_x.T @ flat_g
        if self.bias is not None:
            self.bias.grad += flat_g.sum(axis=0)
        return grad @ self.weight.value.T


class LayerNorm(Layer):
    """Normalization over the feature axis with learned gain and offset."""

    def __init__(self, dim: int, name: str, eps: float = 1e-8):
        self.name = name
        self.eps = eps
        self.gain = Parameter(np.ones(dim), f"{name}.gain")
        self.offset = Parameter(np.zeros(dim), f"{name}.offset")
        self._cache = None

    def parameters(self):
        return [self.gain, self.offset]

    def forward(self, x):
        mean = x.mean(axis=-1, keepdims=True)
        centered = x - mean
        var = (centered * centered).mean(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = centered * inv
        self._cache = (xhat, inv)
        return xhat * self.gain.value + self.offset.value

    def backward(self, grad):
        xhat, inv = self._require_cache(self._cache)
        self.offset.grad += grad.reshape(-1, grad.shape[-1]).sum(axis=0)
        self.gain.grad += (grad * xhat).reshape(-1, grad.shape[-1]).sum(axis=0)
        gx = grad * self.gain.value
        mean_g = gx.mean(axis=-1, keepdims=True)
        mean_gx = (gx * xhat).mean(axis=-1, keepdims=True)
        return inv * (gx - mean_g - xhat * mean_gx)


def _attention_forward(q, k, v):
    """Scaled dot-product attention on (..., T, d) arrays; returns (out, cache)."""
    d_k = q.shape[-1]
    scale = 1.0 / np.sqrt(d_k)
    scaled_q = q * scale  # scaling the small factor avoids touching the TxT matrix
    weights = _softmax_last_(scaled_q @ np.swapaxes(k, -1, -2))
    out = weights @ v
    return out, (scaled_q, k, v, weights, scale)


def _attention_backward(grad, cache):
    scaled_q, k, v, weights, scale = cache
    d_weights = grad @ np.swapaxes(v, -1, -2)
    d_v = np.swapaxes(weights, -1, -2) @ grad
    # softmax jacobian applied row-wise, reusing the d_weights buffer
    d_weights *= weights
    row = d_weights.sum(axis=-1, keepdims=True)
    d_scores = d_weights
    d_scores -= weights * row
    d_q = (d_scores @ k) * scale
    d_k = np.swapaxes(d_scores, -1, -2) @ scaled_q
    return d_q, d_k, d_v


def attention(q, k, v) -> np.ndarray:
    """softmax(Q K^T / sqrt(d_k)) V for (T, d) or batched (..., T, d) inputs."""
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if q.shape[-1] != k.shape[-1]:
        raise ValueError(f"query dim {q.shape[-1]} != key dim {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise ValueError(f"{k.shape[-2]} keys vs {v.shape[-2]} values")
    out, _ = _attention_forward(q, k, v)
    return out


class MultiHeadSelfAttention(Layer):
    """Parallel per-head projections of the same input, concatenated and mixed.

    Query/key/value projections are stored as (model_dim, model_dim) matrices
    whose column blocks of width d_k = model_dim / heads belong to the
    individual heads; the output projection mixes the concatenated heads.
    """

    def __init__(self, model_dim: int, heads: int, seed: int, name: str):
        if model_dim % heads != 0:
            raise ValueError(f"model_dim {model_dim} not divisible by {heads} heads")
        self.model_dim = model_dim
        self.heads = heads
        self.d_k = model_dim // heads
        self.name = name

        def proj(suffix):
            return Parameter(
                xavier_uniform(
                    substream(seed, "init", f"{name}.{suffix}"), model_dim, model_dim
                ),
                f"{name}.{suffix}",
            )

        self.w_query = proj("query")
        self.w_key = proj("key")
        self.w_value = proj("value")
        self.w_out = proj("out")
        self.b_out = Parameter(np.zeros(model_dim), f"{name}.out_bias")
        self._cache = None

    def parameters(self):
        return [self.w_query, self.w_key, self.w_value, self.w_out, self.b_out]

    def _split(self, x):
        b, t, _ = x.shape
        return x.reshape(b, t, self.heads, self.d_k).transpose(0, 2, 1, 3)

    def _merge(self, x):
        b, h, t, d = x.shape
        return x.transpose(0, 2, 1, 3).reshape(b, t, h * d)

    def forward(self, x):
        q = self._split(x @ self.w_query.value)
        k = self._split(x @ self.w_key.value)
        v = self._split(x @ self.w_value.value)
        ctx, att_cache = _attention_forward(q, k, v)
        merged = self._merge(ctx)
        self._cache = (x, att_cache, merged)
        return merged @ self.w_out.value + self.b_out.value

    def backward(self, grad):
        x, att_cache, merged = self._require_cache(self._cache)
        m = grad.shape[-1]
        flat_g = grad.reshape(-1, m)
        self.w_out.grad += merged.reshape(-1, m).T @ flat_g
        self.b_out.grad += flat_g.sum(axis=0)
        d_merged = grad @ self.w_out.value.T
        d_q, d_k, d_v = _attention_backward(self._split(d_merged), att_cache)
        d_q, d_k, d_v = self._merge(d_q), self._merge(d_k), self._merge(d_v)
        flat_x = x.reshape(-1, m)
        self.w_query.grad += flat_x.T @ d_q.reshape(-1, m)
        self.w_key.grad += flat_x.T @ d_k.reshape(-1, m)
        self.w_value.grad += flat_x.T @ d_v.reshape(-1, m)
        return d_q @ self.w_query.value.T + d_k @ self.w_key.value.T + d_v @ self.w_value.value.T


class AttentionBlock(Layer):
    """Self-attention wrapped with the usual residual add and layer norm.

    With ``residual=False`` the block degrades to the bare attention layer,
    which is the ablation switch for the wiring itself.
    """

    def __init__(self, model_dim: int, heads: int, seed: int, name: str, residual: bool = True):
        self.attn = MultiHeadSelfAttention(model_dim, heads, seed, name)
        self.residual = residual
        self.norm = LayerNorm(model_dim, f"{name}.norm") if residual else None

    def parameters(self):
        params = self.attn.parameters()
        if self.norm is not None:
            params += self.norm.parameters()
        return params

    def forward(self, x):
        y = self.attn.forward(x)
        if not self.residual:
            return y
        return self.norm.forward(x + y)

    def backward(self, grad):
        if not self.residual:
            return self.attn.backward(grad)
        g = self.norm.backward(grad)
        return g + self.attn.backward(g)


class LSTM(Layer):
    """Single-direction LSTM with zero initial state.

    Gate order in the stacked weight matrices is input, forget, candidate,
    output; the forget-gate bias starts at one so early training does not
    wash out the cell state.
    """

    def __init__(self, d_in: int, hidden: int, seed: int, name: str, reverse: bool = False):
        self.d_in = d_in
        self.hidden = hidden
        self.reverse = reverse
        self.name = name
        rng_w = substream(seed, "init", f"{name}.w_input")
        rng_u = substream(seed, "init", f"{name}.w_state")
        self.w_input = Parameter(
            xavier_uniform(rng_w, d_in, 4 * hidden), f"{name}.w_input"
        )
        self.w_state = Parameter(
            xavier_uniform(rng_u, hidden, 4 * hidden), f"{name}.w_state"
        )
        bias = np.zeros(4 * hidden)
        bias[hidden : 2 * hidden] = 1.0
        self.bias = Parameter(bias, f"{name}.bias")
        self._cache = None

    def parameters(self):
        return [self.w_input, self.w_state, self.bias]

    def _order(self, t):
        return range(t - 1, -1, -1) if self.reverse else range(t)

    def forward(self, x):
        b, t, _ = x.shape
        hdim = self.hidden
        # input contributions for every step in one GEMM; the loop only
        # carries the recurrent term
        z_input = x @ self.w_input.value + self.bias.value
        h = np.zeros((b, hdim))
        c = np.zeros((b, hdim))
        out = np.empty((b, t, hdim))
        steps = []
        for idx in self._order(t):
            z = z_input[:, idx] + h @ self.w_state.value
            gate_i = _sigmoid(z[:, :hdim])
            gate_f = _sigmoid(z[:, hdim : 2 * hdim])
            gate_g = np.tanh(z[:, 2 * hdim : 3 * hdim])
            gate_o = _sigmoid(z[:, 3 * hdim :])
            c_new = gate_f * c + gate_i * gate_g
            tanh_c = np.tanh(c_new)
            steps.append((idx, h, c, gate_i, gate_f, gate_g, gate_o, tanh_c))
            h = gate_o * tanh_c
            c = c_new
            out[:, idx] = h
        self._cache = (x, steps)
        return out

    def backward(self, grad):
        x, steps = self._require_cache(self._cache)
        b, t, _ = x.shape
        hdim = self.hidden
        dz_all = np.empty((b, t, 4 * hdim))
        h_prev_all = np.empty((b, t, hdim))
        dh_next = np.zeros((b, hdim))
        dc_next = np.zeros((b, hdim))
        for idx, h_prev, c_prev, gate_i, gate_f, gate_g, gate_o, tanh_c in reversed(steps):
            dh = grad[:, idx] + dh_next
            d_o = dh * tanh_c
            dc = dc_next + dh * gate_o * (1.0 - tanh_c * tanh_c)
            dz = dz_all[:, idx]
            dz[:, :hdim] = (dc * gate_g) * gate_i * (1.0 - gate_i)
            dz[:, hdim : 2 * hdim] = (dc * c_prev) * gate_f * (1.0 - gate_f)
            dz[:, 2 * hdim : 3 * hdim] = (dc * gate_i) * (1.0 - gate_g * gate_g)
            dz[:, 3 * hdim :] = d_o * gate_o * (1.0 - gate_o)
            h_prev_all[:, idx] = h_prev
            dh_next = dz @ self.w_state.value.T
            dc_next = dc * gate_f
        flat_dz = dz_all.reshape(-1, 4 * hdim)
        self.w_input.grad += x.reshape(-1, x.shape[-1]).T @ flat_dz
        self.w_state.grad += h_prev_all.reshape(-1, hdim).T @ flat_dz
        self.bias.grad += flat_dz.sum(axis=0)
        return dz_all @ self.w_input.value.T


class BiLSTM(Layer):
    """Forward and backward LSTM over the same input, outputs concatenated."""

    def __init__(self, d_in: int, hidden: int, seed: int, name: str):
        self.fwd = LSTM(d_in, hidden, seed, f"{name}.fwd", reverse=False)
        self.bwd = LSTM(d_in, hidden, seed, f"{name}.bwd", reverse=True)
        self.hidden = hidden

    def parameters(self):
        return self.fwd.parameters() + self.bwd.parameters()

    def forward(self, x):
        return np.concatenate([self.fwd.forward(x), self.bwd.forward(x)], axis=2)

    def backward(self, grad):
        h = self.hidden
        return self.fwd.backward(grad[:, :, :h]) + self.bwd.backward(grad[:, :, h:])
