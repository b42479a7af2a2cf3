"""Independent brute-force oracles used to verify the library.

Everything here is deliberately written from the definitions in plain
Python (math.fsum accumulation, explicit loops, mpmath where extended
precision matters) and never calls into the library's computation paths.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np

GUARD = 1e-12  # same degenerate-denominator convention as the library


def mean_fsum(xs) -> float:
    xs = [float(x) for x in xs]
    return math.fsum(xs) / len(xs)


def ccc_oracle(a, b) -> float:
    ma, mb = mean_fsum(a), mean_fsum(b)
    n = len(a)
    cov = math.fsum((float(x) - ma) * (float(y) - mb) for x, y in zip(a, b)) / n
    va = math.fsum((float(x) - ma) ** 2 for x in a) / n
    vb = math.fsum((float(y) - mb) ** 2 for y in b) / n
    return 2.0 * cov / (va + vb + (ma - mb) ** 2 + GUARD)


def pcc_oracle(a, b) -> float:
    ma, mb = mean_fsum(a), mean_fsum(b)
    n = len(a)
    cov = math.fsum((float(x) - ma) * (float(y) - mb) for x, y in zip(a, b)) / n
    va = math.fsum((float(x) - ma) ** 2 for x in a) / n
    vb = math.fsum((float(y) - mb) ** 2 for y in b) / n
    denom = math.sqrt(va) * math.sqrt(vb)
    if denom < GUARD:
        return 0.0
    return cov / denom


def rmse_oracle(a, b) -> float:
    n = len(a)
    return math.sqrt(math.fsum((float(x) - float(y)) ** 2 for x, y in zip(a, b)) / n)


def window_starts_oracle(n_steps: int, ws: int, hs: int, tail_rule: str) -> list[int]:
    """Enumerate window start indices directly from the stated rule."""
    if n_steps < ws:
        return [0] if tail_rule == "anchored_tail" else []
    starts = []
    s = 0
    while s + ws <= n_steps:
        starts.append(s)
        s += hs
    if tail_rule == "anchored_tail":
        last_covered = starts[-1] + ws - 1
        if last_covered < n_steps - 1 and (n_steps - ws) not in starts:
            starts.append(n_steps - ws)
    return starts


def rank_bin_oracle(values) -> list[str]:
    """Equal-frequency thirds by stable rank; extras go to the lower bins."""
    n = len(values)
    order = sorted(range(n), key=lambda i: (float(values[i]), i))
    base, rem = divmod(n, 3)
    sizes = [base + (1 if i < rem else 0) for i in range(3)]
    names = ["low"] * sizes[0] + ["medium"] * sizes[1] + ["high"] * sizes[2]
    out = [""] * n
    for rank, idx in enumerate(order):
        out[idx] = names[rank]
    return out


def attention_oracle(q, k, v) -> np.ndarray:
    """Scaled dot-product attention evaluated at 50 decimal digits."""
    with mpmath.workdps(50):
        q = [[mpmath.mpf(x) for x in row] for row in np.asarray(q)]
        k = [[mpmath.mpf(x) for x in row] for row in np.asarray(k)]
        v = [[mpmath.mpf(x) for x in row] for row in np.asarray(v)]
        t, d_k = len(q), len(q[0])
        d_v = len(v[0])
        scale = 1 / mpmath.sqrt(d_k)
        out = np.empty((t, d_v), dtype=np.float64)
        for i in range(t):
            scores = [
                scale * mpmath.fsum(q[i][x] * k[j][x] for x in range(d_k))
                for j in range(len(k))
            ]
            m = max(scores)
            exps = [mpmath.e ** (s - m) for s in scores]
            z = mpmath.fsum(exps)
            weights = [e / z for e in exps]
            for col in range(d_v):
                out[i, col] = float(
                    mpmath.fsum(weights[j] * v[j][col] for j in range(len(v)))
                )
        return out


def lstm_unroll_oracle(x, w, u, b) -> list[float]:
    """Hand-unrolled single-unit LSTM (gate order: input, forget, cand, out)."""

    def sig(z):
        return 1.0 / (1.0 + math.exp(-z))

    h, c = 0.0, 0.0
    outputs = []
    for x_t in x:
        z = [x_t * w[j] + h * u[j] + b[j] for j in range(4)]
        gate_i, gate_f = sig(z[0]), sig(z[1])
        gate_g, gate_o = math.tanh(z[2]), sig(z[3])
        c = gate_f * c + gate_i * gate_g
        h = gate_o * math.tanh(c)
        outputs.append(h)
    return outputs


def ewe_oracle(trace_values) -> tuple[list[float], list[float]]:
    """Reliability-weighted fusion evaluated with fsum arithmetic.

    Returns (weights, fused) for a list of equal-length value lists.
    """
    k = len(trace_values)
    t = len(trace_values[0])
    mean_trace = [mean_fsum([trace_values[i][j] for i in range(k)]) for j in range(t)]
    raw = [max(0.0, pcc_oracle(trace_values[i], mean_trace)) for i in range(k)]
    total = math.fsum(raw)
    weights = [1.0 / k] * k if total <= 0 else [r / total for r in raw]
    fused = [
        math.fsum(weights[i] * trace_values[i][j] for i in range(k)) for j in range(t)
    ]
    return weights, fused


def adam_trace_oracle(grads, lr, beta1=0.9, beta2=0.999, eps=1e-8, start=0.0) -> list[float]:
    """Parameter trajectory of scalar Adam under a fixed gradient sequence."""
    p, m, v = start, 0.0, 0.0
    values = []
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        p -= lr * mhat / (math.sqrt(vhat) + eps)
        values.append(p)
    return values


def ols_readout_ccc(x_train, y_train, x_test, y_test) -> float:
    """CCC of an ordinary-least-squares linear readout on held-out data."""
    ones_tr = np.column_stack([x_train, np.ones(x_train.shape[0])])
    coef, *_ = np.linalg.lstsq(ones_tr, y_train, rcond=None)
    ones_te = np.column_stack([x_test, np.ones(x_test.shape[0])])
    pred = ones_te @ coef
    return ccc_oracle(pred.tolist(), y_test.tolist())
