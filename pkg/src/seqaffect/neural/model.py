"""The attention + recurrent sequence regressor and its checkpoint format.

Architecture: a learned input projection to ``model_dim``, a stack of
self-attention blocks, a stack of (optionally bidirectional) LSTM layers,
and a linear regression head emitting one column per predicted dimension.
Either stack may be empty, but not both.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .layers import AttentionBlock, BiLSTM, Layer, Linear, LSTM
from .params import Parameter

CHECKPOINT_VERSION = 1


def _round_up(value: int, multiple: int) -> int:
    return ((value + multiple - 1) // multiple) * multiple


@dataclass(frozen=True)
class ModelSpec:
    """Architecture hyperparameters; fully determines the parameter set."""

    input_dim: int
    heads: int = 4
    model_dim: int | None = None  # default: input_dim rounded up to a heads multiple
    mhal_layers: int = 1
    lstm_layers: int = 1
    bidirectional: bool = True
    lstm_hidden: int = 64
    output_dims: int = 1
    residual: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")
        if self.heads < 1:
            raise ValueError("heads must be positive")
        if self.mhal_layers < 0 or self.lstm_layers < 0:
            raise ValueError("layer counts must be >= 0")
        if self.mhal_layers + self.lstm_layers < 1:
            raise ValueError("need at least one attention or LSTM layer")
        if self.lstm_hidden < 1 or self.output_dims < 1:
            raise ValueError("lstm_hidden and output_dims must be positive")
        if self.model_dim is not None and self.model_dim % self.heads != 0:
            raise ValueError(
                f"model_dim {self.model_dim} not divisible by heads {self.heads}"
            )

    @property
    def resolved_model_dim(self) -> int:
        if self.model_dim is not None:
            return self.model_dim
        return _round_up(self.input_dim, self.heads)


class SequenceRegressor:
    """Per-step regression over (batch, time, input_dim) feature windows."""

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        m = spec.resolved_model_dim
        seed = spec.seed
        self.layers: list[Layer] = [Linear(spec.input_dim, m, seed, "proj")]
        for i in range(spec.mhal_layers):
            self.layers.append(
                AttentionBlock(m, spec.heads, seed, f"attn{i}", residual=spec.residual)
            )
        d = m
        for i in range(spec.lstm_layers):
            if spec.bidirectional:
                self.layers.append(BiLSTM(d, spec.lstm_hidden, seed, f"lstm{i}"))
                d = 2 * spec.lstm_hidden
            else:
                self.layers.append(LSTM(d, spec.lstm_hidden, seed, f"lstm{i}"))
                d = spec.lstm_hidden
        self.layers.append(Linear(d, spec.output_dims, seed, "head"))
        self._forward_ran = False

    def parameters(self) -> list[Parameter]:
        return [p for layer in self.layers for p in layer.parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 2
        if squeeze:
            x = x[None]
        if x.ndim != 3 or x.shape[-1] != self.spec.input_dim:
            raise ValueError(
                f"expected (batch, time, {self.spec.input_dim}) input, got {x.shape}"
            )
        for layer in self.layers:
            x = layer.forward(x)
        self._forward_ran = True
        self._squeezed = squeeze
        return x[0] if squeeze else x

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if not self._forward_ran:
            raise RuntimeError("backward called before forward")
        g = np.asarray(upstream, dtype=np.float64)
        if self._squeezed:
            g = g[None]
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g[0] if self._squeezed else g

    # -- parameter vector helpers ------------------------------------------

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.value.ravel() for p in self.parameters()])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        offset = 0
        for p in self.parameters():
            p.value[...] = flat[offset : offset + p.size].reshape(p.value.shape)
            offset += p.size
        if offset != flat.size:
            raise ValueError(f"flat vector has {flat.size} values, expected {offset}")

    def snapshot(self) -> list[np.ndarray]:
        return [p.value.copy() for p in self.parameters()]

    def restore(self, snapshot: list[np.ndarray]) -> None:
        for p, value in zip(self.parameters(), snapshot, strict=True):
            p.value[...] = value


def count_parameters(spec: ModelSpec) -> int:
    """Closed-form parameter count for a given spec."""
    m = spec.resolved_model_dim
    total = spec.input_dim * m + m  # input projection
    per_block = 4 * m * m + m  # q/k/v/out projections + out bias
    if spec.residual:
        per_block += 2 * m  # layer norm gain + offset
    total += spec.mhal_layers * per_block
    d = m
    h = spec.lstm_hidden
    for _ in range(spec.lstm_layers):
        per_dir = (d + h) * 4 * h + 4 * h
        total += per_dir * (2 if spec.bidirectional else 1)
        d = 2 * h if spec.bidirectional else h
    total += d * spec.output_dims + spec.output_dims  # regression head
    return total


def save_checkpoint(model: SequenceRegressor, path) -> None:
    """Persist spec + flat parameter vector; loading is bit-exact."""
    path = Path(path)
    np.savez(
        path,
        version=np.array(CHECKPOINT_VERSION),
        spec=np.frombuffer(
            json.dumps(asdict(model.spec), sort_keys=True).encode("utf-8"),
            dtype=np.uint8,
        ),
        flat=model.get_flat(),
    )


def load_checkpoint(path) -> SequenceRegressor:
    path = Path(path)
    if not path.suffix:
        path = path.with_suffix(".npz")
    with np.load(path) as payload:
        version = int(payload["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        spec_dict = json.loads(bytes(payload["spec"]).decode("utf-8"))
        flat = payload["flat"]
    model = SequenceRegressor(ModelSpec(**spec_dict))
    model.set_flat(flat)
    return model
