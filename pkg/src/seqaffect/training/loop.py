"""Windowed training with dev-CCC model selection and plateau LR decay.

One run: standardize features with training-partition statistics, cut
overlapping windows, shuffle them each epoch (seeded), optimize with Adam,
and after every epoch stitch full-length development predictions and score
the global (concatenated) CCC.  The best-on-dev parameters are kept and
finally evaluated on the test partition.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .. import metrics
from ..data import MODALITY_ORDER, LabeledRecording, Partition, standardize_with, feature_stats
from ..neural.model import ModelSpec, SequenceRegressor, save_checkpoint
from ..rng import substream
from ..windowing import model_input_matrix, segment, stitch, window_starts
from .losses import LOSS_NAMES, check_task_weights, get_loss, multitask_loss
from .optim import Adam, PlateauScheduler, clip_grad_norm


@dataclass(frozen=True)
class TrainConfig:
    """Optimization and data-preparation settings for one run."""

    loss: str = "ccc"
    lr: float = 0.001
    batch_size: int = 1024  # counted in windows, clipped to availability
    max_epochs: int = 100
    plateau_patience: int = 10
    plateau_factor: float = 0.5
    min_lr: float = 1e-6
    ws: int = 200
    hs: int = 100
    dimensions: tuple[str, ...] = ("trustworthiness",)
    task_weights: tuple[float, ...] | None = None  # None = single-task on dimensions[0]
    modalities: tuple[str, ...] | None = None  # None = all modalities present
    seed: int = 0
    grad_clip: float | None = None
    early_stop_patience: int | None = None
    chunk_windows: int = 64  # compute-chunk size; no effect on results

    def __post_init__(self):
        if self.loss not in LOSS_NAMES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.lr <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("lr, batch_size and max_epochs must be positive")
        if self.chunk_windows < 1:
            raise ValueError("chunk_windows must be positive")
        if not self.dimensions:
            raise ValueError("need at least one target dimension")
        if self.task_weights is not None:
            check_task_weights(self.task_weights, len(self.dimensions))


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    dev_ccc: float
    lr: float


@dataclass
class TrainResult:
    best_epoch: int
    dev_ccc: float
    test_ccc: float
    history: list[EpochStats]
    checkpoint_path: str | None = None
    dev_per_dim: dict[str, float] = field(default_factory=dict)
    test_per_dim: dict[str, float] = field(default_factory=dict)
    dev_per_recording: dict[str, float] = field(default_factory=dict)


def _partition_ids(partitions: Sequence[Partition], available) -> dict[str, list[str]]:
    by_name = {p.name: p for p in partitions}
    out = {}
    for name in ("train", "devel", "test"):
        ids = sorted(by_name[name].recording_ids) if name in by_name else []
        missing = [r for r in ids if r not in available]
        if missing:
            raise ValueError(f"partition {name!r} references unknown recordings {missing[:3]}")
        out[name] = ids
    if not out["train"] or not out["devel"]:
        raise ValueError("train and devel partitions must be non-empty")
    return out


def standardize_recordings(
    recordings: Mapping[str, LabeledRecording],
    train_ids: Sequence[str],
    modalities: Sequence[str],
) -> dict[str, LabeledRecording]:
    """Z-score every recording's features using train-partition stats only."""
    stats = {
        m: feature_stats([recordings[r].features[m] for r in train_ids])
        for m in modalities
    }
    out = {}
    for rid, rec in recordings.items():
        features = {m: standardize_with(stats[m], rec.features[m]) for m in modalities}
        out[rid] = replace(rec, features=features)
    return out


def _stack_windows(window_sets):
    xs, ys, masks = [], [], []
    for wset in window_sets:
        for w in wset.windows:
            xs.append(w.features)
            ys.append(w.labels)
            masks.append(w.mask)
    return np.stack(xs), np.stack(ys), np.stack(masks)


def _batch_loss_and_grad(preds, targets, mask, config: TrainConfig):
    if config.task_weights is not None:
        return multitask_loss(preds, targets, config.task_weights, config.loss, mask)
    value, grad0 = get_loss(config.loss)(preds[:, :, 0], targets[:, :, 0], mask)
    grad = np.zeros_like(preds)
    grad[:, :, 0] = grad0
    return value, grad


def _chunk_fraction(config: TrainConfig, mask_chunk, mask_batch) -> float:
    # per-window losses weight chunks by window count; per-step losses by
    # valid-step count, so chunked accumulation reproduces the batch loss
    if config.loss == "ccc":
        return mask_chunk.shape[0] / mask_batch.shape[0]
    return float(mask_chunk.sum()) / float(mask_batch.sum())


def predict_sequence(model: SequenceRegressor, x_full: np.ndarray, ws: int, hs: int, chunk: int = 64) -> np.ndarray:
    """Window, predict, and stitch one full-length recording; returns (T, K)."""
    t = x_full.shape[0]
    starts = window_starts(t, ws, hs, "anchored_tail")
    slabs, masks = [], []
    for s in starts:
        if s + ws <= t:
            slabs.append(x_full[s : s + ws])
            masks.append(np.ones(ws, dtype=bool))
        else:
            pad = np.zeros((ws, x_full.shape[1]))
            pad[:t] = x_full
            slabs.append(pad)
            m = np.zeros(ws, dtype=bool)
            m[:t] = True
            masks.append(m)
    preds = []
    for i in range(0, len(slabs), chunk):
        block = np.stack(slabs[i : i + chunk])
        preds.append(model.forward(block))
    preds = np.concatenate(preds, axis=0)
    items = [(s, preds[i], masks[i]) for i, s in enumerate(starts)]
    out = stitch(items, t)
    return out[:, None] if out.ndim == 1 else out


def evaluate_partition(
    model: SequenceRegressor,
    inputs: Mapping[str, np.ndarray],
    labels: Mapping[str, np.ndarray],
    ids: Sequence[str],
    dimensions: Sequence[str],
    ws: int,
    hs: int,
    chunk: int = 64,
):
    """Stitched predictions and pooled CCCs over one partition.

    Returns (per-dim pooled CCC dict, per-recording monitor-dim CCC dict,
    per-recording predictions).
    """
    preds = {}
    for rid in ids:
        preds[rid] = predict_sequence(model, inputs[rid], ws, hs, chunk)
    pooled = {}
    for j, dim_name in enumerate(dimensions):
        pairs = [(preds[rid][:, j], labels[rid][:, j]) for rid in ids]
        pooled[dim_name] = metrics.pooled_report(pairs).ccc
    per_recording = {
        rid: metrics.ccc(preds[rid][:, 0], labels[rid][:, 0]) for rid in ids
    }
    return pooled, per_recording, preds


def train(
    model_spec,
    config: TrainConfig,
    recordings: Sequence[LabeledRecording],
    partitions: Sequence[Partition],
    out_dir=None,
) -> TrainResult:
    """Run one full training; see the module docstring for the protocol.

    ``model_spec`` may be a ModelSpec (its input_dim must match the data) or
    a mapping of ModelSpec fields without input_dim, which is then derived
    from the selected modalities plus the segment-id channel.
    """
    result, _ = train_model(model_spec, config, recordings, partitions, out_dir)
    return result


def train_model(
    model_spec,
    config: TrainConfig,
    recordings: Sequence[LabeledRecording],
    partitions: Sequence[Partition],
    out_dir=None,
) -> tuple[TrainResult, SequenceRegressor]:
    """Like :func:`train` but also returns the trained (best-epoch) model."""
    index = {r.recording_id: r for r in recordings}
    ids = _partition_ids(partitions, index)

    first = index[ids["train"][0]]
    if config.modalities is None:
        modalities = tuple(m for m in MODALITY_ORDER if m in first.features)
    else:
        modalities = tuple(sorted(config.modalities, key=MODALITY_ORDER.index))
    used = {rid: index[rid] for name in ids for rid in ids[name]}
    std = standardize_recordings(used, ids["train"], modalities)

    input_dim = sum(first.features[m].dim for m in modalities) + 1
    if isinstance(model_spec, ModelSpec):
        if model_spec.input_dim != input_dim:
            raise ValueError(
                f"model input_dim {model_spec.input_dim} != data dim {input_dim}"
            )
        spec = model_spec
    else:
        spec = ModelSpec(input_dim=input_dim, **dict(model_spec))
    if spec.output_dims != len(config.dimensions):
        raise ValueError(
            f"model predicts {spec.output_dims} dims, config names {len(config.dimensions)}"
        )

    train_sets = [
        segment(std[rid], config.ws, config.hs, "anchored_tail", modalities, config.dimensions)
        for rid in ids["train"]
    ]
    xw, yw, mw = _stack_windows(train_sets)
    n_windows = xw.shape[0]

    eval_inputs = {}
    eval_labels = {}
    for rid in set(ids["devel"]) | set(ids["test"]) | set(ids["train"]):
        eval_inputs[rid] = model_input_matrix(std[rid], modalities)
        eval_labels[rid] = np.stack(
            [std[rid].labels[d] for d in config.dimensions], axis=1
        )

    model = SequenceRegressor(spec)
    optimizer = Adam(model.parameters(), lr=config.lr)
    scheduler = PlateauScheduler(
        optimizer,
        factor=config.plateau_factor,
        patience=config.plateau_patience,
        min_lr=config.min_lr,
    )

    batch_size = min(config.batch_size, n_windows)
    chunk = config.chunk_windows
    history: list[EpochStats] = []
    best_dev = -np.inf
    best_epoch = 0
    best_params = model.snapshot()
    since_best = 0

    for epoch in range(1, config.max_epochs + 1):
        lr_in_effect = optimizer.lr
        order = substream(config.seed, "shuffle", epoch).permutation(n_windows)
        epoch_loss = 0.0
        for b0 in range(0, n_windows, batch_size):
            batch_idx = order[b0 : b0 + batch_size]
            mask_batch = mw[batch_idx]
            optimizer.zero_grad()
            batch_loss = 0.0
            for c0 in range(0, batch_idx.shape[0], chunk):
                sel = batch_idx[c0 : c0 + chunk]
                preds = model.forward(xw[sel])
                value, grad = _batch_loss_and_grad(preds, yw[sel], mw[sel], config)
                weight = _chunk_fraction(config, mw[sel], mask_batch)
                model.backward(grad * weight)
                batch_loss += weight * value
            if config.grad_clip is not None:
                clip_grad_norm(model.parameters(), config.grad_clip)
            optimizer.step()
            epoch_loss += batch_loss * batch_idx.shape[0]
        epoch_loss /= n_windows

        pooled, _, _ = evaluate_partition(
            model, eval_inputs, eval_labels, ids["devel"], config.dimensions,
            config.ws, config.hs, chunk,
        )
        dev_ccc = pooled[config.dimensions[0]]
        history.append(EpochStats(epoch, epoch_loss, dev_ccc, lr_in_effect))

        if dev_ccc > best_dev:
            best_dev = dev_ccc
            best_epoch = epoch
            best_params = model.snapshot()
            since_best = 0
        else:
            since_best += 1
        scheduler.step(dev_ccc)
        if config.early_stop_patience is not None and since_best >= config.early_stop_patience:
            break

    model.restore(best_params)
    dev_pooled, dev_per_rec, _ = evaluate_partition(
        model, eval_inputs, eval_labels, ids["devel"], config.dimensions,
        config.ws, config.hs, chunk,
    )
    if ids["test"]:
        test_pooled, _, _ = evaluate_partition(
            model, eval_inputs, eval_labels, ids["test"], config.dimensions,
            config.ws, config.hs, chunk,
        )
    else:
        test_pooled = {d: float("nan") for d in config.dimensions}

    result = TrainResult(
        best_epoch=best_epoch,
        dev_ccc=dev_pooled[config.dimensions[0]],
        test_ccc=test_pooled[config.dimensions[0]],
        history=history,
        dev_per_dim=dev_pooled,
        test_per_dim=test_pooled,
        dev_per_recording=dev_per_rec,
    )

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        log_path = out_dir / "log.csv"
        with log_path.open("w", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epoch", "train_loss", "dev_ccc", "lr"])
            for row in history:
                writer.writerow([row.epoch, repr(row.train_loss), repr(row.dev_ccc), repr(row.lr)])
        ckpt = out_dir / "checkpoint.npz"
        save_checkpoint(model, ckpt)
        result.checkpoint_path = str(ckpt)
    return result, model
