"""Fixed-length overlapping windows over recordings, and the inverse stitch.

Window starts run 0, hs, 2*hs, ... while a full window fits.  Under the
default ``anchored_tail`` rule a final window is back-shifted to end exactly
at the last step, so the union of windows always covers the whole recording
without padding; recordings shorter than ``ws`` become a single zero-padded
window with a validity mask.  ``drop_tail`` keeps only the regular starts.

Stitching averages all window predictions covering a step, which makes
stitch(segment(x)) the identity for any per-step deterministic predictor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import MODALITY_ORDER, LabeledRecording
from .errors import IntegrityError

TAIL_RULES = ("anchored_tail", "drop_tail")


@dataclass(frozen=True)
class Window:
    start: int
    features: np.ndarray  # (ws, D)
    labels: np.ndarray  # (ws, K)
    mask: np.ndarray  # (ws,) bool; False marks padded steps


@dataclass(frozen=True)
class WindowSet:
    recording_id: str
    ws: int
    hs: int
    tail_rule: str
    windows: tuple[Window, ...]
    n_steps: int
    dimensions: tuple[str, ...]


def window_starts(n_steps: int, ws: int, hs: int, tail_rule: str = "anchored_tail") -> list[int]:
    """Start indices for a recording of ``n_steps`` steps."""
    if hs < 1 or hs > ws:
        raise ValueError(f"need 1 <= hs <= ws, got hs={hs}, ws={ws}")
    if n_steps < 1:
        raise ValueError("empty recording")
    if tail_rule not in TAIL_RULES:
        raise ValueError(f"unknown tail rule {tail_rule!r}")
    if n_steps < ws:
        return [0] if tail_rule == "anchored_tail" else []
    starts = list(range(0, n_steps - ws + 1, hs))
    if tail_rule == "anchored_tail" and starts[-1] + ws - 1 < n_steps - 1:
        tail = n_steps - ws
        if tail != starts[-1]:
            starts.append(tail)
    return starts


def model_input_matrix(rec: LabeledRecording, modalities=None) -> np.ndarray:
    """Concatenate modality columns (canonical order) plus the segment channel.

    The segment-id channel is min-max normalized per recording to [0, 1] and
    acts as a coarse positional encoding.
    """
    if modalities is None:
        modalities = [m for m in MODALITY_ORDER if m in rec.features]
    else:
        modalities = sorted(modalities, key=MODALITY_ORDER.index)
        missing = [m for m in modalities if m not in rec.features]
        if missing:
            raise ValueError(f"{rec.recording_id!r}: missing modalities {missing}")
    if not modalities:
        raise ValueError(f"{rec.recording_id!r}: no feature modalities selected")
    blocks = [rec.features[m].matrix for m in modalities]
    seg = rec.segment_ids.astype(np.float64)
    span = seg.max() - seg.min()
    channel = (seg - seg.min()) / span if span > 0 else np.zeros_like(seg)
    return np.concatenate(blocks + [channel[:, None]], axis=1)


def segment(
    rec: LabeledRecording,
    ws: int,
    hs: int,
    tail_rule: str = "anchored_tail",
    modalities=None,
    dimensions=None,
) -> WindowSet:
    """Cut one recording into model-ready windows."""
    if dimensions is None:
        dimensions = tuple(rec.labels)
    matrix = model_input_matrix(rec, modalities)
    labels = np.stack([rec.labels[d] for d in dimensions], axis=1)
    t = rec.n_steps
    windows = []
    for start in window_starts(t, ws, hs, tail_rule):
        stop = start + ws
        if stop <= t:
            feats = matrix[start:stop]
            labs = labels[start:stop]
            mask = np.ones(ws, dtype=bool)
        else:  # short recording: pad the single window with zeros
            feats = np.zeros((ws, matrix.shape[1]))
            feats[:t] = matrix
            labs = np.zeros((ws, labels.shape[1]))
            labs[:t] = labels
            mask = np.zeros(ws, dtype=bool)
            mask[:t] = True
        windows.append(Window(start=start, features=feats, labels=labs, mask=mask))
    return WindowSet(
        recording_id=rec.recording_id,
        ws=ws,
        hs=hs,
        tail_rule=tail_rule,
        windows=tuple(windows),
        n_steps=t,
        dimensions=tuple(dimensions),
    )


def stitch(window_predictions, n_steps: int) -> np.ndarray:
    """Merge per-window predictions back into one full-length sequence.

    ``window_predictions`` holds ``(start, values)`` or ``(start, values,
    mask)`` tuples, values shaped (ws,) or (ws, K).  Each output step is the
    mean of all valid window values covering it.
    """
    items = []
    width = None
    for item in window_predictions:
        start, values = item[0], np.asarray(item[1], dtype=np.float64)
        mask = np.asarray(item[2], dtype=bool) if len(item) > 2 else np.ones(values.shape[0], dtype=bool)
        if values.ndim == 1:
            values = values[:, None]
        if mask.shape[0] != values.shape[0]:
            raise ValueError("mask length does not match prediction length")
        if width is None:
            width = values.shape[1]
        elif values.shape[1] != width:
            raise ValueError("window predictions have mixed widths")
        valid = np.nonzero(mask)[0]
        if valid.size:
            positions = start + valid
            if positions.min() < 0 or positions.max() >= n_steps:
                raise IntegrityError(
                    f"window at {start} covers steps outside [0, {n_steps})"
                )
        items.append((start, values, mask))
    if width is None:
        raise ValueError("no windows to stitch")
    # mean computed as base + mean(value - base): exact when all covering
    # windows agree, which makes stitch(segment(x)) a true identity
    base = np.zeros((n_steps, width))
    delta = np.zeros((n_steps, width))
    count = np.zeros(n_steps)
    for start, values, mask in items:
        idx = start + np.nonzero(mask)[0]
        fresh = idx[count[idx] == 0]
        base[fresh] = values[mask][count[idx] == 0]
        delta[idx] += values[mask] - base[idx]
        count[idx] += 1.0
    uncovered = np.nonzero(count == 0)[0]
    if uncovered.size:
        raise IntegrityError(f"steps not covered by any window: {uncovered[:5]}...")
    out = base + delta / count[:, None]
    return out[:, 0] if width == 1 else out
