"""Fusing per-rater continuous annotation traces into a gold standard.

The fusion rule is a reliability-weighted mean: each rater's weight is the
Pearson correlation of their trace with the mean trace over all raters,
clamped at zero (anti-correlated raters must not invert the consensus) and
normalized to sum to one.  If every weight clamps to zero the fusion falls
back to the plain mean and flags the result.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .metrics import ccc, pcc

DIMENSIONS = ("trustworthiness", "arousal", "valence")

#: Raw joystick range used by the capture hardware.
RAW_RANGE = (-1000.0, 1000.0)
#: Canonical label range used by the modelling pipeline.
UNIT_RANGE = (-1.0, 1.0)


@dataclass(frozen=True)
class AnnotatorTrace:
    """One rater's time-continuous signal for one dimension of one recording."""

    rater_id: str
    dimension: str
    recording_id: str
    values: np.ndarray
    sample_period: float = 0.25  # seconds per label step
    value_range: tuple[float, float] = UNIT_RANGE

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.dimension not in DIMENSIONS:
            raise ValueError(f"unknown dimension {self.dimension!r}")
        if self.values.ndim != 1 or self.values.shape[0] < 2:
            raise ValueError(
                f"trace {self.rater_id!r}/{self.recording_id!r} needs >= 2 samples"
            )
        lo, hi = self.value_range
        if not lo < hi:
            raise ValueError(f"degenerate value range {self.value_range}")
        if self.values.min() < lo or self.values.max() > hi:
            raise ValueError(
                f"trace {self.rater_id!r}/{self.recording_id!r} leaves its "
                f"declared range {self.value_range}"
            )

    def __len__(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class GoldStandard:
    """Fused label signal plus the per-rater reliability weights used."""

    recording_id: str
    dimension: str
    values: np.ndarray
    weights: dict[str, float]
    raters_used: int
    fallback_uniform: bool = False


def _check_group(traces) -> tuple[list[AnnotatorTrace], np.ndarray]:
    """Validate a fusion group and put it into canonical (rater id) order.

    The canonical order makes fusion bitwise invariant under permutations of
    the input list, since float summation order is fixed.
    """
    if len(traces) < 2:
        raise ValueError("fusion needs at least 2 traces")
    first = traces[0]
    ids = set()
    for t in traces:
        if len(t) != len(first):
            raise ValueError(
                f"trace length mismatch: {t.rater_id!r} has {len(t)}, "
                f"{first.rater_id!r} has {len(first)}"
            )
        if t.dimension != first.dimension or t.recording_id != first.recording_id:
            raise ValueError("traces mix recordings or dimensions")
        if t.rater_id in ids:
            raise ValueError(f"duplicate rater id {t.rater_id!r}")
        ids.add(t.rater_id)
    ordered = sorted(traces, key=lambda t: t.rater_id)
    return ordered, np.stack([t.values for t in ordered])


def ewe_fuse(traces, include_self: bool = True) -> GoldStandard:
    """Fuse traces into one gold-standard signal.

    ``include_self`` selects the base signal each rater is correlated with:
    the mean over all raters (default) or the mean over the other raters.
    """
    ordered, stack = _check_group(traces)
    k = stack.shape[0]
    total = stack.sum(axis=0)
    raw = np.empty(k)
    for i in range(k):
        base = total / k if include_self else (total - stack[i]) / (k - 1)
        raw[i] = pcc(stack[i], base)
    clamped = np.maximum(raw, 0.0)
    fallback = bool(clamped.sum() <= 0.0)
    if fallback:
        weights = np.full(k, 1.0 / k)
    else:
        weights = clamped / clamped.sum()
    fused = weights @ stack
    return GoldStandard(
        recording_id=ordered[0].recording_id,
        dimension=ordered[0].dimension,
        values=fused,
        weights={t.rater_id: float(w) for t, w in zip(ordered, weights)},
        raters_used=k,
        fallback_uniform=fallback,
    )


def per_rater_quality(traces) -> dict[str, float]:
    """CCC of each rater against the mean of the remaining raters.

    Low or negative scores flag outlier annotators for manual audit.
    """
    ordered, stack = _check_group(traces)
    k = stack.shape[0]
    total = stack.sum(axis=0)
    return {
        t.rater_id: ccc(stack[i], (total - stack[i]) / (k - 1))
        for i, t in enumerate(ordered)
    }


def normalize_trace(trace: AnnotatorTrace, target_range=UNIT_RANGE) -> AnnotatorTrace:
    """Affine-map a trace from its declared range onto ``target_range``."""
    lo, hi = trace.value_range
    tlo, thi = float(target_range[0]), float(target_range[1])
    if not tlo < thi:
        raise ValueError(f"degenerate target range {target_range}")
    scale = (thi - tlo) / (hi - lo)
    values = (trace.values - lo) * scale + tlo
    return replace(trace, values=values, value_range=(tlo, thi))
