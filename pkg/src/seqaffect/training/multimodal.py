"""Early (input concatenation) and late (second-stage LSTM) fusion."""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from ..data import MODALITY_ORDER, FeatureSequence, LabeledRecording, Partition
from ..neural.model import SequenceRegressor
from .loop import TrainConfig, TrainResult, train_model


def early_fuse(features: Sequence[FeatureSequence]) -> FeatureSequence:
    """Column-wise concatenation of one recording's modalities.

    Ordering follows the canonical modality order regardless of argument
    order, so fused layouts are stable across runs.
    """
    if not features:
        raise ValueError("nothing to fuse")
    seqs = sorted(features, key=lambda s: MODALITY_ORDER.index(s.modality))
    first = seqs[0]
    seen = set()
    for s in seqs:
        if s.recording_id != first.recording_id:
            raise ValueError("early fusion mixes recordings")
        if s.n_steps != first.n_steps:
            raise ValueError(
                f"length mismatch: {s.modality} has {s.n_steps} steps, "
                f"{first.modality} has {first.n_steps}"
            )
        if s.modality in seen:
            raise ValueError(f"duplicate modality {s.modality!r}")
        seen.add(s.modality)
    if len(seqs) == 1:
        return first
    return FeatureSequence(
        recording_id=first.recording_id,
        modality="custom",
        timestamps=first.timestamps,
        matrix=np.concatenate([s.matrix for s in seqs], axis=1),
    )


def late_fuse(
    predictions: Mapping[str, Mapping[str, np.ndarray]],
    recordings: Sequence[LabeledRecording],
    partitions: Sequence[Partition],
    config: TrainConfig,
    hidden: int = 8,
    out_dir=None,
) -> tuple[TrainResult, SequenceRegressor]:
    """Train a small LSTM on stacked per-step predictions of earlier models.

    ``predictions`` maps model name -> recording id -> (T,) or (T, K)
    stitched prediction sequence covering every recording in the partitions.
    The stacked sequences become a single synthetic feature modality and the
    second-stage model is trained and evaluated exactly like any other run.
    """
    if len(predictions) < 2:
        raise ValueError("late fusion needs at least 2 prediction sets")
    index = {r.recording_id: r for r in recordings}
    needed = sorted(set().union(*(p.recording_ids for p in partitions)))
    model_names = sorted(predictions)

    derived = []
    for rid in needed:
        rec = index[rid]
        columns = []
        for name in model_names:
            if rid not in predictions[name]:
                raise ValueError(f"model {name!r} has no predictions for {rid!r}")
            arr = np.asarray(predictions[name][rid], dtype=np.float64)
            if arr.ndim == 1:
                arr = arr[:, None]
            if arr.shape[0] != rec.n_steps:
                raise ValueError(
                    f"model {name!r} predicts {arr.shape[0]} steps for {rid!r}, "
                    f"recording has {rec.n_steps}"
                )
            columns.append(arr)
        stacked = np.concatenate(columns, axis=1)
        derived.append(
            LabeledRecording(
                recording_id=rid,
                features={
                    "custom": FeatureSequence(
                        recording_id=rid,
                        modality="custom",
                        timestamps=rec.features[next(iter(rec.features))].timestamps
                        if rec.features
                        else np.arange(rec.n_steps) * 250,
                        matrix=stacked,
                    )
                },
                labels=rec.labels,
                speaker_id=rec.speaker_id,
                segment_ids=rec.segment_ids,
            )
        )

    fusion_config = TrainConfig(
        **{
            **{f: getattr(config, f) for f in config.__dataclass_fields__},
            "modalities": ("custom",),
        }
    )
    model_spec = {
        "heads": 1,
        "mhal_layers": 0,
        "lstm_layers": 1,
        "bidirectional": False,
        "lstm_hidden": hidden,
        "output_dims": len(config.dimensions),
        "seed": config.seed,
    }
    return train_model(model_spec, fusion_config, derived, partitions, out_dir)
