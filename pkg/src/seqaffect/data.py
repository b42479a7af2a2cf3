"""Time-aligned multimodal feature/label data: types, file formats, synthesis.

File formats (UTF-8, LF, full-precision decimals):

* feature CSV, one per recording per modality:
  header ``timestamp,segment_id,f0,...,f{dim-1}``, timestamp in ms
* label CSV, one per recording per dimension:
  header ``timestamp,segment_id,value``
* annotation CSV (raw rater traces): header ``timestamp,rater_id,value``
* partition manifest: JSON mapping partition name -> recording ids, plus a
  recording -> speaker map

Labels are kept in [-1, 1] throughout the pipeline; raw joystick traces are
mapped there by :func:`seqaffect.annotation.normalize_trace`.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .annotation import DIMENSIONS, AnnotatorTrace
from .errors import FormatError
from .rng import substream

#: Expected feature dimensionality per modality; None = taken from the file.
MODALITY_DIMS: dict[str, int | None] = {
    "egemaps": 88,
    "vggish": 128,
    "fau": 17,
    "vggface": None,
    "fasttext": 300,
    "bert": 768,
    "custom": None,
}

#: Canonical modality ordering, used wherever feature columns are concatenated.
MODALITY_ORDER = ("egemaps", "vggish", "fau", "vggface", "fasttext", "bert", "custom")

PARTITION_NAMES = ("train", "devel", "test")

LABEL_LIMIT = 1.0 + 1e-9


@dataclass(frozen=True)
class FeatureSequence:
    """A T x dim feature matrix for one modality, aligned to the label rate."""

    recording_id: str
    modality: str
    timestamps: np.ndarray  # (T,) int64 milliseconds
    matrix: np.ndarray  # (T, dim) float64

    def __post_init__(self):
        object.__setattr__(
            self, "timestamps", np.asarray(self.timestamps, dtype=np.int64)
        )
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=np.float64))
        if self.modality not in MODALITY_DIMS:
            raise ValueError(f"unknown modality {self.modality!r}")
        if self.matrix.ndim != 2 or self.matrix.shape[0] < 1:
            raise ValueError(f"{self.recording_id!r}: feature matrix must be T x dim")
        if self.timestamps.shape != (self.matrix.shape[0],):
            raise ValueError(f"{self.recording_id!r}: timestamps do not match rows")
        if np.any(np.diff(self.timestamps) <= 0):
            raise FormatError(f"{self.recording_id!r}: timestamps not increasing")
        if not np.all(np.isfinite(self.matrix)):
            raise FormatError(f"{self.recording_id!r}: non-finite feature values")
        expected = MODALITY_DIMS[self.modality]
        if expected is not None and self.matrix.shape[1] != expected:
            raise FormatError(
                f"{self.recording_id!r}: modality {self.modality!r} expects "
                f"{expected} columns, got {self.matrix.shape[1]}"
            )

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    @property
    def n_steps(self) -> int:
        return int(self.matrix.shape[0])


@dataclass(frozen=True)
class LabeledRecording:
    """All modalities and gold-standard labels of one recording."""

    recording_id: str
    features: Mapping[str, FeatureSequence]
    labels: Mapping[str, np.ndarray]
    speaker_id: str
    segment_ids: np.ndarray  # (T,) int64, nondecreasing

    def __post_init__(self):
        object.__setattr__(
            self, "segment_ids", np.asarray(self.segment_ids, dtype=np.int64)
        )
        object.__setattr__(
            self,
            "labels",
            {d: np.asarray(v, dtype=np.float64) for d, v in self.labels.items()},
        )
        validate_recording(self)

    @property
    def n_steps(self) -> int:
        return int(self.segment_ids.shape[0])


@dataclass(frozen=True)
class Partition:
    name: str
    recording_ids: frozenset[str]

    def __post_init__(self):
        if self.name not in PARTITION_NAMES:
            raise ValueError(f"unknown partition name {self.name!r}")
        object.__setattr__(self, "recording_ids", frozenset(self.recording_ids))


def validate_recording(rec: LabeledRecording) -> None:
    """Assert all length/dim/monotonicity invariants of one recording."""
    rid = rec.recording_id
    t = rec.segment_ids.shape[0]
    if t < 1:
        raise ValueError(f"{rid!r}: empty segment_ids")
    if np.any(np.diff(rec.segment_ids) < 0):
        raise ValueError(f"{rid!r}: segment_ids decrease")
    if not rec.labels:
        raise ValueError(f"{rid!r}: no label dimensions")
    for dim_name, values in rec.labels.items():
        if dim_name not in DIMENSIONS:
            raise ValueError(f"{rid!r}: unknown label dimension {dim_name!r}")
        if values.shape != (t,):
            raise ValueError(
                f"{rid!r}: label {dim_name!r} has length {values.shape}, expected {t}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError(f"{rid!r}: non-finite values in label {dim_name!r}")
        if np.abs(values).max() > LABEL_LIMIT:
            raise ValueError(f"{rid!r}: label {dim_name!r} leaves [-1, 1]")
    for modality, seq in rec.features.items():
        if modality != seq.modality:
            raise ValueError(f"{rid!r}: feature key {modality!r} != {seq.modality!r}")
        if seq.n_steps != t:
            raise ValueError(
                f"{rid!r}: modality {modality!r} has {seq.n_steps} steps, expected {t}"
            )


# ---------------------------------------------------------------------------
# CSV / JSON serialization


def _fmt(x: float) -> str:
    # repr of a Python float is the shortest string that round-trips exactly
    return repr(float(x))


def _read_rows(path, expected_header: list[str] | None = None):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        rows = list(reader)
    if expected_header is not None and header != expected_header:
        raise FormatError(f"{path}: header {header} != expected {expected_header}")
    return header, rows


def save_features(seq: FeatureSequence, segment_ids, path) -> None:
    segment_ids = np.asarray(segment_ids, dtype=np.int64)
    if segment_ids.shape[0] != seq.n_steps:
        raise ValueError("segment_ids length does not match features")
    path = Path(path)
    with path.open("w", newline="\n") as fh:
        fh.write("timestamp,segment_id," + ",".join(f"f{i}" for i in range(seq.dim)))
        fh.write("\n")
        for ts, sid, row in zip(seq.timestamps, segment_ids, seq.matrix):
            fh.write(f"{int(ts)},{int(sid)}," + ",".join(_fmt(v) for v in row) + "\n")


def load_features(path, modality: str, recording_id: str | None = None) -> FeatureSequence:
    """Read one feature CSV; the header fixes the dimensionality."""
    path = Path(path)
    header, rows = _read_rows(path)
    if len(header) < 3 or header[:2] != ["timestamp", "segment_id"]:
        raise FormatError(f"{path}: bad header {header[:3]}...")
    dim = len(header) - 2
    if header[2:] != [f"f{i}" for i in range(dim)]:
        raise FormatError(f"{path}: feature columns must be f0..f{dim - 1}")
    if not rows:
        raise FormatError(f"{path}: no data rows")
    try:
        timestamps = np.array([int(r[0]) for r in rows], dtype=np.int64)
        matrix = np.array([[float(v) for v in r[2:]] for r in rows], dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: malformed row ({exc})") from None
    if matrix.shape[1] != dim:
        raise FormatError(f"{path}: ragged rows")
    if not np.all(np.isfinite(matrix)):
        raise FormatError(f"{path}: non-finite feature values")
    return FeatureSequence(
        recording_id=recording_id or path.stem,
        modality=modality,
        timestamps=timestamps,
        matrix=matrix,
    )


def read_segment_ids(path) -> np.ndarray:
    _, rows = _read_rows(path)
    return np.array([int(r[1]) for r in rows], dtype=np.int64)


def save_labels(values, timestamps, segment_ids, path) -> None:
    values = np.asarray(values, dtype=np.float64)
    path = Path(path)
    with path.open("w", newline="\n") as fh:
        fh.write("timestamp,segment_id,value\n")
        for ts, sid, v in zip(timestamps, segment_ids, values):
            fh.write(f"{int(ts)},{int(sid)},{_fmt(v)}\n")


def load_labels(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read a label CSV; returns (timestamps, segment_ids, values)."""
    path = Path(path)
    _, rows = _read_rows(path, ["timestamp", "segment_id", "value"])
    if not rows:
        raise FormatError(f"{path}: no data rows")
    try:
        ts = np.array([int(r[0]) for r in rows], dtype=np.int64)
        sids = np.array([int(r[1]) for r in rows], dtype=np.int64)
        values = np.array([float(r[2]) for r in rows], dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: malformed row ({exc})") from None
    if np.any(np.diff(ts) <= 0):
        raise FormatError(f"{path}: timestamps not increasing")
    if not np.all(np.isfinite(values)):
        raise FormatError(f"{path}: non-finite label values")
    return ts, sids, values


def save_annotations(traces: Sequence[AnnotatorTrace], path, sample_period_ms: int = 250) -> None:
    """Write raw rater traces of one recording/dimension to one CSV."""
    path = Path(path)
    with path.open("w", newline="\n") as fh:
        fh.write("timestamp,rater_id,value\n")
        for trace in traces:
            for i, v in enumerate(trace.values):
                fh.write(f"{i * sample_period_ms},{trace.rater_id},{_fmt(v)}\n")


def load_annotations(
    path,
    dimension: str,
    recording_id: str,
    value_range: tuple[float, float] = (-1.0, 1.0),
) -> list[AnnotatorTrace]:
    """Read an annotation CSV and group rows into per-rater traces."""
    path = Path(path)
    _, rows = _read_rows(path, ["timestamp", "rater_id", "value"])
    by_rater: dict[str, list[tuple[int, float]]] = {}
    try:
        for r in rows:
            by_rater.setdefault(r[1], []).append((int(r[0]), float(r[2])))
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: malformed row ({exc})") from None
    if not by_rater:
        raise FormatError(f"{path}: no annotation rows")
    traces = []
    for rater_id in sorted(by_rater):
        pairs = sorted(by_rater[rater_id])
        traces.append(
            AnnotatorTrace(
                rater_id=rater_id,
                dimension=dimension,
                recording_id=recording_id,
                values=np.array([v for _, v in pairs]),
                value_range=value_range,
            )
        )
    return traces


def save_manifest(path, partitions: Sequence[Partition], speakers: Mapping[str, str], extra: Mapping | None = None) -> None:
    payload = {
        "partitions": {p.name: sorted(p.recording_ids) for p in partitions},
        "speakers": dict(sorted(speakers.items())),
    }
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_manifest(path) -> tuple[list[Partition], dict[str, str], dict]:
    payload = json.loads(Path(path).read_text())
    try:
        partitions = [
            Partition(name, frozenset(ids))
            for name, ids in payload["partitions"].items()
        ]
        speakers = dict(payload["speakers"])
    except KeyError as exc:
        raise FormatError(f"{path}: manifest missing key {exc}") from None
    extra = {k: v for k, v in payload.items() if k not in ("partitions", "speakers")}
    return partitions, speakers, extra


# ---------------------------------------------------------------------------
# Standardization and alignment


def feature_stats(seqs: Sequence[FeatureSequence]) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension mean and population std over a list of sequences."""
    if not seqs:
        raise ValueError("no sequences to compute stats from")
    dims = {s.dim for s in seqs}
    if len(dims) != 1:
        raise ValueError(f"mixed dims {sorted(dims)}")
    stacked = np.concatenate([s.matrix for s in seqs], axis=0)
    return stacked.mean(axis=0), stacked.std(axis=0)


def standardize_with(stats, target: FeatureSequence) -> FeatureSequence:
    mean, std = stats
    if mean.shape[0] != target.dim:
        raise ValueError(f"stats dim {mean.shape[0]} != target dim {target.dim}")
    # epsilon keeps constant training dimensions at exactly zero output
    matrix = (target.matrix - mean) / (std + 1e-8)
    return FeatureSequence(
        recording_id=target.recording_id,
        modality=target.modality,
        timestamps=target.timestamps,
        matrix=matrix,
    )


def standardize(train_stats_source: Sequence[FeatureSequence], target: FeatureSequence) -> FeatureSequence:
    """Z-score ``target`` using statistics from the training sequences only."""
    return standardize_with(feature_stats(train_stats_source), target)


def resample_nearest(seq: FeatureSequence, target_timestamps) -> FeatureSequence:
    """Align a sequence sampled at another rate by nearest-timestamp hold."""
    target = np.asarray(target_timestamps, dtype=np.int64)
    src = seq.timestamps
    idx = np.searchsorted(src, target)
    idx = np.clip(idx, 0, src.shape[0] - 1)
    left = np.clip(idx - 1, 0, src.shape[0] - 1)
    # prefer the earlier sample on ties
    use_left = np.abs(target - src[left]) <= np.abs(src[idx] - target)
    chosen = np.where(use_left, left, idx)
    return FeatureSequence(
        recording_id=seq.recording_id,
        modality=seq.modality,
        timestamps=target,
        matrix=seq.matrix[chosen],
    )


# ---------------------------------------------------------------------------
# Class binning


def bin_three_classes(segment_means) -> list[str]:
    """Equal-frequency rank binning into low / medium / high.

    Ties keep their original order (stable rank); when n is not divisible by
    3, the lower classes take the extra elements, so sizes differ by at most
    one.
    """
    values = np.asarray(segment_means, dtype=np.float64).ravel()
    n = values.shape[0]
    if n < 3:
        raise ValueError(f"need at least 3 segment means, got {n}")
    order = np.argsort(values, kind="stable")
    base, rem = divmod(n, 3)
    sizes = [base + (1 if i < rem else 0) for i in range(3)]
    labels = [""] * n
    cursor = 0
    for size, name in zip(sizes, ("low", "medium", "high")):
        for idx in order[cursor : cursor + size]:
            labels[idx] = name
        cursor += size
    return labels


# ---------------------------------------------------------------------------
# Partitioning


def make_partitions(
    recordings: Sequence[LabeledRecording],
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2),
    seed: int = 0,
) -> tuple[Partition, Partition, Partition]:
    """Speaker-grouped split with durations roughly proportional to ratios.

    Speakers are assigned greedily (longest first, seeded tie-breaking) to
    the partition with the largest remaining duration deficit, so no speaker
    ever crosses partitions.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be 3 positive numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    by_speaker: dict[str, list[LabeledRecording]] = {}
    for rec in recordings:
        by_speaker.setdefault(rec.speaker_id, []).append(rec)
    if len(by_speaker) < 3:
        raise ValueError(
            f"need at least 3 speakers for 3 partitions, got {len(by_speaker)}"
        )
    rng = substream(seed, "partition")
    speakers = sorted(by_speaker)
    rng.shuffle(speakers)
    speakers.sort(key=lambda s: -sum(r.n_steps for r in by_speaker[s]))

    total = sum(rec.n_steps for rec in recordings)
    targets = [r * total for r in ratios]
    assigned: list[list[str]] = [[], [], []]
    filled = [0.0, 0.0, 0.0]
    for sp in speakers:
        deficits = [targets[i] - filled[i] for i in range(3)]
        slot = max(range(3), key=lambda i: deficits[i])
        assigned[slot].append(sp)
        filled[slot] += sum(r.n_steps for r in by_speaker[sp])

    parts = []
    for name, speaker_group in zip(PARTITION_NAMES, assigned):
        ids = frozenset(
            rec.recording_id for sp in speaker_group for rec in by_speaker[sp]
        )
        parts.append(Partition(name, ids))
    return tuple(parts)


# ---------------------------------------------------------------------------
# Synthetic data


@dataclass(frozen=True)
class SynthSpec:
    """Generator settings for a known-recoverable synthetic dataset.

    Each recording carries a smooth latent (trustworthiness, arousal,
    valence) triple built from random low-frequency sinusoids and clipped to
    [-1, 1].  Every modality embeds that triple through one fixed random
    affine map (shared across recordings) plus Gaussian noise, so a model
    can provably recover the labels from any single modality.
    """

    n_recordings: int = 30
    n_speakers: int = 10
    length_range: tuple[int, int] = (600, 3000)
    modalities: tuple[tuple[str, int], ...] = (("bert", 768), ("vggish", 128), ("fau", 17))
    noise_sigma: float = 0.3
    smoothness: float = 6.0  # max sinusoid cycles per 1000 steps
    n_components: int = 4
    segment_steps: int = 50
    sample_period_ms: int = 250

    def __post_init__(self):
        if self.n_recordings < 1 or self.n_speakers < 1:
            raise ValueError("need at least one recording and one speaker")
        lo, hi = self.length_range
        if not (2 <= lo <= hi):
            raise ValueError(f"bad length range {self.length_range}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.smoothness <= 0 or self.n_components < 1 or self.segment_steps < 1:
            raise ValueError("smoothness/n_components/segment_steps must be positive")
        for name, dim in self.modalities:
            expected = MODALITY_DIMS.get(name, 0)
            if name not in MODALITY_DIMS:
                raise ValueError(f"unknown modality {name!r}")
            if expected is not None and dim != expected:
                raise ValueError(f"modality {name!r} must have dim {expected}")
            if dim < 3:
                raise ValueError("modality dims below 3 cannot embed 3 latents")


def _latent_signal(rng: np.random.Generator, t: int, spec: SynthSpec) -> np.ndarray:
    steps = np.arange(t, dtype=np.float64)
    signal = np.zeros(t)
    for _ in range(spec.n_components):
        amp = rng.uniform(0.15, 0.45)
        freq = rng.uniform(0.2, spec.smoothness)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        signal += amp * np.sin(2.0 * np.pi * freq * steps / 1000.0 + phase)
    return np.clip(signal, -1.0, 1.0)


def synthesize_dataset(spec: SynthSpec, seed: int) -> list[LabeledRecording]:
    """Deterministically generate recordings per ``spec``; see SynthSpec."""
    maps = {}
    for name, dim in spec.modalities:
        rng = substream(seed, "synth-map", name)
        weight = rng.standard_normal((dim, 3)) / np.sqrt(3.0)
        offset = rng.standard_normal(dim) * 0.5
        maps[name] = (weight, offset)

    recordings = []
    for i in range(spec.n_recordings):
        rng = substream(seed, "synth-rec", i)
        lo, hi = spec.length_range
        t = int(rng.integers(lo, hi + 1))
        latent = np.stack(
            [_latent_signal(rng, t, spec) for _ in DIMENSIONS], axis=1
        )  # (T, 3)
        features = {}
        for name, dim in spec.modalities:
            weight, offset = maps[name]
            matrix = latent @ weight.T + offset
            if spec.noise_sigma > 0:
                matrix = matrix + spec.noise_sigma * rng.standard_normal((t, dim))
            features[name] = FeatureSequence(
                recording_id=f"rec{i:03d}",
                modality=name,
                timestamps=np.arange(t, dtype=np.int64) * spec.sample_period_ms,
                matrix=matrix,
            )
        recordings.append(
            LabeledRecording(
                recording_id=f"rec{i:03d}",
                features=features,
                labels={d: latent[:, j] for j, d in enumerate(DIMENSIONS)},
                speaker_id=f"sp{i % spec.n_speakers:02d}",
                segment_ids=np.arange(t, dtype=np.int64) // spec.segment_steps,
            )
        )
    return recordings
