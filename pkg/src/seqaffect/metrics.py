"""Agreement and error metrics for equal-length real-valued sequences.

The concordance correlation coefficient (CCC) is the headline metric for
time-continuous affect traces: it penalises not only decorrelation but also
location and scale disagreement, so ``|ccc| <= |pcc|`` always holds.  All
moments are population moments (1/n), and denominators carry a small epsilon
so that degenerate (constant) inputs yield 0 rather than dividing by zero.

Partition-level scores are computed over the concatenation of all
recordings' predictions and labels (one CCC per partition, not a mean of
per-recording CCCs); per-recording values are reported separately as
diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

#: Denominator guard for degenerate (zero-variance) inputs.
EPS = 1e-12


def _pair(a, b, min_len: int) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < min_len:
        raise ValueError(f"need at least {min_len} samples, got {a.shape[0]}")
    return a, b


def ccc(a, b) -> float:
    """Concordance correlation: 2*cov / (var_a + var_b + (mean_a - mean_b)^2).

    Symmetric, bounded by [-1, 1].  Two identical constant sequences score 0
    by the epsilon-guard convention (degenerate, not perfect agreement).
    """
    a, b = _pair(a, b, 2)
    ma, mb = a.mean(), b.mean()
    da, db = a - ma, b - mb
    cov = (da * db).mean()
    denom = (da * da).mean() + (db * db).mean() + (ma - mb) ** 2
    return float(2.0 * cov / (denom + EPS))


def pcc(a, b) -> float:
    """Pearson correlation; 0 when either input has (near-)zero variance."""
    a, b = _pair(a, b, 2)
    da, db = a - a.mean(), b - b.mean()
    denom = np.sqrt((da * da).mean()) * np.sqrt((db * db).mean())
    if denom < EPS:
        return 0.0
    return float((da * db).mean() / denom)


def rmse(a, b) -> float:
    """Root mean square error; zero iff the sequences are identical."""
    a, b = _pair(a, b, 1)
    d = a - b
    return float(np.sqrt((d * d).mean()))


@dataclass(frozen=True)
class MetricReport:
    """Joint CCC/PCC/RMSE summary for one prediction-target pair.

    ``degenerate`` marks comparisons where at least one side had
    (near-)zero variance, in which case the correlation values are 0 by
    convention rather than by measurement.
    """

    ccc: float
    pcc: float
    rmse: float
    n: int
    degenerate: bool = False


def report(a, b) -> MetricReport:
    """All three metrics for one pair, with the degenerate-variance flag."""
    a, b = _pair(a, b, 2)
    var_a = float(np.var(a))
    var_b = float(np.var(b))
    return MetricReport(
        ccc=ccc(a, b),
        pcc=pcc(a, b),
        rmse=rmse(a, b),
        n=int(a.shape[0]),
        degenerate=(var_a < EPS or var_b < EPS),
    )


def pooled_report(pairs: Iterable[tuple]) -> MetricReport:
    """Metrics over the concatenation of ``(prediction, target)`` pairs."""
    preds, targets = [], []
    for p, t in pairs:
        p, t = _pair(p, t, 1)
        preds.append(p)
        targets.append(t)
    if not preds:
        raise ValueError("no prediction/target pairs given")
    return report(np.concatenate(preds), np.concatenate(targets))


def inter_rater_agreement(traces: Sequence) -> float:
    """Mean one-vs-all CCC across raters.

    Each rater is scored against the pointwise mean of the remaining raters;
    the returned value is the mean of those scores.  ``traces`` may be plain
    arrays or objects exposing a ``values`` array.
    """
    arrs = [np.asarray(getattr(t, "values", t), dtype=np.float64) for t in traces]
    if len(arrs) < 2:
        raise ValueError("inter-rater agreement needs at least 2 traces")
    lengths = {a.shape[0] for a in arrs}
    if len(lengths) != 1:
        raise ValueError(f"traces have mismatched lengths: {sorted(lengths)}")
    stack = np.stack(arrs)
    total = stack.sum(axis=0)
    k = len(arrs)
    scores = [ccc(stack[i], (total - stack[i]) / (k - 1)) for i in range(k)]
    return float(np.mean(scores))
