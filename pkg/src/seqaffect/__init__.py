"""Time-continuous affect regression toolkit.

Submodules: :mod:`metrics` (CCC/PCC/RMSE), :mod:`annotation` (rater trace
fusion), :mod:`data` (file formats, synthesis, partitioning),
:mod:`windowing`, :mod:`neural` (hand-differentiated layers),
:mod:`training` (losses, Adam, the training loop, fusion) and
:mod:`harness` (grid experiments and reports).
"""

from . import annotation, data, metrics, neural, training, windowing

__version__ = "0.1.0"

__all__ = [
    "annotation",
    "data",
    "metrics",
    "neural",
    "training",
    "windowing",
    "__version__",
]
