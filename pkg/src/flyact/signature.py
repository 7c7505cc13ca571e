"""Per-clip signatures: mean-pooled, L2-normalised descriptors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NoFeatures


@dataclass(frozen=True, eq=False)
class Signature:
    values: np.ndarray
    clip_id: str = ""


def pool_signature(descriptors, clip_id=""):
    """Element-wise mean of ``descriptors`` followed by L2 normalisation.

    Raises NoFeatures when the clip produced no descriptors.
    """
    descriptors = [np.asarray(d, dtype=np.float64) for d in descriptors]
    if not descriptors:
        raise NoFeatures(f"clip {clip_id!r} has no usable keypoints")
    # sorting rows makes the float summation order independent of input order
    stacked = np.stack(descriptors)
    stacked = stacked[np.lexsort(stacked.T[::-1])]
    mean = stacked.mean(axis=0)
    norm = np.linalg.norm(mean)
    if not norm > 0:
        raise NoFeatures(f"clip {clip_id!r} pooled to a zero vector")
    return Signature(mean / norm, clip_id)
