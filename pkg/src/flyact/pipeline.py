"""Clip-level feature extraction: detect, describe, pool."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .detect import DetectorConfig, SSTIPDetector, detect_sstip
from .exceptions import NoFeatures
from .sift3d import SIFT3D, DescriptorConfig, describe_keypoints
from .signature import pool_signature
from .video_io import load_clip

log = logging.getLogger(__name__)

THREADS_ENV = "FLYACT_THREADS"


def default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def parallel_map(fn, items, threads=1):
    """``map`` that may fan out over threads; result order always follows ``items``."""
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def clip_descriptors(vol, detector=None, descriptor=None):
    points = detect_sstip(vol, detector or DetectorConfig())
    return describe_keypoints(vol, points, descriptor or DescriptorConfig())


def clip_signature(vol, detector=None, descriptor=None, clip_id=""):
    described = clip_descriptors(vol, detector, descriptor)
    return pool_signature([d for _, d in described], clip_id)


def featurize_entries(entries, detector=None, descriptor=None, threads=1):
    """Signature vector (or None on NoFeatures) for each manifest entry, in order."""

    def one(entry):
        try:
            return clip_signature(load_clip(entry), detector, descriptor, entry.clip_id).values
        except NoFeatures:
            log.warning("clip %s produced no descriptors", entry.clip_id)
            return None

    return parallel_map(one, entries, threads)


class VideoSignatureExtractor(TransformerMixin, BaseEstimator):
    """Map frame volumes to pooled 3D-SIFT signatures.

    Parameters
    ----------
    detector : SSTIPDetector, optional
    descriptor : SIFT3D, optional
    n_jobs : int, optional
        Worker threads across clips. Output is identical for any value.
    on_empty : {"nan", "raise"}
        What to do with clips that yield no descriptors: emit a NaN row or
        raise :class:`~flyact.exceptions.NoFeatures`.
    """

    def __init__(self, detector=None, descriptor=None, n_jobs=None, on_empty="nan"):
        self.detector = detector
        self.descriptor = descriptor
        self.n_jobs = n_jobs
        self.on_empty = on_empty

    def _configs(self):
        det = self.detector if self.detector is not None else SSTIPDetector()
        desc = self.descriptor if self.descriptor is not None else SIFT3D()
        return det.config, desc.config

    def fit(self, volumes=None, y=None):
        if self.on_empty not in ("nan", "raise"):
            raise ValueError(f"on_empty must be 'nan' or 'raise', got {self.on_empty!r}")
        self._configs()
        return self

    def transform(self, volumes):
        det, desc = self._configs()

        def one(vol):
            try:
                return clip_signature(vol, det, desc).values
            except NoFeatures:
                if self.on_empty == "raise":
                    raise
                return np.full(desc.dimension, np.nan)

        threads = self.n_jobs if self.n_jobs is not None else default_threads()
        rows = parallel_map(one, volumes, threads)
        return np.stack(rows) if rows else np.empty((0, desc.dimension))
