"""Selective spatio-temporal interest points.

Per frame: Harris corner strength, gradient orientation, and an
orientation-weighted surround-suppression term over an annular mask. The
suppressed responses are gated by a temporal-variation energy and thinned
with a strict 3D non-maxima suppression.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator

from .exceptions import BadBlockSize, DimensionMismatch, FrameTooSmall, TooFewFrames
from .video_io import FrameVolume

# gradient magnitudes at or below this are treated as "no orientation"
ORIENTATION_EPS = 1e-12
# temporal smoothing support, in multiples of tau
TEMPORAL_TRUNCATE = 3.0


@dataclass(frozen=True)
class DetectorConfig:
    spatial_scale_c: float = 1.5
    kappa: float = 0.04
    suppression_strength_rho: float = 1.5
    mask_inner_radius: float | None = None
    mask_outer_radius: float | None = None
    temporal_scale_tau: float = 5.0
    temporal_threshold_frac: float = 0.1
    nms_block: int = 3
    response_threshold_frac: float = 0.05
    mask_normalize: bool = True

    def __post_init__(self):
        if self.mask_inner_radius is None:
            object.__setattr__(self, "mask_inner_radius", float(self.spatial_scale_c))
        if self.mask_outer_radius is None:
            object.__setattr__(self, "mask_outer_radius", 4.0 * self.spatial_scale_c)
        if self.spatial_scale_c <= 0 or self.temporal_scale_tau <= 0:
            raise ValueError("spatial and temporal scales must be positive")
        if not self.mask_inner_radius < self.mask_outer_radius:
            raise ValueError("mask_inner_radius must be < mask_outer_radius")
        if self.suppression_strength_rho < 0:
            raise ValueError("suppression_strength_rho must be >= 0")
        for name in ("temporal_threshold_frac", "response_threshold_frac"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        _check_block(self.nms_block)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class InterestPoint:
    x: int
    y: int
    t: int
    scale: float
    response: float


def _check_block(block):
    if int(block) != block or block < 3 or block % 2 == 0:
        raise BadBlockSize(f"nms block must be an odd integer >= 3, got {block}")


def _is_single(frame):
    return not isinstance(frame, FrameVolume) and np.ndim(frame) == 2


def _frames(frame):
    """View a 2D frame or a (t, y, x) stack as a 3D stack."""
    arr = frame.data if isinstance(frame, FrameVolume) else np.asarray(frame, dtype=np.float64)
    if arr.ndim == 2:
        return arr[None]
    if arr.ndim != 3:
        raise DimensionMismatch(f"expected a 2D frame or 3D stack, got {arr.ndim} dims")
    return arr


def _check_frame_size(stack, c):
    if min(stack.shape[1:]) < 4 * c:
        raise FrameTooSmall(f"frame {stack.shape[2]}x{stack.shape[1]} smaller than 4c = {4 * c}")


def _spatial_derivatives(stack, c):
    # reflect padding per the border policy; order is (t, y, x)
    lx = ndimage.gaussian_filter(stack, (0, c, c), order=(0, 0, 1), mode="reflect")
    ly = ndimage.gaussian_filter(stack, (0, c, c), order=(0, 1, 0), mode="reflect")
    return lx, ly


def harris_response(frame, c=1.5, kappa=0.04):
    """Harris strength ``det(M) - kappa * trace(M)**2``, clamped at zero.

    ``M`` is the structure tensor of Gaussian derivatives at scale ``c``,
    integrated with a Gaussian window of scale ``2c``. Accepts a single frame
    or a ``(t, y, x)`` stack (processed frame by frame).
    """
    stack = _frames(frame)
    _check_frame_size(stack, c)
    lx, ly = _spatial_derivatives(stack, c)
    window = (0, 2 * c, 2 * c)
    sxx = ndimage.gaussian_filter(lx * lx, window, mode="reflect")
    syy = ndimage.gaussian_filter(ly * ly, window, mode="reflect")
    sxy = ndimage.gaussian_filter(lx * ly, window, mode="reflect")
    trace = sxx + syy
    r = np.maximum(sxx * syy - sxy * sxy - kappa * trace * trace, 0.0)
    return r[0] if _is_single(frame) else r


def orientation_map(frame, c=1.5):
    """Gradient angle ``atan2(d/dy, d/dx)`` in (-pi, pi]; NaN where the gradient vanishes."""
    stack = _frames(frame)
    _check_frame_size(stack, c)
    lx, ly = _spatial_derivatives(stack, c)
    angle = np.arctan2(ly, lx)
    angle[np.hypot(lx, ly) <= ORIENTATION_EPS] = np.nan
    return angle[0] if _is_single(frame) else angle


def annulus_offsets(inner, outer):
    """Integer (dy, dx) offsets with ``inner <= sqrt(dx**2 + dy**2) <= outer``, row-major."""
    r = int(np.floor(outer))
    dy, dx = np.mgrid[-r:r + 1, -r:r + 1]
    dist = np.hypot(dx, dy)
    keep = (dist >= inner) & (dist <= outer)
    return np.column_stack([dy[keep], dx[keep]])


def suppression_term(S, O, cfg):
    """Orientation-weighted sum of surrounding responses.

    ``t(p) = sum_q S(q) * max(0, cos(O(p) - O(q)))`` over ``q = p - offset`` for
    every offset in the annular mask. Neighbours outside the frame and pairs
    involving an undefined orientation contribute nothing. With
    ``cfg.mask_normalize`` each offset carries weight ``1 / len(mask)`` so the
    term is a surround average rather than a raw sum.
    """
    S = np.asarray(S, dtype=np.float64)
    O = np.asarray(O, dtype=np.float64)
    if S.shape != O.shape:
        raise DimensionMismatch(f"response {S.shape} and orientation {O.shape} differ")
    squeeze = S.ndim == 2
    S3, O3 = (S[None], O[None]) if squeeze else (S, O)

    offsets = annulus_offsets(cfg.mask_inner_radius, cfg.mask_outer_radius)
    r = int(np.floor(cfg.mask_outer_radius))
    pad = ((0, 0), (r, r), (r, r))
    # cos(a - b) = cos a cos b + sin a sin b; NaN orientations propagate and fmax drops them
    Sp = np.pad(S3, pad, mode="constant", constant_values=0.0)
    Cp = np.pad(np.cos(O3), pad, mode="constant", constant_values=np.nan)
    Snp = np.pad(np.sin(O3), pad, mode="constant", constant_values=np.nan)
    cos_p, sin_p = np.cos(O3), np.sin(O3)
    _, h, w = S3.shape
    total = np.zeros_like(S3)
    weight = np.empty_like(S3)
    buf = np.empty_like(S3)
    for dy, dx in offsets:
        # neighbour q = p - (dy, dx)
        win = (slice(None), slice(r - dy, r - dy + h), slice(r - dx, r - dx + w))
        np.multiply(cos_p, Cp[win], out=weight)
        np.multiply(sin_p, Snp[win], out=buf)
        weight += buf
        np.fmax(weight, 0.0, out=weight)
        weight *= Sp[win]
        total += weight
    if cfg.mask_normalize:
        total /= len(offsets)
    return total[0] if squeeze else total


def apply_suppression(S, t, rho):
    """Ramp ``max(0, S - rho * t)``."""
    S = np.asarray(S, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if S.shape != t.shape:
        raise DimensionMismatch(f"response {S.shape} and suppression {t.shape} differ")
    if rho < 0:
        raise ValueError("rho must be >= 0")
    return np.maximum(S - rho * t, 0.0)


def temporal_kernel(tau):
    """Normalised Gaussian weights used to smooth temporal energy (radius ``3 * tau``)."""
    radius = int(TEMPORAL_TRUNCATE * float(tau) + 0.5)
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-0.5 * (k / tau) ** 2)
    return w / w.sum()


def temporal_energy(vol, tau=5.0):
    """Gaussian-smoothed squared central temporal difference.

    Frames 0 and T-1, where the central difference does not fit, carry zero
    energy; smoothing runs over the interior frames with reflect padding.
    """
    data = vol.data if isinstance(vol, FrameVolume) else np.asarray(vol, dtype=np.float64)
    T = data.shape[0]
    if T < 2 * tau + 1:
        raise TooFewFrames(f"{T} frames, need at least 2*tau+1 = {2 * tau + 1}")
    diff = 0.5 * (data[2:] - data[:-2])
    smooth = ndimage.gaussian_filter1d(diff * diff, tau, axis=0, mode="reflect",
                                       truncate=TEMPORAL_TRUNCATE)
    energy = np.zeros_like(data)
    energy[1:-1] = smooth
    return energy


def non_maxima_suppress(C, block=3):
    """Voxels strictly greater than every other voxel in their block^3 neighbourhood.

    Returns ``(x, y, t, response)`` tuples in (t, y, x) order. Ties suppress
    every tied voxel; non-positive voxels are never returned.
    """
    _check_block(block)
    C = np.asarray(C, dtype=np.float64)
    footprint = np.ones((block,) * 3, dtype=bool)
    footprint[(block // 2,) * 3] = False
    neighbours = ndimage.maximum_filter(C, footprint=footprint, mode="constant", cval=-np.inf)
    keep = (C > neighbours) & (C > 0)
    ts, ys, xs = np.nonzero(keep)
    return [(int(x), int(y), int(t), float(C[t, y, x])) for t, y, x in zip(ts, ys, xs)]


def suppressed_response(vol, cfg):
    """Per-frame surround-suppressed Harris responses, stacked over time."""
    stack = _frames(vol)
    S = harris_response(stack, cfg.spatial_scale_c, cfg.kappa)
    O = orientation_map(stack, cfg.spatial_scale_c)
    t = suppression_term(S, O, cfg)
    return apply_suppression(S, t, cfg.suppression_strength_rho)


def detect_sstip(vol, cfg=None):
    """Detect interest points in ``vol``; returned sorted by (t, y, x)."""
    cfg = cfg or DetectorConfig()
    energy = temporal_energy(vol, cfg.temporal_scale_tau)
    C = suppressed_response(vol, cfg)
    e_max = energy.max()
    C[(energy <= 0) | (energy < cfg.temporal_threshold_frac * e_max)] = 0.0
    c_max = C.max()
    C[C < cfg.response_threshold_frac * c_max] = 0.0
    return [InterestPoint(x, y, t, float(cfg.spatial_scale_c), r)
            for x, y, t, r in non_maxima_suppress(C, cfg.nms_block)]


class SSTIPDetector(BaseEstimator):
    """Estimator wrapper around :func:`detect_sstip`.

    Parameters mirror :class:`DetectorConfig`. ``fit`` is a no-op; ``transform``
    maps a sequence of volumes to a list of interest-point lists.
    """

    def __init__(self, spatial_scale_c=1.5, kappa=0.04, suppression_strength_rho=1.5,
                 mask_inner_radius=None, mask_outer_radius=None, temporal_scale_tau=5.0,
                 temporal_threshold_frac=0.1, nms_block=3, response_threshold_frac=0.05,
                 mask_normalize=True):
        self.spatial_scale_c = spatial_scale_c
        self.kappa = kappa
        self.suppression_strength_rho = suppression_strength_rho
        self.mask_inner_radius = mask_inner_radius
        self.mask_outer_radius = mask_outer_radius
        self.temporal_scale_tau = temporal_scale_tau
        self.temporal_threshold_frac = temporal_threshold_frac
        self.nms_block = nms_block
        self.response_threshold_frac = response_threshold_frac
        self.mask_normalize = mask_normalize

    @property
    def config(self):
        return DetectorConfig(**self.get_params())

    def fit(self, volumes=None, y=None):
        self.config  # validates parameters
        return self

    def detect(self, vol):
        return detect_sstip(vol, self.config)

    def transform(self, volumes):
        cfg = self.config
        return [detect_sstip(v, cfg) for v in volumes]
