"""3D-SIFT descriptors on video volumes.

Each voxel's gradient ``(La, Lb, Lt)`` is expressed as a magnitude, an
azimuth ``theta`` in the image plane and an elevation ``phi`` towards the
time axis. Around a keypoint, an axis-aligned cube split into
``grid**3`` subregions accumulates solid-angle normalised, Gaussian-weighted
magnitudes into ``phi_bins x theta_bins`` orientation histograms.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import (
    DegenerateBin,
    DimensionMismatch,
    LowContrast,
    SupportOutOfBounds,
    VolumeTooSmall,
)
from .video_io import FrameVolume

LOW_CONTRAST_NORM = 1e-12


@dataclass(frozen=True)
class DescriptorConfig:
    subregion_grid: int = 2
    subregion_size: int = 4
    theta_bins: int = 8
    phi_bins: int = 10
    gauss_sigma_w: float = 4.0
    clamp: float = 0.2

    def __post_init__(self):
        for name in ("subregion_grid", "subregion_size", "theta_bins", "phi_bins"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.gauss_sigma_w <= 0:
            raise ValueError("gauss_sigma_w must be positive")
        if not 0 < self.clamp <= 1:
            raise ValueError("clamp must lie in (0, 1]")

    @property
    def support(self):
        return self.subregion_grid * self.subregion_size

    @property
    def dimension(self):
        return self.subregion_grid ** 3 * self.theta_bins * self.phi_bins

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class GradientVolume:
    La: np.ndarray
    Lb: np.ndarray
    Lt: np.ndarray

    def __post_init__(self):
        if not (self.La.shape == self.Lb.shape == self.Lt.shape):
            raise DimensionMismatch("gradient components differ in shape")

    @property
    def shape(self):
        return self.La.shape


def gradients_3d(vol):
    """Finite-difference gradients along x, y and t.

    Central differences inside the volume, one-sided differences on its faces.
    """
    data = vol.data if isinstance(vol, FrameVolume) else np.asarray(vol, dtype=np.float64)
    if data.ndim != 3 or min(data.shape) < 3:
        raise VolumeTooSmall(f"need at least 3 voxels along every axis, got {data.shape}")
    Lt, Lb, La = np.gradient(data)
    return GradientVolume(La, Lb, Lt)


def voxel_polar(La, Lb, Lt):
    """Magnitude, azimuth in (-pi, pi] and elevation in [-pi/2, pi/2].

    Works elementwise on scalars or arrays; a zero gradient maps to (0, 0, 0).
    """
    La, Lb, Lt = np.asarray(La, float), np.asarray(Lb, float), np.asarray(Lt, float)
    mag = np.sqrt(La * La + Lb * Lb + Lt * Lt)
    theta = np.arctan2(Lb, La)
    theta = np.where(theta == -np.pi, np.pi, theta)
    phi = np.arctan2(Lt, np.sqrt(La * La + Lb * Lb))
    if mag.ndim == 0:
        return float(mag), float(theta), float(phi)
    return mag, theta, phi


def solid_angle_weight(phi_bin_low, delta_phi, delta_theta):
    """Area on the unit sphere of an azimuth x elevation bin.

    ``delta_theta * (sin(phi_low + delta_phi) - sin(phi_low))``: the polar-angle
    form ``delta_theta * (cos(p) - cos(p + dp))`` with ``p = pi/2 - phi_high``.
    """
    if delta_phi <= 0 or delta_theta <= 0:
        raise DegenerateBin(f"bin widths must be positive, got {delta_phi}, {delta_theta}")
    eps = 1e-12
    if phi_bin_low < -np.pi / 2 - eps or phi_bin_low + delta_phi > np.pi / 2 + eps:
        raise DegenerateBin(f"elevation bin [{phi_bin_low}, {phi_bin_low + delta_phi}] leaves the sphere")
    w = delta_theta * (np.sin(phi_bin_low + delta_phi) - np.sin(phi_bin_low))
    if not w > 0:
        raise DegenerateBin("bin has zero solid angle")
    return float(w)


def bin_solid_angles(cfg):
    """Solid angle of each elevation bin (identical across azimuth bins)."""
    d_phi = np.pi / cfg.phi_bins
    d_theta = 2 * np.pi / cfg.theta_bins
    return np.array([solid_angle_weight(-np.pi / 2 + k * d_phi, d_phi, d_theta)
                     for k in range(cfg.phi_bins)])


def orientation_bins(theta, phi, cfg):
    """Hard (i_theta, i_phi) bin indices; theta = pi wraps onto bin 0."""
    i_theta = np.floor((theta + np.pi) / (2 * np.pi / cfg.theta_bins)).astype(np.int64) % cfg.theta_bins
    i_phi = np.floor((phi + np.pi / 2) / (np.pi / cfg.phi_bins)).astype(np.int64)
    return i_theta, np.clip(i_phi, 0, cfg.phi_bins - 1)


def support_bounds(p, cfg):
    """Start/stop voxel indices ``(t, y, x)`` of the cube centred on ``p``."""
    half = cfg.support // 2
    start = np.array([p.t, p.y, p.x]) - half
    return start, start + cfg.support


def raw_histogram(grads, p, cfg):
    """Un-normalised concatenated sub-histograms for keypoint ``p``.

    Layout, slowest to fastest: t-subregion, y-subregion, x-subregion,
    elevation bin, azimuth bin.
    """
    start, stop = support_bounds(p, cfg)
    if np.any(start < 0) or np.any(stop > np.array(grads.shape)):
        raise SupportOutOfBounds(f"support of point ({p.x}, {p.y}, {p.t}) leaves the volume")
    cube = tuple(slice(a, b) for a, b in zip(start, stop))
    mag, theta, phi = voxel_polar(grads.La[cube], grads.Lb[cube], grads.Lt[cube])
    i_theta, i_phi = orientation_bins(theta, phi, cfg)

    n, g = cfg.support, cfg.subregion_grid
    offs = np.arange(n)
    sub = offs // cfg.subregion_size
    dist2 = (start[:, None] + offs[None, :] - np.array([p.t, p.y, p.x])[:, None]) ** 2
    gauss = np.exp(-(dist2[0][:, None, None] + dist2[1][None, :, None] + dist2[2][None, None, :])
                   / (2.0 * cfg.gauss_sigma_w ** 2))
    cell = (sub[:, None, None] * g + sub[None, :, None]) * g + sub[None, None, :]

    inv_solid = 1.0 / bin_solid_angles(cfg)
    weights = inv_solid[i_phi] * mag * gauss
    index = (cell * cfg.phi_bins + i_phi) * cfg.theta_bins + i_theta
    return np.bincount(index.ravel(), weights=weights.ravel(), minlength=cfg.dimension)


def normalize_descriptor(hist, clamp=0.2):
    """L2-normalise, clamp entries at ``clamp`` and renormalise."""
    norm = np.linalg.norm(hist)
    if norm < LOW_CONTRAST_NORM:
        raise LowContrast(f"histogram norm {norm:.3g} below {LOW_CONTRAST_NORM}")
    d = np.minimum(hist / norm, clamp)
    return d / np.linalg.norm(d)


def compute_descriptor(vol, grads, p, cfg=None):
    """Unit-norm 3D-SIFT descriptor for interest point ``p``.

    ``vol`` is only used to check that ``grads`` matches it and may be None
    when gradients are supplied directly.
    """
    cfg = cfg or DescriptorConfig()
    if vol is not None and vol.data.shape != grads.shape:
        raise DimensionMismatch("gradient volume does not match the frame volume")
    return normalize_descriptor(raw_histogram(grads, p, cfg), cfg.clamp)


def describe_keypoints(vol, points, cfg=None):
    """Describe every point whose support fits and has contrast; others are dropped."""
    cfg = cfg or DescriptorConfig()
    grads = gradients_3d(vol)
    out = []
    for p in points:
        try:
            out.append((p, compute_descriptor(vol, grads, p, cfg)))
        except (SupportOutOfBounds, LowContrast):
            continue
    return out


class SIFT3D(BaseEstimator):
    """Estimator wrapper around :func:`describe_keypoints`."""

    def __init__(self, subregion_grid=2, subregion_size=4, theta_bins=8, phi_bins=10,
                 gauss_sigma_w=4.0, clamp=0.2):
        self.subregion_grid = subregion_grid
        self.subregion_size = subregion_size
        self.theta_bins = theta_bins
        self.phi_bins = phi_bins
        self.gauss_sigma_w = gauss_sigma_w
        self.clamp = clamp

    @property
    def config(self):
        return DescriptorConfig(**self.get_params())

    def fit(self, volumes=None, y=None):
        self.config
        return self

    def describe(self, vol, points):
        return describe_keypoints(vol, points, self.config)
