"""Frame volumes, dataset manifests, splitting and synthetic clips.

Volumes are stored as ``float64`` arrays indexed ``data[t, y, x]``.
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import (
    BadDimensions,
    DimensionMismatch,
    DuplicateClipId,
    EmptyDirectory,
    InsufficientSamples,
    OutOfRange,
    ParseError,
    UnsupportedFormat,
)

MANIFEST_HEADER = ["clip_id", "frames_path", "label", "start_frame", "end_frame"]
PATTERNS = ("orbiting_blob", "oscillating_blob", "static_scene")
DEFAULT_TEMPORAL_SCALE = 5


@dataclass(frozen=True, eq=False)
class FrameVolume:
    """Grayscale clip with luminance in [0, 1], indexed ``data[t, y, x]``."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise BadDimensions(f"expected a non-empty (t, y, x) array, got shape {data.shape}")
        if not np.all(np.isfinite(data)) or data.min() < 0.0 or data.max() > 1.0:
            raise ValueError("luminance values must be finite and in [0, 1]")
        object.__setattr__(self, "data", data)

    @property
    def num_frames(self):
        return self.data.shape[0]

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]

    def __eq__(self, other):
        if not isinstance(other, FrameVolume):
            return NotImplemented
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"FrameVolume(width={self.width}, height={self.height}, num_frames={self.num_frames})"


@dataclass(frozen=True)
class ClipAnnotation:
    clip_id: str
    label: str
    start_frame: int
    end_frame: int

    def __post_init__(self):
        if not 0 <= self.start_frame <= self.end_frame:
            raise OutOfRange(
                f"clip {self.clip_id!r}: need 0 <= start_frame <= end_frame, "
                f"got [{self.start_frame}, {self.end_frame}]"
            )


@dataclass(frozen=True)
class ManifestEntry:
    frames_path: Path
    annotation: ClipAnnotation

    @property
    def clip_id(self):
        return self.annotation.clip_id

    @property
    def label(self):
        return self.annotation.label


@dataclass
class DatasetManifest:
    entries: list = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for entry in self.entries:
            if entry.clip_id in seen:
                raise DuplicateClipId(f"duplicate clip_id {entry.clip_id!r}")
            seen.add(entry.clip_id)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def labels(self):
        return [e.label for e in self.entries]

    @property
    def classes(self):
        return sorted(set(self.labels))


@dataclass(frozen=True)
class SplitSpec:
    train_per_class: int = 35
    seed: int = 0

    def __post_init__(self):
        if self.train_per_class < 1:
            raise ValueError("train_per_class must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


# ---------------------------------------------------------------------------
# PGM frames

_PGM_TOKEN = re.compile(rb"(?:\s*(?:#[^\n]*\n)?)*\s*(\S+)")


def read_pgm(path):
    """Read a binary (P5) 8-bit PGM file into a uint8 ``(height, width)`` array."""
    raw = Path(path).read_bytes()
    if raw[:2] != b"P5":
        raise UnsupportedFormat(f"{path}: not a binary 8-bit grayscale PGM (P5) file")
    pos = 2
    header = []
    for _ in range(3):
        m = _PGM_TOKEN.match(raw, pos)
        if m is None:
            raise UnsupportedFormat(f"{path}: truncated PGM header")
        header.append(m.group(1))
        pos = m.end()
    try:
        width, height, maxval = (int(tok) for tok in header)
    except ValueError:
        raise UnsupportedFormat(f"{path}: malformed PGM header") from None
    if maxval != 255:
        raise UnsupportedFormat(f"{path}: maxval {maxval} unsupported, need 255")
    pos += 1  # single whitespace byte before the raster
    if len(raw) - pos < width * height:
        raise UnsupportedFormat(f"{path}: raster shorter than {width}x{height}")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=width * height, offset=pos)
    return pixels.reshape(height, width)


def write_pgm(path, frame):
    frame = np.asarray(frame, dtype=np.uint8)
    height, width = frame.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (width, height))
        fh.write(frame.tobytes())


def load_frames(path):
    """Load a directory of ``*.pgm`` frames, ordered lexicographically by name."""
    path = Path(path)
    if not path.is_dir():
        raise EmptyDirectory(f"{path}: not a directory")
    files = sorted(p for p in path.iterdir() if p.is_file())
    if not files:
        raise EmptyDirectory(f"{path}: no frames")
    frames = [p for p in files if p.suffix.lower() == ".pgm"]
    if not frames:
        raise UnsupportedFormat(f"{path}: no .pgm frames (found {files[0].name}, ...)")
    arrays = [read_pgm(p) for p in frames]
    shape = arrays[0].shape
    for p, a in zip(frames, arrays):
        if a.shape != shape:
            raise DimensionMismatch(f"{p.name} is {a.shape[1]}x{a.shape[0]}, expected {shape[1]}x{shape[0]}")
    return FrameVolume(np.stack(arrays).astype(np.float64) / 255.0)


def write_frames(vol, path, prefix="frame_"):
    """Write ``vol`` as 8-bit PGM frames; the inverse of :func:`load_frames` up to 1/255."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    quantized = np.rint(vol.data * 255.0).astype(np.uint8)
    width = max(5, len(str(vol.num_frames)))
    for t, frame in enumerate(quantized):
        write_pgm(path / f"{prefix}{t:0{width}d}.pgm", frame)


def extract_clip(vol, ann):
    if ann.end_frame >= vol.num_frames:
        raise OutOfRange(
            f"clip {ann.clip_id!r} ends at frame {ann.end_frame}, volume has {vol.num_frames}"
        )
    return FrameVolume(vol.data[ann.start_frame:ann.end_frame + 1].copy())


# ---------------------------------------------------------------------------
# manifests

def parse_manifest(path):
    """Parse a manifest CSV. Relative ``frames_path`` values resolve against the file's directory."""
    path = Path(path)
    base = path.parent
    entries = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return DatasetManifest([])
        if [h.strip() for h in header] != MANIFEST_HEADER:
            raise ParseError(1, f"expected header {','.join(MANIFEST_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise ParseError(lineno, f"expected {len(MANIFEST_HEADER)} fields, got {len(row)}")
            clip_id, frames_path, label, start, end = (cell.strip() for cell in row)
            try:
                start, end = int(start), int(end)
            except ValueError:
                raise ParseError(lineno, "start_frame and end_frame must be integers") from None
            if not clip_id or not label:
                raise ParseError(lineno, "clip_id and label must be non-empty")
            if clip_id in seen:
                raise DuplicateClipId(f"row {lineno}: duplicate clip_id {clip_id!r}")
            seen.add(clip_id)
            try:
                ann = ClipAnnotation(clip_id, label, start, end)
            except OutOfRange as exc:
                raise ParseError(lineno, str(exc)) from None
            fp = Path(frames_path)
            entries.append(ManifestEntry(fp if fp.is_absolute() else base / fp, ann))
    return DatasetManifest(entries)


def write_manifest(manifest, path):
    path = Path(path)
    base = path.parent.resolve()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for e in manifest:
            fp = Path(e.frames_path)
            try:
                fp = fp.resolve().relative_to(base)
            except ValueError:
                pass
            a = e.annotation
            writer.writerow([a.clip_id, fp.as_posix(), a.label, a.start_frame, a.end_frame])


def load_clip(entry):
    """Load the frames of a manifest entry and cut out its annotated range."""
    return extract_clip(load_frames(entry.frames_path), entry.annotation)


def split_dataset(manifest, spec):
    """Per-class seeded shuffle; the first ``train_per_class`` shuffled entries train.

    Classes are visited in sorted order and share one PCG64 stream keyed by
    ``spec.seed``. Both halves keep the manifest's original row order.
    """
    by_class = {}
    for i, e in enumerate(manifest):
        by_class.setdefault(e.label, []).append(i)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    train_idx = set()
    for label in sorted(by_class):
        idx = by_class[label]
        if len(idx) <= spec.train_per_class:
            raise InsufficientSamples(label, len(idx), spec.train_per_class)
        order = rng.permutation(len(idx))
        train_idx.update(idx[j] for j in order[:spec.train_per_class])
    train = [e for i, e in enumerate(manifest.entries) if i in train_idx]
    test = [e for i, e in enumerate(manifest.entries) if i not in train_idx]
    return DatasetManifest(train), DatasetManifest(test)


# ---------------------------------------------------------------------------
# synthetic clips

def blob_trajectory(pattern, width, height, num_frames, *, radius=None, period=30.0, phase=0.0):
    """Blob-centre positions ``(x, y, t)`` for each frame.

    orbiting_blob:    x = cx + r cos(2 pi t / period + phase), y = cy + r sin(...)
    oscillating_blob: x = cx + r sin(2 pi t / period + phase), y = cy
    static_scene:     x = cx, y = cy

    with ``(cx, cy) = ((width - 1) / 2, (height - 1) / 2)`` and ``r`` defaulting
    to ``min(width, height) / 5``.
    """
    if pattern not in PATTERNS:
        raise ValueError(f"unknown pattern {pattern!r}, expected one of {PATTERNS}")
    if radius is None:
        radius = min(width, height) / 5.0
    t = np.arange(num_frames, dtype=np.float64)
    cx = np.full(num_frames, (width - 1) / 2.0)
    cy = np.full(num_frames, (height - 1) / 2.0)
    angle = 2.0 * np.pi * t / period + phase
    if pattern == "orbiting_blob":
        cx = cx + radius * np.cos(angle)
        cy = cy + radius * np.sin(angle)
    elif pattern == "oscillating_blob":
        cx = cx + radius * np.sin(angle)
    return np.column_stack([cx, cy, t])


def generate_synthetic(pattern, width=64, height=64, num_frames=60, noise_sigma=0.0, seed=0,
                       *, blob_sigma=2.5, amplitude=0.8, background=0.0, radius=None,
                       period=30.0, phase=None, temporal_scale=DEFAULT_TEMPORAL_SCALE):
    """Render a bright Gaussian blob moving along ``pattern`` over a dark background.

    Returns ``(volume, ground_truth)`` where ``ground_truth`` is the exact
    ``(num_frames, 3)`` array of blob centres from :func:`blob_trajectory`.
    When ``phase`` is None it is drawn uniformly from the seeded generator.
    """
    if pattern not in PATTERNS:
        raise ValueError(f"unknown pattern {pattern!r}, expected one of {PATTERNS}")
    if width < 32 or height < 32:
        raise BadDimensions(f"width and height must be >= 32, got {width}x{height}")
    if num_frames < 2 * temporal_scale + 1:
        raise BadDimensions(f"need at least {2 * temporal_scale + 1} frames, got {num_frames}")
    rng = np.random.Generator(np.random.PCG64(seed))
    drawn_phase = rng.uniform(0.0, 2.0 * np.pi)
    if phase is None:
        phase = drawn_phase
    truth = blob_trajectory(pattern, width, height, num_frames,
                            radius=radius, period=period, phase=phase)

    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    dx = xs[None, None, :] - truth[:, 0, None, None]
    dy = ys[None, :, None] - truth[:, 1, None, None]
    data = background + amplitude * np.exp(-(dx * dx + dy * dy) / (2.0 * blob_sigma ** 2))
    if noise_sigma > 0:
        data = data + rng.normal(0.0, noise_sigma, size=data.shape)
    return FrameVolume(np.clip(data, 0.0, 1.0)), truth


def write_synthetic_dataset(root, patterns=("orbiting_blob", "oscillating_blob"), per_class=50,
                            seed=0, **synth_kwargs):
    """Write ``per_class`` synthetic clips per pattern plus ``manifest.csv`` under ``root``.

    Clip ``i`` of pattern ``p`` uses seed ``seed + 1000 * k + i`` where ``k`` is
    the pattern's position in ``patterns``.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for k, pattern in enumerate(patterns):
        for i in range(per_class):
            clip_id = f"{pattern}_{i:03d}"
            vol, _ = generate_synthetic(pattern, seed=seed + 1000 * k + i, **synth_kwargs)
            write_frames(vol, root / clip_id)
            ann = ClipAnnotation(clip_id, pattern, 0, vol.num_frames - 1)
            entries.append(ManifestEntry(root / clip_id, ann))
    manifest = DatasetManifest(entries)
    write_manifest(manifest, root / "manifest.csv")
    return manifest

