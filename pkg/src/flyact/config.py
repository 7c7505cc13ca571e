"""Pipeline configuration and its flat ``section.key = value`` text format.

Example::

    # comments and blank lines are ignored
    detector.suppression_strength_rho = 1.5
    kernel.kind = rbf
    kernel.gamma = none
"""
from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .detect import DetectorConfig
from .exceptions import ParseError
from .sift3d import DescriptorConfig
from .srkda import KernelConfig
from .video_io import SplitSpec

SECTIONS = {
    "detector": DetectorConfig,
    "descriptor": DescriptorConfig,
    "kernel": KernelConfig,
    "split": SplitSpec,
}


@dataclass(frozen=True)
class PipelineConfig:
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    descriptor: DescriptorConfig = field(default_factory=DescriptorConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    pooling: str = "mean"

    def __post_init__(self):
        if self.pooling != "mean":
            raise ValueError(f"only mean pooling is supported, got {self.pooling!r}")

    def to_flat(self):
        """``{"section.key": "text"}`` for every field, in a stable order."""
        flat = {}
        for section in SECTIONS:
            sub = getattr(self, section)
            for f in dataclasses.fields(sub):
                flat[f"{section}.{f.name}"] = _format_value(getattr(sub, f.name))
        flat["pooling.method"] = self.pooling
        return flat

    def to_text(self):
        return "".join(f"{k} = {v}\n" for k, v in self.to_flat().items())

    @classmethod
    def from_flat(cls, flat, base=None):
        """Build a config from ``base`` (defaults if None) with ``flat`` overrides applied."""
        base = base or cls()
        updates = {s: {} for s in SECTIONS}
        pooling = base.pooling
        for key, text in flat.items():
            section, _, name = key.partition(".")
            if section == "pooling" and name == "method":
                pooling = text.strip()
                continue
            if section not in SECTIONS:
                raise KeyError(f"unknown config section {section!r} in {key!r}")
            types = typing.get_type_hints(SECTIONS[section])
            if name not in types:
                raise KeyError(f"unknown config key {key!r}")
            updates[section][name] = _parse_value(text, types[name], key)
        # mask radii that were derived from the old spatial scale follow the new one
        det = updates["detector"]
        if "spatial_scale_c" in det:
            c = base.detector.spatial_scale_c
            for name, factor in (("mask_inner_radius", 1.0), ("mask_outer_radius", 4.0)):
                if name not in det and getattr(base.detector, name) == factor * c:
                    det[name] = None
        return cls(
            **{s: dataclasses.replace(getattr(base, s), **updates[s]) for s in SECTIONS},
            pooling=pooling,
        )


def _format_value(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(text, typ, key):
    text = text.strip()
    args = typing.get_args(typ)
    optional = type(None) in args
    if optional:
        typ = next(a for a in args if a is not type(None))
    if optional and text.lower() in ("none", "auto", ""):
        return None
    try:
        if typ is bool:
            if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return text.lower() in ("true", "1", "yes")
        if typ is int:
            return int(text)
        if typ is float:
            return float(text)
        return text
    except ValueError:
        raise ValueError(f"bad value {text!r} for {key}") from None


def parse_assignments(lines, source="<config>"):
    """Parse ``key = value`` lines into a dict; ``#`` starts a comment."""
    flat = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or "." not in key.strip():
            raise ParseError(lineno, f"{source}: expected 'section.key = value'")
        flat[key.strip()] = value.strip()
    return flat


def load_config(path=None, overrides=()):
    """Defaults, then the file at ``path``, then ``section.key=value`` overrides."""
    flat = {}
    if path is not None:
        flat.update(parse_assignments(Path(path).read_text(encoding="utf-8").splitlines(), str(path)))
    flat.update(parse_assignments(overrides, "--set"))
    return PipelineConfig.from_flat(flat)
