"""Versioned binary model files.

Layout::

    8 bytes   magic b"FLYACTMD"
    2 x u16   format version (major, minor)
    u64       header length H
    H bytes   UTF-8 JSON header (config, class names, array names and shapes)
    ...       raw float64 arrays in header order
    u32       CRC-32 of every preceding byte
"""
from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .classify import TrainedModel
from .exceptions import CorruptFile, VersionMismatch
from .srkda import KernelConfig, ProjectionModel

MAGIC = b"FLYACTMD"
VERSION = (1, 0)
_PREFIX = struct.Struct("<8sHHQ")


def model_to_bytes(model):
    proj = model.projection
    arrays = {
        "train_signatures": proj.train_signatures,
        "coefficients_omega": proj.coefficients_omega,
        "kernel_col_means": proj.kernel_col_means,
        "kernel_grand_mean": np.array(proj.kernel_grand_mean),
        "centroids": model.centroids,
    }
    header = {
        "class_names": list(model.class_names),
        "kernel": {"kind": proj.kernel.kind,
                   "regularization_delta": proj.kernel.regularization_delta},
        "has_gamma": proj.kernel.gamma is not None,
        "pipeline_config": dict(sorted(model.pipeline_config.items())),
        "arrays": [{"name": k, "shape": list(np.shape(v))} for k, v in arrays.items()],
    }
    if proj.kernel.gamma is not None:
        arrays["kernel_gamma"] = np.array(proj.kernel.gamma)
        header["arrays"].append({"name": "kernel_gamma", "shape": []})
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [_PREFIX.pack(MAGIC, *VERSION, len(header_bytes)), header_bytes]
    parts += [np.ascontiguousarray(v, dtype="<f8").tobytes() for v in arrays.values()]
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def model_from_bytes(raw):
    if len(raw) < _PREFIX.size + 4:
        raise CorruptFile("model file is truncated")
    magic, major, minor, hlen = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise CorruptFile("not a flyact model file")
    if major != VERSION[0]:
        raise VersionMismatch(f"model format {major}.{minor} is not readable by {VERSION[0]}.x")
    body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != crc:
        raise CorruptFile("checksum mismatch")
    try:
        header = json.loads(body[_PREFIX.size:_PREFIX.size + hlen].decode("utf-8"))
        offset = _PREFIX.size + hlen
        arrays = {}
        for entry in header["arrays"]:
            count = int(np.prod(entry["shape"], dtype=np.int64))
            arrays[entry["name"]] = np.frombuffer(body, "<f8", count, offset) \
                .reshape(entry["shape"]).astype(np.float64)
            offset += 8 * count
        if offset != len(body):
            raise CorruptFile("array payload size does not match header")
        gamma = float(arrays["kernel_gamma"]) if header["has_gamma"] else None
        kernel = KernelConfig(header["kernel"]["kind"], gamma, header["kernel"]["regularization_delta"])
        proj = ProjectionModel(
            arrays["train_signatures"], arrays["coefficients_omega"], kernel,
            list(header["class_names"]), arrays["kernel_col_means"],
            float(arrays["kernel_grand_mean"]),
        )
        return TrainedModel(proj, arrays["centroids"], list(header["class_names"]),
                            dict(header["pipeline_config"]))
    except CorruptFile:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise CorruptFile(f"malformed model payload: {exc}") from None


def save_model(model, path):
    Path(path).write_bytes(model_to_bytes(model))


def load_model(path):
    return model_from_bytes(Path(path).read_bytes())
