import struct

import numpy as np
import pytest

from flyact.classify import evaluate, train_model
from flyact.config import PipelineConfig
from flyact.exceptions import CorruptFile, VersionMismatch
from flyact.persistence import MAGIC, load_model, model_from_bytes, model_to_bytes, save_model
from flyact.srkda import KernelConfig


@pytest.fixture(params=[KernelConfig(), KernelConfig("linear"), KernelConfig("rbf", gamma=0.7)],
                ids=["rbf-median", "linear", "rbf-fixed"])
def model(request, separable_blobs):
    X, y = separable_blobs
    return train_model(X, y, request.param, PipelineConfig().to_flat())


def test_round_trip_bytes(model, tmp_path):
    path = tmp_path / "m.bin"
    save_model(model, path)
    first = path.read_bytes()
    save_model(load_model(path), tmp_path / "m2.bin")
    assert (tmp_path / "m2.bin").read_bytes() == first


def test_round_trip_arrays(model):
    back = model_from_bytes(model_to_bytes(model))
    for name in ("train_signatures", "coefficients_omega", "kernel_col_means"):
        assert np.array_equal(getattr(back.projection, name), getattr(model.projection, name))
    assert back.projection.kernel_grand_mean == model.projection.kernel_grand_mean
    assert back.projection.kernel == model.projection.kernel
    assert np.array_equal(back.centroids, model.centroids)
    assert back.class_names == model.class_names
    assert back.pipeline_config == model.pipeline_config


def test_evaluation_unchanged(model, separable_blobs):
    X, y = separable_blobs
    back = model_from_bytes(model_to_bytes(model))
    a, b = evaluate(model, list(X), y), evaluate(back, list(X), y)
    assert np.array_equal(a.confusion.counts, b.confusion.counts)
    assert [c.distance_margin for c in a.clips] == [c.distance_margin for c in b.clips]


def test_truncated(model):
    raw = model_to_bytes(model)
    for cut in (0, 5, 20, len(raw) // 2, len(raw) - 1):
        with pytest.raises(CorruptFile):
            model_from_bytes(raw[:cut])


def test_bit_flip(model):
    raw = bytearray(model_to_bytes(model))
    raw[len(raw) // 2] ^= 0x10
    with pytest.raises(CorruptFile):
        model_from_bytes(bytes(raw))


def test_bad_magic(model):
    raw = model_to_bytes(model)
    with pytest.raises(CorruptFile):
        model_from_bytes(b"NOTAMODL" + raw[8:])


def test_future_major_version(model):
    raw = bytearray(model_to_bytes(model))
    struct.pack_into("<H", raw, len(MAGIC), 99)
    with pytest.raises(VersionMismatch):
        model_from_bytes(bytes(raw))
