import numpy as np
import pytest

from flyact.detect import InterestPoint
from flyact.exceptions import CorruptFile, ParseError
from flyact.formats import (
    read_descriptors,
    read_points,
    read_signature_matrix,
    read_signatures,
    sidecar_path,
    write_descriptors,
    write_points,
    write_signature_matrix,
    write_signatures,
)


def test_points_round_trip(tmp_path):
    pts = [InterestPoint(1, 2, 3, 1.5, 0.1 + 0.2), InterestPoint(40, 5, 59, 1.5, 1e-17)]
    write_points(pts, tmp_path / "p.csv")
    assert read_points(tmp_path / "p.csv") == pts
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "x,y,t,scale,response"


def test_points_bad_row(tmp_path):
    (tmp_path / "p.csv").write_text("x,y,t,scale,response\n1,2,3,1.5,0.1\n1,2\n")
    with pytest.raises(ParseError) as info:
        read_points(tmp_path / "p.csv")
    assert info.value.row == 3


def test_descriptor_layout(tmp_path):
    rng = np.random.default_rng(0)
    pts = [InterestPoint(3, 4, 5, 1.5, 1.0), InterestPoint(7, 8, 9, 1.5, 1.0)]
    vals = rng.uniform(size=(2, 640))
    path = tmp_path / "d.bin"
    write_descriptors(list(zip(pts, vals)), path)
    raw = path.read_bytes()
    assert len(raw) == 8 + 2 * (12 + 640 * 8)
    assert int.from_bytes(raw[:8], "little") == 2
    assert int.from_bytes(raw[8:12], "little") == 3
    coords, back = read_descriptors(path)
    assert coords.tolist() == [[3, 4, 5], [7, 8, 9]]
    assert np.array_equal(back, vals)


def test_descriptor_empty(tmp_path):
    write_descriptors([], tmp_path / "d.bin")
    coords, vals = read_descriptors(tmp_path / "d.bin")
    assert coords.shape == (0, 3) and vals.shape == (0, 640)


def test_descriptor_corrupt(tmp_path):
    path = tmp_path / "d.bin"
    write_descriptors([(InterestPoint(1, 1, 1, 1.5, 1.0), np.ones(640))], path)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(CorruptFile):
        read_descriptors(path)


def test_signature_matrix(tmp_path):
    M = np.random.default_rng(1).normal(size=(3, 5))
    write_signature_matrix(M, tmp_path / "s.bin")
    assert np.array_equal(read_signature_matrix(tmp_path / "s.bin"), M)
    (tmp_path / "s.bin").write_bytes((tmp_path / "s.bin").read_bytes()[:-8])
    with pytest.raises(CorruptFile):
        read_signature_matrix(tmp_path / "s.bin")


def test_signatures_with_gaps(tmp_path):
    a, b = np.arange(4.0), np.ones(4)
    path = tmp_path / "sig.bin"
    write_signatures([a, None, b], ["c0", "c1", "c2"], ["hold", "hold", "tussle"], path, dim=4)
    assert sidecar_path(path).name == "sig.bin.csv"
    sigs, ids, labels = read_signatures(path)
    assert ids == ["c0", "c1", "c2"] and labels == ["hold", "hold", "tussle"]
    assert np.array_equal(sigs[0], a) and sigs[1] is None and np.array_equal(sigs[2], b)
