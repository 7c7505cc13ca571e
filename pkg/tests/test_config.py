import pytest

from flyact.config import PipelineConfig, load_config, parse_assignments
from flyact.exceptions import ParseError


def test_defaults():
    cfg = PipelineConfig()
    assert cfg.detector.suppression_strength_rho == 1.5
    assert cfg.detector.temporal_scale_tau == 5.0
    assert cfg.detector.nms_block == 3
    assert cfg.descriptor.dimension == 640
    assert cfg.split.train_per_class == 35
    assert cfg.pooling == "mean"


def test_flat_round_trip():
    cfg = PipelineConfig.from_flat({"kernel.gamma": "0.25", "detector.kappa": "0.05",
                                    "detector.mask_normalize": "false"})
    assert PipelineConfig.from_flat(cfg.to_flat()) == cfg
    assert cfg.kernel.gamma == 0.25 and cfg.detector.kappa == 0.05
    assert cfg.detector.mask_normalize is False


def test_none_values():
    cfg = PipelineConfig.from_flat({"kernel.gamma": "auto", "detector.mask_outer_radius": "none",
                                    "detector.spatial_scale_c": "2.0"})
    assert cfg.kernel.gamma is None
    # an unset mask radius follows the spatial scale
    assert cfg.detector.mask_outer_radius == 8.0 and cfg.detector.mask_inner_radius == 2.0


def test_file_and_overrides(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("# comment\n\ndetector.suppression_strength_rho = 2.0  # inline\nkernel.kind = linear\n")
    cfg = load_config(path, ["detector.suppression_strength_rho=0.5"])
    assert cfg.detector.suppression_strength_rho == 0.5
    assert cfg.kernel.kind == "linear"


def test_text_reloads(tmp_path):
    cfg = PipelineConfig.from_flat({"split.seed": "9"})
    path = tmp_path / "c.cfg"
    path.write_text(cfg.to_text())
    assert load_config(path) == cfg


@pytest.mark.parametrize("flat", [{"nosuch.key": "1"}, {"detector.nosuch": "1"}])
def test_unknown_keys(flat):
    with pytest.raises(KeyError):
        PipelineConfig.from_flat(flat)


@pytest.mark.parametrize("flat", [{"detector.nms_block": "three"}, {"detector.nms_block": "4"},
                                  {"kernel.kind": "poly"}, {"pooling.method": "max"},
                                  {"detector.mask_normalize": "maybe"}])
def test_bad_values(flat):
    with pytest.raises(ValueError):
        PipelineConfig.from_flat(flat)


def test_parse_error_row():
    with pytest.raises(ParseError) as info:
        parse_assignments(["a.b = 1", "garbage"])
    assert info.value.row == 2
