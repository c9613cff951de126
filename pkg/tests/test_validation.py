import numpy as np
import pytest

from pmcrnet.flowviz import color_wheel, flow_to_color, read_flow_f32, write_flow_f32
from pmcrnet.validation import (check_frame, check_frame_pair, check_pair_array, check_triplet_array,
                                parse_metrics, parse_size)


def test_check_frame_range_and_shape():
    check_frame(np.zeros((3, 4, 4)))
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        check_frame(np.full((3, 4, 4), 2.0))
    with pytest.raises(ValueError, match="shape"):
        check_frame(np.zeros((4, 4)))
    with pytest.raises(ValueError, match="non-finite"):
        check_frame(np.full((3, 2, 2), np.nan))


def test_pair_mismatch():
    with pytest.raises(ValueError, match="frame size mismatch"):
        check_frame_pair(np.zeros((3, 4, 4)), np.zeros((3, 4, 5)))


def test_array_shapes():
    assert check_pair_array(np.zeros((2, 3, 4, 4))).shape == (1, 2, 3, 4, 4)
    with pytest.raises(ValueError):
        check_triplet_array(np.zeros((1, 2, 3, 4, 4)))


def test_parsers():
    assert parse_metrics("PSNR, ie") == ("psnr", "ie")
    with pytest.raises(ValueError, match="valid names: psnr, ssim, ie"):
        parse_metrics("psnr,lpips")
    assert parse_size("640x480") == (480, 640)
    with pytest.raises(ValueError):
        parse_size("640")


def test_flow_colouring_and_raw_round_trip(tmp_path):
    assert color_wheel().shape == (55, 3)
    flow = np.zeros((2, 3, 4), np.float32)
    flow[0, 0, 0] = 1.0
    rgb = flow_to_color(flow)
    assert rgb.shape == (3, 3, 4) and rgb.min() >= 0 and rgb.max() <= 1
    np.testing.assert_array_equal(rgb[:, 1, 1], np.ones(3))  # zero motion is white
    write_flow_f32(flow, tmp_path / "f.f32")
    assert (tmp_path / "f.f32").stat().st_size == 2 * 3 * 4 * 4
    np.testing.assert_array_equal(read_flow_f32(tmp_path / "f.f32", 3, 4), flow)
