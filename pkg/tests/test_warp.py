import numpy as np
import pytest

from pmcrnet.gradcheck import gradcheck
from pmcrnet.tensor import Tensor
from pmcrnet.warp import avg_downsample2x, backward_warp, build_pyramid, crop_back, pad_to_multiple


def image(seed=0, shape=(1, 3, 8, 10)):
    return np.random.Generator(np.random.Philox(seed)).random(shape).astype(np.float32)


def test_flow_far_outside_clamps_to_border():
    x = image()
    flow = np.zeros((1, 2, 8, 10), np.float32)
    flow[:, 0] = 1e4
    out = backward_warp(Tensor(x), Tensor(flow)).data
    np.testing.assert_array_equal(out, np.repeat(x[:, :, :, -1:], 10, axis=3))


def test_quarter_pixel_weights():
    x = image()
    flow = np.zeros((1, 2, 8, 10), np.float32)
    flow[:, 0] = 0.25
    out = backward_warp(Tensor(x), Tensor(flow)).data[..., :9]
    np.testing.assert_allclose(out, 0.75 * x[..., :9] + 0.25 * x[..., 1:], atol=1e-6)


def test_flow_shape_mismatch_is_rejected():
    with pytest.raises(ValueError):
        backward_warp(Tensor(image()), Tensor(np.zeros((1, 2, 8, 9), np.float32)))


def test_warp_gradient_off_lattice():
    r = np.random.Generator(np.random.Philox(3))
    x = r.random((1, 2, 5, 6))
    # keep samples away from integer coordinates where bilinear weights kink
    flow = r.integers(-2, 3, (1, 2, 5, 6)) + r.uniform(0.2, 0.8, (1, 2, 5, 6))
    assert gradcheck(backward_warp, [x, flow]) < 1e-6


def test_pyramid_shapes_and_average():
    x = image(1, (1, 3, 16, 32))
    pyr = build_pyramid(Tensor(x), 4)
    assert [p.shape[2:] for p in pyr] == [(16, 32), (8, 16), (4, 8), (2, 4)]
    np.testing.assert_allclose(avg_downsample2x(Tensor(x)).data[0, 0, 0, 0], x[0, 0, :2, :2].mean(), rtol=1e-6)


def test_pad_and_crop_round_trip():
    x = image(2, (1, 3, 17, 30))
    padded, record = pad_to_multiple(Tensor(x), 16)
    assert padded.shape[2:] == (32, 32)
    # reflection about the last row
    np.testing.assert_array_equal(padded.data[:, :, 17, :30], x[:, :, 15])
    np.testing.assert_array_equal(padded.data[:, :, :17, 30], x[:, :, :, 28])
    np.testing.assert_array_equal(crop_back(padded, record).data, x)
