import numpy as np
import pytest

from pmcrnet.gradcheck import gradcheck
from pmcrnet.loss import LossConfig, census_loss, charbonnier, soft_census, tau, total_loss
from pmcrnet.selftest import census_lattice
from pmcrnet.tensor import Tape, Tensor, double_precision
from pmcrnet.warp import build_pyramid


def rand(shape, seed=0):
    return np.random.Generator(np.random.Philox(seed)).random(shape).astype(np.float32)


def test_charbonnier_matches_formula():
    d = np.array([0.0, 0.1, -0.5], np.float64)
    expected = np.mean(np.power(d * d + 1e-6, 0.5))
    with double_precision():
        value = charbonnier(Tensor(d)).item()
    assert value == pytest.approx(expected, rel=1e-12)


def test_soft_census_has_48_channels_per_image():
    out = soft_census(Tensor(rand((2, 3, 9, 9))))
    assert out.shape[1] == 48


def test_census_ignores_brightness_offset_but_not_structure():
    a = rand((1, 3, 12, 12), 1)
    same = census_loss(Tensor(a), Tensor(a)).item()
    other = census_loss(Tensor(a), Tensor(rand((1, 3, 12, 12), 2))).item()
    assert other > 10 * same


def test_census_gradcheck_on_lattice():
    r = np.random.Generator(np.random.Philox(3))
    a, b = census_lattice(r, (1, 3, 8, 8)), census_lattice(r, (1, 3, 8, 8))
    assert gradcheck(census_loss, [a, b]) < 1e-4


def test_tau_modes():
    assert tau(200, 300, LossConfig(mode="fixed")) == 0.1
    assert tau(0, 300, LossConfig(mode="off")) == 0.0
    with pytest.raises(ValueError):
        LossConfig(mode="sometimes")


def test_total_loss_with_perfect_pyramid_is_the_floor():
    gt = Tensor(rand((1, 3, 32, 32), 4))
    states = dict(enumerate(build_pyramid(gt, 4)))
    out = total_loss(states, gt, 0.0, 300)
    # 2 * eps at levels 0..2 (census active) and eps at level 3 (4x4, Charbonnier only)
    expected = np.float32(2e-3) + np.float32(0.1) * (np.float32(2e-3) * 2 + np.float32(1e-3))
    assert out.value == pytest.approx(float(expected), rel=1e-6)
    assert out.level_terms[3] == pytest.approx(1e-3, rel=1e-6)


def test_total_loss_backpropagates_to_every_level():
    gt = Tensor(rand((1, 3, 32, 32), 5))
    leaves = {lvl: Tensor(rand((1, 3, 32 >> lvl, 32 >> lvl), 10 + lvl), requires_grad=True) for lvl in range(4)}
    with Tape() as tape:
        grads = tape.backward(total_loss(leaves, gt, 0.0, 300).total)
    assert all(np.abs(grads.get(leaves[lvl])).sum() > 0 for lvl in range(4))
    with Tape() as tape:
        grads = tape.backward(total_loss(leaves, gt, 100.0, 300).total)
    assert np.abs(grads.get(leaves[2])).sum() == 0
