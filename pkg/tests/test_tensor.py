import numpy as np
import pytest

from pmcrnet import tensor as T
from pmcrnet.gradcheck import gradcheck, relative_error
from pmcrnet.tensor import Tape, Tensor, inject_fault


def rng(seed=0):
    return np.random.Generator(np.random.Philox(seed))


def test_add_broadcast_gradient_sums_over_expanded_axes():
    a = Tensor(np.ones((2, 3, 4, 4), np.float32), requires_grad=True)
    b = Tensor(np.ones((1, 3, 1, 1), np.float32), requires_grad=True)
    with Tape() as tape:
        grads = tape.backward(T.sum(T.add(a, b)))
    np.testing.assert_array_equal(grads.get(b), np.full((1, 3, 1, 1), 32.0, np.float32))
    np.testing.assert_array_equal(grads.get(a), np.ones((2, 3, 4, 4), np.float32))


def test_incompatible_broadcast_names_both_shapes():
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(4,\)"):
        T.add(Tensor(np.zeros((2, 3))), Tensor(np.zeros(4)))


def test_conv_output_shape_and_bias():
    x = Tensor(np.zeros((1, 4, 9, 7), np.float32))
    w = Tensor(np.zeros((6, 2, 3, 3), np.float32))
    b = Tensor(np.arange(6, dtype=np.float32))
    y = T.conv2d(x, w, b, stride=2, padding=1, groups=2)
    assert y.shape == (1, 6, 5, 4)
    np.testing.assert_array_equal(y.data[0, :, 0, 0], np.arange(6))


def test_conv_rejects_channel_mismatch():
    with pytest.raises(ValueError):
        T.conv2d(Tensor(np.zeros((1, 5, 8, 8))), Tensor(np.zeros((4, 2, 3, 3))), groups=2)


def test_transposed_conv_doubles_resolution():
    x = Tensor(np.ones((1, 2, 5, 6), np.float32))
    w = Tensor(np.ones((2, 3, 4, 4), np.float32))
    assert T.conv_transpose2d(x, w, stride=2, padding=1).shape == (1, 3, 10, 12)


def test_channel_shuffle_permutation():
    x = Tensor(np.arange(6, dtype=np.float32).reshape(1, 6, 1, 1))
    assert T.channel_shuffle(x, 3).data.ravel().tolist() == [0, 2, 4, 1, 3, 5]


def test_prelu_values():
    x = Tensor(np.array([-2.0, 0.0, 3.0], np.float32).reshape(1, 3, 1, 1))
    slope = Tensor(np.full(3, 0.25, np.float32))
    assert T.prelu(x, slope).data.ravel().tolist() == [-0.5, 0.0, 3.0]


def test_sigmoid_is_stable_for_large_inputs():
    out = T.sigmoid(Tensor(np.array([-1000.0, 0.0, 1000.0], np.float32))).data
    assert np.all(np.isfinite(out))
    assert out.tolist() == [0.0, 0.5, 1.0]


def test_no_graph_outside_tape():
    a = Tensor(np.ones(3), requires_grad=True)
    T.mul(a, a)
    assert T.active_tape() is None


@pytest.mark.parametrize("groups,stride,padding", [(1, 1, 1), (2, 2, 0), (3, 1, 2)])
def test_conv_gradcheck(groups, stride, padding):
    r = rng(groups)
    x = r.standard_normal((2, 3 * groups, 6, 5))
    w = r.standard_normal((2 * groups, 3, 3, 3))
    b = r.standard_normal(2 * groups)
    err = gradcheck(lambda x, w, b: T.conv2d(x, w, b, stride, padding, groups), [x, w, b])
    assert err < 1e-6


def test_conv_transpose_gradcheck():
    r = rng(4)
    x, w, b = r.standard_normal((1, 4, 3, 4)), r.standard_normal((4, 1, 4, 4)), r.standard_normal(2)
    assert gradcheck(lambda x, w, b: T.conv_transpose2d(x, w, b, 2, 1, 2), [x, w, b]) < 1e-6


def test_injected_fault_is_caught_by_gradcheck():
    r = rng(5)
    x, w = r.standard_normal((1, 2, 5, 5)), r.standard_normal((3, 2, 3, 3))
    with inject_fault("conv-backward"):
        err = gradcheck(lambda x, w: T.conv2d(x, w, None, 1, 1), [x, w])
    # the fault scales the input gradient by 1.01
    assert err > 1e-3


def test_relative_error_uses_tensor_scale():
    analytic = np.array([10.0, 1e-9])
    numeric = np.array([10.0, 2e-9])
    assert relative_error(analytic, numeric) == pytest.approx(1e-10)
    assert relative_error(np.zeros(3), np.zeros(3)) == 0.0
