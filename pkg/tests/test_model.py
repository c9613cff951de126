import numpy as np
import pytest

from pmcrnet.model import ModelConfig, PMCRNet, analytic_param_count
from pmcrnet.tensor import Tensor

SMALL = dict(hidden_width=12, groups=3)


def frames(shape=(1, 3, 32, 48), seed=0):
    r = np.random.Generator(np.random.Philox(seed))
    return Tensor(r.random(shape).astype(np.float32)), Tensor(r.random(shape).astype(np.float32))


@pytest.mark.parametrize("flags", [{}, {"ablate_pmr": True}, {"ablate_pcr": True}, {"ablate_csm": True},
                                   {"ablate_pmr": True, "ablate_pcr": True, "ablate_csm": True}])
def test_param_count_matches_closed_form(flags):
    cfg = ModelConfig(**SMALL, **flags)
    assert PMCRNet(cfg).param_count() == analytic_param_count(cfg)


def test_ablations_shrink_the_model():
    full = analytic_param_count(ModelConfig())
    for flag in ("ablate_pmr", "ablate_pcr", "ablate_csm"):
        assert analytic_param_count(ModelConfig(**{flag: True})) < full


def test_odd_sized_input_is_padded_and_cropped_back():
    model = PMCRNet(ModelConfig(**SMALL))
    f0, f1 = frames((1, 3, 21, 37))
    result = model.forward(f0, f1)
    assert result.frame.shape == (1, 3, 21, 37)
    assert result.states[0].frame.shape == (1, 3, 32, 48)


def test_csm_ablation_has_no_mask():
    model = PMCRNet(ModelConfig(**SMALL, ablate_csm=True))
    result = model.forward(*frames())
    assert result.states[0].mask is None
    assert result.frame.shape == (1, 3, 32, 48)


def test_untrained_net_is_near_linear_blend():
    model = PMCRNet(ModelConfig())
    f0, f1 = frames((1, 3, 32, 32), seed=1)
    out = model.forward(f0, f1).frame.data
    assert np.abs(out - 0.5 * (f0.data + f1.data)).mean() < 0.05


def test_same_seed_same_weights_and_output():
    a, b = PMCRNet(ModelConfig(**SMALL), seed=4), PMCRNet(ModelConfig(**SMALL), seed=4)
    f0, f1 = frames()
    np.testing.assert_array_equal(a.forward(f0, f1).frame.data, b.forward(f0, f1).frame.data)
    assert not np.array_equal(PMCRNet(ModelConfig(**SMALL), seed=5).parameters()[0].data, a.parameters()[0].data)


def test_mismatched_frames_rejected():
    model = PMCRNet(ModelConfig(**SMALL))
    with pytest.raises(ValueError, match="mismatch"):
        model.forward(Tensor(np.zeros((1, 3, 32, 32), np.float32)), Tensor(np.zeros((1, 3, 32, 48), np.float32)))


def test_bad_hidden_width():
    with pytest.raises(ValueError):
        ModelConfig(hidden_width=10, groups=3)


def test_state_dict_round_trip():
    a, b = PMCRNet(ModelConfig(**SMALL), seed=1), PMCRNet(ModelConfig(**SMALL), seed=2)
    b.load_state_dict(a.state_dict())
    f0, f1 = frames()
    np.testing.assert_array_equal(a.forward(f0, f1).frame.data, b.forward(f0, f1).frame.data)
    state = a.state_dict()
    state.pop(next(iter(state)))
    with pytest.raises(ValueError, match="missing"):
        b.load_state_dict(state)
