import numpy as np
import pytest

from pmcrnet.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from pmcrnet.data import Triplet, make_rng
from pmcrnet.model import ModelConfig, PMCRNet
from pmcrnet.optim import AdamW, AdamWConfig, cosine_lr
from pmcrnet.tensor import Tensor
from pmcrnet.training import ABLATIONS, TrainConfig, ablation_config, evaluate, train

SMALL = ModelConfig(hidden_width=12, groups=3)


def tiny_dataset(n=2, size=32):
    r = make_rng(0)
    return [Triplet(*(r.random((3, size, size)).astype(np.float32) for _ in range(3)), id=str(i)) for i in range(n)]


def test_cosine_endpoints_and_midpoint():
    assert cosine_lr(0, 100) == pytest.approx(1e-4)
    assert cosine_lr(100, 100) == pytest.approx(2e-5)
    assert cosine_lr(50, 100) == pytest.approx(6e-5)


def test_adamw_first_step_by_hand():
    p = Tensor(np.array([1.0, -2.0], np.float32))
    opt = AdamW([("p", p)], AdamWConfig(weight_decay=0.1))
    opt.step([np.array([0.5, -0.5], np.float32)], lr=0.01)
    # bias-corrected first step moves each entry by lr * (sign(g) + wd * p)
    expected = np.array([1.0, -2.0]) - 0.01 * (np.sign([0.5, -0.5]) * 0.5 / (0.5 + 1e-8) + 0.1 * np.array([1.0, -2.0]))
    np.testing.assert_allclose(p.data, expected, rtol=1e-6)


def test_adamw_rejects_bad_gradient_shape():
    opt = AdamW([("p", Tensor(np.zeros(3, np.float32)))])
    with pytest.raises(ValueError, match="does not match"):
        opt.step([np.zeros(4, np.float32)], 0.1)


@pytest.mark.parametrize("kwargs", [dict(epochs=0), dict(batch=0), dict(lr_min=1e-3), dict(crop=20),
                                    dict(max_steps=0)])
def test_train_config_rejects(kwargs):
    with pytest.raises(ValueError):
        TrainConfig(**kwargs)


def test_short_training_run(tmp_path):
    cfg = TrainConfig(epochs=2, batch=2, crop=32, model=SMALL, checkpoint_every=1)
    result = train(cfg, tiny_dataset(), tmp_path)
    assert len(result.losses) == 2 and all(np.isfinite(result.losses))
    assert (tmp_path / "train.log").read_text().splitlines() == result.log
    model, opt, progress = load_checkpoint(result.checkpoint)
    assert progress.epoch == 2 and progress.step == 2 and opt.step_count == 2
    assert result.log[1].startswith("epoch=0 step=0 lr=0.0001 loss=")


def test_empty_dataset():
    with pytest.raises(ValueError, match="empty"):
        train(TrainConfig(crop=32, model=SMALL), [])


def test_evaluate_with_perfect_stub_caps_psnr():
    data = tiny_dataset()
    lookup = {id(t.frame0): t.frame_gt for t in data}
    report = evaluate(lambda f0, f1: lookup[id(f0)], data, ("psnr", "ie"))
    assert report.mean == {"psnr": 99.0, "ie": 0.0}


def test_evaluate_unknown_metric():
    with pytest.raises(ValueError, match="valid names"):
        evaluate(PMCRNet(SMALL), tiny_dataset(), ("lpips",))


def test_ablation_table():
    assert set(ABLATIONS) == {"E1", "E2", "E3", "E4", "E5", "E6"}
    assert ablation_config("E1").model.ablate_pmr
    assert ablation_config("E6").loss.mode == "annealed"
    with pytest.raises(ValueError):
        ablation_config("E9")


def test_checkpoint_errors(tmp_path):
    (tmp_path / "junk.pmcr").write_bytes(b"hello")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "junk.pmcr")
    save_checkpoint(PMCRNet(SMALL), None, 0, tmp_path / "ok.pmcr")
    blob = (tmp_path / "ok.pmcr").read_bytes()
    (tmp_path / "cut.pmcr").write_bytes(blob[:-100])
    with pytest.raises(OSError, match="truncated"):
        load_checkpoint(tmp_path / "cut.pmcr")
    with pytest.raises(OSError):
        load_checkpoint(tmp_path / "absent.pmcr")
