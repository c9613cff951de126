import shutil
import subprocess

import numpy as np
import pytest

from pmcrnet.checkpoint import save_checkpoint
from pmcrnet.cli import main
from pmcrnet.data import load_image, make_synthetic_dataset, save_image
from pmcrnet.flowviz import read_flow_f32
from pmcrnet.model import ModelConfig, PMCRNet


@pytest.fixture(scope="module")
def small_data(tmp_path_factory):
    return make_synthetic_dataset(tmp_path_factory.mktemp("cli_data"), sequences=2, height=32, width=48, seed=1)


@pytest.fixture(scope="module")
def weights(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli_ckpt") / "small.pmcr"
    save_checkpoint(PMCRNet(ModelConfig(hidden_width=12, groups=3)), None, 0, path)
    return path


@pytest.fixture
def pair(tmp_path):
    r = np.random.Generator(np.random.Philox(0))
    paths = []
    for i in range(2):
        paths.append(tmp_path / f"f{i}.png")
        save_image(r.random((3, 20, 30)), paths[-1])
    return paths


def test_interpolate_with_flow_and_levels(tmp_path, pair, weights, capsys):
    out = tmp_path / "mid.png"
    code = main(["interpolate", "--frame0", str(pair[0]), "--frame1", str(pair[1]), "--weights", str(weights),
                 "--out", str(out), "--dump-flow", str(tmp_path / "flow"), "--dump-levels", str(tmp_path / "lv")])
    assert code == 0
    assert load_image(out).shape == (3, 20, 30)
    assert read_flow_f32(tmp_path / "flow" / "flow_t0.f32", 20, 30).shape == (2, 20, 30)
    assert {p.name for p in (tmp_path / "flow").iterdir()} == {"flow_t0.png", "flow_t0.f32", "flow_t1.png",
                                                               "flow_t1.f32"}
    assert len(list((tmp_path / "lv").glob("level*.png"))) == 4
    assert "size=30x20" in capsys.readouterr().out


def test_interpolate_size_mismatch_exit_1(tmp_path, pair, weights, capsys):
    save_image(np.zeros((3, 21, 30)), tmp_path / "odd.png")
    code = main(["interpolate", "--frame0", str(pair[0]), "--frame1", str(tmp_path / "odd.png"),
                 "--weights", str(weights), "--out", str(tmp_path / "x.png")])
    assert code == 1
    assert "frame size mismatch" in capsys.readouterr().err


def test_interpolate_missing_file_exit_2(tmp_path, pair, weights):
    assert main(["interpolate", "--frame0", str(tmp_path / "gone.png"), "--frame1", str(pair[1]),
                 "--weights", str(weights), "--out", str(tmp_path / "x.png")]) == 2


def test_interpolate_bad_checkpoint_exit_1(tmp_path, pair):
    (tmp_path / "bad.pmcr").write_bytes(b"not a checkpoint")
    assert main(["interpolate", "--frame0", str(pair[0]), "--frame1", str(pair[1]),
                 "--weights", str(tmp_path / "bad.pmcr"), "--out", str(tmp_path / "x.png")]) == 1


def test_eval_gt_as_pred_report(small_data, tmp_path, capsys):
    report = tmp_path / "report.txt"
    code = main(["eval", "--data", str(small_data), "--list", "tri_testlist.txt", "--metrics", "psnr,ie",
                 "--gt-as-pred", "--report", str(report)])
    assert code == 0
    lines = report.read_text().splitlines()
    assert lines[0] == "sample=00001/0001 psnr=99.000000 ie=0.000000"
    assert lines[2] == "sample=MEAN psnr=99.000000 ie=0.000000"
    assert capsys.readouterr().out.splitlines() == lines


def test_eval_with_weights(small_data, weights, capsys):
    assert main(["eval", "--data", str(small_data), "--list", "tri_testlist.txt", "--weights", str(weights),
                 "--metrics", "ssim"]) == 0
    assert "sample=BLEND_BASELINE ssim=" in capsys.readouterr().out


def test_eval_unknown_metric_exit_1(small_data, capsys):
    assert main(["eval", "--data", str(small_data), "--list", "tri_testlist.txt", "--gt-as-pred",
                 "--metrics", "psnr,lpips"]) == 1
    assert "valid names" in capsys.readouterr().err


def test_eval_missing_list_exit_2(small_data):
    assert main(["eval", "--data", str(small_data), "--list", "nope.txt", "--gt-as-pred"]) == 2


def test_train_short(small_data, tmp_path, capsys):
    code = main(["train", "--data", str(small_data), "--list", "tri_trainlist.txt", "--out", str(tmp_path),
                 "--epochs", "1", "--batch", "2", "--crop", "32", "--max-steps", "1", "--ablate", "csm",
                 "--tau", "off"])
    assert code == 0
    log = (tmp_path / "train.log").read_text()
    assert "ablate=csm" in log and "tau_mode=off" in log
    assert (tmp_path / "last.pmcr").is_file()


def test_train_rejects_zero_epochs(small_data, tmp_path):
    assert main(["train", "--data", str(small_data), "--list", "tri_trainlist.txt", "--out", str(tmp_path),
                 "--epochs", "0"]) == 1


def test_bench_single_iteration(capsys):
    assert main(["bench", "--size", "32x32", "--iters", "1"]) == 0
    out = capsys.readouterr().out
    assert "std_ms=0.0" in out and "params=6756560" in out


def test_bench_bad_size_exit_1():
    assert main(["bench", "--size", "big"]) == 1


def test_usage_errors_exit_1():
    assert main([]) == 1
    assert main(["interpolate", "--frame0", "a.png"]) == 1
    assert main(["selftest", "--inject-fault", "nothing"]) == 1


def test_gradcheck_and_fault_injection(capsys):
    assert main(["gradcheck"]) == 0
    assert capsys.readouterr().out.rstrip().endswith("checks passed")
    assert main(["gradcheck", "--inject-fault", "conv-backward"]) == 3
    assert "FAIL" in capsys.readouterr().out


@pytest.mark.skipif(shutil.which("pmcrnet") is None, reason="console script not installed")
def test_console_script_help():
    proc = subprocess.run(["pmcrnet", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for name in ("interpolate", "train", "eval", "bench", "gradcheck", "selftest"):
        assert name in proc.stdout
