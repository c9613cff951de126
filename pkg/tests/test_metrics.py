import numpy as np
import pytest

from pmcrnet.metrics import PSNR_CAP, MetricReport, interpolation_error, psnr, ssim


def test_psnr_of_identical_images_is_capped():
    x = np.full((3, 16, 16), 0.3)
    assert psnr(x, x) == PSNR_CAP


def test_psnr_known_value():
    gt = np.zeros((3, 8, 8))
    # mse 0.01 -> 20 dB
    assert psnr(gt + 0.1, gt) == pytest.approx(20.0, abs=1e-9)


def test_ssim_constant_images_closed_form():
    a, b = 0.2, 0.6
    c1 = 0.01**2
    expected = (2 * a * b + c1) / (a * a + b * b + c1)
    assert ssim(np.full((3, 20, 20), a), np.full((3, 20, 20), b)) == pytest.approx(expected, rel=1e-9)


def test_ssim_symmetric_and_bounded():
    r = np.random.Generator(np.random.Philox(0))
    x, y = r.random((3, 24, 24)), r.random((3, 24, 24))
    assert ssim(x, y) == pytest.approx(ssim(y, x), rel=1e-12)
    assert -1 <= ssim(x, y) < 1


def test_ssim_rejects_tiny_images():
    with pytest.raises(ValueError, match="11x11"):
        ssim(np.zeros((3, 8, 8)), np.zeros((3, 8, 8)))


def test_interpolation_error_scale():
    gt = np.zeros((3, 4, 4))
    assert interpolation_error(gt + 1 / 255, gt) == pytest.approx(1.0, abs=1e-12)


def test_shape_mismatch():
    with pytest.raises(ValueError, match="shape mismatch"):
        psnr(np.zeros((3, 4, 4)), np.zeros((3, 4, 5)))


def test_report_lines():
    report = MetricReport(("psnr", "ie"))
    gt = np.zeros((3, 4, 4))
    report.add("a", gt + 0.1, gt, gt + 0.2)
    lines = report.to_lines()
    assert lines[0] == "sample=a psnr=20.000000 ie=25.500000"
    assert lines[1].startswith("sample=MEAN")
    assert lines[2].startswith("sample=BLEND_BASELINE")


def test_ssim_matches_scikit_image_reference():
    skm = pytest.importorskip("skimage.metrics")
    r = np.random.Generator(np.random.Philox(1))
    a = r.random((3, 40, 50))
    b = np.clip(a + 0.1 * r.standard_normal(a.shape), 0, 1)
    ref = skm.structural_similarity(a, b, channel_axis=0, gaussian_weights=True, sigma=1.5,
                                    use_sample_covariance=False, data_range=1.0)
    assert ssim(a, b) == pytest.approx(ref, abs=1e-12)
