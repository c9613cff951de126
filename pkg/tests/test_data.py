import numpy as np
import pytest
from PIL import Image

from pmcrnet.data import (AugmentConfig, Triplet, UnsupportedImageError, augment, load_image, make_rng,
                          make_synthetic_dataset, save_image, scan_dataset, to_uint8)


def test_png_round_trip_quantisation(tmp_path):
    img = make_rng(0).random((3, 7, 9)).astype(np.float32)
    save_image(img, tmp_path / "a.png")
    back = load_image(tmp_path / "a.png")
    assert back.shape == (3, 7, 9) and back.dtype == np.float32
    assert np.abs(back - img).max() <= 1 / 510 + 1e-7


def test_ppm_round_trip(tmp_path):
    img = make_rng(1).random((3, 4, 5))
    save_image(img, tmp_path / "a.ppm")
    np.testing.assert_array_equal(load_image(tmp_path / "a.ppm"), to_uint8(img).transpose(2, 0, 1) / np.float32(255))


def test_to_uint8_rounds_half_up_and_clamps():
    img = np.array([0.5 / 255, 1.5 / 255, -0.2, 1.7]).reshape(1, 1, 4).repeat(3, axis=0)
    assert to_uint8(img)[0, :, 0].tolist() == [1, 2, 0, 255]


def test_sixteen_bit_png_rejected(tmp_path):
    Image.fromarray(np.zeros((4, 4), np.uint16)).save(tmp_path / "deep.png")
    with pytest.raises(UnsupportedImageError, match="16-bit"):
        load_image(tmp_path / "deep.png")


def test_missing_file_is_oserror(tmp_path):
    with pytest.raises(OSError):
        load_image(tmp_path / "nope.png")


def test_incomplete_triplet_named(tmp_path):
    root = make_synthetic_dataset(tmp_path, sequences=2, height=32, width=48)
    (root / "sequences" / "00001" / "0002" / "im3.png").unlink()
    with pytest.raises(FileNotFoundError, match=r"incomplete triplet 00001/0002: missing im3.png"):
        scan_dataset(root, "tri_trainlist.txt")


def test_scan_and_synthetic_midpoint(tmp_path):
    root = make_synthetic_dataset(tmp_path, sequences=3, height=32, width=48, seed=2)
    refs = scan_dataset(root, "tri_testlist.txt")
    assert [r.id for r in refs] == ["00001/0001", "00001/0002", "00001/0003"]


def _triplet(h=20, w=24):
    r = make_rng(3)
    return Triplet(*(r.random((3, h, w)).astype(np.float32) for _ in range(3)), id="t")


def test_augment_is_seeded_and_shared():
    t = _triplet()
    a = augment(t, make_rng(9), AugmentConfig(crop=16))
    b = augment(t, make_rng(9), AugmentConfig(crop=16))
    np.testing.assert_array_equal(a.frame_gt, b.frame_gt)
    assert a.frame0.shape == (3, 16, 16)


def test_augment_stream_independent_of_flags():
    t = _triplet()
    r1, r2 = make_rng(4), make_rng(4)
    augment(t, r1, AugmentConfig(crop=16))
    augment(t, r2, AugmentConfig(crop=16, flip=False, rotate=False, reverse=False))
    assert r1.integers(0, 1 << 30) == r2.integers(0, 1 << 30)


def test_augment_disabled_is_plain_crop():
    t = _triplet(16, 16)
    out = augment(t, make_rng(0), AugmentConfig(crop=16, flip=False, rotate=False, reverse=False))
    np.testing.assert_array_equal(out.frame0, t.frame0)


def test_augment_crop_too_large():
    with pytest.raises(ValueError, match="smaller than crop"):
        augment(_triplet(), make_rng(0), AugmentConfig(crop=32))
