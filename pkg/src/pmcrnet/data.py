"""Image codecs, Vimeo90K-style triplet access, augmentation and a synthetic fixture."""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
FRAME_NAMES = ("im1.png", "im2.png", "im3.png")


class UnsupportedImageError(OSError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream; identical draws on every platform for a seed."""
    return np.random.Generator(np.random.Philox(seed))


def _check_png_depth(path: Path) -> None:
    with open(path, "rb") as fh:
        head = fh.read(29)
    if not head.startswith(PNG_SIGNATURE):
        return
    if len(head) < 29 or head[12:16] != b"IHDR":
        raise UnsupportedImageError(f"{path}: malformed PNG header")
    depth, color_type = struct.unpack(">BB", head[24:26])
    if depth != 8 and not (color_type == 3 and depth < 8):
        raise UnsupportedImageError(f"{path}: unsupported format ({depth}-bit PNG; only 8-bit is supported)")


def load_image(path) -> np.ndarray:
    """Read an 8-bit PNG/PPM as a (3, h, w) float32 array in [0, 1]."""
    path = Path(path)
    try:
        _check_png_depth(path)
        with Image.open(path) as im:
            if im.format not in ("PNG", "PPM"):
                raise UnsupportedImageError(f"{path}: unsupported format {im.format}")
            if im.mode not in ("RGB", "RGBA", "L", "P", "LA"):
                raise UnsupportedImageError(f"{path}: unsupported format (mode {im.mode})")
            rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except UnsupportedImageError:
        raise
    except (OSError, SyntaxError, ValueError) as exc:
        raise OSError(f"cannot read image {path}: {exc}") from exc
    return np.ascontiguousarray(rgb.transpose(2, 0, 1), dtype=np.float32) / np.float32(255.0)


def to_uint8(image: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and round half up to 8 bits; (3, h, w) -> (h, w, 3)."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 4:
        if arr.shape[0] != 1:
            raise ValueError(f"save_image expects a single image, got batch of {arr.shape[0]}")
        arr = arr[0]
    q = np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    return q.transpose(1, 2, 0)


def save_image(image, path) -> None:
    path = Path(path)
    data = getattr(image, "data", image)
    fmt = "PPM" if path.suffix.lower() in (".ppm", ".pnm") else "PNG"
    try:
        Image.fromarray(to_uint8(data)).save(path, format=fmt)
    except OSError as exc:
        raise OSError(f"cannot write image {path}: {exc}") from exc


@dataclass(frozen=True)
class TripletRef:
    id: str
    paths: tuple[Path, Path, Path]


@dataclass
class Triplet:
    """frame0, ground-truth middle frame, frame1; each (3, h, w) in [0, 1]."""

    frame0: np.ndarray
    frame_gt: np.ndarray
    frame1: np.ndarray
    id: str = ""

    def __post_init__(self):
        if not (self.frame0.shape == self.frame_gt.shape == self.frame1.shape):
            raise ValueError(f"triplet {self.id}: frames differ in size")


def _sequence_root(root: Path) -> Path:
    return root / "sequences" if (root / "sequences").is_dir() else root


def scan_dataset(root, list_file) -> list[TripletRef]:
    """Triplet references in list-file order; every listed sequence must be complete."""
    root = Path(root)
    list_path = Path(list_file)
    if not list_path.is_absolute() and not list_path.exists():
        list_path = root / list_path
    try:
        entries = [line.strip() for line in list_path.read_text().splitlines()]
    except OSError as exc:
        raise OSError(f"cannot read list file {list_path}: {exc.strerror or exc}") from exc
    seq_root = _sequence_root(root)
    refs = []
    for entry in entries:
        if not entry:
            continue
        folder = seq_root / entry
        paths = tuple(folder / name for name in FRAME_NAMES)
        missing = [p.name for p in paths if not p.is_file()]
        if missing:
            raise FileNotFoundError(f"incomplete triplet {entry}: missing {', '.join(missing)}")
        refs.append(TripletRef(entry, paths))
    return refs


def load_triplet(ref: TripletRef) -> Triplet:
    frame0, gt, frame1 = (load_image(p) for p in ref.paths)
    return Triplet(frame0, gt, frame1, ref.id)


@dataclass(frozen=True)
class AugmentConfig:
    crop: int = 256
    flip: bool = True
    rotate: bool = True
    reverse: bool = True


def augment(t: Triplet, rng: np.random.Generator, cfg: AugmentConfig | None = None) -> Triplet:
    """Shared random crop, then flips, 90-degree rotation and temporal order swap.

    Draw order per call: crop y, crop x, h-flip, v-flip, rotation k, reverse.
    Every draw is taken even when its transform is disabled, so toggling one
    option does not shift the stream for the others.
    """
    cfg = cfg or AugmentConfig()
    _, h, w = t.frame0.shape
    if h < cfg.crop or w < cfg.crop:
        raise ValueError(f"triplet {t.id}: frames {h}x{w} smaller than crop {cfg.crop}")
    y = int(rng.integers(0, h - cfg.crop + 1))
    x = int(rng.integers(0, w - cfg.crop + 1))
    hflip, vflip = bool(rng.integers(0, 2)), bool(rng.integers(0, 2))
    k = int(rng.integers(0, 4))
    reverse = bool(rng.integers(0, 2))

    def geom(img: np.ndarray) -> np.ndarray:
        out = img[:, y : y + cfg.crop, x : x + cfg.crop]
        if cfg.flip and hflip:
            out = out[:, :, ::-1]
        if cfg.flip and vflip:
            out = out[:, ::-1, :]
        if cfg.rotate and k:
            out = np.rot90(out, k, axes=(1, 2))
        return np.ascontiguousarray(out)

    f0, gt, f1 = geom(t.frame0), geom(t.frame_gt), geom(t.frame1)
    if cfg.reverse and reverse:
        f0, f1 = f1, f0
    return replace(t, frame0=f0, frame_gt=gt, frame1=f1)


def center_crop(t: Triplet, size: int) -> Triplet:
    _, h, w = t.frame0.shape
    y, x = (h - size) // 2, (w - size) // 2
    crop = lambda img: np.ascontiguousarray(img[:, y : y + size, x : x + size])  # noqa: E731
    return replace(t, frame0=crop(t.frame0), frame_gt=crop(t.frame_gt), frame1=crop(t.frame1))


def stack(triplets: list[Triplet]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batch (n, 3, h, w) arrays for frame0, ground truth and frame1."""
    return tuple(np.stack([getattr(t, f) for t in triplets]) for f in ("frame0", "frame_gt", "frame1"))


# -- synthetic fixture -------------------------------------------------------


def _fractal_texture(rng: np.random.Generator, h: int, w: int, beta: float = 1.0) -> np.ndarray:
    """Three-channel 1/f^beta noise scaled to [0.1, 0.9]."""
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.rfftfreq(w)[None, :]
    radius = np.sqrt(fx**2 + fy**2)
    radius[0, 0] = 1.0
    amp = radius ** (-beta)
    amp[0, 0] = 0.0
    out = np.empty((3, h, w))
    for c in range(3):
        phase = rng.uniform(0, 2 * np.pi, size=amp.shape)
        field = np.fft.irfft2(amp * np.exp(1j * phase), s=(h, w))
        lo, hi = field.min(), field.max()
        out[c] = 0.1 + 0.8 * (field - lo) / (hi - lo)
    return out


def synthetic_triplet(rng: np.random.Generator, height: int = 256, width: int = 448,
                      max_shift: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Textured background and a textured rectangle, each translating linearly.

    Frame k in (0, gt, 1) is the scene displaced by (k-1) times the per-object
    half-motion, so the middle frame is an exact temporal midpoint.
    """
    margin = 2 * max_shift + 2
    canvas = _fractal_texture(rng, height + 2 * margin, width + 2 * margin)
    sprite_h = int(rng.integers(height // 5, height // 3))
    sprite_w = int(rng.integers(width // 6, width // 3))
    sprite = _fractal_texture(rng, sprite_h, sprite_w, beta=0.8)
    sy = int(rng.integers(margin, height - sprite_h - margin))
    sx = int(rng.integers(margin, width - sprite_w - margin))
    # every object moves: each component is +-1..max_shift pixels per half-interval
    bg = rng.integers(1, max_shift + 1, size=2) * rng.choice([-1, 1], size=2)
    fg = rng.integers(1, max_shift + 1, size=2) * rng.choice([-1, 1], size=2)
    frames = []
    for k in (-1, 0, 1):
        dy, dx = k * bg
        frame = canvas[:, margin + dy : margin + dy + height, margin + dx : margin + dx + width].copy()
        oy, ox = sy + k * fg[0], sx + k * fg[1]
        frame[:, oy : oy + sprite_h, ox : ox + sprite_w] = sprite
        frames.append(np.floor(frame * 255 + 0.5) / 255)
    return frames[0], frames[1], frames[2]


def make_synthetic_dataset(root, sequences: int = 8, height: int = 256, width: int = 448, seed: int = 0,
                           max_shift: int = 1) -> Path:
    """Write a Vimeo90K-layout triplet set with ``tri_trainlist.txt`` / ``tri_testlist.txt``."""
    root = Path(root)
    rng = make_rng(seed)
    names = []
    for i in range(sequences):
        name = f"{i // 4 + 1:05d}/{i % 4 + 1:04d}"
        folder = root / "sequences" / name
        folder.mkdir(parents=True, exist_ok=True)
        for fname, frame in zip(FRAME_NAMES, synthetic_triplet(rng, height, width, max_shift)):
            save_image(frame, folder / fname)
        names.append(name)
    (root / "tri_trainlist.txt").write_text("\n".join(names) + "\n")
    (root / "tri_testlist.txt").write_text("\n".join(names) + "\n")
    return root
