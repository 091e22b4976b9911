"""Deterministic synthetic 28x28 digit images.

For environments without the real MNIST files this module renders a
look-alike dataset: ten fixed stroke glyphs, per-sample affine jitter
(shift / rotation / scale / shear), stroke-width and intensity variation,
and additive noise. Output goes through the exact same IDX container as
real data, so nothing downstream knows the difference.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataio import STANDARD_FILES, LabeledImageSet, write_idx_pair

SIDE = 28


def _arc(cx: float, cy: float, rx: float, ry: float, a0: float, a1: float, n: int = 12):
    """Sampled elliptical arc as a polyline; angles in degrees, y axis down."""
    t = np.radians(np.linspace(a0, a1, n))
    return np.stack([cx + rx * np.cos(t), cy - ry * np.sin(t)], axis=1)


def _line(x0, y0, x1, y1):
    return np.array([[x0, y0], [x1, y1]])


# Glyphs in a unit box (x right, y down). Loose shapes are fine: class
# separability matters, not typography.
_GLYPHS: dict[int, list[np.ndarray]] = {
    0: [_arc(0.50, 0.50, 0.26, 0.36, 0, 360, 20)],
    1: [_line(0.50, 0.12, 0.50, 0.88), _line(0.36, 0.30, 0.50, 0.12)],
    2: [
        _arc(0.50, 0.32, 0.22, 0.20, 160, -20, 10),
        _line(0.70, 0.39, 0.30, 0.88),
        _line(0.30, 0.88, 0.72, 0.88),
    ],
    3: [
        _arc(0.47, 0.32, 0.20, 0.19, 150, -80, 10),
        _arc(0.47, 0.67, 0.23, 0.21, 80, -150, 10),
    ],
    4: [
        _line(0.64, 0.12, 0.28, 0.60),
        _line(0.28, 0.60, 0.78, 0.60),
        _line(0.64, 0.12, 0.64, 0.88),
    ],
    5: [
        _line(0.70, 0.13, 0.34, 0.13),
        _line(0.34, 0.13, 0.32, 0.45),
        _arc(0.47, 0.65, 0.22, 0.22, 115, -125, 10),
    ],
    6: [
        _arc(0.52, 0.40, 0.26, 0.30, 60, 165, 8),
        _arc(0.48, 0.66, 0.20, 0.20, 0, 360, 14),
    ],
    7: [_line(0.28, 0.14, 0.74, 0.14), _line(0.74, 0.14, 0.42, 0.88)],
    8: [
        _arc(0.50, 0.31, 0.17, 0.17, 0, 360, 14),
        _arc(0.50, 0.67, 0.21, 0.21, 0, 360, 14),
    ],
    9: [
        _arc(0.50, 0.34, 0.20, 0.20, 0, 360, 14),
        _line(0.70, 0.36, 0.58, 0.88),
    ],
}


def _segments(glyph: list[np.ndarray]) -> np.ndarray:
    """Polylines -> [S,2,2] segment endpoints."""
    segs = []
    for line in glyph:
        segs.append(np.stack([line[:-1], line[1:]], axis=1))
    return np.concatenate(segs, axis=0)

_GLYPH_SEGMENTS = {d: _segments(g) for d, g in _GLYPHS.items()}

# Pixel centers of the unit canvas, precomputed once.
_coords = (np.arange(SIDE) + 0.5) / SIDE
_PIXELS = np.stack(np.meshgrid(_coords, _coords, indexing="xy"), axis=-1).reshape(-1, 2)


def render_digit(digit: int, rng: np.random.Generator) -> np.ndarray:
    """One jittered 28x28 rendering of the digit, values in [0,1]."""
    segs = _GLYPH_SEGMENTS[digit].reshape(-1, 2)

    theta = rng.uniform(-0.14, 0.14)  # ~8 degrees
    sx, sy = rng.uniform(0.90, 1.10, size=2)
    shear = rng.uniform(-0.08, 0.08)
    tx, ty = rng.uniform(-0.07, 0.07, size=2)  # ~2 px
    c, s = np.cos(theta), np.sin(theta)
    mat = np.array([[c, -s], [s, c]]) @ np.array([[sx, shear * sx], [0.0, sy]])
    pts = (segs - 0.5) @ mat.T + 0.5 + np.array([tx, ty])
    a = pts.reshape(-1, 2, 2)[:, 0, :]
    b = pts.reshape(-1, 2, 2)[:, 1, :]

    # Distance from every pixel to the nearest stroke segment.
    ab = b - a  # [S,2]
    denom = np.maximum((ab * ab).sum(axis=1), 1e-12)
    ap = _PIXELS[:, None, :] - a[None, :, :]  # [P,S,2]
    t = np.clip((ap * ab[None, :, :]).sum(axis=-1) / denom[None, :], 0.0, 1.0)
    nearest = a[None, :, :] + t[..., None] * ab[None, :, :]
    d = np.sqrt(((_PIXELS[:, None, :] - nearest) ** 2).sum(axis=-1)).min(axis=1)

    radius = rng.uniform(0.030, 0.055)  # stroke half-width in canvas units
    softness = 0.018
    amp = rng.uniform(0.80, 1.00)
    img = amp / (1.0 + np.exp((d - radius) / softness))
    img += rng.normal(0.0, 0.04, img.shape)
    return np.clip(img, 0.0, 1.0).reshape(SIDE, SIDE).astype(np.float32)


def generate_digit_set(n: int, seed: int, provenance: str = "train") -> LabeledImageSet:
    """n labeled digit images with uniformly random classes."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    labels = rng.integers(0, 10, size=n)
    images = np.empty((n, 1, SIDE, SIDE), dtype=np.float32)
    for i, digit in enumerate(labels):
        images[i, 0] = render_digit(int(digit), rng)
    return LabeledImageSet(images, labels, provenance)


def write_standard_files(out_dir: str | Path, n_train: int, n_test: int, seed: int) -> dict[str, Path]:
    """Write the four standard-named IDX files with synthetic digits."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train = generate_digit_set(n_train, seed, "train")
    test = generate_digit_set(n_test, seed + 1, "test")
    paths = {k: out / v for k, v in STANDARD_FILES.items()}
    write_idx_pair(train, paths["train_images"], paths["train_labels"])
    write_idx_pair(test, paths["test_images"], paths["test_labels"])
    return paths
