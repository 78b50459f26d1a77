"""Grayscale conversion, bilinear resizing and the HOG global descriptor."""
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError

IMAGE_SIZE = 128


@dataclass(frozen=True)
class HogConfig:
    cell_size: int = 8
    bins: int = 9
    block: int = 2
    block_stride: int = 1
    norm_epsilon: float = 1e-6

    def __post_init__(self):
        if self.cell_size < 2 or self.bins < 2 or self.block < 1 or self.block_stride < 1:
            raise ParameterError(f"invalid HOG configuration {self}")

    def layout(self, height, width):
        """Return (cells_y, cells_x, blocks_y, blocks_x) for an image size."""
        cy, cx = height // self.cell_size, width // self.cell_size
        by = (cy - self.block) // self.block_stride + 1 if cy >= self.block else 0
        bx = (cx - self.block) // self.block_stride + 1 if cx >= self.block else 0
        return cy, cx, by, bx

    def descriptor_length(self, height, width):
        _, _, by, bx = self.layout(height, width)
        return by * bx * self.block * self.block * self.bins


def to_grayscale(r, g, b):
    """ITU-R 601 luma, clamped to [0, 255]."""
    r, g, b = (np.asarray(c, dtype=np.float64) for c in (r, g, b))
    if not (r.shape == g.shape == b.shape):
        raise ShapeError(f"channel shapes differ: {r.shape}, {g.shape}, {b.shape}")
    return np.clip(0.299 * r + 0.587 * g + 0.114 * b, 0.0, 255.0)


def _sample_coords(n_in, n_out):
    if n_out == 1:
        return np.array([(n_in - 1) / 2.0])
    return np.arange(n_out) * ((n_in - 1) / (n_out - 1))


def resize_bilinear(img, out_h, out_w):
    """Bilinear resize with corner-aligned sample grids."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ShapeError(f"expected a non-empty 2-D image, got shape {img.shape}")
    if out_h < 1 or out_w < 1:
        raise ParameterError(f"target size must be positive, got {out_h}x{out_w}")
    h, w = img.shape
    if (h, w) == (out_h, out_w):
        return img.copy()
    ys = _sample_coords(h, out_h)
    xs = _sample_coords(w, out_w)
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def gradients(img):
    """Central differences [-1, 0, 1] with replicated borders."""
    p = np.pad(np.asarray(img, dtype=np.float64), 1, mode="edge")
    gx = p[1:-1, 2:] - p[1:-1, :-2]
    gy = p[2:, 1:-1] - p[:-2, 1:-1]
    return gx, gy


def cell_histograms(img, cfg=HogConfig()):
    """Per-cell orientation histograms, shape (cells_y, cells_x, bins).

    Orientations are unsigned in [0, 180). Bin ``k`` is centred on
    ``k * 180 / bins`` degrees and every pixel splits its gradient magnitude
    linearly between the two nearest bin centres.
    """
    img = np.asarray(img, dtype=np.float64)
    cy, cx, _, _ = cfg.layout(*img.shape)
    if cy < 1 or cx < 1:
        raise ShapeError(f"image {img.shape} smaller than one {cfg.cell_size}px cell")
    gx, gy = gradients(img)
    cs = cfg.cell_size
    gx = gx[:cy * cs, :cx * cs]
    gy = gy[:cy * cs, :cx * cs]
    mag = np.hypot(gx, gy)
    theta = np.degrees(np.arctan2(gy, gx)) % 180.0
    pos = theta / (180.0 / cfg.bins)
    lo = np.floor(pos).astype(int)
    frac = pos - lo
    lo %= cfg.bins
    hi = (lo + 1) % cfg.bins
    cell_id = (np.arange(cy * cs)[:, None] // cs) * cx + np.arange(cx * cs)[None, :] // cs
    flat = cell_id * cfg.bins
    hist = np.zeros(cy * cx * cfg.bins)
    np.add.at(hist, (flat + lo).ravel(), (mag * (1 - frac)).ravel())
    np.add.at(hist, (flat + hi).ravel(), (mag * frac).ravel())
    return hist.reshape(cy, cx, cfg.bins)


def hog_descriptor(img, cfg=HogConfig()):
    """Concatenated L2-normalised block histograms of an image."""
    hist = cell_histograms(img, cfg)
    cy, cx, by, bx = cfg.layout(*np.shape(img))
    b, st = cfg.block, cfg.block_stride
    if by < 1 or bx < 1:
        raise ShapeError(f"image {np.shape(img)} smaller than one {b}x{b}-cell block")
    blocks = np.empty((by, bx, b * b * cfg.bins))
    for i in range(by):
        for j in range(bx):
            v = hist[i * st:i * st + b, j * st:j * st + b, :].ravel()
            blocks[i, j] = v / (np.linalg.norm(v) + cfg.norm_epsilon)
    return blocks.ravel()


def hog_batch(images, cfg=HogConfig()):
    """HOG descriptors for an (n, h, w) or (n, 1, h, w) stack in [0, 1]."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 4:
        images = images[:, 0]
    return np.stack([hog_descriptor(im * 255.0, cfg) for im in images])
