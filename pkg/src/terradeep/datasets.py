"""Sensor-log and image-corpus ingestion, synthetic stand-in corpora and
hold-out split planning.

File formats
------------
Sensor CSV: header ``t,torque,acc_x,pitch,acc_z,slip``, comma separated
decimal floats, UTF-8, LF or CRLF line endings, no quoting.

Image corpus: ``<root>/<class_name>/*.pgm``, binary PGM (P5), maxval <= 255.
"""
from dataclasses import dataclass
import math
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .core import Stream, seeded_rng
from .errors import DatasetError, FormatError, ParameterError
from .image_features import resize_bilinear

CSV_COLUMNS = ("t", "torque", "acc_x", "pitch", "acc_z", "slip")
TERRAIN_CLASSES = ("flat", "rocks", "boulders", "gravel", "sand", "grass", "pavement", "asphalt")
SAMPLE_RATE_HZ = 100.0


@dataclass(frozen=True, slots=True)
class SensorFrame:
    """One telemetry sample: time [s], torque [N m], x/z acceleration [m/s^2],
    pitch channel, and ground-truth slip [%]."""

    t: float
    torque: float
    acc_x: float
    pitch: float
    acc_z: float
    slip: float


class SensorLog(list):
    """List of frames that also remembers how many outlier rows were dropped."""

    def __init__(self, frames=(), dropped_count=0):
        super().__init__(frames)
        self.dropped_count = dropped_count


@dataclass
class LabeledDataset:
    """Features (n x d, or n x C x ...) with integer labels and class names."""

    features: np.ndarray
    labels: np.ndarray
    class_names: tuple

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.class_names = tuple(self.class_names)
        if len(self.labels) == 0 or len(self.features) != len(self.labels):
            raise DatasetError(
                f"dataset needs n >= 1 rows with one label each "
                f"(features {self.features.shape}, labels {self.labels.shape})")
        if not self.class_names:
            raise DatasetError("class_names is empty")
        if self.labels.min() < 0 or self.labels.max() >= len(self.class_names):
            raise DatasetError(f"labels must lie in [0, {len(self.class_names)})")

    def __len__(self):
        return len(self.labels)

    @property
    def n_classes(self):
        return len(self.class_names)

    def subset(self, idx):
        return LabeledDataset(self.features[idx], self.labels[idx], self.class_names)


# ------------------------------------------------------------------ sensor CSV

def load_sensor_csv(path):
    """Parse a sensor log; rows with slip outside [0, 100] are dropped and counted."""
    path = Path(path)
    try:
        text = path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"not valid UTF-8 ({exc.reason})", path) from None
    lines = text.split("\n")
    if lines[-1].strip():
        # an unterminated last record is what a truncated file looks like
        raise FormatError("last line lacks a line terminator (truncated file?)", path,
                          len(lines))
    header = [h.strip() for h in lines[0].rstrip("\r").split(",")]
    for col in CSV_COLUMNS:
        if col not in header:
            raise FormatError(f"missing column {col!r}", path, 1)
    pos = [header.index(c) for c in CSV_COLUMNS]
    frames, dropped, last_t = [], 0, -math.inf
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.rstrip("\r")
        if not line.strip():
            if any(r.strip() for r in lines[lineno:]):
                raise FormatError("blank line inside data", path, lineno)
            break
        cells = line.split(",")
        if len(cells) != len(header):
            raise FormatError(f"expected {len(header)} fields, found {len(cells)}", path, lineno)
        try:
            vals = [float(cells[p]) for p in pos]
        except ValueError:
            raise FormatError("non-numeric cell", path, lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise FormatError("non-finite value", path, lineno)
        if vals[0] <= last_t:
            raise FormatError(f"time {vals[0]} does not increase", path, lineno)
        last_t = vals[0]
        if not 0.0 <= vals[5] <= 100.0:
            dropped += 1
            continue
        frames.append(SensorFrame(*vals))
    return SensorLog(frames, dropped)


def write_sensor_csv(frames, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for f in frames:
            fh.write(",".join(repr(float(v)) for v in
                              (f.t, f.torque, f.acc_x, f.pitch, f.acc_z, f.slip)) + "\n")


# ------------------------------------------------------------------ PGM images

def _pgm_tokens(data, path):
    tokens, i, n = [], 2, len(data)
    while len(tokens) < 3:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not data[i:i + 1].isspace() and data[i:i + 1] != b"#":
            i += 1
        if start == i:
            raise FormatError("truncated PGM header", path)
        tok = data[start:i]
        if not tok.isdigit():
            raise FormatError(f"bad PGM header token {tok!r}", path)
        tokens.append(int(tok))
    if i >= n or not data[i:i + 1].isspace():
        raise FormatError("truncated PGM header", path)
    return tokens, i + 1


def read_pgm(path):
    """Read an 8-bit binary PGM; returns intensities scaled to [0, 1]."""
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise FormatError("not a binary PGM (P5) file", path)
    (width, height, maxval), offset = _pgm_tokens(data, path)
    if width < 1 or height < 1:
        raise FormatError(f"invalid size {width}x{height}", path)
    if not 1 <= maxval <= 255:
        raise FormatError(f"maxval {maxval} unsupported (only 8-bit, maxval <= 255)", path)
    raster = data[offset:]
    if len(raster) != width * height:
        raise FormatError(f"expected {width * height} pixel bytes, found {len(raster)}", path)
    img = np.frombuffer(raster, dtype=np.uint8).reshape(height, width).astype(np.float64)
    if img.max() > maxval:
        raise FormatError("pixel value exceeds maxval", path)
    return img / maxval


def write_pgm(img, path):
    """Write a [0, 1] image as an 8-bit P5 file."""
    img = np.asarray(img, dtype=np.float64)
    q = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        fh.write(q.tobytes())


def load_image_dir(root, size=128):
    """One class per sorted subdirectory; every image resized to ``size`` x ``size``."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"{root} is not a directory")
    classes = sorted(d.name for d in root.iterdir() if d.is_dir())
    if not classes:
        raise DatasetError(f"{root} has no class subdirectories")
    images, labels = [], []
    for k, name in enumerate(classes):
        files = sorted(p for p in (root / name).iterdir() if p.suffix.lower() == ".pgm")
        if not files:
            raise DatasetError(f"class directory {root / name} holds no .pgm files")
        for f in files:
            images.append(resize_bilinear(read_pgm(f), size, size))
            labels.append(k)
    return LabeledDataset(np.stack(images)[:, None], labels, classes)


def export_image_dir(dataset, root):
    root = Path(root)
    for k, name in enumerate(dataset.class_names):
        (root / name).mkdir(parents=True, exist_ok=True)
    counters = [0] * dataset.n_classes
    for img, k in zip(dataset.features, dataset.labels):
        name = dataset.class_names[k]
        write_pgm(img[0], root / name / f"{name}_{counters[k]:04d}.pgm")
        counters[k] += 1


# ------------------------------------------------------------------ synthetic slip

# (slip range %, IMU noise variance, mean torque N m) per slip class
SLIP_REGIMES = (((5.0, 25.0), 0.01, 2.0),
                ((35.0, 55.0), 0.25, 5.0),
                ((65.0, 95.0), 1.0, 9.0))
TORQUE_NOISE = 3.5        # N m
DRIFT_AMPLITUDE = 1.0     # slow ripple-induced offset on every IMU channel
DRIFT_SMOOTH = 25         # frames, Gaussian smoothing of the drift process
SEGMENT_FRAMES = 500


def synth_slip(n_per_class=1000, n_w=50, seed=0, *, torque_noise=TORQUE_NOISE,
               drift_amplitude=DRIFT_AMPLITUDE, drift_smooth=DRIFT_SMOOTH,
               segment_frames=SEGMENT_FRAMES):
    """Synthetic 100 Hz single-wheel log with three slip regimes.

    Each regime contributes ``n_per_class`` frames, cut into segments of
    ``segment_frames`` that are concatenated in a seeded random order.
    Within a regime the IMU channels carry zero-mean Gaussian noise of the
    regime's variance and torque is the regime mean plus Gaussian noise.
    Every IMU channel also carries a slow random drift (white noise smoothed
    by a Gaussian of ``drift_smooth`` frames, scaled to standard deviation
    ``drift_amplitude``) that is independent of the regime, so a single raw
    sample says little about slip while windowed variance still does.
    """
    if n_per_class < n_w:
        raise ParameterError(f"n_per_class ({n_per_class}) must be >= window size ({n_w})")
    rng = seeded_rng(seed, Stream.DATA)
    segments = []
    for k in range(3):
        for start in range(0, n_per_class, segment_frames):
            segments.append((k, min(segment_frames, n_per_class - start)))
    order = rng.permutation(len(segments))
    n = 3 * n_per_class
    t = np.arange(n) / SAMPLE_RATE_HZ
    regime = np.concatenate([np.full(segments[i][1], segments[i][0]) for i in order])
    lo = np.array([SLIP_REGIMES[k][0][0] for k in range(3)])[regime]
    hi = np.array([SLIP_REGIMES[k][0][1] for k in range(3)])[regime]
    sd = np.sqrt(np.array([r[1] for r in SLIP_REGIMES]))[regime]
    mu = np.array([r[2] for r in SLIP_REGIMES])[regime]
    slip = rng.uniform(lo, hi)
    torque = mu + torque_noise * rng.standard_normal(n)
    imu = []
    for _ in range(3):
        drift = gaussian_filter(rng.standard_normal(n), drift_smooth, mode="wrap")
        drift *= drift_amplitude / (drift.std() + 1e-12)
        imu.append(drift + sd * rng.standard_normal(n))
    return SensorLog(SensorFrame(*row) for row in
                     zip(t.tolist(), torque.tolist(), imu[0].tolist(), imu[1].tolist(),
                         imu[2].tolist(), slip.tolist()))


# ------------------------------------------------------------------ synthetic terrain

def _ellipses(img, rng, count, r_range, shade, rough=0.0):
    h, w = img.shape
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(count):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        ry = rng.uniform(*r_range)
        rx = ry * rng.uniform(0.6, 1.4)
        ang = rng.uniform(0, np.pi)
        dy, dx = yy - cy, xx - cx
        u = (dx * np.cos(ang) + dy * np.sin(ang)) / rx
        v = (-dx * np.sin(ang) + dy * np.cos(ang)) / ry
        inside = u * u + v * v <= 1.0
        if not inside.any():
            continue
        # shadow on the lower right, lit from the upper left
        shadow = ((u - 0.35) ** 2 + (v - 0.35) ** 2 <= 1.0) & ~inside
        img[shadow] *= 0.6
        base = rng.uniform(*shade)
        lit = base + 0.15 * (-(dx + dy) / (rx + ry))[inside]
        img[inside] = lit + rough * rng.standard_normal(lit.size)


def _strokes(img, rng, count, length, angle_sd):
    h, w = img.shape
    for _ in range(count):
        y0, x0 = rng.uniform(0, h), rng.uniform(0, w)
        ang = np.pi / 2 + rng.normal(0.0, angle_sd)
        ln = rng.uniform(*length)
        val = rng.uniform(0.55, 0.95)
        s = np.linspace(0.0, ln, int(2 * ln) + 2)
        ys = np.clip(np.rint(y0 - s * np.sin(ang)), 0, h - 1).astype(int)
        xs = np.clip(np.rint(x0 + s * np.cos(ang)), 0, w - 1).astype(int)
        img[ys, xs] = val


def _texture(name, size, rng):
    s = size / 64.0
    noise = rng.standard_normal((size, size))
    if name == "flat":
        return 0.55 + 0.03 * gaussian_filter(noise, 1.0) / 0.28
    if name == "rocks":
        img = 0.45 + 0.03 * noise
        _ellipses(img, rng, int(55 * s * s), (1.5 * s, 4.0 * s), (0.55, 0.85), 0.02)
        return img
    if name == "boulders":
        img = 0.45 + 0.03 * noise
        _ellipses(img, rng, int(rng.integers(3, 7)), (9.0 * s, 18.0 * s), (0.3, 0.85), 0.02)
        return img
    if name == "gravel":
        return 0.5 + 0.18 * noise
    if name == "sand":
        low = gaussian_filter(noise, 5.0 * s)
        return 0.6 + 0.12 * low / (low.std() + 1e-12) + 0.01 * noise
    if name == "grass":
        img = 0.3 + 0.05 * noise
        _strokes(img, rng, int(140 * s * s), (4.0 * s, 10.0 * s), 0.3)
        return img
    if name == "pavement":
        bh, bw = 12.0 * s, 24.0 * s
        py, px = rng.uniform(0, bh), rng.uniform(0, bw)
        yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
        row = np.floor((yy + py) / bh)
        xo = xx + px + (row % 2) * bw / 2.0
        col = np.floor(xo / bw)
        mortar = (((yy + py) % bh) < 1.6 * s) | ((xo % bw) < 1.6 * s)
        tone = 0.6 + 0.06 * np.sin(row * 12.9898 + col * 78.233 + rng.uniform(0, 6.3))
        img = tone + 0.03 * noise
        img[mortar] = 0.25 + 0.03 * noise[mortar]
        return img
    if name == "asphalt":
        mid = gaussian_filter(noise, 1.5 * s)
        img = 0.4 + 0.08 * mid / (mid.std() + 1e-12)
        flecks = rng.random((size, size)) < 0.006
        img[flecks] = 0.9
        return img
    raise ParameterError(f"unknown terrain class {name!r}; choose from {TERRAIN_CLASSES}")


def synth_terrain(classes=TERRAIN_CLASSES, images_per_class=100, size=128, seed=0):
    """Procedural grayscale terrain textures in [0, 1], quantized to 8 bits.

    Every image receives a random brightness offset (+-0.1) and contrast
    factor (0.8 to 1.2) about mid-gray.
    """
    classes = tuple(classes)
    for name in classes:
        if name not in TERRAIN_CLASSES:
            raise ParameterError(f"unknown terrain class {name!r}; choose from {TERRAIN_CLASSES}")
    if size not in (64, 128):
        raise ParameterError(f"size must be 64 or 128, got {size}")
    if images_per_class < 1:
        raise ParameterError("images_per_class must be >= 1")
    rng = seeded_rng(seed, Stream.DATA)
    images, labels = [], []
    for k, name in enumerate(classes):
        for _ in range(images_per_class):
            img = _texture(name, size, rng)
            contrast = rng.uniform(0.8, 1.2)
            offset = rng.uniform(-0.1, 0.1)
            img = (img - 0.5) * contrast + 0.5 + offset
            images.append(np.rint(np.clip(img, 0.0, 1.0) * 255.0) / 255.0)
            labels.append(k)
    return LabeledDataset(np.stack(images)[:, None], labels, classes)


# ------------------------------------------------------------------ splits

def holdout_split(n, train_ratio, seed):
    """Seeded permutation; the first floor(ratio * n) indices train."""
    if n < 2 or not 0.0 < train_ratio < 1.0:
        raise ParameterError(f"need n >= 2 and 0 < ratio < 1 (n={n}, ratio={train_ratio})")
    n_train = int(math.floor(train_ratio * n))
    if n_train < 1 or n_train >= n:
        raise ParameterError(f"ratio {train_ratio} leaves an empty side for n={n}")
    perm = seeded_rng(seed, Stream.SPLIT).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


@dataclass(frozen=True)
class SplitPlan:
    runs: tuple  # of (train_ratio, seed)

    def __post_init__(self):
        object.__setattr__(self, "runs", tuple((float(r), int(s)) for r, s in self.runs))
        if not self.runs:
            raise ParameterError("split plan has no runs")
        for r, _ in self.runs:
            if not 0.0 < r < 1.0:
                raise ParameterError(f"train ratio {r} outside (0, 1)")

    def __len__(self):
        return len(self.runs)

    @classmethod
    def default(cls, base_seed=0, n_runs=10, ratios=(0.7, 0.6, 0.5)):
        """Consecutive blocks of ratios; ten runs give 4 x 0.7, 3 x 0.6, 3 x 0.5."""
        blocks = np.array_split(np.arange(n_runs), len(ratios))
        per_run = [ratios[b] for b, idx in enumerate(blocks) for _ in idx]
        return cls(tuple((r, base_seed + i) for i, r in enumerate(per_run)))

    def to_dict(self):
        return {"runs": [{"train_ratio": r, "seed": s} for r, s in self.runs]}

