"""Slip features from single-wheel telemetry.

Four features per frame: the absolute wheel torque and the causal sliding
variance of the x-acceleration, pitch and z-acceleration channels. Slip
percentages are binned into low / moderate / high classes.
"""
from enum import IntEnum

import numpy as np

from .datasets import LabeledDataset, SensorFrame  # noqa: F401
from .errors import DatasetError, OutlierError, ParameterError

DEFAULT_NW = 50  # 0.5 s at 100 Hz
SLIP_CLASS_NAMES = ("low", "moderate", "high")
RAW_CHANNELS = ("torque", "acc_x", "pitch", "acc_z")


class SlipClass(IntEnum):
    LOW = 0
    MODERATE = 1
    HIGH = 2


def torque_feature(torque):
    return np.abs(torque)


def sliding_variance(series, n_w=DEFAULT_NW):
    """Population variance of the causal window ending at each sample.

    The first ``n_w - 1`` outputs use the shorter prefix available, so the
    result has the same length as ``series``.
    """
    if n_w < 1:
        raise ParameterError(f"window size must be >= 1, got {n_w}")
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ParameterError("series must be a non-empty 1-D sequence")
    n = x.size
    out = np.empty(n)
    head = min(n_w - 1, n)
    # each window is shifted by its first sample: same variance, and a
    # constant window becomes exactly zero instead of rounding noise
    for i in range(head):
        w = x[:i + 1] - x[0]
        out[i] = np.mean((w - w.mean()) ** 2)
    if n >= n_w:
        win = np.lib.stride_tricks.sliding_window_view(x, n_w)
        win = win - win[:, :1]
        out[n_w - 1:] = np.mean((win - win.mean(axis=1, keepdims=True)) ** 2, axis=1)
    return out


def discretize_slip(s):
    """Map a slip percentage to its class; boundaries 30 and 60 fall low."""
    if not 0.0 <= s <= 100.0:
        raise OutlierError(f"slip {s} outside [0, 100]")
    if s <= 30.0:
        return SlipClass.LOW
    if s <= 60.0:
        return SlipClass.MODERATE
    return SlipClass.HIGH


def frames_to_array(frames):
    """Stack frames into an (n, 6) array with columns t, torque, acc_x, pitch, acc_z, slip."""
    return np.array([(f.t, f.torque, f.acc_x, f.pitch, f.acc_z, f.slip) for f in frames],
                    dtype=np.float64).reshape(-1, 6)


def slip_feature_matrix(frames, mode="filtered", n_w=DEFAULT_NW):
    """Per-frame 4-vectors: raw channels, or [|T|, var ax, var pitch, var az]."""
    arr = frames_to_array(frames)
    if mode == "raw":
        return arr[:, 1:5].copy()
    if mode != "filtered":
        raise ParameterError(f"mode must be 'raw' or 'filtered', got {mode!r}")
    return np.column_stack([
        torque_feature(arr[:, 1]),
        sliding_variance(arr[:, 2], n_w),
        sliding_variance(arr[:, 3], n_w),
        sliding_variance(arr[:, 4], n_w),
    ])


def slip_labels(frames):
    return np.array([int(discretize_slip(f.slip)) for f in frames], dtype=np.int64)


def assemble_slip_dataset(frames, mode="filtered", n_w=DEFAULT_NW):
    frames = list(frames)
    if not frames:
        raise DatasetError("no sensor frames")
    if mode == "filtered" and n_w < 1:
        raise ParameterError(f"window size must be >= 1, got {n_w}")
    return LabeledDataset(slip_feature_matrix(frames, mode, n_w), slip_labels(frames),
                          SLIP_CLASS_NAMES)


def slip_windows(frames, mode="raw", length=64, stride=4, n_w=DEFAULT_NW):
    """Stack per-frame 4-vectors into (n, 4, length) windows for 1-D CNNs.

    Each window ends at a frame and takes that frame's slip class. Window
    ends start at ``length - 1`` and advance by ``stride``.
    """
    frames = list(frames)
    if len(frames) < length:
        raise DatasetError(f"need at least {length} frames for one window, got {len(frames)}")
    if stride < 1:
        raise ParameterError("stride must be >= 1")
    feats = slip_feature_matrix(frames, mode, n_w)
    labels = slip_labels(frames)
    ends = np.arange(length - 1, len(frames), stride)
    idx = ends[:, None] - np.arange(length - 1, -1, -1)[None, :]
    x = feats[idx].transpose(0, 2, 1)
    return LabeledDataset(x, labels[ends], SLIP_CLASS_NAMES)
