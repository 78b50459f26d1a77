"""Numeric kernel: seeded randomness, matmul, valid convolutions, max pooling
and activations.

Arrays are plain ``numpy.ndarray`` objects in float64. The single-sample
functions (``conv1d_valid``, ``conv2d_valid``, ``maxpool1d``, ``maxpool2d``)
use channels-first layout. The batched ``*_nlc`` / ``*_nhwc`` helpers work on
channels-last batches and are what the network layers call.
"""
from enum import IntEnum

import numpy as np

from .errors import ShapeError, StateError

# cap on the im2col scratch buffer, in float64 elements (~64 MB)
_COLS_BUDGET = 8_000_000


class Stream(IntEnum):
    """Stream ids fanned out from a single user seed."""

    DATA = 1
    INIT = 2
    SHUFFLE = 3
    DROPOUT = 4
    SPLIT = 5


def seeded_rng(seed, stream=0):
    """Return a PCG64 generator keyed on ``(seed, stream)``.

    Equal pairs give identical sequences on every platform; distinct stream
    ids are independent children of the same seed sequence.
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.PCG64(seq))


def as_tensor(x):
    """Convert to a float64 array; reject NaN and Inf."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains non-finite values")
    return arr


def matmul(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return a @ b


# ---------------------------------------------------------------- activations

def relu(x):
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x):
    """Row-wise softmax over the last axis, shifted by the row maximum."""
    x = np.asarray(x, dtype=np.float64)
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


# --------------------------------------------------------------- convolution

def _chunk(n_rows_per_sample, n):
    return max(1, min(n, _COLS_BUDGET // max(1, n_rows_per_sample)))


def _cols1d(x, width):
    n, length, c = x.shape
    lo = length - width + 1
    cols = np.empty((n, lo, width, c))
    for d in range(width):
        cols[:, :, d, :] = x[:, d:d + lo, :]
    return cols.reshape(n * lo, width * c)


def _cols2d(x, kh, kw):
    n, h, w, c = x.shape
    ho, wo = h - kh + 1, w - kw + 1
    cols = np.empty((n, ho, wo, kh, kw, c))
    for i in range(kh):
        for j in range(kw):
            cols[:, :, :, i, j, :] = x[:, i:i + ho, j:j + wo, :]
    return cols.reshape(n * ho * wo, kh * kw * c)


def kernels_to_matrix(kernels):
    """(F, C, *k) kernel bank -> (prod(k)*C, F) matrix matching im2col rows."""
    f = kernels.shape[0]
    order = tuple(range(2, kernels.ndim)) + (1, 0)
    return np.ascontiguousarray(kernels.transpose(order)).reshape(-1, f)


def matrix_to_kernels(mat, kernel_shape):
    f, c = kernel_shape[:2]
    spatial = tuple(kernel_shape[2:])
    back = mat.reshape(spatial + (c, f))
    nsp = len(spatial)
    return back.transpose((nsp + 1, nsp) + tuple(range(nsp)))


def conv1d_nlc(x, wmat, width):
    """Batched valid cross-correlation on (N, L, C) input."""
    n, length, _ = x.shape
    lo = length - width + 1
    f = wmat.shape[1]
    out = np.empty((n, lo, f))
    step = _chunk(lo * wmat.shape[0], n)
    for s in range(0, n, step):
        cols = _cols1d(x[s:s + step], width)
        out[s:s + step] = (cols @ wmat).reshape(-1, lo, f)
    return out


def conv1d_nlc_backward(x, wmat, width, dout, need_dx=True):
    n, length, c = x.shape
    lo = length - width + 1
    f = wmat.shape[1]
    dw = np.zeros_like(wmat)
    dx = np.zeros_like(x) if need_dx else None
    step = _chunk(lo * wmat.shape[0], n)
    for s in range(0, n, step):
        xs = x[s:s + step]
        d = dout[s:s + step].reshape(-1, f)
        dw += _cols1d(xs, width).T @ d
        if need_dx:
            dc = (d @ wmat.T).reshape(xs.shape[0], lo, width, c)
            for k in range(width):
                dx[s:s + step, k:k + lo, :] += dc[:, :, k, :]
    return dx, dw


def conv2d_nhwc(x, wmat, kh, kw):
    """Batched valid cross-correlation on (N, H, W, C) input."""
    n, h, w, _ = x.shape
    ho, wo = h - kh + 1, w - kw + 1
    f = wmat.shape[1]
    out = np.empty((n, ho, wo, f))
    step = _chunk(ho * wo * wmat.shape[0], n)
    for s in range(0, n, step):
        cols = _cols2d(x[s:s + step], kh, kw)
        np.matmul(cols, wmat, out=out[s:s + step].reshape(-1, f))
    return out


def conv2d_nhwc_backward(x, wmat, kh, kw, dout, need_dx=True):
    n, h, w, c = x.shape
    ho, wo = h - kh + 1, w - kw + 1
    f = wmat.shape[1]
    dw = np.zeros_like(wmat)
    dx = np.zeros_like(x) if need_dx else None
    step = _chunk(ho * wo * wmat.shape[0], n)
    for s in range(0, n, step):
        xs = x[s:s + step]
        d = dout[s:s + step].reshape(-1, f)
        dw += _cols2d(xs, kh, kw).T @ d
        if need_dx:
            dc = (d @ wmat.T).reshape(xs.shape[0], ho, wo, kh, kw, c)
            for i in range(kh):
                for j in range(kw):
                    dx[s:s + step, i:i + ho, j:j + wo, :] += dc[:, :, :, i, j, :]
    return dx, dw


def conv1d_valid(signal, kernels):
    """Stride-1, unpadded 1-D cross-correlation.

    ``signal`` is (channels, length) and ``kernels`` is
    (filters, channels, width); the result is (filters, length - width + 1).
    """
    signal = np.asarray(signal, dtype=np.float64)
    kernels = np.asarray(kernels, dtype=np.float64)
    if signal.ndim != 2 or kernels.ndim != 3 or kernels.shape[1] != signal.shape[0]:
        raise ShapeError(f"conv1d_valid: signal {signal.shape} vs kernels {kernels.shape}")
    width = kernels.shape[2]
    if width > signal.shape[1]:
        raise ShapeError(f"conv1d_valid: kernel width {width} exceeds length {signal.shape[1]}")
    out = conv1d_nlc(signal.T[None], kernels_to_matrix(kernels), width)
    return out[0].T.copy()


def conv2d_valid(image, kernels):
    """Stride-1, unpadded 2-D cross-correlation.

    ``image`` is (channels, h, w) and ``kernels`` is (filters, channels, kh, kw).
    """
    image = np.asarray(image, dtype=np.float64)
    kernels = np.asarray(kernels, dtype=np.float64)
    if image.ndim != 3 or kernels.ndim != 4 or kernels.shape[1] != image.shape[0]:
        raise ShapeError(f"conv2d_valid: image {image.shape} vs kernels {kernels.shape}")
    kh, kw = kernels.shape[2:]
    if kh > image.shape[1] or kw > image.shape[2]:
        raise ShapeError(f"conv2d_valid: kernel {kh}x{kw} larger than image {image.shape[1:]}")
    x = np.ascontiguousarray(image.transpose(1, 2, 0))[None]
    out = conv2d_nhwc(x, kernels_to_matrix(kernels), kh, kw)
    return out[0].transpose(2, 0, 1).copy()


# ------------------------------------------------------------------- pooling

def maxpool1d_nlc(x, arg=None):
    """2-wide, stride-2 max pool on (N, L, C); returns (out, window argmax).

    A given ``arg`` is used as the winner pattern instead of the argmax.
    """
    n, length, c = x.shape
    lo = length // 2
    win = x[:, :2 * lo, :].reshape(n, lo, 2, c)
    if arg is None:
        arg = win.argmax(axis=2)
    out = np.take_along_axis(win, arg[:, :, None, :], axis=2)[:, :, 0, :]
    return out, arg


def maxpool1d_nlc_backward(arg, dout, length):
    n, lo, c = dout.shape
    dwin = np.zeros((n, lo, 2, c))
    np.put_along_axis(dwin, arg[:, :, None, :], dout[:, :, None, :], axis=2)
    dx = np.zeros((n, length, c))
    dx[:, :2 * lo, :] = dwin.reshape(n, 2 * lo, c)
    return dx


def maxpool2d_nhwc(x, arg=None):
    """2x2, stride-2 max pool on (N, H, W, C).

    The window argmax is an index in 0..3 counted row-major inside the
    window, so ties go to the first element in row-major order. Passing
    ``arg`` gathers at those positions instead.
    """
    n, h, w, c = x.shape
    ho, wo = h // 2, w // 2
    win = (x[:, :2 * ho, :2 * wo, :]
           .reshape(n, ho, 2, wo, 2, c)
           .transpose(0, 1, 3, 5, 2, 4)
           .reshape(n, ho, wo, c, 4))
    if arg is None:
        arg = win.argmax(axis=4)
    out = np.take_along_axis(win, arg[..., None], axis=4)[..., 0]
    return out, arg


def maxpool2d_nhwc_backward(arg, dout, hw):
    n, ho, wo, c = dout.shape
    h, w = hw
    dwin = np.zeros((n, ho, wo, c, 4))
    np.put_along_axis(dwin, arg[..., None], dout[..., None], axis=4)
    dx = np.zeros((n, h, w, c))
    dx[:, :2 * ho, :2 * wo, :] = (dwin.reshape(n, ho, wo, c, 2, 2)
                                  .transpose(0, 1, 4, 2, 5, 3)
                                  .reshape(n, 2 * ho, 2 * wo, c))
    return dx


def maxpool1d(x):
    """Max pool a (channels, length) signal with width 2, stride 2.

    Returns ``(out, argmax)`` where ``argmax[c, i]`` is the input position
    that produced ``out[c, i]``. A trailing odd sample is dropped.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None]
    if x.ndim != 2 or x.shape[1] < 2:
        raise ShapeError(f"maxpool1d: need (channels, length>=2), got {x.shape}")
    out, arg = maxpool1d_nlc(x.T[None])
    pos = 2 * np.arange(out.shape[1])[:, None] + arg[0]
    return out[0].T.copy(), pos.T.copy()


def maxpool2d(x):
    """Max pool a (channels, h, w) input over 2x2 windows with stride 2.

    Returns ``(out, argmax)``; ``argmax`` has shape (channels, h//2, w//2, 2)
    holding the (row, col) of each winning input element.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[1] < 2 or x.shape[2] < 2:
        raise ShapeError(f"maxpool2d: need (channels, h>=2, w>=2), got {x.shape}")
    out, arg = maxpool2d_nhwc(np.ascontiguousarray(x.transpose(1, 2, 0))[None])
    arg = arg[0].transpose(2, 0, 1)
    ho, wo = out.shape[1:3]
    rows = 2 * np.arange(ho)[None, :, None] + arg // 2
    cols = 2 * np.arange(wo)[None, None, :] + arg % 2
    return out[0].transpose(2, 0, 1).copy(), np.stack([rows, cols], axis=-1)


def maxpool2d_backward(grad_out, argmax, input_shape):
    """Scatter ``grad_out`` back onto the recorded argmax positions."""
    grad_out = np.asarray(grad_out, dtype=np.float64)
    c, h, w = input_shape
    dx = np.zeros((c, h, w))
    ch = np.broadcast_to(np.arange(c)[:, None, None], grad_out.shape)
    np.add.at(dx, (ch, argmax[..., 0], argmax[..., 1]), grad_out)
    return dx


class Standardizer:
    """Zero-mean, unit-variance scaling fitted on training data only.

    2-D inputs are scaled per feature column, higher-rank inputs
    (n, C, ...) per channel. Constant features are left unscaled.
    """

    def __init__(self, mean=None, std=None):
        self.mean = None if mean is None else np.asarray(mean, dtype=np.float64)
        self.std = None if std is None else np.asarray(std, dtype=np.float64)

    def _axes(self, x):
        return (0,) if x.ndim == 2 else (0,) + tuple(range(2, x.ndim))

    def fit(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim < 2 or len(x) == 0:
            raise ShapeError(f"need an (n, ...) batch with n >= 1, got {x.shape}")
        axes = self._axes(x)
        self.mean = x.mean(axis=axes)
        sd = x.std(axis=axes)
        self.std = np.where(sd > 1e-12, sd, 1.0)
        return self

    def transform(self, x):
        if self.mean is None:
            raise StateError("standardizer used before fit")
        x = np.asarray(x, dtype=np.float64)
        if x.ndim < 2 or x.shape[1] != self.mean.shape[0]:
            raise ShapeError(f"expected (n, {self.mean.shape[0]}, ...) input, got {x.shape}")
        shape = (1, -1) + (1,) * (x.ndim - 2)
        return (x - self.mean.reshape(shape)) / self.std.reshape(shape)

    def fit_transform(self, x):
        return self.fit(x).transform(x)
