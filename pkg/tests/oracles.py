"""Slow reference implementations written with plain loops.

They share no code with the package and exist only to check it.
"""
import math


def conv1d(signal, kernels):
    c_in, length = len(signal), len(signal[0])
    out = []
    for f in kernels:
        width = len(f[0])
        row = []
        for i in range(length - width + 1):
            s = 0.0
            for c in range(c_in):
                for d in range(width):
                    s += f[c][d] * signal[c][i + d]
            row.append(s)
        out.append(row)
    return out


def conv2d(image, kernels):
    c_in, h, w = len(image), len(image[0]), len(image[0][0])
    out = []
    for f in kernels:
        kh, kw = len(f[0]), len(f[0][0])
        plane = []
        for i in range(h - kh + 1):
            row = []
            for j in range(w - kw + 1):
                s = 0.0
                for c in range(c_in):
                    for a in range(kh):
                        for b in range(kw):
                            s += f[c][a][b] * image[c][i + a][j + b]
                row.append(s)
            plane.append(row)
        out.append(plane)
    return out


def maxpool1d(signal):
    out, pos = [], []
    for ch in signal:
        o, p = [], []
        for i in range(len(ch) // 2):
            a, b = ch[2 * i], ch[2 * i + 1]
            if b > a:
                o.append(b)
                p.append(2 * i + 1)
            else:
                o.append(a)
                p.append(2 * i)
        out.append(o)
        pos.append(p)
    return out, pos


def maxpool2d(image):
    out, arg = [], []
    for plane in image:
        h, w = len(plane) // 2, len(plane[0]) // 2
        o_plane, a_plane = [], []
        for i in range(h):
            o_row, a_row = [], []
            for j in range(w):
                best, where = None, None
                for a in range(2):
                    for b in range(2):
                        v = plane[2 * i + a][2 * j + b]
                        if best is None or v > best:
                            best, where = v, (2 * i + a, 2 * j + b)
                o_row.append(best)
                a_row.append(where)
            o_plane.append(o_row)
            a_plane.append(a_row)
        out.append(o_plane)
        arg.append(a_plane)
    return out, arg


def population_variance(values):
    m = sum(values) / len(values)
    return sum((v - m) ** 2 for v in values) / len(values)


def causal_variance(series, n_w):
    return [population_variance(series[max(0, i - n_w + 1):i + 1]) for i in range(len(series))]


def cell_histogram(cell_pixels_gx_gy, bins):
    """Histogram of (gx, gy) pairs with linear votes between bin centres k*180/bins."""
    hist = [0.0] * bins
    width = 180.0 / bins
    for gx, gy in cell_pixels_gx_gy:
        mag = math.hypot(gx, gy)
        ang = math.degrees(math.atan2(gy, gx)) % 180.0
        lo = int(ang // width)
        frac = ang / width - lo
        hist[lo % bins] += mag * (1 - frac)
        hist[(lo + 1) % bins] += mag * frac
    return hist


def bilinear_sample(img, y, x):
    h, w = len(img), len(img[0])
    y0, x0 = int(math.floor(y)), int(math.floor(x))
    y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
    fy, fx = y - y0, x - x0
    top = img[y0][x0] * (1 - fx) + img[y0][x1] * fx
    bot = img[y1][x0] * (1 - fx) + img[y1][x1] * fx
    return top * (1 - fy) + bot * fy


def epoch_stability(curve, window, band):
    for e in range(len(curve) - window + 1):
        w = curve[e:e + window]
        if max(w) - min(w) <= band:
            return e
    return None
