"""Slow, obviously-correct reference implementations used only by tests."""

import sys
from fractions import Fraction
import math

import numpy as np


def _reflect(i, n):
    # half-sample symmetric: -1 -> 0, -2 -> 1, n -> n-1, n+1 -> n-2
    while i < 0 or i >= n:
        if i < 0:
            i = -i - 1
        if i >= n:
            i = 2 * n - i - 1
    return i


def brute_convolve(img, kernel, border="symmetric"):
    img = np.asarray(img, dtype=float)
    h, w = img.shape
    kh, kw = kernel.shape
    ch, cw = kh // 2, kw // 2
    out = np.zeros((h, w))
    for r in range(h):
        for c in range(w):
            acc = 0.0
            for u in range(kh):
                for v in range(kw):
                    rr = r - (u - ch)
                    cc = c - (v - cw)
                    if border == "symmetric":
                        val = img[_reflect(rr, h), _reflect(cc, w)]
                    elif 0 <= rr < h and 0 <= cc < w:
                        val = img[rr, cc]
                    else:
                        val = 0.0
                    acc += kernel[u, v] * val
            out[r, c] = acc
    return out


def naive_energy(filtered, half_window=7):
    f = np.abs(np.asarray(filtered, dtype=float))
    h, w = f.shape
    out = np.zeros((h, w))
    for r in range(h):
        for c in range(w):
            acc = 0.0
            for j in range(c - half_window, c + half_window + 1):
                for i in range(r - half_window, r + half_window + 1):
                    if 0 <= i < h and 0 <= j < w:
                        acc += f[i, j]
            out[r, c] = acc
    return out


def quantize_levels(values, bins):
    values = np.asarray(values, dtype=float).ravel()
    lo, hi = float(values.min()), float(values.max())
    levels = []
    for v in values:
        q = math.ceil((v - lo) / (hi - lo) * bins) - 1
        levels.append(min(max(q, 0), bins - 1))
    return np.array(levels, dtype=np.int64)


def between_class_variances(levels, bins):
    """Exact between-class variance (as Fractions) of every cut 1..bins-1."""
    levels = np.asarray(levels, dtype=np.int64)
    n = len(levels)
    out = {}
    for k in range(1, bins):
        upper = levels >= k
        n1 = int(upper.sum())
        n0 = n - n1
        if n0 == 0 or n1 == 0:
            out[k] = Fraction(0)
            continue
        m0 = Fraction(int(levels[~upper].sum()), n0)
        m1 = Fraction(int(levels[upper].sum()), n1)
        out[k] = Fraction(n0 * n1, n * n) * (m0 - m1) ** 2
    return out


def exhaustive_otsu_cut(values, bins=256):
    """Lowest cut index attaining the maximal between-class variance."""
    var = between_class_variances(quantize_levels(values, bins), bins)
    best = max(var.values())
    return min(k for k, v in var.items() if v == best), var


def flood_fill_components(mask, connectivity=8):
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    seen = np.zeros_like(mask)
    if connectivity == 8:
        nbrs = [(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1) if (a, b) != (0, 0)]
    else:
        nbrs = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 10 * h * w + 100))

    def fill(r, c):
        seen[r, c] = True
        size = 1
        for a, b in nbrs:
            rr, cc = r + a, c + b
            if 0 <= rr < h and 0 <= cc < w and mask[rr, cc] and not seen[rr, cc]:
                size += fill(rr, cc)
        return size

    areas = []
    try:
        for r in range(h):
            for c in range(w):
                if mask[r, c] and not seen[r, c]:
                    areas.append(fill(r, c))
    finally:
        sys.setrecursionlimit(old)
    return areas
