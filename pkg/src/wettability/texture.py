"""Laws texture-energy descriptors for grayscale surface images.

Pipeline per mask: 5x5 kernel convolution -> windowed absolute energy ->
Otsu threshold -> binary segmentation -> connected components -> stats.
Images are plain 2-D numpy arrays with intensities in [0, 255].
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DegenerateMap, ImageTooSmall

L5 = np.array([1, 4, 6, 4, 1])
E5 = np.array([-1, -2, 0, 3, 1])
E5_CLASSIC = np.array([-1, -2, 0, 2, 1])
S5 = np.array([-1, 0, 2, 0, -1])
W5 = np.array([-1, 2, 0, -2, 1])
R5 = np.array([1, -4, 6, -4, 1])

MASK_NAMES = ("Level", "Edge", "Spot", "Wave", "Ripple")
STAT_NAMES = ("count", "area", "energy")


def mask_bank(classic_laws=False):
    """Return the default ``{name: (row_vector, col_vector)}`` bank.

    Each mask is the outer product of a vector with itself (L5L5, E5E5, ...).
    ``classic_laws`` swaps in the zero-sum edge vector [-1 -2 0 2 1].
    """
    edge = E5_CLASSIC if classic_laws else E5
    vectors = dict(zip(MASK_NAMES, (L5, edge, S5, W5, R5)))
    return {name: (v.copy(), v.copy()) for name, v in vectors.items()}


def build_kernel(a, b):
    """Separable 5x5 kernel ``k[i, j] = a[i] * b[j]``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != (5,) or b.shape != (5,):
        raise ValueError("mask vectors must have exactly 5 coefficients")
    return np.outer(a, b)


def check_image(img):
    img = np.asarray(img)
    if img.ndim != 2 or img.size == 0:
        raise ValueError("expected a non-empty 2-D grayscale array")
    if img.min() < 0 or img.max() > 255:
        raise ValueError("pixel values must lie in [0, 255]")
    return img


def convolve(img, kernel, border="symmetric"):
    """2-D convolution (kernel flipped) returning a same-size float map.

    ``border`` is ``"symmetric"`` (half-sample mirror, edge pixel repeated)
    or ``"zero"``.
    """
    img = np.asarray(img, dtype=float)
    kernel = np.asarray(kernel, dtype=float)
    if img.ndim != 2:
        raise ValueError("expected a 2-D image")
    h, w = img.shape
    if h < 5 or w < 5:
        raise ImageTooSmall(f"image is {h}x{w}; Laws filtering needs at least 5x5")
    kh, kw = kernel.shape
    ph, pw = kh // 2, kw // 2
    if border == "symmetric":
        padded = np.pad(img, ((ph, ph), (pw, pw)), mode="symmetric")
    elif border == "zero":
        padded = np.pad(img, ((ph, ph), (pw, pw)), mode="constant")
    else:
        raise ValueError(f"unknown border policy {border!r}")

    out = np.zeros((h, w))
    # out[r, c] = sum_ij k[i, j] * img[r + ph - i, c + pw - j]
    for i in range(kh):
        for j in range(kw):
            if kernel[i, j] != 0:
                oi = kh - 1 - i
                oj = kw - 1 - j
                out += kernel[i, j] * padded[oi:oi + h, oj:oj + w]
    return out


def _box_sum(values, half_window):
    """Sum over a (2h+1)^2 window, clipped at the borders."""
    h, w = values.shape
    hw = half_window
    padded = np.pad(values, hw, mode="constant")
    rows = np.zeros((h, w + 2 * hw))
    for d in range(2 * hw + 1):
        rows += padded[d:d + h, :]
    out = np.zeros((h, w))
    for d in range(2 * hw + 1):
        out += rows[:, d:d + w]
    return out


def energy_map(filtered, half_window=7):
    """Windowed sum of absolute filter responses.

    Each cell sums ``|filtered|`` over rows ``r-hw..r+hw`` and columns
    ``c-hw..c+hw``; windows are clipped at the image border.
    """
    filtered = np.asarray(filtered, dtype=float)
    if filtered.ndim != 2 or filtered.size == 0:
        raise ValueError("expected a non-empty 2-D map")
    if half_window < 0:
        raise ValueError("half_window must be non-negative")
    return _box_sum(np.abs(filtered), int(half_window))


def local_mean(img, half_window=7):
    img = np.asarray(img, dtype=float)
    counts = _box_sum(np.ones_like(img), half_window)
    return _box_sum(img, half_window) / counts


def quantize(values, bins=256):
    """Map values linearly onto integer levels ``0..bins-1`` over [min, max].

    Level ``k >= 1`` covers ``(min + k*step, min + (k+1)*step]`` so that a
    cut at level ``k`` coincides with the test ``value > min + k*step``.
    """
    values = np.asarray(values, dtype=float)
    lo, hi = values.min(), values.max()
    if hi <= lo:
        raise DegenerateMap("map is constant")
    scaled = (values - lo) / (hi - lo) * bins
    levels = np.ceil(scaled).astype(np.int64) - 1
    return np.clip(levels, 0, bins - 1)


def _best_cut(hist):
    """Lowest cut ``k`` maximizing between-class variance of a histogram.

    Class 0 holds levels ``< k``. Comparison is done on exact integers:
    the variance is proportional to ``(s0*n1 - s1*n0)**2 / (n0*n1)``.
    """
    hist = [int(c) for c in hist]
    total_n = sum(hist)
    total_s = sum(i * c for i, c in enumerate(hist))
    n0 = s0 = 0
    best_k, best_num, best_den = None, 0, 1
    for k in range(1, len(hist)):
        n0 += hist[k - 1]
        s0 += (k - 1) * hist[k - 1]
        n1 = total_n - n0
        if n0 == 0 or n1 == 0:
            continue
        num = (s0 * n1 - (total_s - s0) * n0) ** 2
        den = n0 * n1
        if best_k is None or num * best_den > best_num * den:
            best_k, best_num, best_den = k, num, den
    return best_k


def otsu_threshold(energy, bins=256):
    """Otsu threshold of a real-valued map quantized into ``bins`` levels.

    Returns the bin boundary ``min + k*(max-min)/bins`` of the cut with the
    largest between-class variance (lowest ``k`` on ties). Raises
    :class:`DegenerateMap` for a constant map.
    """
    energy = np.asarray(energy, dtype=float)
    if energy.size == 0:
        raise ValueError("empty map")
    if bins < 2:
        raise ValueError("need at least 2 bins")
    levels = quantize(energy, bins)
    hist = np.bincount(levels.ravel(), minlength=bins)
    k = _best_cut(hist)
    lo, hi = energy.min(), energy.max()
    return lo + k * (hi - lo) / bins


def segment(energy, threshold):
    """Foreground where the energy strictly exceeds ``threshold``."""
    return np.asarray(energy) > threshold


@dataclass
class ComponentSet:
    labels: np.ndarray  # 0 = background, 1..n = component id
    areas: np.ndarray  # pixel area per component, indexed by id - 1

    @property
    def count(self):
        return len(self.areas)


def label_components(mask, connectivity=8):
    """Label maximal connected foreground regions (4- or 8-connected)."""
    mask = np.asarray(mask, dtype=bool)
    if connectivity == 8:
        structure = np.ones((3, 3), dtype=int)
    elif connectivity == 4:
        structure = ndimage.generate_binary_structure(2, 1)
    else:
        raise ValueError("connectivity must be 4 or 8")
    labels, n = ndimage.label(mask, structure=structure)
    areas = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    return ComponentSet(labels=labels, areas=areas)


@dataclass(frozen=True)
class MaskFeatures:
    name: str
    count: float  # T_n, foreground pixels
    area: float  # A_n, mean component area
    energy: float  # E_n, mean energy over foreground

    @classmethod
    def empty(cls, name):
        return cls(name, 0.0, 0.0, 0.0)


def texture_features(energy, mask, components, name, area_scale=1.0):
    """T_n, A_n and E_n for one mask.

    ``area_scale`` converts pixel counts into physical area units.
    """
    mask = np.asarray(mask, dtype=bool)
    count = int(mask.sum())
    if count == 0:
        return MaskFeatures.empty(name)
    n_comp = components.count
    area = count / n_comp if n_comp else 0.0
    mean_energy = float(np.asarray(energy)[mask].mean())
    return MaskFeatures(name, count * area_scale, area * area_scale, mean_energy)


@dataclass(frozen=True)
class TextureOptions:
    border: str = "symmetric"
    connectivity: int = 8
    bins: int = 256
    half_window: int = 7
    normalize_contrast: bool = False
    classic_laws: bool = False
    area_scale: float = 1.0


@dataclass(frozen=True)
class TextureFeatureVector:
    features: tuple = field(default_factory=tuple)

    def __getitem__(self, name):
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(name)

    def names(self):
        return [f.name for f in self.features]

    def columns(self):
        return [f"{f.name}_{s}" for f in self.features for s in STAT_NAMES]

    def values(self):
        return [float(getattr(f, s)) for f in self.features for s in STAT_NAMES]

    def as_dict(self):
        return dict(zip(self.columns(), self.values()))


def extract_mask(img, a, b, name, options):
    kernel = build_kernel(a, b)
    filtered = convolve(img, kernel, options.border)
    energy = energy_map(filtered, options.half_window)
    try:
        t = otsu_threshold(energy, options.bins)
    except DegenerateMap:
        return MaskFeatures.empty(name)
    mask = segment(energy, t)
    comps = label_components(mask, options.connectivity)
    return texture_features(energy, mask, comps, name, options.area_scale)


def extract_all(img, bank=None, options=None):
    """Run the full Laws pipeline for every mask in ``bank``.

    ``bank`` maps mask names to ``(row_vector, col_vector)`` pairs and
    defaults to :func:`mask_bank`. Constant energy maps give zeroed features.
    """
    options = options or TextureOptions()
    img = check_image(img)
    h, w = img.shape
    if h < 5 or w < 5:
        raise ImageTooSmall(f"image is {h}x{w}; Laws filtering needs at least 5x5")
    if bank is None:
        bank = mask_bank(options.classic_laws)
    work = np.asarray(img, dtype=float)
    if options.normalize_contrast:
        work = work - local_mean(work, options.half_window)
    feats = tuple(extract_mask(work, a, b, name, options) for name, (a, b) in bank.items())
    return TextureFeatureVector(feats)
