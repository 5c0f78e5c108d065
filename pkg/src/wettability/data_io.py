"""Tabular datasets, graymap images, model artifacts and a synthetic surface generator.

CSV files carry a header row; every column other than the id and target
columns is a numeric feature. Floats are written with Python's ``repr``
(shortest decimal that round-trips), so a load/save cycle is exact.

Images are portable graymaps: ``P2`` (ASCII) or ``P5`` (binary), 8-bit.
Model artifacts are JSON documents tagged with a format version and
written atomically (temporary file + rename).
"""

import csv
import hashlib
import io
import json
import math
import os
import re
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import (
    CorruptArtifact,
    CorruptHeader,
    EmptyFile,
    MalformedRow,
    MissingTarget,
    SchemaMismatch,
    TruncatedData,
    UnsupportedFormat,
    VersionMismatch,
)
from .texture import MASK_NAMES, STAT_NAMES

ARTIFACT_FORMAT = "wettability-model/1"


@dataclass
class Dataset:
    names: tuple
    X: np.ndarray
    y: np.ndarray  # None when the file has no target column
    ids: tuple
    target_name: str = "contact_angle"

    def __post_init__(self):
        self.names = tuple(self.names)
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2 or self.X.shape[1] != len(self.names):
            raise SchemaMismatch("feature matrix does not match the column names")
        if len(set(self.names)) != len(self.names):
            raise SchemaMismatch("column names must be unique")
        if self.y is not None:
            self.y = np.asarray(self.y, dtype=float)
            if len(self.y) != len(self.X):
                raise SchemaMismatch("target length differs from the row count")
        self.ids = tuple(str(i) for i in self.ids) if self.ids is not None else \
            tuple(str(i) for i in range(len(self.X)))

    def __len__(self):
        return len(self.X)

    def subset(self, rows=None, columns=None):
        rows = np.arange(len(self)) if rows is None else np.asarray(rows)
        cols = list(range(len(self.names))) if columns is None else \
            [self.names.index(c) if isinstance(c, str) else int(c) for c in columns]
        return Dataset(tuple(self.names[c] for c in cols), self.X[np.ix_(rows, cols)],
                       None if self.y is None else self.y[rows],
                       tuple(self.ids[r] for r in rows), self.target_name)


def format_float(v):
    """Shortest decimal that parses back to the same double."""
    return repr(float(v))


def _parse_cell(text, line, column):
    try:
        v = float(text)
    except ValueError:
        raise MalformedRow(line, f"column {column!r}: {text!r} is not a number") from None
    if not math.isfinite(v):
        raise MalformedRow(line, f"column {column!r}: non-finite value {text!r}")
    return v


def read_csv_text(text, target="contact_angle", id_column="sample_id", require_target=True):
    try:
        rows = list(csv.reader(io.StringIO(text)))
    except csv.Error as exc:
        raise MalformedRow(0, f"unparseable CSV: {exc}") from None
    if not rows or not any(cell.strip() for cell in rows[0]):
        raise EmptyFile("file has no header")
    header = [h.strip() for h in rows[0]]
    if require_target and target not in header:
        raise MissingTarget(f"target column {target!r} not found")
    t_idx = header.index(target) if target in header else None
    i_idx = header.index(id_column) if id_column in header else None
    feat = [j for j in range(len(header)) if j not in (t_idx, i_idx)]
    X, y, ids = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise MalformedRow(lineno, f"expected {len(header)} cells, found {len(row)}")
        X.append([_parse_cell(row[j], lineno, header[j]) for j in feat])
        if t_idx is not None:
            y.append(_parse_cell(row[t_idx], lineno, target))
        ids.append(row[i_idx] if i_idx is not None else str(len(ids)))
    if not X:
        raise EmptyFile("file has a header but no data rows")
    names = tuple(header[j] for j in feat)
    return Dataset(names, np.array(X, dtype=float).reshape(len(X), len(names)),
                   np.array(y) if t_idx is not None else None, ids, target)


def load_csv(path, target="contact_angle", id_column="sample_id", require_target=True):
    """Read a dataset; ``require_target=False`` allows prediction inputs."""
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedRow(raw[:exc.start].count(b"\n") + 1, "file is not valid UTF-8") from None
    return read_csv_text(text, target, id_column, require_target)


def write_csv_text(ds, id_column="sample_id"):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = [id_column, *ds.names]
    if ds.y is not None:
        header.append(ds.target_name)
    w.writerow(header)
    for i in range(len(ds)):
        row = [ds.ids[i], *(format_float(v) for v in ds.X[i])]
        if ds.y is not None:
            row.append(format_float(ds.y[i]))
        w.writerow(row)
    return buf.getvalue()


def atomic_write(path, data):
    """Write text or bytes to ``path`` via a temporary file in the same directory."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_csv(ds, path, id_column="sample_id"):
    atomic_write(path, write_csv_text(ds, id_column))


def write_table(path, header, rows):
    """Plain columnar CSV (reports, chart data)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    atomic_write(path, buf.getvalue())


# ---------------------------------------------------------------- graymaps

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _header_tokens(data, count):
    """Pull ``count`` whitespace-separated tokens (skipping comments); return them and the offset."""
    tokens, pos = [], 0
    while len(tokens) < count:
        m = _TOKEN.match(data, pos)
        if not m:
            raise CorruptHeader("graymap header ended early")
        tok = m.group(1)
        if b"#" in tok:
            tok = tok.split(b"#", 1)[0]
            nl = data.find(b"\n", m.end())
            pos = len(data) if nl < 0 else nl  # the newline is the separator byte
            if not tok:
                continue
        else:
            pos = m.end()
        tokens.append(tok)
    return tokens, pos


def parse_pgm(data):
    """Decode graymap bytes into a ``uint8`` array of shape (rows, cols)."""
    if len(data) < 2:
        raise CorruptHeader("file too short for a graymap")
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise UnsupportedFormat(f"not a graymap (magic {magic!r})")
    tokens, pos = _header_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise CorruptHeader("non-integer size or maxval") from None
    if width < 1 or height < 1 or maxval < 1:
        raise CorruptHeader("size and maxval must be positive")
    if maxval > 255:
        raise UnsupportedFormat("only 8-bit graymaps (maxval <= 255) are supported")
    count = width * height
    if magic == b"P5":
        raster = data[pos + 1:pos + 1 + count]  # exactly one whitespace byte after maxval
        if len(raster) < count:
            raise TruncatedData(f"expected {count} pixels, found {len(raster)}")
        pixels = np.frombuffer(raster, dtype=np.uint8).copy()
    else:
        body = re.sub(rb"#[^\n]*", b"", data[pos:]).split()
        if len(body) < count:
            raise TruncatedData(f"expected {count} pixels, found {len(body)}")
        try:
            pixels = np.array([int(t) for t in body[:count]], dtype=np.int64)
        except ValueError:
            raise CorruptHeader("non-integer pixel value") from None
    if pixels.max(initial=0) > maxval or pixels.min(initial=0) < 0:
        raise CorruptHeader("pixel value exceeds maxval")
    return pixels.astype(np.uint8).reshape(height, width)


def load_pgm(path):
    with open(path, "rb") as fh:
        return parse_pgm(fh.read())


def encode_pgm(img, binary=True):
    img = np.asarray(img)
    if img.ndim != 2:
        raise UnsupportedFormat("graymaps are 2-D")
    if img.min(initial=0) < 0 or img.max(initial=0) > 255:
        raise UnsupportedFormat("pixel values must lie in 0..255")
    arr = img.astype(np.uint8)
    h, w = arr.shape
    if binary:
        return b"P5\n%d %d\n255\n" % (w, h) + arr.tobytes()
    lines = [" ".join(str(v) for v in row) for row in arr]
    return ("P2\n%d %d\n255\n" % (w, h) + "\n".join(lines) + "\n").encode("ascii")


def save_pgm(img, path, binary=True):
    atomic_write(path, encode_pgm(img, binary))


def load_image(path):
    """Graymaps natively; other formats through Pillow when it is installed."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] in (b"P2", b"P5"):
        return parse_pgm(data)
    try:
        from PIL import Image, UnidentifiedImageError
    except ImportError:
        raise UnsupportedFormat(f"{path}: not a graymap and Pillow is not installed") from None
    try:
        with Image.open(io.BytesIO(data)) as im:
            return np.asarray(im.convert("L"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError) as exc:
        raise UnsupportedFormat(f"{path}: {exc}") from None


# ---------------------------------------------------------------- artifacts

def save_model(artifact, path):
    """``artifact`` is a JSON-compatible dict; the format tag is added here."""
    doc = {"format": ARTIFACT_FORMAT, **artifact}
    atomic_write(path, json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_model(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptArtifact(f"{path}: {exc}") from None
    if not isinstance(doc, dict) or "format" not in doc:
        raise CorruptArtifact(f"{path}: no format tag")
    if doc["format"] != ARTIFACT_FORMAT:
        raise VersionMismatch(f"{path}: format {doc['format']!r}, expected {ARTIFACT_FORMAT!r}")
    return doc


def config_digest(config):
    """SHA-256 of the canonical JSON form of a configuration dict."""
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def model_artifact(ensemble, config=None):
    """Bundle a trained ensemble (features, transform, tensors) with its config digest."""
    config = config or {}
    return {"model": ensemble.to_dict(), "selected_features": list(ensemble.features or ()),
            "config": config, "config_digest": config_digest(config)}


def ensemble_from_artifact(doc):
    from .ensemble import Ensemble

    try:
        return Ensemble.from_dict(doc["model"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptArtifact(f"artifact is missing model fields: {exc}") from None


# ---------------------------------------------------------------- synthetic data

CHEMISTRY_COLUMNS = (
    "CH2_area_fraction", "CF2_area_fraction", "CF3_area_fraction", "CN_area_fraction",
    "CH2_area", "CF2_area", "CF3_area", "CN_area",
    "CN_dipole_moment", "CF2_dipole_moment", "CN_volume", "CF2_volume",
    "CN_polarity", "CF2_chain_length",
    "F_atomic_fraction", "N_atomic_fraction", "O_atomic_fraction", "C_atomic_fraction",
    "mean_dipole_moment", "mean_molecular_volume",
)
TEXTURE_COLUMNS = tuple(f"{m}_{s}" for m in MASK_NAMES for s in STAT_NAMES)
SYNTHETIC_COLUMNS = CHEMISTRY_COLUMNS + ("roughness_nm",) + TEXTURE_COLUMNS


def contact_angle_oracle(cn_fraction, chain_length, roughness_nm, spot_energy):
    """Noise-free contact angle (degrees) of the synthetic surfaces.

    A chemistry score ``g`` falls with the CN (polar nitrile) fraction and
    rises with the CF2 chain length; a Wenzel-style roughness factor
    ``r`` in [1, 2] amplifies it; the spot-texture energy adds a mild
    shift. ``theta = arccos(0.98 * tanh(r * g))`` in degrees, so the
    angle lies strictly inside (11.5, 168.5).
    """
    cn = np.asarray(cn_fraction, dtype=float)
    chain = np.asarray(chain_length, dtype=float)
    sa = np.asarray(roughness_nm, dtype=float)
    spot = np.asarray(spot_energy, dtype=float)
    g = 4.0 * (cn - 0.2) - 0.25 * (chain - 5.5) - 0.3 * np.tanh((spot - 60.0) / 25.0)
    r = 1.0 + np.log10(sa / 20.0) / 2.0
    return np.degrees(np.arccos(0.98 * np.tanh(r * g)))


def oracle_from_matrix(X, names=SYNTHETIC_COLUMNS):
    col = {n: j for j, n in enumerate(names)}
    return contact_angle_oracle(X[:, col["CN_area_fraction"]], X[:, col["CF2_chain_length"]],
                                X[:, col["roughness_nm"]], X[:, col["Spot_energy"]])


def generate_synthetic(n, noise=5.0, seed=0):
    """Seeded stand-in for an experimental wettability table (36 features).

    Pure function of ``(n, noise, seed)``. Targets are
    :func:`contact_angle_oracle` plus Gaussian noise of ``noise`` degrees,
    clamped to [0, 180].
    """
    if n < 1 or noise < 0:
        raise ValueError("need n >= 1 and noise >= 0")
    rng = np.random.default_rng(seed)
    # chemistry: group fractions from a Dirichlet (fifth share = other groups)
    frac = rng.dirichlet([3.0, 2.0, 1.5, 2.0, 1.5], size=n)
    ch2, cf2, cf3, cn = frac[:, 0], frac[:, 1], frac[:, 2], frac[:, 3]
    total_area = rng.uniform(800.0, 1200.0, n)
    chain = rng.uniform(1.0, 10.0, n)
    cn_dipole = 3.9 + rng.normal(0, 0.15, n)
    cf2_dipole = 2.0 + rng.normal(0, 0.1, n)
    cn_volume = 28.0 + 2.0 * chain * 0.2 + rng.normal(0, 1.0, n)
    cf2_volume = 38.0 * chain + rng.normal(0, 4.0, n)
    f_atomic = np.clip(0.5 * (2 * cf2 + 3 * cf3) / 3 + rng.normal(0, 0.02, n), 0, 1)
    n_atomic = np.clip(0.5 * cn + rng.normal(0, 0.01, n), 0, 1)
    o_atomic = np.clip(0.1 * frac[:, 4] + rng.uniform(0.02, 0.08, n), 0, 1)
    c_atomic = np.clip(1.0 - f_atomic - n_atomic - o_atomic, 0, 1)
    mean_dipole = cn * cn_dipole + cf2 * cf2_dipole + 0.4 * ch2 + rng.normal(0, 0.05, n)
    mean_volume = cn * cn_volume + cf2 * cf2_volume / chain + 25.0 * ch2 + rng.normal(0, 1.0, n)
    chemistry = np.column_stack([
        ch2, cf2, cf3, cn,
        ch2 * total_area, cf2 * total_area, cf3 * total_area, cn * total_area,
        cn_dipole, cf2_dipole, cn_volume, cf2_volume,
        cn * cn_dipole, chain,
        f_atomic, n_atomic, o_atomic, c_atomic,
        mean_dipole, mean_volume,
    ])
    # topography: log-uniform roughness drives the texture statistics
    roughness = 20.0 * 10.0 ** rng.uniform(0.0, 2.0, n)
    lr = np.log10(roughness / 20.0)
    texture = np.empty((n, len(TEXTURE_COLUMNS)))
    for m in range(len(MASK_NAMES)):
        coupling = rng.uniform(0.3, 1.0)
        latent = coupling * lr + rng.normal(0, 0.4, n)
        texture[:, 3 * m] = np.round(300.0 * (1.5 + latent) + rng.normal(0, 30, n)).clip(0)
        texture[:, 3 * m + 1] = np.exp(1.0 + 0.5 * latent + rng.normal(0, 0.3, n))
        texture[:, 3 * m + 2] = 40.0 + 20.0 * latent + rng.normal(0, 5.0, n)
    X = np.column_stack([chemistry, roughness, texture])
    clean = oracle_from_matrix(X)
    y = np.clip(clean + rng.normal(0, noise, n) if noise > 0 else clean, 0.0, 180.0)
    ids = tuple(f"S{i:05d}" for i in range(n))
    return Dataset(SYNTHETIC_COLUMNS, X, y, ids)
