"""Yeo-Johnson power transform with maximum-likelihood lambda, plus z-scoring."""

from dataclasses import dataclass

import numpy as np

from .errors import ConstantColumn, EmptyMatrix, OutOfRange, SchemaMismatch

BRANCH_TOL = 1e-8
LAMBDA_BOUNDS = (-5.0, 5.0)
GOLDEN_TOL = 1e-6


def yeo_johnson(y, lmbda):
    """Four-branch Yeo-Johnson map; accepts scalars or arrays.

    The log branches are used when ``|lmbda| < 1e-8`` (non-negative y) or
    ``|lmbda - 2| < 1e-8`` (negative y).
    """
    y = np.asarray(y, dtype=float)
    if lmbda == 1:
        # both branches reduce to the identity; skip the rounding of expm1/log1p
        return y.copy() if y.ndim else float(y)
    out = np.empty_like(y)
    pos = y >= 0
    neg = ~pos
    yp, yn = y[pos], y[neg]
    if abs(lmbda) < BRANCH_TOL:
        out[pos] = np.log1p(yp)
    else:
        out[pos] = np.expm1(lmbda * np.log1p(yp)) / lmbda
    if abs(lmbda - 2) < BRANCH_TOL:
        out[neg] = -np.log1p(-yn)
    else:
        out[neg] = -np.expm1((2 - lmbda) * np.log1p(-yn)) / (2 - lmbda)
    return out if out.ndim else float(out)


def yeo_johnson_inverse(z, lmbda):
    """Exact inverse of :func:`yeo_johnson`.

    Raises :class:`OutOfRange` if some ``z`` lies outside the image of the
    forward map (e.g. ``lmbda*z + 1 <= 0`` on the non-negative branch).
    """
    z = np.asarray(z, dtype=float)
    if lmbda == 1:
        return z.copy() if z.ndim else float(z)
    out = np.empty_like(z)
    pos = z >= 0
    neg = ~pos
    zp, zn = z[pos], z[neg]
    if abs(lmbda) < BRANCH_TOL:
        out[pos] = np.expm1(zp)
    else:
        base = lmbda * zp + 1
        if np.any(base <= 0):
            raise OutOfRange(f"value outside the image of the transform for lambda={lmbda}")
        out[pos] = np.expm1(np.log1p(lmbda * zp) / lmbda)
    if abs(lmbda - 2) < BRANCH_TOL:
        out[neg] = -np.expm1(-zn)
    else:
        base = 1 - (2 - lmbda) * zn
        if np.any(base <= 0):
            raise OutOfRange(f"value outside the image of the transform for lambda={lmbda}")
        out[neg] = -np.expm1(np.log1p(-(2 - lmbda) * zn) / (2 - lmbda))
    return out if out.ndim else float(out)


def log_likelihood(y, lmbda):
    """Profile Gaussian log-likelihood of the transformed sample (up to a constant)."""
    y = np.asarray(y, dtype=float)
    z = yeo_johnson(y, lmbda)
    var = z.var()
    if not np.isfinite(var) or var <= 0:
        return -np.inf
    jacobian = (lmbda - 1) * np.sum(np.sign(y) * np.log1p(np.abs(y)))
    return -0.5 * len(y) * np.log(var) + jacobian


def _golden_max(f, lo, hi, tol):
    invphi = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = (a + b) / 2
    # endpoints can beat the interior when the optimum sits on the bound
    return max((x, lo, hi), key=f)


def fit_lambda(column, bounds=LAMBDA_BOUNDS, tol=GOLDEN_TOL):
    """Maximum-likelihood Yeo-Johnson lambda by golden-section search.

    A coarse scan (step 0.25) first brackets the best region so that a
    multimodal likelihood cannot trap the search in a side lobe.
    """
    y = np.asarray(column, dtype=float).ravel()
    if len(y) < 3 or len(np.unique(y)) < 2:
        raise ConstantColumn("need at least 3 values with 2 distinct")

    def f(lmbda):
        return log_likelihood(y, lmbda)

    lo, hi = bounds
    grid = np.arange(lo, hi + 1e-12, 0.25)
    i = int(np.argmax([f(g) for g in grid]))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, len(grid) - 1)]
    return float(_golden_max(f, a, b, tol))


@dataclass(frozen=True)
class TransformParams:
    names: tuple
    lambdas: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    constant: np.ndarray  # bool mask of pass-through columns

    def __len__(self):
        return len(self.names)

    def to_dict(self):
        return {
            "names": list(self.names),
            "lambdas": self.lambdas.tolist(),
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "constant": self.constant.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            names=tuple(d["names"]),
            lambdas=np.asarray(d["lambdas"], dtype=float),
            means=np.asarray(d["means"], dtype=float),
            stds=np.asarray(d["stds"], dtype=float),
            constant=np.asarray(d["constant"], dtype=bool),
        )


def _check_matrix(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise SchemaMismatch("expected a 2-D feature matrix")
    return X


def fit_transformer(X, names=None):
    """Fit per-column lambda, then the mean/std of the transformed column.

    Constant columns pass through unchanged (lambda 1, mean = value, std 1).
    """
    X = _check_matrix(X)
    n, p = X.shape
    if n == 0 or p == 0:
        raise EmptyMatrix("cannot fit a transform on an empty matrix")
    if n < 3:
        raise EmptyMatrix("need at least 3 rows to fit a transform")
    names = tuple(names) if names is not None else tuple(f"x{j}" for j in range(p))
    if len(names) != p:
        raise SchemaMismatch("names do not match the column count")
    lambdas, means, stds, const = np.ones(p), np.zeros(p), np.ones(p), np.zeros(p, bool)
    for j in range(p):
        col = X[:, j]
        if len(np.unique(col)) < 2:
            const[j] = True
            means[j] = col[0]
            continue
        lam = fit_lambda(col)
        z = yeo_johnson(col, lam)
        sd = z.std()
        if not np.isfinite(sd) or sd <= 0:
            # transform collapsed the column numerically; fall back to identity
            lam, z = 1.0, col.copy()
            sd = z.std()
        lambdas[j], means[j], stds[j] = lam, z.mean(), sd
    return TransformParams(names, lambdas, means, stds, const)


def _check_schema(params, X, names):
    X = _check_matrix(X)
    if X.shape[1] != len(params):
        raise SchemaMismatch(f"expected {len(params)} columns, got {X.shape[1]}")
    if names is not None and tuple(names) != params.names:
        raise SchemaMismatch("column names/order differ from the fitted transform")
    return X


def apply_transformer(params, X, names=None):
    X = _check_schema(params, X, names)
    out = np.empty_like(X)
    for j in range(X.shape[1]):
        if params.constant[j]:
            out[:, j] = X[:, j]
        else:
            z = yeo_johnson(X[:, j], params.lambdas[j])
            out[:, j] = (z - params.means[j]) / params.stds[j]
    return out


def inverse_transformer(params, Z, names=None):
    Z = _check_schema(params, Z, names)
    out = np.empty_like(Z)
    for j in range(Z.shape[1]):
        if params.constant[j]:
            out[:, j] = Z[:, j]
        else:
            z = Z[:, j] * params.stds[j] + params.means[j]
            out[:, j] = yeo_johnson_inverse(z, params.lambdas[j])
    return out
