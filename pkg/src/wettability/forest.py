"""Regression random forest with mean-decrease-in-impurity importances.

Trees are grown greedily on variance impurity. Each internal node records
the fraction of root samples reaching it and its impurity decrease, which
is all the importance computation needs.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from numba import njit

from .errors import DimensionMismatch, EmptyData, KTooLarge

LEAF = -1
_NO_LIMIT = 2**62


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None
    min_samples_leaf: int = 2
    # None: all features; int: count; float in (0, 1]: fraction; "third": ceil(p/3)
    max_features: object = None


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 200
    max_depth: int | None = None
    min_samples_leaf: int = 2
    max_features: object = "third"
    bootstrap: bool = True

    def tree_params(self):
        return TreeParams(self.max_depth, self.min_samples_leaf, self.max_features)


def resolve_max_features(spec, p):
    if spec is None:
        return p
    if spec == "third":
        return max(1, math.ceil(p / 3))
    if isinstance(spec, float):
        if not 0 < spec <= 1:
            raise ValueError("fractional max_features must lie in (0, 1]")
        return max(1, math.ceil(spec * p))
    m = int(spec)
    if not 1 <= m <= p:
        raise ValueError(f"max_features must be in [1, {p}]")
    return m


@njit(cache=True)
def _grow(X, y, max_depth, min_leaf, m, keys):
    n, p = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)
    n_node = np.zeros(cap, np.int64)
    impurity = np.zeros(cap)
    decrease = np.zeros(cap)

    idx = np.arange(n)
    buf = np.empty(n, np.int64)
    stack = np.empty((cap, 4), np.int64)  # node, start, end, depth
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    n_nodes = 1
    all_feats = np.arange(p)

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        size = end - start

        mean = 0.0
        ymin = np.inf
        ymax = -np.inf
        for t in range(start, end):
            v = y[idx[t]]
            mean += v
            if v < ymin:
                ymin = v
            if v > ymax:
                ymax = v
        mean /= size
        sse = 0.0
        for t in range(start, end):
            d = y[idx[t]] - mean
            sse += d * d
        value[node] = mean
        n_node[node] = size
        impurity[node] = sse / size

        if depth >= max_depth or size < 2 * min_leaf or ymin == ymax:
            continue

        if m < p:
            feats = np.sort(np.argsort(keys[node])[:m])
        else:
            feats = all_feats

        # costs within tie_tol count as equal; the first candidate keeps the win
        tie_tol = 1e-10 * sse
        best_cost = np.inf
        best_f = -1
        best_thr = 0.0
        for f in feats:
            xs = np.empty(size)
            ys = np.empty(size)
            for t in range(size):
                xs[t] = X[idx[start + t], f]
                ys[t] = y[idx[start + t]] - mean
            order = np.argsort(xs, kind="mergesort")
            xs = xs[order]
            ys = ys[order]
            if xs[0] == xs[size - 1]:
                continue
            tot = 0.0
            tot_sq = 0.0
            for t in range(size):
                tot += ys[t]
                tot_sq += ys[t] * ys[t]
            sl = 0.0
            sql = 0.0
            for i in range(1, size - min_leaf + 1):
                sl += ys[i - 1]
                sql += ys[i - 1] * ys[i - 1]
                if i < min_leaf or xs[i - 1] == xs[i]:
                    continue
                nl = i
                nr = size - i
                cost = (sql - sl * sl / nl) + ((tot_sq - sql) - (tot - sl) ** 2 / nr)
                if cost < best_cost - tie_tol:
                    best_cost = cost
                    best_f = f
                    thr = 0.5 * (xs[i - 1] + xs[i])
                    if thr >= xs[i]:
                        thr = xs[i - 1]
                    best_thr = thr

        if best_f < 0:
            continue
        gain = impurity[node] - max(best_cost, 0.0) / size
        if not gain > 0:
            continue

        # stable partition: x <= thr goes left
        nl = 0
        nr = 0
        for t in range(start, end):
            s = idx[t]
            if X[s, best_f] <= best_thr:
                idx[start + nl] = s
                nl += 1
            else:
                buf[nr] = s
                nr += 1
        for t in range(nr):
            idx[start + nl + t] = buf[t]

        feature[node] = best_f
        threshold[node] = best_thr
        decrease[node] = gain
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        left[node] = lc
        right[node] = rc
        # push right first so the left subtree is expanded first
        stack[top, 0] = rc
        stack[top, 1] = start + nl
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lc
        stack[top, 1] = start
        stack[top, 2] = start + nl
        stack[top, 3] = depth + 1
        top += 1

    k = n_nodes
    return (feature[:k].copy(), threshold[:k].copy(), left[:k].copy(), right[:k].copy(),
            value[:k].copy(), n_node[:k].copy(), impurity[:k].copy(), decrease[:k].copy())


@njit(cache=True)
def _route(feature, threshold, left, right, value, X):
    out = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out


@dataclass
class RegressionTree:
    feature: np.ndarray  # split feature per node, -1 for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # mean training target of the node
    n_samples: np.ndarray
    impurity: np.ndarray  # target variance at the node
    decrease: np.ndarray  # impurity decrease of the split, 0 at leaves
    n_features: int

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def is_leaf(self):
        return self.feature == LEAF

    def depth(self):
        depth = np.zeros(self.n_nodes, int)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def predict(self, X):
        X = _as_matrix(X, self.n_features)
        return _route(self.feature, self.threshold, self.left, self.right, self.value, X)

    def importances(self):
        """Unnormalized sum of ``p(n) * decrease`` per split feature."""
        imp = np.zeros(self.n_features)
        p = self.n_samples / self.n_samples[0]
        for i in np.flatnonzero(self.feature != LEAF):
            imp[self.feature[i]] += p[i] * self.decrease[i]
        return imp

    def to_dict(self):
        d = {k: getattr(self, k).tolist() for k in
             ("feature", "threshold", "left", "right", "value", "n_samples", "impurity", "decrease")}
        d["n_features"] = self.n_features
        return d

    @classmethod
    def from_dict(cls, d):
        ints = ("feature", "left", "right", "n_samples")
        arrays = {k: np.asarray(d[k], dtype=np.int64 if k in ints else float) for k in
                  ("feature", "threshold", "left", "right", "value", "n_samples", "impurity", "decrease")}
        return cls(n_features=int(d["n_features"]), **arrays)


def _as_matrix(X, p=None):
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise DimensionMismatch("expected a 2-D feature matrix")
    if p is not None and X.shape[1] != p:
        raise DimensionMismatch(f"expected {p} features, got {X.shape[1]}")
    return X


def _check_xy(X, y):
    X = _as_matrix(X)
    y = np.ascontiguousarray(y, dtype=float).ravel()
    if X.shape[0] != len(y):
        raise DimensionMismatch("X and y have different lengths")
    if len(y) < 2 or X.shape[1] == 0:
        raise EmptyData("need at least 2 samples and 1 feature")
    return X, y


def fit_tree(X, y, params=None, rng=None):
    """Grow one regression tree.

    At every node a random subset of ``params.max_features`` columns is
    scanned and the split minimizing the summed child squared error wins;
    ties go to the lowest feature index, then the lowest threshold.
    """
    params = params or TreeParams()
    X, y = _check_xy(X, y)
    rng = np.random.default_rng(rng)
    n, p = X.shape
    m = resolve_max_features(params.max_features, p)
    keys = rng.random((2 * n + 1, p)) if m < p else np.zeros((1, p))
    max_depth = _NO_LIMIT if params.max_depth is None else int(params.max_depth)
    arrays = _grow(X, y, max_depth, int(params.min_samples_leaf), m, keys)
    return RegressionTree(*arrays, n_features=p)


@dataclass
class Forest:
    trees: list
    seeds: list  # per-tree generator seeds
    params: ForestParams = field(default_factory=ForestParams)

    @property
    def n_features(self):
        return self.trees[0].n_features

    def predict(self, X):
        X = _as_matrix(X, self.n_features)
        return np.mean([t.predict(X) for t in self.trees], axis=0)

    def to_dict(self):
        return {
            "params": {**self.params.__dict__},
            "seeds": [int(s) for s in self.seeds],
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            trees=[RegressionTree.from_dict(t) for t in d["trees"]],
            seeds=list(d["seeds"]),
            params=ForestParams(**d["params"]),
        )


def predict_tree(tree, x):
    return tree.predict(x)


def predict_forest(forest, x):
    return forest.predict(x)


def tree_seeds(seed, n_trees):
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n_trees, dtype=np.uint64)]


def _fit_member(X, y, params, tree_seed):
    rng = np.random.default_rng(tree_seed)
    if params.bootstrap:
        rows = rng.integers(0, len(y), len(y))
        Xb, yb = X[rows], y[rows]
    else:
        Xb, yb = X, y
    return fit_tree(Xb, yb, params.tree_params(), rng)


def fit_forest(X, y, params=None, seed=0, n_jobs=1):
    """Fit ``params.n_trees`` trees, each from its own seed derived from ``seed``.

    Results do not depend on ``n_jobs``.
    """
    params = params or ForestParams()
    X, y = _check_xy(X, y)
    if params.n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    seeds = tree_seeds(seed, params.n_trees)
    if n_jobs == 1:
        trees = [_fit_member(X, y, params, s) for s in seeds]
    else:
        trees = Parallel(n_jobs=n_jobs)(delayed(_fit_member)(X, y, params, s) for s in seeds)
    return Forest(trees=trees, seeds=seeds, params=params)


@dataclass(frozen=True)
class ImportanceRun:
    values: np.ndarray  # normalized to unit sum unless degenerate
    raw: np.ndarray  # impurity decrease averaged over trees, unnormalized
    degenerate: bool


def forest_importance(forest):
    """Mean decrease in impurity per feature, averaged over trees.

    Normalized to sum to 1; if no tree ever split (e.g. constant target),
    all values are zero and ``degenerate`` is set.
    """
    raw = np.mean([t.importances() for t in forest.trees], axis=0)
    total = raw.sum()
    if total <= 0:
        return ImportanceRun(np.zeros_like(raw), raw, True)
    return ImportanceRun(raw / total, raw, False)


@dataclass
class ImportanceReport:
    names: list
    mean: np.ndarray
    std: np.ndarray
    runs: int
    selected: list  # column indices, most important first
    per_run: np.ndarray = None  # (runs, features)
    degenerate: bool = False

    @property
    def selected_names(self):
        return [self.names[i] for i in self.selected]

    def ranking(self):
        """All column indices by mean importance descending (ties: column order)."""
        return sorted(range(len(self.names)), key=lambda j: (-self.mean[j], j))


def select_features(X, y, k=20, runs=10, params=None, seed=0, names=None,
                    threshold=None, n_jobs=1):
    """Average forest importances over ``runs`` seeds and pick the top ``k``.

    With ``threshold`` set, every feature whose mean importance reaches it
    is selected instead (``k`` is ignored).
    """
    X, y = _check_xy(X, y)
    p = X.shape[1]
    names = list(names) if names is not None else [f"x{j}" for j in range(p)]
    if len(names) != p:
        raise DimensionMismatch("names do not match the column count")
    if threshold is None and not 1 <= k <= p:
        raise KTooLarge(f"k={k} but only {p} features are available")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    run_seeds = np.random.SeedSequence(seed).generate_state(runs, dtype=np.uint64)
    results = [forest_importance(fit_forest(X, y, params, int(s), n_jobs)) for s in run_seeds]
    per_run = np.array([r.values for r in results])
    mean = per_run.mean(axis=0)
    std = per_run.std(axis=0, ddof=1) if runs > 1 else np.zeros(p)
    order = sorted(range(p), key=lambda j: (-mean[j], j))
    if threshold is None:
        selected = order[:k]
    else:
        selected = [j for j in order if mean[j] >= threshold]
    return ImportanceReport(names, mean, std, runs, selected, per_run,
                            degenerate=any(r.degenerate for r in results))
