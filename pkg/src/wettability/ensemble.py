"""Diversified network ensembles and the repeated k-fold evaluation protocol.

Ensemble members share the architecture and loss but differ in learning
rate (a geometric ladder around the base rate), scheduler patience and
seed. The ensemble predicts the arithmetic mean of its members.

Cross-validation shuffles the rows once per repeat and splits them into
near-equal folds. Everything that learns from data -- feature selection,
the power transform, the target scaler, the models -- is fitted inside
each fold on training rows only.
"""

import hashlib
import io
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed

from . import forest as rf
from . import nn
from .errors import (
    ConstantTarget,
    DimensionMismatch,
    EmptyVector,
    SchemaMismatch,
    TooFewSamples,
)
from .preprocessing import TransformParams, apply_transformer, fit_transformer

MODEL_KINDS = ("ensemble", "single", "forest")
MODEL_LABELS = {"ensemble": "NN ensemble", "single": "single NN", "forest": "random forest",
                "mean": "training mean"}


# ---------------------------------------------------------------- metrics

def _pair(y, yhat):
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if len(y) != len(yhat):
        raise DimensionMismatch("observed and predicted lengths differ")
    if len(y) == 0:
        raise EmptyVector("metrics need at least one value")
    return y, yhat


def rmse(y, yhat):
    y, yhat = _pair(y, yhat)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def mse(y, yhat):
    y, yhat = _pair(y, yhat)
    return float(np.mean((y - yhat) ** 2))


def r2(y, yhat):
    y, yhat = _pair(y, yhat)
    ss_tot = np.sum((y - y.mean()) ** 2)
    if ss_tot == 0:
        raise ConstantTarget("R^2 is undefined for a constant target")
    return float(1.0 - np.sum((y - yhat) ** 2) / ss_tot)


# ---------------------------------------------------------------- configuration

@dataclass(frozen=True)
class EnsembleConfig:
    n_members: int = 5
    base_lr: float = 1e-3
    lr_spread: float = 1.5
    patiences: tuple = (5, 10, 15)  # scheduler patience, cycled over members
    train: nn.TrainConfig = field(default_factory=nn.TrainConfig)
    hidden: tuple = (64, 64, 64)
    dropout: float = 0.2
    slope: float = 0.01
    residual_span: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_members < 1:
            raise ValueError("n_members must be >= 1")
        if self.lr_spread <= 0 or self.base_lr <= 0:
            raise ValueError("learning rates and spread must be positive")
        if not self.patiences or min(self.patiences) < 1:
            raise ValueError("need at least one patience >= 1")
        object.__setattr__(self, "patiences", tuple(int(p) for p in self.patiences))
        object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))

    def architecture(self, input_width):
        return nn.Architecture(input_width, self.hidden, self.dropout, self.slope, self.residual_span)

    def to_dict(self):
        d = asdict(self)
        d["patiences"] = list(self.patiences)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["train"] = nn.TrainConfig(**d["train"])
        d["patiences"] = tuple(d["patiences"])
        d["hidden"] = tuple(d["hidden"])
        return cls(**d)


@dataclass(frozen=True)
class MemberConfig:
    index: int
    train: nn.TrainConfig
    seed: int


def member_seed(master, index):
    return int(np.random.SeedSequence([master, index]).generate_state(1, dtype=np.uint64)[0])


def make_member_configs(cfg):
    """Member ``i`` trains at ``base_lr * spread**(i - (N-1)/2)``."""
    out = []
    centre = (cfg.n_members - 1) / 2
    for i in range(cfg.n_members):
        lr = cfg.base_lr * cfg.lr_spread ** (i - centre)
        patience = cfg.patiences[i % len(cfg.patiences)]
        train = replace(cfg.train, lr=lr, scheduler_patience=patience)
        out.append(MemberConfig(i, train, member_seed(cfg.seed, i)))
    return out


def single_config(cfg):
    """The single-network baseline: a one-member ensemble at the base rate."""
    return replace(cfg, n_members=1)


# ---------------------------------------------------------------- ensembles

@dataclass
class TargetScaler:
    mean: float
    std: float

    @classmethod
    def fit(cls, y):
        y = np.asarray(y, dtype=float)
        sd = float(y.std())
        return cls(float(y.mean()), sd if sd > 0 else 1.0)

    def forward(self, y):
        return (np.asarray(y, dtype=float) - self.mean) / self.std

    def inverse(self, z):
        return np.asarray(z, dtype=float) * self.std + self.mean


@dataclass
class Ensemble:
    networks: list
    configs: list
    scaler: TargetScaler
    transform: TransformParams = None
    features: tuple = None  # input column names, in order
    histories: list = None

    @property
    def input_width(self):
        return self.networks[0].arch.input_width

    def member_predictions(self, X, names=None):
        """Member outputs in degrees, shape (members, rows)."""
        Z = self._prepare(X, names)
        return np.array([self.scaler.inverse(net.predict(Z)) for net in self.networks])

    def predict(self, X, names=None):
        """Mean member output, inverse-scaled to degrees (never clamped)."""
        Z = self._prepare(X, names)
        P = np.array([net.predict(Z) for net in self.networks])
        # summing per row in sorted order makes the mean independent of member order
        return self.scaler.inverse(np.sort(P, axis=0).mean(axis=0))

    def _prepare(self, X, names):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.input_width:
            raise SchemaMismatch(f"expected {self.input_width} input columns")
        if names is not None and self.features is not None and tuple(names) != tuple(self.features):
            raise SchemaMismatch("input columns differ from the training schema")
        return apply_transformer(self.transform, X) if self.transform is not None else X

    def to_dict(self):
        return {
            "networks": [net.to_dict() for net in self.networks],
            "configs": [{"index": c.index, "seed": c.seed, "train": asdict(c.train)} for c in self.configs],
            "scaler": asdict(self.scaler),
            "transform": self.transform.to_dict() if self.transform is not None else None,
            "features": list(self.features) if self.features is not None else None,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            networks=[nn.Network.from_dict(n) for n in d["networks"]],
            configs=[MemberConfig(c["index"], nn.TrainConfig(**c["train"]), c["seed"]) for c in d["configs"]],
            scaler=TargetScaler(**d["scaler"]),
            transform=TransformParams.from_dict(d["transform"]) if d["transform"] is not None else None,
            features=tuple(d["features"]) if d["features"] is not None else None,
        )


def _train_member(Ztr, ttr, Zva, tva, arch, mc):
    return nn.train_model(Ztr, ttr, Zva, tva, arch, mc.train, mc.seed)


def train_ensemble(X_train, y_train, X_val, y_val, cfg=None, transform=None, features=None, n_jobs=1):
    """Train every member on the same (already transformed) inputs.

    Targets are standardized with the training mean/std; members see
    the standardized scale and predictions are mapped back to degrees.
    """
    cfg = cfg or EnsembleConfig()
    X_train = np.asarray(X_train, dtype=float)
    X_val = np.asarray(X_val, dtype=float)
    scaler = TargetScaler.fit(y_train)
    ttr, tva = scaler.forward(y_train), scaler.forward(y_val)
    arch = cfg.architecture(X_train.shape[1])
    configs = make_member_configs(cfg)
    if n_jobs == 1 or len(configs) == 1:
        models = [_train_member(X_train, ttr, X_val, tva, arch, mc) for mc in configs]
    else:
        models = Parallel(n_jobs=n_jobs)(
            delayed(_train_member)(X_train, ttr, X_val, tva, arch, mc) for mc in configs)
    return Ensemble([m.network for m in models], configs, scaler, transform,
                    tuple(features) if features is not None else None,
                    [m.history for m in models])


# ---------------------------------------------------------------- model specification

@dataclass(frozen=True)
class SelectionSpec:
    """Forest-importance feature selection run inside every fold."""
    k: int = 20
    runs: int = 10
    forest: rf.ForestParams = field(default_factory=rf.ForestParams)

    def to_dict(self):
        return {"k": self.k, "runs": self.runs, "forest": asdict(self.forest)}


@dataclass(frozen=True)
class ModelSpec:
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    forest: rf.ForestParams = field(default_factory=rf.ForestParams)
    selection: SelectionSpec = field(default_factory=SelectionSpec)
    global_selection: bool = False  # select once on all rows before the folds

    def to_dict(self):
        return {"ensemble": self.ensemble.to_dict(), "forest": asdict(self.forest),
                "selection": self.selection.to_dict(), "global_selection": self.global_selection}


def split_validation(train_idx, fraction, seed):
    """Carve a seeded validation subset out of ``train_idx``; both returned sorted."""
    train_idx = np.asarray(train_idx)
    n_val = max(1, int(round(fraction * len(train_idx))))
    if n_val >= len(train_idx) - 1:
        raise TooFewSamples("training portion too small for a validation split")
    perm = np.random.default_rng(np.random.SeedSequence(seed)).permutation(len(train_idx))
    return np.sort(train_idx[perm[n_val:]]), np.sort(train_idx[perm[:n_val]])


def select_columns(X, y, names, selection, seed):
    k = min(selection.k, X.shape[1])
    report = rf.select_features(X, y, k=k, runs=selection.runs, params=selection.forest,
                                seed=seed, names=names)
    return sorted(report.selected), report


def fit_pipeline(X, y, names, fit_idx, val_idx, spec=None, seed=0, columns=None, n_jobs=1):
    """Select features and fit the transform on ``fit_idx``; train an ensemble.

    ``columns`` bypasses selection (indices into ``X``).
    """
    spec = spec or ModelSpec()
    names = list(names)
    if columns is None:
        columns, _ = select_columns(X[fit_idx], y[fit_idx], names, spec.selection, seed)
    feats = tuple(names[j] for j in columns)
    Xs = X[:, columns]
    params = fit_transformer(Xs[fit_idx], feats)
    Z = apply_transformer(params, Xs)
    return train_ensemble(Z[fit_idx], y[fit_idx], Z[val_idx], y[val_idx], spec.ensemble,
                          transform=params, features=feats, n_jobs=n_jobs)


# ---------------------------------------------------------------- cross-validation

def fold_assignments(n, folds=8, repeats=2, seed=0):
    """``[(repeat, fold, test_idx)]``; folds partition ``range(n)`` within each repeat."""
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if n < folds:
        raise TooFewSamples(f"{n} samples cannot fill {folds} folds")
    out = []
    for r in range(repeats):
        perm = np.random.default_rng(np.random.SeedSequence([seed, r])).permutation(n)
        for f, part in enumerate(np.array_split(perm, folds)):
            out.append((r, f, np.sort(part)))
    return out


def folds_digest(assignments):
    h = hashlib.sha256()
    for r, f, idx in assignments:
        h.update(f"{r}:{f}:".encode())
        h.update(np.asarray(idx, dtype=np.int64).tobytes())
    return h.hexdigest()


@dataclass
class FoldPlan:
    repeat: int
    fold: int
    test: np.ndarray
    fit: np.ndarray  # rows used to fit selection, transform and weights
    val: np.ndarray  # early-stopping rows (also training rows for the forest)
    columns: list  # selected feature indices, dataset order
    seed: int


def plan_folds(X, y, names, spec, folds=8, repeats=2, seed=0, n_jobs=1):
    n = len(y)
    assignments = fold_assignments(n, folds, repeats, seed)
    global_cols = None
    if spec.selection is None:
        global_cols = list(range(X.shape[1]))
    elif spec.global_selection:
        global_cols, _ = select_columns(X, y, names, spec.selection, seed)

    def one(r, f, test):
        fold_seed = member_seed(seed, 1000 * (r + 1) + f)
        train = np.setdiff1d(np.arange(n), test)
        fit, val = split_validation(train, spec.ensemble.train.val_fraction, fold_seed)
        cols = global_cols
        if cols is None:
            cols, _ = select_columns(X[fit], y[fit], names, spec.selection, fold_seed)
        return FoldPlan(r, f, test, fit, val, cols, fold_seed)

    if n_jobs == 1:
        return [one(*a) for a in assignments]
    return Parallel(n_jobs=n_jobs)(delayed(one)(*a) for a in assignments)


@dataclass
class FoldResult:
    repeat: int
    fold: int
    test: np.ndarray
    rmse: float
    r2: float
    predictions: np.ndarray
    member_mse: list = None  # per member, NN models only
    n_train: int = 0
    features: tuple = ()

    @property
    def mse(self):
        return self.rmse ** 2


def run_fold(X, y, names, plan, kind, spec, master_seed=None):
    """Train model ``kind`` on a planned fold and score it on the held-out rows."""
    names = list(names)
    test = plan.test
    cols = plan.columns
    feats = tuple(names[j] for j in cols)
    if kind == "mean":
        train = np.concatenate([plan.fit, plan.val])
        pred = np.full(len(test), y[train].mean())
        members = None
    elif kind == "forest":
        train = np.sort(np.concatenate([plan.fit, plan.val]))
        model = rf.fit_forest(X[np.ix_(train, cols)], y[train], spec.forest, plan.seed)
        pred = model.predict(X[np.ix_(test, cols)])
        members = None
    else:
        cfg = spec.ensemble if kind == "ensemble" else single_config(spec.ensemble)
        master = cfg.seed if master_seed is None else master_seed
        cfg = replace(cfg, seed=member_seed(master, plan.seed))
        ens = fit_pipeline(X, y, names, plan.fit, plan.val, replace(spec, ensemble=cfg), columns=cols)
        Xt = X[np.ix_(test, cols)]
        member_preds = ens.member_predictions(Xt)
        pred = ens.predict(Xt)
        members = [mse(y[test], p) for p in member_preds]
    # R^2 is undefined on a constant held-out target (e.g. leave-one-out folds)
    score = r2(y[test], pred) if np.ptp(y[test]) > 0 else float("nan")
    return FoldResult(plan.repeat, plan.fold, test, rmse(y[test], pred), score, pred,
                      members, len(plan.fit) + len(plan.val), feats)


@dataclass
class CVReport:
    model: str
    folds: list  # FoldResult
    n_samples: int
    n_folds: int
    n_repeats: int
    seed: int
    digest: str = ""

    def _vals(self, attr):
        return np.array([getattr(f, attr) for f in self.folds])

    @property
    def rmse_mean(self):
        return float(self._vals("rmse").mean())

    @property
    def rmse_std(self):
        return float(self._vals("rmse").std(ddof=1)) if len(self.folds) > 1 else 0.0

    @property
    def r2_mean(self):
        """Pooled R^2: mean of the per-fold values."""
        return float(self._vals("r2").mean())

    @property
    def r2_std(self):
        return float(self._vals("r2").std(ddof=1)) if len(self.folds) > 1 else 0.0

    def out_of_fold(self, y):
        """Per repeat, every row's held-out prediction; R^2 of the concatenation."""
        preds = np.full((self.n_repeats, self.n_samples), np.nan)
        for f in self.folds:
            preds[f.repeat, f.test] = f.predictions
        scores = [r2(y, p) for p in preds]
        return preds, float(np.mean(scores))

    def jensen_gaps(self):
        """Mean member MSE minus ensemble MSE per fold (non-negative by convexity)."""
        return np.array([np.mean(f.member_mse) - f.mse for f in self.folds if f.member_mse])

    def to_csv(self):
        buf = io.StringIO()
        buf.write("model,repeat,fold,n_train,n_test,rmse,r2,member_mse,test_indices\n")
        for f in self.folds:
            members = " ".join(repr(float(m)) for m in f.member_mse) if f.member_mse else ""
            idx = " ".join(str(int(i)) for i in f.test)
            buf.write(f"{self.model},{f.repeat},{f.fold},{f.n_train},{len(f.test)},"
                      f"{float(f.rmse)!r},{float(f.r2)!r},{members},{idx}\n")
        return buf.getvalue()

    def summary(self):
        label = MODEL_LABELS.get(self.model, self.model)
        return (f"{label}: {len(self.folds)} folds ({self.n_repeats} x {self.n_folds}), "
                f"RMSE {self.rmse_mean:.3f} +/- {self.rmse_std:.3f} deg, "
                f"R^2 {self.r2_mean:.3f} +/- {self.r2_std:.3f}")


def _evaluate(X, y, names, plans, kind, spec, master_seed, n_jobs):
    if n_jobs == 1:
        return [run_fold(X, y, names, p, kind, spec, master_seed) for p in plans]
    return Parallel(n_jobs=n_jobs)(delayed(run_fold)(X, y, names, p, kind, spec, master_seed) for p in plans)


def _check_data(X, y, names):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or len(X) != len(y):
        raise DimensionMismatch("X rows and y length differ")
    names = list(names) if names is not None else [f"x{j}" for j in range(X.shape[1])]
    return X, y, names


def cross_validate(X, y, names=None, spec=None, kind="ensemble", folds=8, repeats=2, seed=0,
                   master_seed=None, n_jobs=1, plans=None):
    """Repeated k-fold evaluation of one model kind.

    ``seed`` fixes the folds, validation splits and selection forests;
    network seeds derive from ``master_seed`` (default: the ensemble
    config's seed) together with the fold.
    """
    if kind not in MODEL_LABELS:
        raise ValueError(f"kind must be one of {tuple(MODEL_LABELS)}")
    spec = spec or ModelSpec()
    X, y, names = _check_data(X, y, names)
    if plans is None:
        plans = plan_folds(X, y, names, spec, folds, repeats, seed, n_jobs)
    results = _evaluate(X, y, names, plans, kind, spec, master_seed, n_jobs)
    digest = folds_digest([(p.repeat, p.fold, p.test) for p in plans])
    return CVReport(kind, results, len(y), folds, repeats, seed, digest)


@dataclass
class Comparison:
    reports: dict  # kind -> CVReport

    def table(self):
        header = ["model", "rmse_mean", "rmse_std", "r2_mean", "r2_std", "folds"]
        rows = [[MODEL_LABELS[k], r.rmse_mean, r.rmse_std, r.r2_mean, r.r2_std, len(r.folds)]
                for k, r in self.reports.items()]
        return header, rows

    def chart_data(self):
        """Bar-chart series: one row per (metric, model) with value and error bar."""
        rows = []
        for metric in ("rmse", "r2"):
            for k, r in self.reports.items():
                rows.append([metric, MODEL_LABELS[k], getattr(r, f"{metric}_mean"), getattr(r, f"{metric}_std")])
        return ["metric", "model", "value", "error"], rows

    def summary(self):
        return "\n".join(r.summary() for r in self.reports.values())


def compare_models(X, y, names=None, spec=None, folds=8, repeats=2, seed=0, master_seed=None,
                   n_jobs=1, kinds=MODEL_KINDS):
    """Cross-validate every model kind on identical folds and selected features."""
    spec = spec or ModelSpec()
    X, y, names = _check_data(X, y, names)
    plans = plan_folds(X, y, names, spec, folds, repeats, seed, n_jobs)
    return Comparison({k: cross_validate(X, y, names, spec, k, folds, repeats, seed, master_seed,
                                         n_jobs, plans) for k in kinds})


def benchmark_spec(seed=0):
    """Faster settings for full-protocol runs on a single CPU core.

    Differs from the defaults only in speed-related knobs: 64-row
    batches at a 5e-3 base rate with early-stop patience 15, and lighter
    selection forests (3 runs of 50 trees) and a 100-tree forest baseline.
    """
    train = nn.TrainConfig(batch_size=64, early_stop_patience=15, max_epochs=300)
    return ModelSpec(
        ensemble=EnsembleConfig(base_lr=5e-3, train=train, seed=seed),
        forest=rf.ForestParams(n_trees=100),
        selection=SelectionSpec(k=20, runs=3, forest=rf.ForestParams(n_trees=50)),
    )
