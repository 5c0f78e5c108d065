"""Command-line front end: ``wettability <subcommand> [options]``.

Subcommands write their outputs plus a ``manifest.json`` (resolved
configuration, input digests, seed, tool version) into ``--out``.

Configuration is resolved as command-line flag > ``--config`` file >
built-in default. The config file holds ``key = value`` lines; ``#``
starts a comment; list values are comma separated. Any key can also be
set from the command line with ``--set key=value``.

Exit codes: 0 success, 2 usage error (bad flags, unreadable input
file), 3 data error (input violates a format or contract), 4 internal
error.
"""

import argparse
import hashlib
import json
import os
import sys
import traceback
from dataclasses import replace
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import __version__
from . import data_io as dio
from . import ensemble as E
from . import forest as rf
from . import nn
from .errors import DataError, SchemaMismatch
from .texture import TextureOptions, extract_all

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- configuration

def _int_list(text):
    return tuple(int(v) for v in str(text).split(",") if v.strip())


CONFIG_KEYS = {
    # key: (parser, default)
    "preset": (str, "default"),
    "target": (str, "contact_angle"),
    "id_column": (str, "sample_id"),
    "members": (int, 5),
    "base_lr": (float, 1e-3),
    "lr_spread": (float, 1.5),
    "patiences": (_int_list, (5, 10, 15)),
    "hidden": (_int_list, (64, 64, 64)),
    "dropout": (float, 0.2),
    "slope": (float, 0.01),
    "residual_span": (int, 1),
    "max_epochs": (int, 500),
    "batch_size": (int, 16),
    "alpha": (float, 0.5),
    "huber_delta": (float, 1.0),
    "clip_norm": (float, 1.0),
    "weight_decay": (float, 1e-4),
    "scheduler_factor": (float, 0.5),
    "early_stop_patience": (int, 30),
    "val_fraction": (float, 0.15),
    "k": (int, 20),
    "selection_runs": (int, 10),
    "selection_trees": (int, 200),
    "forest_trees": (int, 200),
    "min_samples_leaf": (int, 2),
    "max_features": (str, "third"),
    "folds": (int, 8),
    "repeats": (int, 2),
    "global_selection": (lambda v: str(v).lower() in ("1", "true", "yes", "on"), False),
    "noise": (float, 5.0),
    "n": (int, 1000),
    "classic_laws": (lambda v: str(v).lower() in ("1", "true", "yes", "on"), False),
    "border": (str, "symmetric"),
    "connectivity": (int, 8),
    "half_window": (int, 7),
    "bins": (int, 256),
}

# values the "benchmark" preset changes (see ensemble.benchmark_spec)
BENCHMARK_PRESET = {"batch_size": 64, "base_lr": 5e-3, "early_stop_patience": 15, "max_epochs": 300,
                    "selection_runs": 3, "selection_trees": 50, "forest_trees": 100}


def read_config_file(path):
    values = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def resolve_config(file_values, cli_values):
    """Merge defaults, preset, file values and CLI values (highest wins)."""
    unknown = (set(file_values) | set(cli_values)) - set(CONFIG_KEYS)
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    raw = {k: d for k, (_, d) in CONFIG_KEYS.items()}
    preset = cli_values.get("preset", file_values.get("preset", "default"))
    if preset == "benchmark":
        raw.update(BENCHMARK_PRESET)
    elif preset != "default":
        raise UsageError(f"unknown preset {preset!r} (expected default or benchmark)")
    raw.update(file_values)
    raw.update(cli_values)
    cfg = {}
    for k, v in raw.items():
        parse = CONFIG_KEYS[k][0]
        try:
            cfg[k] = parse(v) if isinstance(v, str) else v
        except ValueError:
            raise UsageError(f"bad value for {k}: {v!r}") from None
    return cfg


def _max_features(text):
    if text in ("third", "all"):
        return None if text == "all" else text
    try:
        return float(text) if "." in text else int(text)
    except ValueError:
        raise UsageError(f"bad max_features {text!r} (third, all, an integer or a fraction)") from None


def model_spec(cfg, seed):
    try:
        train = nn.TrainConfig(
            max_epochs=cfg["max_epochs"], batch_size=cfg["batch_size"], alpha=cfg["alpha"],
            huber_delta=cfg["huber_delta"], clip_norm=cfg["clip_norm"], lr=cfg["base_lr"],
            weight_decay=cfg["weight_decay"], scheduler_factor=cfg["scheduler_factor"],
            early_stop_patience=cfg["early_stop_patience"], val_fraction=cfg["val_fraction"])
        ens = E.EnsembleConfig(n_members=cfg["members"], base_lr=cfg["base_lr"], lr_spread=cfg["lr_spread"],
                               patiences=cfg["patiences"], train=train, hidden=cfg["hidden"],
                               dropout=cfg["dropout"], slope=cfg["slope"],
                               residual_span=cfg["residual_span"], seed=seed)
        mf = _max_features(cfg["max_features"])
        forest = rf.ForestParams(n_trees=cfg["forest_trees"], min_samples_leaf=cfg["min_samples_leaf"],
                                 max_features=mf)
        selection = E.SelectionSpec(cfg["k"], cfg["selection_runs"],
                                    replace(forest, n_trees=cfg["selection_trees"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return E.ModelSpec(ens, forest, selection, cfg["global_selection"])


# ---------------------------------------------------------------- helpers

def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def check_inputs(paths):
    for p in paths:
        if not os.path.isfile(p) or not os.access(p, os.R_OK):
            raise UsageError(f"cannot read input file: {p}")


def write_manifest(out, command, cfg, inputs, seed, outputs, argv):
    manifest = {
        "subcommand": command,
        "argv": list(argv),
        "config": {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(cfg.items())},
        "inputs": {os.path.basename(p): file_digest(p) for p in inputs},
        "seed": seed,
        "tool_version": __version__,
        "outputs": sorted(outputs),
    }
    dio.atomic_write(out / "manifest.json", json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _load_dataset(path, cfg, require_target=True):
    check_inputs([path])
    return dio.load_csv(path, cfg["target"], cfg["id_column"], require_target)


# ---------------------------------------------------------------- subcommands

def _extract_one(path, options):
    img = dio.load_image(path)
    return extract_all(img, options=options).values()


def cmd_extract(args, cfg, out):
    check_inputs(args.images)
    options = TextureOptions(border=cfg["border"], connectivity=cfg["connectivity"], bins=cfg["bins"],
                             half_window=cfg["half_window"], classic_laws=cfg["classic_laws"])
    failures = []

    def guarded(path):
        try:
            return _extract_one(path, options)
        except DataError as exc:
            return exc

    if args.jobs == 1:
        rows = [guarded(p) for p in args.images]
    else:
        rows = Parallel(n_jobs=args.jobs)(delayed(guarded)(p) for p in args.images)
    for path, row in zip(args.images, rows):
        if isinstance(row, Exception):
            failures.append(f"{path}: {row}")
    if failures:
        for f in failures:
            print(f"error: {f}", file=sys.stderr)
        raise DataError(f"{len(failures)} image(s) could not be processed")
    ids = [Path(p).stem for p in args.images]
    ds = dio.Dataset(dio.TEXTURE_COLUMNS, np.array(rows, dtype=float), None, ids)
    dio.save_csv(ds, out / "features.csv", cfg["id_column"])
    return args.images, ["features.csv"]


def cmd_select(args, cfg, out):
    ds = _load_dataset(args.dataset, cfg)
    spec = model_spec(cfg, args.seed)
    k = min(cfg["k"], len(ds.names))
    rep = rf.select_features(ds.X, ds.y, k=k, runs=cfg["selection_runs"], params=spec.selection.forest,
                             seed=args.seed, names=ds.names, n_jobs=args.jobs)
    rank = {j: r + 1 for r, j in enumerate(rep.ranking())}
    chosen = set(rep.selected)
    dio.write_table(out / "importance.csv", ["feature", "mean", "std", "rank", "selected"],
                    [[ds.names[j], float(rep.mean[j]), float(rep.std[j]), rank[j], int(j in chosen)]
                     for j in range(len(ds.names))])
    dio.write_table(out / "importance_chart.csv", ["feature", "value", "error"],
                    [[ds.names[j], float(rep.mean[j]), float(rep.std[j])] for j in rep.ranking()])
    dio.atomic_write(out / "selected.txt", "\n".join(rep.selected_names) + "\n")
    if rep.degenerate:
        print("warning: some forests made no splits; their importances are zero", file=sys.stderr)
    print(f"selected {len(rep.selected)} of {len(ds.names)} features")
    return [args.dataset], ["importance.csv", "importance_chart.csv", "selected.txt"]


def cmd_train(args, cfg, out):
    ds = _load_dataset(args.dataset, cfg)
    spec = model_spec(cfg, args.seed)
    fit, val = E.split_validation(np.arange(len(ds)), cfg["val_fraction"], args.seed)
    ens = E.fit_pipeline(ds.X, ds.y, ds.names, fit, val, spec, seed=args.seed, n_jobs=args.jobs)
    dio.save_model(dio.model_artifact(ens, spec.to_dict()), out / "model.json")
    rows = []
    for member, hist in enumerate(ens.histories):
        rows += [[member, h["epoch"], h["train_loss"], h["val_loss"], h["lr"]] for h in hist]
    dio.write_table(out / "training_report.csv", ["member", "epoch", "train_loss", "val_loss", "lr"], rows)
    cols = [ds.names.index(f) for f in ens.features]
    pred = ens.predict(ds.X[np.ix_(val, cols)])
    msg = (f"trained {len(ens.networks)} member(s) on {len(fit)} rows, {len(ens.features)} features; "
           f"validation RMSE {E.rmse(ds.y[val], pred):.3f} deg")
    print(msg)
    dio.atomic_write(out / "training_summary.txt", msg + "\n")
    return [args.dataset], ["model.json", "training_report.csv", "training_summary.txt"]


def cmd_predict(args, cfg, out):
    check_inputs([args.model])
    doc = dio.load_model(args.model)
    ens = dio.ensemble_from_artifact(doc)
    ds = _load_dataset(args.dataset, cfg, require_target=False)
    missing = [f for f in ens.features if f not in ds.names]
    if missing:
        raise SchemaMismatch(f"dataset lacks model feature(s): {', '.join(missing)}")
    cols = [ds.names.index(f) for f in ens.features]
    pred = ens.predict(ds.X[:, cols])
    outside = (pred < 0) | (pred > 180)
    if outside.any():
        print(f"warning: {int(outside.sum())} prediction(s) outside 0-180 deg (reported unclamped)",
              file=sys.stderr)
    dio.write_table(out / "predictions.csv", [cfg["id_column"], "prediction", "outside_physical_range"],
                    [[i, float(p), int(o)] for i, p, o in zip(ds.ids, pred, outside)])
    return [args.model, args.dataset], ["predictions.csv"]


def cmd_cv(args, cfg, out):
    ds = _load_dataset(args.dataset, cfg)
    spec = model_spec(cfg, args.seed)
    folds, repeats = cfg["folds"], cfg["repeats"]
    kinds = E.MODEL_KINDS if args.compare else ("ensemble",)
    comp = E.compare_models(ds.X, ds.y, ds.names, spec, folds, repeats, args.seed, n_jobs=args.jobs,
                            kinds=kinds)
    csv_text = "".join(r.to_csv() if i == 0 else r.to_csv().split("\n", 1)[1]
                       for i, r in enumerate(comp.reports.values()))
    dio.atomic_write(out / "cv_report.csv", csv_text)
    lines = [comp.summary()]
    for r in comp.reports.values():
        _, pooled = r.out_of_fold(ds.y)
        lines.append(f"{E.MODEL_LABELS[r.model]}: out-of-fold R^2 {pooled:.4f}; folds digest {r.digest[:16]}")
    dio.atomic_write(out / "cv_summary.txt", "\n".join(lines) + "\n")
    print(lines[0])
    outputs = ["cv_report.csv", "cv_summary.txt"]
    if args.compare:
        dio.write_table(out / "comparison.csv", *comp.table())
        dio.write_table(out / "comparison_chart.csv", *comp.chart_data())
        outputs += ["comparison.csv", "comparison_chart.csv"]
    return [args.dataset], outputs


def cmd_synth(args, cfg, out):
    try:
        ds = dio.generate_synthetic(cfg["n"], cfg["noise"], args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    dio.save_csv(ds, out / "synthetic.csv", cfg["id_column"])
    return [], ["synthetic.csv"]


COMMANDS = {"extract": cmd_extract, "select": cmd_select, "train": cmd_train,
            "predict": cmd_predict, "cv": cmd_cv, "synth": cmd_synth}


# ---------------------------------------------------------------- argument parsing

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="out", help="output directory (created if missing)")
    common.add_argument("--seed", type=int, default=0, help="master seed for every random choice")
    common.add_argument("--jobs", type=int, default=1, help="worker processes; output does not depend on it")
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any configuration key (repeatable)")
    common.add_argument("--preset", choices=["default", "benchmark"], help="named configuration preset")

    parser = argparse.ArgumentParser(prog="wettability", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", parents=[common], help="texture features from graymap images")
    p.add_argument("images", nargs="+")
    p.add_argument("--classic-laws", action="store_true", help="use the zero-sum edge vector")
    p.add_argument("--border", choices=["symmetric", "zero"])
    p.add_argument("--connectivity", type=int, choices=[4, 8])

    p = sub.add_parser("select", parents=[common], help="random-forest feature importance")
    p.add_argument("dataset")
    p.add_argument("--k", type=int)
    p.add_argument("--runs", type=int, dest="selection_runs")
    p.add_argument("--trees", type=int, dest="selection_trees")

    p = sub.add_parser("train", parents=[common], help="train a network ensemble")
    p.add_argument("dataset")
    p.add_argument("--k", type=int)
    p.add_argument("--members", type=int)
    p.add_argument("--max-epochs", type=int, dest="max_epochs")

    p = sub.add_parser("predict", parents=[common], help="apply a saved model")
    p.add_argument("model")
    p.add_argument("dataset")

    p = sub.add_parser("cv", parents=[common], help="repeated k-fold evaluation")
    p.add_argument("dataset")
    p.add_argument("--folds", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--members", type=int)
    p.add_argument("--max-epochs", type=int, dest="max_epochs")
    p.add_argument("--compare", action="store_true", help="also evaluate a single network and a random forest")
    p.add_argument("--global-selection", action="store_true", dest="global_selection",
                   help="select features once on all rows before the folds")

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--n", type=int)
    p.add_argument("--noise", type=float)
    return parser


FLAG_KEYS = ("k", "selection_runs", "selection_trees", "members", "max_epochs", "folds", "repeats",
             "n", "noise", "border", "connectivity", "preset")
SWITCH_KEYS = ("classic_laws", "global_selection")


def cli_values(args):
    values = {}
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip()] = value.strip()
    for key in FLAG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = str(v)
    for key in SWITCH_KEYS:
        if getattr(args, key, False):
            values[key] = "true"
    return values


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        file_values = read_config_file(args.config) if args.config else {}
        cfg = resolve_config(file_values, cli_values(args))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        inputs, outputs = COMMANDS[args.command](args, cfg, out)
        write_manifest(out, args.command, cfg, inputs, args.seed, outputs, argv)
        return EXIT_OK
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:  # noqa: BLE001 - last-resort classification for the exit-code contract
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
