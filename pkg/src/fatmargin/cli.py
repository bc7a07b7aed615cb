"""Command-line interface: train, predict, cv, grid, memberships, export, replay.

Exit status is 0 on success, 2 for configuration or input problems and 3
when the LP solver fails. Every run writes ``<output>.manifest.json`` next
to its main output; ``fatmargin replay`` reruns it from that file.
"""

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .data_io import (bundled_dataset_path, export_closed_form, load_csv, load_model, save_model,
                      write_atomic)
from .errors import ConfigurationError, DataFormatError, StructureError, TrainingError
from .evaluation import (DEFAULT_C_GRID, DEFAULT_GAMMA_GRID, CVConfig, cross_validate, fit_model,
                         grid_search, stratified_split)
from .membership import compute_memberships
from .mcm import RANK_TOLERANCE, SV_TOLERANCE
from .dataset import StandardizationParams

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

logger = logging.getLogger("fatmargin")


class UsageError(Exception):
    pass


def _label_column(text):
    if text is None:
        return None
    if text.lower() == "none":
        return "none"
    try:
        return int(text)
    except ValueError:
        return text


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def _resolve_data(path):
    if os.path.exists(path):
        return os.path.abspath(path)
    try:
        return bundled_dataset_path(path)
    except ConfigurationError:
        raise ConfigurationError(f"data file not found: {path}") from None


def _load(args, path=None, require_two_classes=True):
    label = _label_column(args.label_column)
    return load_csv(_resolve_data(path or args.data), None if label == "none" else label,
                    args.positive_label, require_two_classes=require_two_classes)


def _sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _add_data(p, required=True):
    p.add_argument("--data", required=required, help="CSV file or name of a bundled dataset (e.g. haberman)")
    p.add_argument("--label-column", default="-1", help="label column index or name, or 'none' (default: last)")
    p.add_argument("--positive-label", default=None, help="raw label value mapped to +1")


def _add_model(p):
    p.add_argument("--kind", choices=("linear-hard", "linear", "kernel"), default="linear")
    p.add_argument("--fuzzy", action=argparse.BooleanOptionalAction, default=False,
                   help="weight slacks by fuzzy memberships")
    p.add_argument("--C", type=float, default=1.0, dest="C")
    p.add_argument("--kernel", choices=("gaussian", "linear"), default="gaussian")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--delta", type=float, default=None, help="membership delta (default: from class radii)")
    p.add_argument("--sv-tol", type=float, default=SV_TOLERANCE, dest="sv_tol")
    p.add_argument("--rank-tol", type=float, default=RANK_TOLERANCE, dest="rank_tol",
                   help="pivoted-Cholesky threshold for expansion candidates; 0 disables")
    p.add_argument("--upper-slack-sign", type=float, choices=(1.0, -1.0), default=1.0, dest="upper_slack_sign")
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = argparse.ArgumentParser(prog="fatmargin", description="Minimal Complexity Machine classifiers")
    parser.add_argument("--version", action="version", version=f"fatmargin {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write it as JSON")
    _add_data(p)
    _add_model(p)
    p.add_argument("--train-fraction", type=float, default=1.0,
                   help="train on a stratified fraction and report accuracy on the rest")
    p.add_argument("--out", default="model.json")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score a CSV with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--label-column", default=None,
                   help="label column (default: last column if the file has one more column than the model)")
    p.add_argument("--positive-label", default=None)
    p.add_argument("--out", default="predictions.csv")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cv", help="stratified k-fold cross-validation")
    _add_data(p)
    _add_model(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--out", default="cv_report.json")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("grid", help="grid search over C (and gamma) with cross-validation")
    _add_data(p)
    _add_model(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--C-grid", type=_float_list, default=None, dest="C_grid")
    p.add_argument("--gamma-grid", type=_float_list, default=None, dest="gamma_grid")
    p.add_argument("--config", default=None, help="JSON file with grid settings; flags given explicitly win")
    p.add_argument("--out", default="grid_report.json")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("memberships", help="write fuzzy memberships of a training set")
    _add_data(p)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--out", default="memberships.csv")
    p.set_defaults(func=cmd_memberships)

    p = sub.add_parser("export", help="closed-form expression of a Gaussian kernel model")
    p.add_argument("--model", required=True)
    p.add_argument("--out", default="model.txt")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("replay", help="rerun a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="write the main output here instead of the recorded path")
    p.set_defaults(func=cmd_replay)
    return parser


def _config(args, **extra):
    if args.kind == "kernel" and args.kernel == "gaussian" and args.gamma is None and "gamma_grid" not in extra:
        raise ConfigurationError("--gamma is required for a Gaussian kernel")
    return CVConfig(
        kind=args.kind, folds=getattr(args, "folds", 5), seed=args.seed,
        C=None if args.kind == "linear-hard" else args.C, gamma=args.gamma, kernel=args.kernel,
        fuzzy=args.fuzzy, delta=args.delta, sv_tolerance=args.sv_tol,
        rank_tolerance=args.rank_tol if args.rank_tol > 0 else None,
        upper_slack_sign=args.upper_slack_sign, standardize=args.standardize, **extra,
    )


def _accuracy(model, X, y):
    return 100.0 * float(np.mean(model.predict(X) == y))


def cmd_train(args):
    ds = _load(args)
    config = _config(args)
    if args.train_fraction < 1.0:
        train, test = stratified_split(ds.labels, args.train_fraction, args.seed)
    else:
        train, test = np.arange(ds.n_samples), np.zeros(0, dtype=np.int64)
    X, y = ds.features[train], ds.labels[train]
    model = fit_model(config, X, y)
    model.provenance.update(dataset=ds.name, C=config.C, gamma=config.gamma, seed=args.seed,
                            kind=args.kind, fuzzy=args.fuzzy)
    save_model(model, args.out)
    sv = "n/a" if model.n_support is None else str(model.n_support)
    line = (f"h={model.h:.6f} objective={model.objective:.6f} support_vectors={sv} "
            f"train_accuracy={_accuracy(model, X, y):.2f}%")
    result = {"h": model.h, "objective": model.objective, "support_vectors": model.n_support,
              "train_accuracy": _accuracy(model, X, y)}
    if test.size:
        acc = _accuracy(model, ds.features[test], ds.labels[test])
        line += f" holdout_accuracy={acc:.2f}% (n={test.size})"
        result["holdout_accuracy"] = acc
    print(line)
    return [args.out], result


def _csv_is_empty(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if any(f.strip() for f in r)]
    if not rows:
        return True
    if len(rows) == 1:
        try:
            [float(f) for f in rows[0]]
        except ValueError:
            return True  # header only
    return False


def cmd_predict(args):
    model = load_model(args.model)
    path = _resolve_data(args.data)
    if _csv_is_empty(path):
        write_atomic(args.out, "")
        print("0 samples")
        return [args.out], {"n": 0}
    n = model.standardization.mean.size
    label = _label_column(args.label_column)
    if label is None:
        with open(path, newline="") as fh:
            width = len(next(r for r in csv.reader(fh) if any(f.strip() for f in r)))
        if width not in (n, n + 1):
            raise StructureError(f"model expects {n} features, input has {width} columns")
        label = -1 if width == n + 1 else "none"
    ds = load_csv(path, None if label == "none" else label, args.positive_label, require_two_classes=False)
    if ds.n_features != n:
        raise StructureError(f"model expects {n} features, input has {ds.n_features}")
    scores = model.decision_function(ds.features)
    labels = np.where(scores >= 0, 1, -1)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "score", "label"])
    for i, (s, l) in enumerate(zip(scores, labels)):
        w.writerow([i, repr(float(s)), int(l)])
    write_atomic(args.out, buf.getvalue())
    result = {"n": int(ds.n_samples)}
    if label != "none":
        acc = 100.0 * float(np.mean(labels == ds.labels))
        result["accuracy"] = acc
        print(f"{ds.n_samples} samples, accuracy={acc:.2f}%")
    else:
        print(f"{ds.n_samples} samples")
    return [args.out], result


def _rows_path(out):
    return os.path.splitext(out)[0] + ".csv"


def cmd_cv(args):
    ds = _load(args)
    report = cross_validate(ds, _config(args))
    write_atomic(args.out, report.to_json())
    write_atomic(_rows_path(args.out), report.to_csv())
    sys.stdout.write(report.to_table())
    status = report.test_accuracy
    return [args.out, _rows_path(args.out)], {"mean_accuracy": status["mean"], "all_folds_ok": report.ok}


def _grid_settings(args):
    settings = {}
    if args.config:
        with open(args.config) as fh:
            try:
                settings = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"{args.config}: invalid JSON: {exc}") from exc
        if not isinstance(settings, dict):
            raise ConfigurationError(f"{args.config}: expected a JSON object")
    C_grid = args.C_grid if args.C_grid is not None else settings.get("C_grid", list(DEFAULT_C_GRID))
    gamma_grid = args.gamma_grid if args.gamma_grid is not None else settings.get("gamma_grid", list(DEFAULT_GAMMA_GRID))
    if not C_grid or not gamma_grid:
        raise ConfigurationError("grids must be non-empty")
    return tuple(float(c) for c in C_grid), tuple(float(g) for g in gamma_grid)


def cmd_grid(args):
    ds = _load(args)
    C_grid, gamma_grid = _grid_settings(args)
    args.C_grid, args.gamma_grid = list(C_grid), list(gamma_grid)
    config = _config(args, C_grid=C_grid, gamma_grid=gamma_grid)
    result = grid_search(ds, config)
    write_atomic(args.out, result.to_json())
    write_atomic(_rows_path(args.out), result.best.to_csv())
    sys.stdout.write(result.to_table())
    sys.stdout.write(result.best.to_table())
    return [args.out, _rows_path(args.out)], {
        "best_C": result.best_C, "best_gamma": result.best_gamma,
        "mean_accuracy": result.best.test_accuracy["mean"],
    }


def cmd_memberships(args):
    ds = _load(args)
    X = ds.features
    if args.standardize:
        X = StandardizationParams.fit(X).transform(X)
    mv = compute_memberships(X, ds.labels, args.delta)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample_index", "label", "distance", "s_i"])
    for i, (lab, d, s) in enumerate(zip(ds.labels, mv.distances, mv.values)):
        w.writerow([i, int(lab), repr(float(d)), repr(float(s))])
    write_atomic(args.out, buf.getvalue())
    print(f"{ds.n_samples} memberships, delta={mv.delta:.6g}, min s={mv.values.min():.6f}")
    return [args.out], {"delta": float(mv.delta)}


def cmd_export(args):
    model = load_model(args.model)
    text = export_closed_form(model)
    write_atomic(args.out, text)
    sys.stdout.write(text)
    return [args.out], {"terms": model.n_support}


def _manifest_path(out):
    return out + ".manifest.json"


def _options(args):
    opts = {k: v for k, v in vars(args).items() if k not in ("func", "verbose")}
    for key in ("data", "model", "config"):
        if opts.get(key) and os.path.exists(opts[key]):
            opts[key] = os.path.abspath(opts[key])
    if opts.get("out"):
        opts["out"] = os.path.abspath(opts["out"])
    return opts


def _argv(opts):
    """Rebuild an argument vector from resolved options."""
    parser = build_parser()
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[opts["command"]]
    argv = [opts["command"]]
    for action in sub._actions:
        if not action.option_strings or action.dest not in opts:
            continue
        value = opts[action.dest]
        flag = next(s for s in action.option_strings if s.startswith("--"))
        if isinstance(action, argparse.BooleanOptionalAction):
            argv.append(flag if value else "--no-" + flag[2:])
        elif value is None:
            continue
        elif isinstance(value, list):
            argv += [flag, ",".join(repr(float(v)) for v in value)]
        else:
            argv += [flag, str(value)]
    return argv


def write_manifest(args, outputs, result):
    opts = _options(args)
    inputs = {}
    for key in ("data", "model", "config"):
        path = opts.get(key)
        if key == "data" and path:
            path = _resolve_data(path)
        if path and os.path.isfile(path):
            inputs[key] = {"path": path, "sha256": _sha256(path)}
    manifest = {
        "tool": "fatmargin",
        "version": __version__,
        "subcommand": args.command,
        "options": opts,
        "argv": _argv(opts),
        "seed": opts.get("seed"),
        "inputs": inputs,
        "outputs": {os.path.abspath(p): _sha256(p) for p in outputs},
        "result": result,
    }
    path = _manifest_path(outputs[0])
    write_atomic(path, json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return path


def cmd_replay(args):
    try:
        with open(args.manifest) as fh:
            manifest = json.load(fh)
        argv = list(manifest["argv"])
        recorded = manifest.get("result", {})
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigurationError(f"cannot read manifest {args.manifest}: {exc}") from exc
    if argv[0] == "replay":
        raise ConfigurationError("manifest records a replay")
    for key, entry in manifest.get("inputs", {}).items():
        if os.path.isfile(entry["path"]) and _sha256(entry["path"]) != entry["sha256"]:
            logger.warning("input %s (%s) changed since the recorded run", key, entry["path"])
    if args.out:
        i = argv.index("--out")
        argv[i + 1] = os.path.abspath(args.out)
    sub = build_parser().parse_args(argv)
    outputs, result = sub.func(sub)
    write_manifest(sub, outputs, result)
    same = json.dumps(result, sort_keys=True) == json.dumps(recorded, sort_keys=True)
    print("replay matches recorded result" if same else "replay result differs from recorded result")
    return None if same else EXIT_SOLVER


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            code = cmd_replay(args)
            return EXIT_OK if code is None else code
        outputs, result = args.func(args)
        write_manifest(args, outputs, result)
    except TrainingError as exc:
        print(f"fatmargin: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigurationError, DataFormatError, StructureError, OSError) as exc:
        print(f"fatmargin: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
