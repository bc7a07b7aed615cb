"""Stratified k-fold cross-validation and grid search over (C, gamma)."""

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, TrainingError
from .kernels import KernelSpec
from .mcm import RANK_TOLERANCE, SV_TOLERANCE, train_kernel, train_linear

logger = logging.getLogger(__name__)

KINDS = ("linear-hard", "linear", "kernel")
DEFAULT_C_GRID = (1e-2, 1e-1, 1.0, 10.0, 1e2, 1e3)
DEFAULT_GAMMA_GRID = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0)
REPORT_VERSION = 1


@dataclass(frozen=True)
class CVConfig:
    kind: str = "linear"
    folds: int = 5
    seed: int = 0
    C: float | None = 1.0
    gamma: float | None = None
    kernel: str = "gaussian"
    fuzzy: bool = True
    delta: float | None = None
    sv_tolerance: float = SV_TOLERANCE
    rank_tolerance: float | None = RANK_TOLERANCE
    upper_slack_sign: float = 1.0
    standardize: bool = True
    C_grid: tuple = DEFAULT_C_GRID
    gamma_grid: tuple = DEFAULT_GAMMA_GRID

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.folds < 2:
            raise ConfigurationError("need at least 2 folds")
        if self.kind != "linear-hard" and self.C is not None and not self.C > 0:
            raise ConfigurationError("C must be positive")

    def kernel_spec(self):
        if self.kernel == "linear":
            return KernelSpec.linear()
        if self.gamma is None:
            raise ConfigurationError("Gaussian kernel needs gamma")
        return KernelSpec.gaussian(self.gamma)

    def to_dict(self):
        d = asdict(self)
        d["C_grid"] = list(self.C_grid)
        d["gamma_grid"] = list(self.gamma_grid)
        return d


def fit_model(config, X, y):
    """Train the model described by ``config`` on (X, y)."""
    common = dict(fuzzy=config.fuzzy, delta=config.delta, standardize=config.standardize,
                  upper_slack_sign=config.upper_slack_sign)
    if config.kind == "linear-hard":
        return train_linear(X, y, None, standardize=config.standardize)
    if config.kind == "linear":
        return train_linear(X, y, config.C, **common)
    return train_kernel(X, y, config.kernel_spec(), config.C, sv_tolerance=config.sv_tolerance,
                        rank_tolerance=config.rank_tolerance, **common)


def stratified_kfold(labels, k, seed):
    """Split indices into ``k`` folds keeping class proportions.

    Each class is shuffled with ``seed`` and dealt round-robin; dealing for
    the second class continues where the first stopped, so fold sizes differ
    by at most one. Returns sorted index arrays.
    """
    y = np.asarray(getattr(labels, "labels", labels))
    if k < 2:
        raise ConfigurationError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    offset = 0
    for cls in (1, -1):
        idx = np.flatnonzero(y == cls)
        if idx.size < k:
            raise ConfigurationError(f"class {cls:+d} has {idx.size} samples, fewer than {k} folds")
        idx = idx[rng.permutation(idx.size)]
        for pos, i in enumerate(idx):
            folds[(offset + pos) % k].append(int(i))
        offset = (offset + idx.size) % k
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


def stratified_split(labels, train_fraction, seed):
    """(train, test) index arrays holding ``train_fraction`` of each class for training."""
    if not 0.0 < train_fraction <= 1.0:
        raise ConfigurationError("train fraction must lie in (0, 1]")
    y = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in (1, -1):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        cut = int(round(train_fraction * idx.size))
        train.extend(idx[:cut].tolist())
        test.extend(idx[cut:].tolist())
    return np.array(sorted(train), dtype=np.int64), np.array(sorted(test), dtype=np.int64)


@dataclass
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    test_accuracy: float | None
    train_accuracy: float | None
    sv_count: int | None
    status: str = "ok"
    message: str = ""


def _stats(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return {"mean": None, "std": None, "n": 0}
    mean = float(np.mean(vals))
    std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
    return {"mean": mean, "std": std, "n": len(vals)}


@dataclass
class CVReport:
    dataset: str
    config: CVConfig
    folds: list
    metadata: dict = field(default_factory=dict)

    @property
    def ok(self):
        return all(f.status == "ok" for f in self.folds)

    @property
    def test_accuracy(self):
        return _stats([f.test_accuracy for f in self.folds])

    @property
    def train_accuracy(self):
        return _stats([f.train_accuracy for f in self.folds])

    @property
    def sv_count(self):
        return _stats([f.sv_count for f in self.folds])

    def to_dict(self):
        return {
            "report_version": REPORT_VERSION,
            "dataset": self.dataset,
            "config": self.config.to_dict(),
            "folds": [asdict(f) for f in self.folds],
            "aggregate": {
                "test_accuracy": self.test_accuracy,
                "train_accuracy": self.train_accuracy,
                "sv_count": self.sv_count,
            },
            "metadata": dict(self.metadata),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def rows(self):
        """Machine-readable rows: dataset, kind, C, gamma, fold, acc, sv_count, seed."""
        cfg = self.config
        out = []
        for f in self.folds:
            out.append([self.dataset, cfg.kind, cfg.C, cfg.gamma, f.fold, f.test_accuracy,
                        "n/a" if f.sv_count is None else f.sv_count, cfg.seed])
        return out

    def to_csv(self):
        lines = ["dataset,kind,C,gamma,fold,acc,sv_count,seed"]
        for r in self.rows():
            lines.append(",".join("" if v is None else (repr(v) if isinstance(v, float) else str(v)) for v in r))
        return "\n".join(lines) + "\n"

    def to_table(self):
        cfg = self.config
        lines = [f"{self.dataset}: {cfg.kind} MCM, {cfg.folds}-fold CV, C={cfg.C}, gamma={cfg.gamma}, "
                 f"fuzzy={cfg.fuzzy}, seed={cfg.seed}",
                 f"{'fold':>4}  {'test %':>8}  {'train %':>8}  {'SVs':>5}  status"]
        for f in self.folds:
            acc = "-" if f.test_accuracy is None else f"{f.test_accuracy:8.2f}"
            tr = "-" if f.train_accuracy is None else f"{f.train_accuracy:8.2f}"
            sv = "n/a" if f.sv_count is None else str(f.sv_count)
            lines.append(f"{f.fold:>4}  {acc:>8}  {tr:>8}  {sv:>5}  {f.status} {f.message}".rstrip())
        t, s = self.test_accuracy, self.sv_count
        if t["mean"] is not None:
            lines.append(f"test accuracy {t['mean']:.2f} +- {t['std']:.2f}")
        if s["mean"] is not None:
            lines.append(f"support vectors {s['mean']:.2f} +- {s['std']:.2f}")
        return "\n".join(lines) + "\n"


def _accuracy(model, X, y):
    return 100.0 * float(np.mean(model.predict(X) == y))


def cross_validate(dataset, config, folds=None):
    """k-fold CV; scaling, memberships and training all see only the training split."""
    X, y = dataset.features, dataset.labels
    if folds is None:
        folds = stratified_kfold(y, config.folds, config.seed)
    results = []
    everything = np.arange(y.size)
    for k, test in enumerate(folds):
        train = np.setdiff1d(everything, test)
        try:
            model = fit_model(config, X[train], y[train])
        except (TrainingError, ConfigurationError) as exc:
            logger.warning("fold %d failed: %s", k, exc)
            results.append(FoldResult(k, train.size, test.size, None, None, None, "failed", str(exc)))
            continue
        results.append(FoldResult(
            k, train.size, test.size,
            _accuracy(model, X[test], y[test]),
            _accuracy(model, X[train], y[train]),
            model.n_support,
        ))
    meta = {"std": "sample (ddof=1)", "selection": "fixed"}
    return CVReport(dataset.name, config, results, meta)


@dataclass
class GridResult:
    best_C: float
    best_gamma: float | None
    best: CVReport
    table: list  # one dict per grid point, in grid order

    def to_dict(self):
        return {"best": {"C": self.best_C, "gamma": self.best_gamma}, "table": self.table,
                "best_report": self.best.to_dict()}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def to_table(self):
        lines = [f"{'C':>10}  {'gamma':>10}  {'test %':>8}  {'std':>6}  {'SVs':>7}"]
        for row in self.table:
            g = "-" if row["gamma"] is None else f"{row['gamma']:g}"
            acc = "-" if row["mean_accuracy"] is None else f"{row['mean_accuracy']:8.2f}"
            std = "-" if row["std_accuracy"] is None else f"{row['std_accuracy']:6.2f}"
            sv = "n/a" if row["mean_sv"] is None else f"{row['mean_sv']:7.2f}"
            lines.append(f"{row['C']:>10g}  {g:>10}  {acc:>8}  {std:>6}  {sv:>7}")
        lines.append(f"best: C={self.best_C:g}" + ("" if self.best_gamma is None else f", gamma={self.best_gamma:g}"))
        return "\n".join(lines) + "\n"


def worker_count():
    try:
        return max(1, int(os.environ.get("FATMARGIN_THREADS", "1")))
    except ValueError:
        return 1


def grid_search(dataset, config, workers=None):
    """Evaluate every (C, gamma) on one shared fold split and pick the best.

    The same folds serve for selection and for the reported accuracy (no
    nested CV). Highest mean test accuracy wins; ties go to the smaller C,
    then the smaller gamma. Points where any fold failed rank last.
    """
    if not config.C_grid or (config.kind == "kernel" and config.kernel == "gaussian" and not config.gamma_grid):
        raise ConfigurationError("grids must be non-empty")
    Cs = sorted(set(float(c) for c in config.C_grid))
    gammas = sorted(set(float(g) for g in config.gamma_grid)) if (
        config.kind == "kernel" and config.kernel == "gaussian") else [None]
    points = [(C, g) for C in Cs for g in gammas]
    folds = stratified_kfold(dataset.labels, config.folds, config.seed)

    def run(point):
        C, g = point
        return cross_validate(dataset, replace(config, C=C, gamma=g), folds)

    workers = workers or worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run, points))
    else:
        reports = [run(p) for p in points]

    def key(item):
        (C, g), rep = item
        acc = rep.test_accuracy["mean"]
        score = acc if rep.ok and acc is not None else -math.inf
        return (-score, C, -math.inf if g is None else g)

    (best_C, best_g), best = min(zip(points, reports), key=key)
    best.metadata["selection"] = "non-nested"
    table = []
    for (C, g), rep in zip(points, reports):
        table.append({
            "C": C, "gamma": g,
            "mean_accuracy": rep.test_accuracy["mean"], "std_accuracy": rep.test_accuracy["std"],
            "mean_sv": rep.sv_count["mean"], "failed_folds": sum(f.status != "ok" for f in rep.folds),
        })
    return GridResult(best_C, best_g, best, table)
