"""CSV ingestion, model files and closed-form export."""

import csv
import json
import os
import tempfile
from importlib import resources

import numpy as np

from .dataset import Dataset, StandardizationParams
from .errors import ConfigurationError, DataFormatError
from .kernels import GAUSSIAN, KernelSpec
from .mcm import KernelModel, LinearModel

MODEL_FORMAT = "fatmargin-model"
MODEL_VERSION = 1


def bundled_dataset_path(name):
    """Path of a CSV shipped in ``fatmargin/data`` (e.g. ``"haberman"``)."""
    ref = resources.files("fatmargin") / "data" / f"{name}.csv"
    if not ref.is_file():
        raise ConfigurationError(f"no bundled dataset called {name!r}")
    return str(ref)


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def _label_key(value):
    return (0, float(value), value) if _is_number(value) else (1, 0.0, value)


def _same_label(a, b):
    if a == b:
        return True
    return _is_number(a) and _is_number(b) and float(a) == float(b)


def load_csv(path, label_column=-1, positive_label=None, delimiter=",", header=None,
             require_two_classes=True, name=None):
    """Read a numeric CSV with one label column into a Dataset.

    ``label_column`` is an index (negative counts from the end), a header
    name, or None for unlabelled files (labels are then all +1). The header
    is detected from the first row unless ``header`` is given. Without
    ``positive_label``, ``1`` is positive for {-1, 1} and {0, 1} labels and
    otherwise the largest label value in sort order (numbers numerically).
    """
    with open(path, newline="") as fh:
        rows = [(i + 1, row) for i, row in enumerate(csv.reader(fh, delimiter=delimiter))
                if any(field.strip() for field in row)]
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    first = [f.strip() for f in rows[0][1]]
    width = len(first)
    if isinstance(label_column, str):
        if label_column not in first:
            raise ConfigurationError(f"{path}: no column named {label_column!r}")
        label_index = first.index(label_column)
        header = True
    elif label_column is None:
        label_index = None
    else:
        label_index = label_column % width if -width <= label_column < width else None
        if label_index is None:
            raise ConfigurationError(f"{path}: label column {label_column} out of range for {width} columns")
    feature_idx = [j for j in range(width) if j != label_index]
    if header is None:
        header = any(not _is_number(first[j]) for j in feature_idx)
    names = [first[j] for j in feature_idx] if header else None
    body = rows[1:] if header else rows
    feats, raw_labels, problems = [], [], []
    for line, row in body:
        row = [f.strip() for f in row]
        if len(row) != width:
            problems.append(f"line {line}: expected {width} fields, found {len(row)}")
            continue
        try:
            values = [float(row[j]) for j in feature_idx]
        except ValueError:
            problems.append(f"line {line}: missing or non-numeric feature")
            continue
        if not all(np.isfinite(values)):
            problems.append(f"line {line}: non-finite feature")
            continue
        feats.append(values)
        raw_labels.append(row[label_index] if label_index is not None else "")
    if problems:
        shown = "; ".join(problems[:10])
        more = f" (and {len(problems) - 10} more)" if len(problems) > 10 else ""
        raise DataFormatError(f"{path}: rejected rows: {shown}{more}")
    X = np.array(feats, dtype=np.float64).reshape(len(feats), len(feature_idx))
    if label_index is None:
        y = np.ones(len(feats), dtype=np.int64)
        mapping = {}
    else:
        y, mapping = _map_labels(raw_labels, positive_label, path)
        if require_two_classes and len(set(y.tolist())) < 2:
            raise DataFormatError(f"{path}: single class in label column")
    label_name = first[label_index] if header and label_index is not None else None
    return Dataset(X, y, names, name or os.path.splitext(os.path.basename(path))[0], False, width, mapping,
                   label_name)


def _map_labels(raw, positive_label, path):
    values = sorted(set(raw), key=_label_key)
    if len(values) > 2:
        shown = ", ".join(values[:5])
        raise DataFormatError(f"{path}: more than two label values ({shown})")
    if positive_label is None:
        if len(values) == 0:
            positive = None
        elif all(_is_number(v) for v in values) and {float(v) for v in values} <= {-1.0, 0.0, 1.0}:
            positive = next((v for v in values if float(v) == 1.0), None)
        else:
            positive = values[-1]
    else:
        positive = next((v for v in values if _same_label(v, str(positive_label))), None)
        if positive is None and values:
            raise DataFormatError(f"{path}: unknown label value {positive_label!r}; found {values}")
    mapping = {v: (1 if v == positive else -1) for v in values}
    return np.array([mapping[v] for v in raw], dtype=np.int64), mapping


def write_atomic(path, data):
    """Write bytes or text to ``path`` via a temporary file and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _floats(a):
    return [float(v) for v in np.asarray(a, dtype=np.float64).ravel()]


def model_to_dict(model):
    d = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind,
        "b": float(model.b),
        "h": float(model.h),
        "C": None if model.C is None else float(model.C),
        "objective": float(model.objective),
        "upper_slack_sign": float(model.upper_slack_sign),
        "standardization": model.standardization.to_dict(),
        "provenance": dict(model.provenance),
    }
    if isinstance(model, LinearModel):
        d["w"] = _floats(model.w)
    elif isinstance(model, KernelModel):
        d.update(
            kernel=model.kernel.to_dict(),
            lambdas=_floats(model.lambdas),
            support_indices=[int(i) for i in model.support_indices],
            support_samples=np.asarray(model.support_samples, dtype=np.float64).tolist(),
            sv_tolerance=float(model.sv_tolerance),
            rank_tolerance=model.rank_tolerance,
        )
    else:
        raise ConfigurationError(f"cannot serialize {type(model).__name__}")
    return d


def serialize_model(model):
    """JSON bytes for a trained model (floats are written round-trip exact)."""
    return (json.dumps(model_to_dict(model), indent=1, sort_keys=True) + "\n").encode()


def deserialize_model(data):
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    try:
        d = json.loads(data)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(d, dict) or d.get("format") != MODEL_FORMAT:
        raise DataFormatError("not a fatmargin model file")
    if d.get("version") != MODEL_VERSION:
        raise DataFormatError(f"unsupported model format version {d.get('version')!r} (expected {MODEL_VERSION})")
    try:
        params = StandardizationParams.from_dict(d["standardization"])
        common = dict(b=float(d["b"]), h=float(d["h"]), C=d["C"], standardization=params,
                      objective=float(d["objective"]), upper_slack_sign=float(d["upper_slack_sign"]),
                      provenance=d.get("provenance", {}))
        if d["kind"] == "linear":
            return LinearModel(w=np.array(d["w"], dtype=np.float64), **common)
        if d["kind"] == "kernel":
            n = params.mean.size
            sv = np.array(d["support_samples"], dtype=np.float64).reshape(-1, n)
            return KernelModel(
                lambdas=np.array(d["lambdas"], dtype=np.float64),
                support_indices=np.array(d["support_indices"], dtype=np.int64),
                support_samples=sv,
                kernel=KernelSpec(d["kernel"]["kind"], d["kernel"]["gamma"]),
                sv_tolerance=float(d["sv_tolerance"]),
                rank_tolerance=d.get("rank_tolerance"),
                **common,
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"malformed model file: {exc!r}") from exc
    raise DataFormatError(f"unknown model kind {d['kind']!r}")


def save_model(model, path):
    write_atomic(path, serialize_model(model))


def load_model(path):
    with open(path, "rb") as fh:
        return deserialize_model(fh.read())


def _num(v):
    return f"{v:.10g}"


def _diff(var, center):
    if center == 0.0:
        return f"{var}^2"
    sign = "-" if center > 0 else "+"
    return f"({var} {sign} {_num(abs(center))})^2"


def export_closed_form(model):
    """Human-readable ``sign{...}`` expression of a Gaussian kernel model in raw units.

    Expansion coefficients and the offset are printed to 4 decimals. The
    feature standardization is folded into each exponent, so a term reads
    ``c * exp[-g * (sum of squared differences)]`` when every feature has the
    same scale and carries one weight per feature otherwise.
    """
    if not isinstance(model, KernelModel) or model.kernel.kind != GAUSSIAN:
        raise ConfigurationError("closed-form export is unsupported for this model (needs a Gaussian kernel)")
    st = model.standardization
    n = st.mean.size
    names = [f"x{d + 1}" for d in range(n)]
    weights = model.kernel.gamma / st.scale ** 2
    shared = bool(np.all(weights == weights[0]))
    centers = st.inverse_transform(model.support_samples)
    head = f"f({', '.join(names)}) = sign{{"
    lines = []
    for k, (lam, c) in enumerate(zip(model.support_lambdas, centers)):
        if shared:
            inner = " + ".join(_diff(names[d], c[d]) for d in range(n))
            expo = f"exp[-{_num(weights[0])} * ({inner})]"
        else:
            inner = " + ".join(f"{_num(weights[d])} * {_diff(names[d], c[d])}" for d in range(n))
            expo = f"exp[-({inner})]"
        coef = f"{abs(lam):.4f}"
        if k == 0:
            lines.append(f"{head} {'-' if lam < 0 else ''}{coef} {expo}")
        else:
            lines.append(f"    {'-' if lam < 0 else '+'} {coef} {expo}")
    if not lines:
        return f"{head} {model.b:.4f} }}\n"
    lines.append(f"    {'-' if model.b < 0 else '+'} {abs(model.b):.4f} }}")
    return "\n".join(lines) + "\n"
