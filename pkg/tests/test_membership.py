import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from fatmargin.data_io import bundled_dataset_path
from fatmargin.errors import ConfigurationError
from fatmargin.membership import class_centers, class_radii, compute_memberships, default_delta


def hand_membership(X, y, delta):
    """Straight transcription of the formula, one sample at a time."""
    out = []
    for i in range(len(X)):
        own = [X[j] for j in range(len(X)) if y[j] == y[i]]
        center = [sum(col) / len(own) for col in zip(*own)]
        radius = max(math.dist(p, center) for p in own)
        out.append(1 - math.dist(X[i], center) / (radius + delta))
    return out


def test_center_and_radius_examples():
    X = np.array([[0, 0], [2, 0], [5, 5]], float)
    y = np.array([1, 1, -1])
    cp, cn = class_centers(X, y)
    assert cp.tolist() == [1.0, 0.0]
    assert cn.tolist() == [5.0, 5.0]  # single-sample class
    assert class_radii(X, y, (cp, cn)) == (1.0, 0.0)


def test_radius_is_brute_force_max():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(20, 3))
    y = np.array([1] * 10 + [-1] * 10)
    cp, cn = class_centers(X, y)
    rp, rn = class_radii(X, y, (cp, cn))
    assert rp == pytest.approx(max(math.dist(x, cp) for x in X[:10]), rel=1e-14)
    assert rn == pytest.approx(max(math.dist(x, cn) for x in X[10:]), rel=1e-14)


def test_six_point_toy_matches_hand_evaluation():
    X = [[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [4.0, 4.0], [5.0, 4.0], [4.0, 7.0]]
    y = [1, 1, 1, -1, -1, -1]
    mv = compute_memberships(np.array(X), np.array(y), delta=0.1)
    assert mv.values == pytest.approx(hand_membership(X, y, 0.1), abs=1e-14)
    assert mv.delta == 0.1


def test_farthest_sample_gets_delta_ratio():
    X = np.array([[0.0], [1.0], [3.0], [10.0], [11.0]])
    y = np.array([1, 1, 1, -1, -1])
    mv = compute_memberships(X, y, delta=0.5)
    r = mv.radii[0]
    assert mv.values[2] == pytest.approx(0.5 / (r + 0.5))


def test_single_sample_class_has_membership_one():
    X = np.array([[0.0], [1.0], [7.0]])
    y = np.array([1, 1, -1])
    assert compute_memberships(X, y).values[2] == 1.0


@pytest.mark.parametrize("delta", [0.0, -1.0])
def test_nonpositive_delta_rejected(delta):
    with pytest.raises(ConfigurationError):
        compute_memberships(np.eye(2), np.array([1, -1]), delta)


def test_empty_class_rejected():
    with pytest.raises(ConfigurationError):
        compute_memberships(np.eye(2), np.array([1, 1]))


def test_default_delta_floor():
    assert default_delta((0.0, 0.0)) == 1e-12
    assert default_delta((2.0, 3.0)) == pytest.approx(3e-4)


def test_haberman_centers_match_column_means():
    # independent oracle: read the raw file with the csv module
    import csv
    with open(bundled_dataset_path("haberman")) as fh:
        rows = list(csv.reader(fh))[1:]
    pos = [[float(v) for v in r[:3]] for r in rows if r[3] == "positive"]
    neg = [[float(v) for v in r[:3]] for r in rows if r[3] == "negative"]
    from fatmargin.data_io import load_csv
    ds = load_csv(bundled_dataset_path("haberman"), positive_label="positive")
    cp, cn = class_centers(ds.features, ds.labels)
    assert cp == pytest.approx([sum(c) / len(pos) for c in zip(*pos)], rel=1e-14)
    assert cn == pytest.approx([sum(c) / len(neg) for c in zip(*neg)], rel=1e-14)


def datasets():
    shape = st.tuples(st.integers(2, 12), st.integers(1, 4))
    return st.tuples(
        arrays(np.float64, shape, elements=st.floats(-100, 100, allow_nan=False)),
        st.integers(0, 2**32 - 1),
    )


@settings(max_examples=200, deadline=None)
@given(datasets(), arrays(np.float64, 4, elements=st.floats(-1e3, 1e3)))
def test_membership_invariants(data, shift):
    X, seed = data
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(X.shape[0]) < 0.5, 1, -1)
    y[0], y[1] = 1, -1
    mv = compute_memberships(X, y)
    # a zero-radius class meets delta at its 1e-12 floor, where rounding in the
    # shifted coordinates alone moves s; those cases say nothing about translation
    assume(min(mv.radii) > 1e-3)
    s = mv.values
    assert np.all((s > 0) & (s <= 1))
    radius = np.where(y == 1, mv.radii[0], mv.radii[1])
    assert np.all(s >= mv.delta / (radius + mv.delta) - 1e-15)
    assert np.all(s[mv.distances == 0.0] == 1.0)
    assert np.all(mv.distances[s == 1.0] <= np.finfo(float).eps * (radius[s == 1.0] + mv.delta))
    # translation
    moved = compute_memberships(X + shift[: X.shape[1]], y, mv.delta)
    assert np.allclose(moved.values, s, rtol=0, atol=1e-10)
    # permutation
    perm = rng.permutation(X.shape[0])
    permuted = compute_memberships(X[perm], y[perm], mv.delta)
    assert np.allclose(permuted.values, s[perm], rtol=0, atol=1e-12)
