"""Fuzzy memberships from distance to the class centre (Lin-Wang scheme).

Each sample gets ``s_i = 1 - d_i / (r + delta)`` where ``d_i`` is its distance
to the mean of its own class and ``r`` the largest such distance in that
class. Samples far from their class centre, typically outliers, get small
weights in the slack penalty.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

DELTA_FRACTION = 1e-4
DELTA_FLOOR = 1e-12


@dataclass
class MembershipVector:
    values: np.ndarray
    delta: float
    centers: tuple  # (positive centre, negative centre)
    radii: tuple  # (r_plus, r_minus)
    distances: np.ndarray

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def _split(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    pos, neg = X[y == 1], X[y == -1]
    if len(pos) == 0 or len(neg) == 0:
        raise ConfigurationError("both classes need at least one sample")
    return X, y, pos, neg


def class_centers(X, y):
    """Mean of the +1 samples and mean of the -1 samples."""
    _, _, pos, neg = _split(X, y)
    return pos.mean(axis=0), neg.mean(axis=0)


def class_radii(X, y, centers):
    """Largest distance from a class's samples to its centre, per class."""
    _, _, pos, neg = _split(X, y)
    r_pos = float(np.linalg.norm(pos - centers[0], axis=1).max())
    r_neg = float(np.linalg.norm(neg - centers[1], axis=1).max())
    return r_pos, r_neg


def default_delta(radii):
    return max(DELTA_FRACTION * max(radii), DELTA_FLOOR)


def compute_memberships(X, y, delta=None):
    """Memberships for every sample; ``delta=None`` picks a scale-relative value."""
    X, y, _, _ = _split(X, y)
    centers = class_centers(X, y)
    radii = class_radii(X, y, centers)
    if delta is None:
        delta = default_delta(radii)
    elif not delta > 0:
        raise ConfigurationError(f"delta must be positive, got {delta}")
    own_center = np.where((y == 1)[:, None], centers[0], centers[1])
    dist = np.linalg.norm(X - own_center, axis=1)
    radius = np.where(y == 1, radii[0], radii[1])
    s = 1.0 - dist / (radius + delta)
    return MembershipVector(s, float(delta), centers, radii, dist)
