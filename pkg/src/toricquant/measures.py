"""Finite atomic probability measures on the real line.

Both the spectral measures of the quantized geodesics and the discretized
pushforward limits are stored as sorted (location, weight) pairs, so the
one-dimensional transport distance can be evaluated exactly from CDFs.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError

MERGE_TOL = 1e-12
MAX_MOMENT_ORDER = 8


@dataclass(frozen=True, eq=False)
class ProbabilityMeasure:
    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if loc.ndim != 1 or loc.shape != w.shape or loc.size == 0:
            raise PreconditionError("locations and weights must be equal-length non-empty vectors")
        if not (np.all(np.isfinite(loc)) and np.all(np.isfinite(w))):
            raise PreconditionError("non-finite atom")
        if np.any(w <= 0):
            raise PreconditionError("atom weights must be positive")
        total = w.sum()
        if abs(total - 1.0) > 1e-12:
            raise PreconditionError(f"total mass {total!r} differs from 1")
        loc.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_atoms(cls, locations, weights=None, merge_tol=MERGE_TOL):
        """Sort, merge near-duplicate locations and renormalize."""
        loc = np.asarray(locations, dtype=float).ravel()
        if weights is None:
            w = np.full(loc.size, 1.0)
        else:
            w = np.asarray(weights, dtype=float).ravel()
        if loc.size == 0 or loc.shape != w.shape:
            raise PreconditionError("need matching, non-empty atoms and weights")
        if np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
            raise PreconditionError("weights must be nonnegative with positive total")
        order = np.argsort(loc, kind="stable")
        loc, w = loc[order], w[order]
        keep = w > 0
        loc, w = loc[keep], w[keep]
        # merge runs whose consecutive gaps are within tolerance
        new_group = np.concatenate(([True], np.diff(loc) > merge_tol))
        group_id = np.cumsum(new_group) - 1
        merged_w = np.bincount(group_id, weights=w)
        merged_loc = np.bincount(group_id, weights=loc * w) / merged_w
        single = np.bincount(group_id) == 1
        merged_loc[single] = loc[new_group][single]  # keep unmerged locations bit-exact
        return cls(merged_loc, merged_w / merged_w.sum())

    @classmethod
    def uniform(cls, locations):
        return cls.from_atoms(locations)

    @classmethod
    def dirac(cls, location):
        return cls(np.array([float(location)]), np.array([1.0]))

    def __len__(self):
        return self.locations.size

    @property
    def support(self):
        return float(self.locations[0]), float(self.locations[-1])

    def cdf(self, x):
        cum = np.cumsum(self.weights)
        idx = np.searchsorted(self.locations, x, side="right")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)

    def integrate(self, f):
        return float(np.dot(self.weights, f(self.locations)))

    def map(self, fn):
        """Pushforward under a vectorized map."""
        return ProbabilityMeasure.from_atoms(fn(self.locations), self.weights)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["location", "weight"])
        for x, w in zip(self.locations, self.weights):
            writer.writerow([format(x, ".17g"), format(w, ".17g")])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.reader(io.StringIO(text)))
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
        return cls.from_atoms(data[:, 0], data[:, 1])

    def to_json(self):
        return json.dumps({"locations": self.locations.tolist(), "weights": self.weights.tolist()})

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        return cls.from_atoms(obj["locations"], obj["weights"])


def moment(m: ProbabilityMeasure, p: int) -> float:
    if p < 1 or p > MAX_MOMENT_ORDER or int(p) != p:
        raise PreconditionError(f"moment order must be an integer in [1, {MAX_MOMENT_ORDER}], got {p}")
    return float(np.dot(m.weights, m.locations ** int(p)))


def _cdfs_on_breakpoints(m1, m2):
    grid = np.union1d(m1.locations, m2.locations)
    return grid, m1.cdf(grid), m2.cdf(grid)


def wasserstein1(m1: ProbabilityMeasure, m2: ProbabilityMeasure) -> float:
    """Exact W1 = integral of |F1 - F2| over the merged breakpoints."""
    grid, c1, c2 = _cdfs_on_breakpoints(m1, m2)
    if grid.size == 1:
        return 0.0
    return float(np.sum(np.abs(c1[:-1] - c2[:-1]) * np.diff(grid)))


def ks_distance(m1: ProbabilityMeasure, m2: ProbabilityMeasure) -> float:
    _, c1, c2 = _cdfs_on_breakpoints(m1, m2)
    return float(np.max(np.abs(c1 - c2)))
