"""Unordered Q-tuples of points in R^n and the optimal-assignment metrics on them.

A Q-tuple is a multiset of Q points (multiplicity counts).  The three
metrics pair the points of two tuples optimally and aggregate the pairwise
Euclidean distances by sum (G1), root-sum-of-squares (G2) or maximum
(GINF).  This module also provides the splitting machinery: the minimum
gap between distinct points of a tuple forces the optimal pairing for any
sufficiently small perturbation, which is what makes local decompositions
and branch selection work.

All values here are immutable after construction and every operation is
a pure function, so concurrent use needs no locking.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import linear_sum_assignment


class SplitRadiusError(ValueError):
    """Raised when a local split is requested outside its continuity radius."""


class QTuple:
    """An unordered Q-tuple of points in R^n (multiset with multiplicity).

    Points are held as a read-only (Q, n) float array.  Order of storage is
    irrelevant: two tuples are equal when they agree as multisets, decided
    by comparing canonical forms (points sorted lexicographically
    coordinate by coordinate).

    Parameters
    ----------
    points : array_like
        Shape (Q, n).  A 1-D array of length Q is promoted to n = 1.
    """

    __slots__ = ("points",)

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("points must form a (Q, n) array with Q >= 1, n >= 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        pts = np.array(pts, dtype=float, copy=True)
        pts.flags.writeable = False
        self.points = pts

    @property
    def Q(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def canonical(self) -> "QTuple":
        """Return the canonical form: points sorted lexicographically."""
        order = np.lexsort(self.points.T[::-1])
        return QTuple(self.points[order])

    def __eq__(self, other) -> bool:
        if not isinstance(other, QTuple):
            return NotImplemented
        if self.points.shape != other.points.shape:
            return False
        return np.array_equal(self.canonical().points, other.canonical().points)

    def __hash__(self) -> int:
        return hash(self.canonical().points.tobytes())

    def __repr__(self) -> str:
        return f"QTuple({self.points.tolist()!r})"

    def to_text(self) -> str:
        """Textual form ``[[x1,...,xn],...]``; floats round-trip exactly."""
        return json.dumps(self.points.tolist())

    @classmethod
    def from_text(cls, text: str) -> "QTuple":
        return cls(json.loads(text))


@dataclass(frozen=True)
class Matching:
    """A permutation of {0..Q-1} certifying a pairing between two Q-tuples.

    ``perm[i] = j`` pairs point i of the first tuple with point j of the
    second.
    """

    perm: tuple

    def __post_init__(self):
        perm = tuple(int(i) for i in self.perm)
        object.__setattr__(self, "perm", perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError("perm must be a bijection on {0..Q-1}")

    def __len__(self) -> int:
        return len(self.perm)


class MetricKind(Enum):
    """Which aggregation the assignment metric uses."""

    G1 = "g1"
    G2 = "g2"
    GINF = "ginf"

    @classmethod
    def parse(cls, text: str) -> "MetricKind":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown metric kind {text!r}; expected g1, g2 or ginf") from None


def _check_compatible(v: QTuple, w: QTuple) -> None:
    if v.Q != w.Q:
        raise ValueError(f"multiplicity mismatch: Q={v.Q} vs Q={w.Q}")
    if v.n != w.n:
        raise ValueError(f"dimension mismatch: n={v.n} vs n={w.n}")


def _pairwise_distances(v: QTuple, w: QTuple) -> np.ndarray:
    diff = v.points[:, None, :] - w.points[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _lexmin_sum_assignment(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost assignment; ties broken by lexicographically smallest perm.

    Runs the Hungarian solver once for the optimum, then greedily pins each
    row to the smallest feasible column, re-solving the remaining block to
    confirm optimality is preserved.
    """
    Q = cost.shape[0]
    rows, cols = linear_sum_assignment(cost)
    best = float(cost[rows, cols].sum())
    tol = 1e-12 * (1.0 + abs(best))
    free = list(range(Q))
    perm = np.empty(Q, dtype=int)
    prefix = 0.0
    for i in range(Q):
        for j in free:
            rest_rows = np.arange(i + 1, Q)
            rest_cols = np.array([c for c in free if c != j], dtype=int)
            if rest_rows.size == 0:
                rest = 0.0
            else:
                sub = cost[np.ix_(rest_rows, rest_cols)]
                rr, cc = linear_sum_assignment(sub)
                rest = float(sub[rr, cc].sum())
            if prefix + cost[i, j] + rest <= best + tol:
                perm[i] = j
                prefix += cost[i, j]
                free.remove(j)
                break
        else:  # pragma: no cover - the optimal column always qualifies
            raise AssertionError("assignment refinement failed")
    return perm


def _has_perfect_matching(allowed: np.ndarray) -> bool:
    """Kuhn's augmenting-path test for a perfect matching in a boolean matrix."""
    rows, cols = allowed.shape
    if rows > cols:
        return False
    match_col = [-1] * cols

    def augment(r, seen):
        for c in range(cols):
            if allowed[r, c] and not seen[c]:
                seen[c] = True
                if match_col[c] < 0 or augment(match_col[c], seen):
                    match_col[c] = r
                    return True
        return False

    for r in range(rows):
        if not augment(r, [False] * cols):
            return False
    return True


def _bottleneck_assignment(D: np.ndarray):
    """Exact bottleneck assignment by bisection over the pairwise distance set."""
    Q = D.shape[0]
    levels = np.unique(D)
    lo, hi = 0, levels.size - 1
    # every row and column needs at least its own minimum
    forced = max(D.min(axis=1).max(), D.min(axis=0).max())
    lo = int(np.searchsorted(levels, forced))
    while lo < hi:
        mid = (lo + hi) // 2
        if _has_perfect_matching(D <= levels[mid]):
            hi = mid
        else:
            lo = mid + 1
    t = float(levels[lo])
    allowed = D <= t
    # lexicographically smallest perfect matching at the optimal threshold
    perm = np.empty(Q, dtype=int)
    free = list(range(Q))
    for i in range(Q):
        for j in free:
            if not allowed[i, j]:
                continue
            rest_cols = [c for c in free if c != j]
            if i + 1 == Q:
                perm[i] = j
                free.remove(j)
                break
            sub = allowed[np.ix_(np.arange(i + 1, Q), rest_cols)]
            if _has_perfect_matching(sub):
                perm[i] = j
                free.remove(j)
                break
        else:  # pragma: no cover
            raise AssertionError("bottleneck refinement failed")
    return t, perm


def dist(v: QTuple, w: QTuple, kind: MetricKind = MetricKind.G2):
    """Assignment distance between two Q-tuples with an optimal matching.

    Parameters
    ----------
    v, w : QTuple
        Tuples with equal Q and n.
    kind : MetricKind
        G1 sums the paired distances, G2 takes the root-sum-of-squares,
        GINF the maximum.

    Returns
    -------
    value : float
    match : Matching
        A minimizing pairing; among optimal pairings the lexicographically
        smallest permutation is returned.
    """
    _check_compatible(v, w)
    Q = v.Q
    if Q == 1:
        return float(np.linalg.norm(v.points[0] - w.points[0])), Matching((0,))
    D = _pairwise_distances(v, w)
    if Q == 2:
        return _dist_q2(D, kind)
    if kind is MetricKind.G1:
        perm = _lexmin_sum_assignment(D)
        value = float(D[np.arange(Q), perm].sum())
    elif kind is MetricKind.G2:
        C = D * D
        perm = _lexmin_sum_assignment(C)
        value = float(math.sqrt(C[np.arange(Q), perm].sum()))
    elif kind is MetricKind.GINF:
        value, perm = _bottleneck_assignment(D)
    else:  # pragma: no cover
        raise ValueError(f"unknown metric kind {kind!r}")
    return value, Matching(tuple(perm))


def _dist_q2(D: np.ndarray, kind: MetricKind):
    if kind is MetricKind.G1:
        keep, swap = D[0, 0] + D[1, 1], D[0, 1] + D[1, 0]
    elif kind is MetricKind.G2:
        keep = D[0, 0] ** 2 + D[1, 1] ** 2
        swap = D[0, 1] ** 2 + D[1, 0] ** 2
    else:
        keep = max(D[0, 0], D[1, 1])
        swap = max(D[0, 1], D[1, 0])
    if keep <= swap:
        value, perm = keep, (0, 1)
    else:
        value, perm = swap, (1, 0)
    if kind is MetricKind.G2:
        value = math.sqrt(value)
    return float(value), Matching(perm)


def dist_sorted_1d(v: QTuple, w: QTuple) -> float:
    """G2 distance of two 1-D tuples via the sorted pairing.

    On the real line the optimal pairing matches values in increasing
    order, so no assignment solve is needed.
    """
    if v.n != 1 or w.n != 1:
        raise ValueError(f"dist_sorted_1d needs n=1 tuples, got n={v.n} and n={w.n}")
    if v.Q != w.Q:
        raise ValueError(f"multiplicity mismatch: Q={v.Q} vs Q={w.Q}")
    a = np.sort(v.points[:, 0])
    b = np.sort(w.points[:, 0])
    return float(np.linalg.norm(a - b))


def split_distance(v: QTuple) -> float:
    """Minimum distance between distinct support points; +inf if all coincide.

    Distinctness is exact coordinate equality; callers needing a tolerance
    pre-quantize their points.
    """
    support = np.unique(v.points, axis=0)
    k = support.shape[0]
    if k == 1:
        return math.inf
    best = math.inf
    for i in range(k):
        for j in range(i + 1, k):
            d = support[i] - support[j]
            m = float(np.abs(d).max())
            # scale before squaring so subnormal gaps do not underflow to 0
            best = min(best, m * float(np.linalg.norm(d / m)))
    return best


def concatenate(v: QTuple, w: QTuple) -> QTuple:
    """The (v.Q + w.Q)-tuple containing the points of both (with multiplicity)."""
    if v.n != w.n:
        raise ValueError(f"dimension mismatch: n={v.n} vs n={w.n}")
    return QTuple(np.vstack([v.points, w.points]))


def support_sigma(v: QTuple):
    """Distinct support points with multiplicities, plus their count.

    Returns
    -------
    support : list of (point, multiplicity)
        Points in canonical (lexicographic) order; multiplicities sum to Q.
    sigma : int
        Number of distinct points.
    """
    pts, counts = np.unique(v.points, axis=0, return_counts=True)
    support = [(pts[i].copy(), int(counts[i])) for i in range(pts.shape[0])]
    return support, len(support)


def local_split(center: QTuple, v: QTuple):
    """Partition v's points by the support decomposition of the center tuple.

    Valid only when ``dist(center, v, GINF) < split_distance(center) / 2``,
    which is exactly the radius on which the decomposition is well defined
    and continuous.  Each returned part collects the points of v lying
    within half the splitting radius of one distinct point of the center,
    and has size equal to that point's multiplicity.

    Returns
    -------
    parts : list of QTuple
        One per support point of the center, in canonical support order.
        Their concatenation equals v as a multiset.
    assignment : Matching
        ``assignment.perm[i]`` is the position of v's point i in the
        concatenation of the parts.
    """
    _check_compatible(center, v)
    s = split_distance(center)
    g, _ = dist(center, v, MetricKind.GINF)
    if not g < s / 2:
        raise SplitRadiusError(
            f"GINF distance {g} is not below half the splitting radius {s / 2}"
        )
    support, sigma = support_sigma(center)
    centers = np.array([p for p, _ in support])
    d = np.linalg.norm(v.points[:, None, :] - centers[None, :, :], axis=2)
    group = np.argmin(d, axis=1)
    groups = [np.flatnonzero(group == j) for j in range(sigma)]
    for j, idx in enumerate(groups):
        if idx.size != support[j][1]:  # pragma: no cover - excluded by the radius check
            raise SplitRadiusError("grouping does not reproduce the center multiplicities")
    parts = [QTuple(v.points[idx]) for idx in groups]
    position = np.empty(v.Q, dtype=int)
    offset = 0
    for idx in groups:
        for k, i in enumerate(idx):
            position[i] = offset + k
        offset += idx.size
    return parts, Matching(tuple(position))


def select_branches(f) -> list:
    """Split a grid-sampled Q-valued map into Q single-valued grid fields.

    Labels are propagated by breadth-first region growing: across each
    visited edge the optimal G2 matching carries branch labels over, except
    where the matched distance exceeds half the splitting radius of the
    already-labelled endpoint (a branch collision), in which case the new
    node falls back to the lexicographic ordering of its points.  The
    concatenation of the branches reproduces f at every node.

    Parameters
    ----------
    f : GridFunction

    Returns
    -------
    branches : list of Q arrays, each of shape ``(*f.shape, n)``
        NaN outside the domain.
    """
    from .grids import OUTSIDE  # local import: grids has no dependency on qspace

    shape = f.shape
    Q, n = f.Q, f.n
    branches = np.full((Q,) + tuple(shape) + (n,), np.nan)
    visited = np.zeros(shape, dtype=bool)
    inside = f.mask != OUTSIDE

    def node_tuple(idx):
        return QTuple(f.values[idx])

    for seed in np.ndindex(*shape):
        if not inside[seed] or visited[seed]:
            continue
        order = np.lexsort(f.values[seed].T[::-1])
        branches[(slice(None),) + seed] = f.values[seed][order]
        visited[seed] = True
        queue = deque([seed])
        while queue:
            u = queue.popleft()
            vu = QTuple(branches[(slice(None),) + u])
            su = split_distance(vu)
            for axis in range(len(shape)):
                for step in (-1, 1):
                    w = list(u)
                    w[axis] += step
                    w = tuple(w)
                    if not (0 <= w[axis] < shape[axis]):
                        continue
                    if not inside[w] or visited[w]:
                        continue
                    value, match = dist(vu, node_tuple(w), MetricKind.G2)
                    if value <= su / 2:
                        branches[(slice(None),) + w] = f.values[w][list(match.perm)]
                    else:
                        order = np.lexsort(f.values[w].T[::-1])
                        branches[(slice(None),) + w] = f.values[w][order]
                    visited[w] = True
                    queue.append(w)
    return [branches[i] for i in range(Q)]
