"""Lipschitz extension of Q-valued boundary data.

Two constructions: a cone extension on balls, which interpolates radially
after splitting off clusters of points that sit further apart than the
boundary data oscillates, and a dyadic-cube extension from an arbitrary
closed sample set, which assigns nearest-sample values on cube corners and
propagates them across edges and faces with the cone construction.  A
third operator reflects a unit-ball grid function onto the surrounding
plane with linearly decaying branches, vanishing beyond radius 3/2.

All formulas are positively homogeneous in the values, so scaling the data
scales the extensions exactly.

Extension structures are immutable once built; queries are pure and safe
to issue concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import BOUNDARY, GridFunction, INTERIOR, OUTSIDE
from .qspace import MetricKind, QTuple, dist


@dataclass
class BoundarySample:
    """Values of a Q-valued map at sampled boundary locations.

    ``points`` is a list of ``(location, value)`` pairs; locations are
    m-vectors, nominally on the sphere of radius R (the cone extension
    enforces this, other producers such as grid traces may sit slightly
    off it).
    """

    points: list
    R: float
    m: int

    def __post_init__(self):
        if not self.points:
            raise ValueError("boundary sample needs at least one point")
        locs = []
        vals = []
        Q = n = None
        for loc, value in self.points:
            loc = np.asarray(loc, dtype=float).reshape(-1)
            if loc.size != self.m:
                raise ValueError(f"location has dimension {loc.size}, expected m={self.m}")
            if not isinstance(value, QTuple):
                value = QTuple(value)
            if Q is None:
                Q, n = value.Q, value.n
            elif (value.Q, value.n) != (Q, n):
                raise ValueError("all boundary values must share Q and n")
            locs.append(loc)
            vals.append(value)
        self.points = list(zip(locs, vals))
        self.Q, self.n = Q, n

    @property
    def locations(self) -> np.ndarray:
        return np.array([loc for loc, _ in self.points])

    @property
    def value_array(self) -> np.ndarray:
        return np.array([val.points for _, val in self.points])


def _vec_norm(x: np.ndarray, kind: str) -> float:
    if kind == "linf":
        return float(np.abs(x).max())
    return float(np.linalg.norm(x))


def _ginf_value(a: np.ndarray, b: np.ndarray) -> float:
    value, _ = dist(QTuple(a), QTuple(b), MetricKind.GINF)
    return value


def _split_clusters(points: np.ndarray, threshold: float) -> list:
    """Single-linkage clusters: points closer than the threshold are joined."""
    L = points.shape[0]
    parent = list(range(L))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(L):
        for j in range(i + 1, L):
            if np.linalg.norm(points[i] - points[j]) <= threshold:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj
    groups = {}
    for i in range(L):
        groups.setdefault(find(i), []).append(i)
    return [np.array(g) for g in sorted(groups.values(), key=lambda g: g[0])]


def _cone_eval(boundary_fn, sample_pts: np.ndarray, sample_vals: np.ndarray,
               R: float, x: np.ndarray, norm: str) -> np.ndarray:
    """Recursive cone extension over the ball of radius R centered at 0.

    ``boundary_fn`` evaluates the boundary map anywhere on the sphere;
    ``sample_pts``/``sample_vals`` witness it at finitely many locations,
    which is where the oscillation and the split test are measured.  When
    some witnessed tuple holds two points farther apart than 3*Q times the
    oscillation, the data splits into clusters that stay coherent over the
    whole boundary, and each cluster extends on its own; otherwise the
    radial formula interpolates between the boundary value above x and the
    first point of the first witnessed tuple.
    """
    L, Qc, _ = sample_vals.shape
    osc = 0.0
    for i in range(L):
        for j in range(i + 1, L):
            osc = max(osc, _ginf_value(sample_vals[i], sample_vals[j]))

    if Qc >= 2:
        ref_idx = None
        for l in range(L):
            pts = sample_vals[l]
            gaps = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
            if gaps.max() > 3.0 * Qc * osc:
                ref_idx = l
                break
        if ref_idx is not None:
            ref = sample_vals[ref_idx]
            clusters = _split_clusters(ref, 3.0 * osc)
            ref_tuple = QTuple(ref)
            cluster_of = np.empty(Qc, dtype=int)
            for c, idx in enumerate(clusters):
                cluster_of[idx] = c

            def grouped(value_pts: np.ndarray) -> list:
                _, match = dist(QTuple(value_pts), ref_tuple, MetricKind.GINF)
                perm = np.asarray(match.perm)
                return [value_pts[cluster_of[perm] == c] for c in range(len(clusters))]

            part_samples = [grouped(sample_vals[l]) for l in range(L)]
            pieces = []
            for c in range(len(clusters)):
                part_vals = np.array([part_samples[l][c] for l in range(L)])

                def part_fn(b, c=c):
                    return grouped(boundary_fn(b))[c]

                pieces.append(
                    _cone_eval(part_fn, sample_pts, part_vals, R, x, norm)
                )
            return np.vstack(pieces)

    r = _vec_norm(x, norm)
    y1 = sample_vals[0][0]
    if r <= 1e-15 * R:
        return np.tile(y1, (Qc, 1))
    proj = x * (R / r)
    bval = boundary_fn(proj)
    return (r / R) * bval + ((R - r) / R) * y1


def cone_extend(samples: BoundarySample, query) -> QTuple:
    """Evaluate the cone extension of sphere data at a point of the ball.

    Boundary values between samples are taken from the nearest sample (the
    geodesic and chordal nearest agree on a sphere).  Queries on the
    boundary at a sample location return that sample's value exactly.
    """
    query = np.asarray(query, dtype=float).reshape(-1)
    R = float(samples.R)
    if query.size != samples.m:
        raise ValueError(f"query has dimension {query.size}, expected m={samples.m}")
    locs = samples.locations
    radii = np.linalg.norm(locs, axis=1)
    if np.abs(radii - R).max() > 1e-9 * max(1.0, R):
        raise ValueError("sample locations must lie on the sphere of radius R to 1e-9")
    if np.linalg.norm(query) > R * (1 + 1e-9):
        raise ValueError("query must lie in the closed ball of radius R")

    gaps = np.linalg.norm(locs - query, axis=1)
    nearest = int(np.argmin(gaps))
    if gaps[nearest] <= 1e-12 * max(1.0, R):
        return samples.points[nearest][1]

    vals = samples.value_array

    def boundary_fn(b):
        i = int(np.argmin(np.linalg.norm(locs - b, axis=1)))
        return vals[i]

    out = _cone_eval(boundary_fn, locs, vals, R, query, "l2")
    return QTuple(out)


class WhitneyExtension:
    """Dyadic-cube extension of Q-valued data from a finite sample set.

    The domain box (minus the samples) splits into dyadic cells satisfying
    the usual size-versus-distance condition in the sup norm; corners take
    the nearest sample's value, edges and (in 2-D) faces fill in by the
    cone construction.  Cells that still touch the sample set at the depth
    cap evaluate pointwise by nearest sample.  Supports m in {1, 2}.

    Parameters
    ----------
    data : list of (location, QTuple)
        Sample locations (distinct) and their values.
    domain_box : array_like, shape (m, 2)
        Lower and upper bounds per axis; cells tile the enclosing square.
    depth : int
        Dyadic subdivision cap.
    """

    def __init__(self, data, domain_box, depth: int):
        if not data:
            raise ValueError("sample set must be nonempty")
        locs = np.array([np.asarray(loc, dtype=float).reshape(-1) for loc, _ in data])
        self.m = locs.shape[1]
        if self.m not in (1, 2):
            raise ValueError(f"only m in {{1, 2}} is supported, got m={self.m}")
        vals = []
        Q = n = None
        for _, value in data:
            if not isinstance(value, QTuple):
                value = QTuple(value)
            if Q is None:
                Q, n = value.Q, value.n
            elif (value.Q, value.n) != (Q, n):
                raise ValueError("all sample values must share Q and n")
            vals.append(value.points)
        if np.unique(locs, axis=0).shape[0] != locs.shape[0]:
            raise ValueError("sample locations must be distinct")
        self.Q, self.n = Q, n
        self.locs = locs
        self.vals = np.array(vals)
        box = np.asarray(domain_box, dtype=float).reshape(self.m, 2)
        self.root_lo = box[:, 0].copy()
        self.S = float((box[:, 1] - box[:, 0]).max())
        if self.S <= 0:
            raise ValueError("domain box must have positive extent")
        self.depth = int(depth)
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")
        if self.depth > 24:
            raise ValueError(f"depth cap exceeded: {self.depth} > 24")

        self._leaves = {}
        stack = [(np.zeros(self.m, dtype=np.int64), 0)]
        while stack:
            k, d = stack.pop()
            size = self.S / (1 << d)
            lo = self.root_lo + k * size
            gap = self._dist_inf_to_cell(lo, size)
            if size < gap:
                self._leaves[(tuple(k), d)] = "w"
            elif d >= self.depth:
                self._leaves[(tuple(k), d)] = "near"
            else:
                for delta in np.ndindex(*(2,) * self.m):
                    stack.append((2 * k + np.array(delta), d + 1))

        self._corner_values = {}
        unit = 1 << self.depth
        corner_set = set()
        for (k, d), kind in self._leaves.items():
            if kind != "w":
                continue
            side = 1 << (self.depth - d)
            base = np.asarray(k, dtype=np.int64) * side
            for delta in np.ndindex(*(2,) * self.m):
                corner_set.add(tuple(base + np.array(delta) * side))
        for corner in corner_set:
            x = self.root_lo + np.array(corner) * (self.S / unit)
            self._corner_values[corner] = self._nearest_sample_value(x)
        if self.m == 2:
            self._columns = {}
            self._rows = {}
            for cx, cy in corner_set:
                self._columns.setdefault(cx, []).append(cy)
                self._rows.setdefault(cy, []).append(cx)
            for d in (self._columns, self._rows):
                for key in d:
                    d[key] = np.array(sorted(set(d[key])))

    def _dist_inf_to_cell(self, lo: np.ndarray, size: float) -> float:
        hi = lo + size
        below = np.maximum(lo[None, :] - self.locs, 0.0)
        above = np.maximum(self.locs - hi[None, :], 0.0)
        return float(np.maximum(below, above).max(axis=1).min())

    def _nearest_sample_value(self, x: np.ndarray) -> np.ndarray:
        d = np.abs(self.locs - x[None, :]).max(axis=1)
        return self.vals[int(np.argmin(d))]

    def _locate(self, x: np.ndarray):
        k = np.zeros(self.m, dtype=np.int64)
        for d in range(self.depth + 1):
            key = (tuple(k), d)
            if key in self._leaves:
                return k, d, self._leaves[key]
            size = self.S / (1 << (d + 1))
            lo = self.root_lo + k * (self.S / (1 << d))
            k = 2 * k + (x >= lo + size).astype(np.int64)
        raise ValueError("query lies outside the domain box")

    def _eval_edge(self, c0: np.ndarray, c1: np.ndarray, v0: np.ndarray,
                   v1: np.ndarray, x: np.ndarray) -> np.ndarray:
        center = (c0 + c1) / 2.0
        R = float(np.linalg.norm(c1 - c0)) / 2.0
        pts = np.array([c0 - center, c1 - center])
        vals = np.array([v0, v1])

        def fn(b):
            return v0 if np.dot(b, pts[0]) > 0 else v1

        return _cone_eval(fn, pts, vals, R, x - center, "l2")

    def _subedge_breaks(self, fixed_axis: int, fixed_int: int, lo_int: int, hi_int: int):
        """Skeleton positions subdividing one side of a cell, endpoints included.

        The side lies on the line where coordinate ``fixed_axis`` equals
        ``fixed_int`` (in units of the finest dyadic scale) and runs from
        ``lo_int`` to ``hi_int`` along the other axis.  Corners of smaller
        neighbouring cells that fall on the side split it into the minimal
        edges over which the cone construction is applied.
        """
        lines = self._columns if fixed_axis == 0 else self._rows
        pos = lines.get(fixed_int)
        breaks = {lo_int, hi_int}
        if pos is not None:
            inner = pos[(pos >= lo_int) & (pos <= hi_int)]
            breaks.update(int(t) for t in inner)
        return np.array(sorted(breaks))

    def _corner_value(self, key: tuple, scale: float) -> np.ndarray:
        val = self._corner_values.get(key)
        if val is None:
            val = self._nearest_sample_value(self.root_lo + np.array(key) * scale)
        return val

    def _eval_face(self, k, d, x: np.ndarray) -> np.ndarray:
        unit = 1 << self.depth
        scale = self.S / unit
        side = 1 << (self.depth - d)
        base = np.asarray(k, dtype=np.int64) * side
        center = self.root_lo + (base + side / 2.0) * scale
        R = side * scale / 2.0

        def perimeter(b_rel):
            p = center + b_rel
            fixed_axis = int(np.argmax(np.abs(b_rel)))
            varying = 1 - fixed_axis
            fixed_int = int(round((p[fixed_axis] - self.root_lo[fixed_axis]) / scale))
            breaks = self._subedge_breaks(
                fixed_axis, fixed_int, int(base[varying]), int(base[varying] + side)
            )
            t_int = (p[varying] - self.root_lo[varying]) / scale
            j = int(np.searchsorted(breaks, t_int, side="right") - 1)
            j = max(0, min(j, breaks.size - 2))

            def key_at(var_int):
                key = [0, 0]
                key[fixed_axis] = fixed_int
                key[varying] = int(var_int)
                return tuple(key)

            k0, k1 = key_at(breaks[j]), key_at(breaks[j + 1])
            c0 = self.root_lo + np.array(k0) * scale
            c1 = self.root_lo + np.array(k1) * scale
            return self._eval_edge(
                c0, c1, self._corner_value(k0, scale), self._corner_value(k1, scale), p
            )

        pts_rel = []
        vals_list = []
        seen = set()
        for fixed_axis in range(2):
            varying = 1 - fixed_axis
            for fixed_int in (int(base[fixed_axis]), int(base[fixed_axis]) + side):
                breaks = self._subedge_breaks(
                    fixed_axis, fixed_int, int(base[varying]), int(base[varying] + side)
                )
                stations = sorted(
                    set(float(t) for t in breaks)
                    | set((float(breaks[j]) + float(breaks[j + 1])) / 2.0
                          for j in range(breaks.size - 1))
                )
                for t in stations:
                    p = np.empty(2)
                    p[fixed_axis] = self.root_lo[fixed_axis] + fixed_int * scale
                    p[varying] = self.root_lo[varying] + t * scale
                    rel = p - center
                    key = (round(rel[0] / scale, 9), round(rel[1] / scale, 9))
                    if key in seen:
                        continue
                    seen.add(key)
                    pts_rel.append(rel)
                    vals_list.append(perimeter(rel))
        return _cone_eval(
            perimeter, np.array(pts_rel), np.array(vals_list), R, x - center, "linf"
        )

    def evaluate(self, query) -> QTuple:
        """Value of the extension at a point of the domain box."""
        x = np.asarray(query, dtype=float).reshape(-1)
        if x.size != self.m:
            raise ValueError(f"query has dimension {x.size}, expected m={self.m}")
        d_samples = np.abs(self.locs - x[None, :]).max(axis=1)
        hit = int(np.argmin(d_samples))
        if d_samples[hit] <= 1e-12 * max(1.0, self.S):
            return QTuple(self.vals[hit])
        k, d, kind = self._locate(x)
        if kind == "near":
            return QTuple(self._nearest_sample_value(x))
        if self.m == 1:
            scale = self.S / (1 << self.depth)
            side = 1 << (self.depth - d)
            lo_int = int(k[0]) * side
            c0 = np.array([self.root_lo[0] + lo_int * scale])
            c1 = np.array([self.root_lo[0] + (lo_int + side) * scale])
            v0 = self._corner_value((lo_int,), scale)
            v1 = self._corner_value((lo_int + side,), scale)
            return QTuple(self._eval_edge(c0, c1, v0, v1, x))
        return QTuple(self._eval_face(k, d, x))


def whitney_extend(A, domain_box, resolution: int, query) -> QTuple:
    """One-shot dyadic extension query; see WhitneyExtension for batches."""
    return WhitneyExtension(A, domain_box, resolution).evaluate(query)


def extend_to_plane(f: GridFunction) -> GridFunction:
    """Extend a unit-ball grid function to the surrounding plane.

    Inside the ball the values are kept; between radius 1 and 3/2 the point
    reflects through the sphere via ``phi(x) = (2/|x| - 1) x`` and takes the
    nearest node's branches scaled by ``2 |phi(x)| - 1``; beyond radius 3/2
    everything is the zero tuple.  The output grid keeps the input spacing
    and contains the input lattice, padded to cover [-2, 2]^m.
    """
    N = f.shape[0]
    if any(s != N for s in f.shape):
        raise ValueError("expected an equal-extent grid over the unit ball")
    pad = math.ceil((N - 1) / 2)
    N_out = N + 2 * pad
    shape_out = (N_out,) * f.m
    mask = np.full(shape_out, INTERIOR, dtype=np.int8)
    for axis in range(f.m):
        sl = [slice(None)] * f.m
        sl[axis] = 0
        mask[tuple(sl)] = BOUNDARY
        sl[axis] = N_out - 1
        mask[tuple(sl)] = BOUNDARY
    values = np.zeros(shape_out + (f.Q, f.n))

    inside = f.mask != OUTSIDE
    in_coords = f.all_coords()[inside]
    in_vals = f.values[inside]

    for idx in np.ndindex(*shape_out):
        in_idx = tuple(i - pad for i in idx)
        aligned = all(0 <= j < N for j in in_idx)
        if aligned and f.mask[in_idx] != OUTSIDE:
            values[idx] = f.values[in_idx]
            continue
        x = (np.asarray(idx, dtype=float) - (N_out - 1) / 2.0) * f.h
        r = float(np.linalg.norm(x))
        if r >= 1.5:
            continue  # zero tuple
        if r < 1.0:
            # inside the ball but off the sampled domain: nearest node
            j = int(np.argmin(np.linalg.norm(in_coords - x[None, :], axis=1)))
            values[idx] = in_vals[j]
            continue
        y = (2.0 / r - 1.0) * x
        factor = 2.0 * float(np.linalg.norm(y)) - 1.0
        j = int(np.argmin(np.linalg.norm(in_coords - y[None, :], axis=1)))
        values[idx] = factor * in_vals[j]
    return GridFunction(f.m, f.n, f.Q, shape_out, f.h, mask, values)
