"""Unordered tuples and their assignment metrics.

Run: python demos/01_assignment_metrics.py
"""

import numpy as np

from qvalued import (
    MetricKind,
    QTuple,
    concatenate,
    dist,
    dist_sorted_1d,
    local_split,
    split_distance,
    support_sigma,
)

# --- Tuples are multisets: storage order never matters ---
v = QTuple([[-1, 1], [1, 0]])
w = QTuple([[1, 0], [-1, 1]])
print("multiset equality:", v == w)

# --- The three metrics pair points optimally and aggregate differently ---
a = QTuple([[-1, 1], [1, 0]])
b = QTuple([[-1, 0], [1, 1]])
for kind in MetricKind:
    value, match = dist(a, b, kind)
    print(f"{kind.name:>4}: value {value:.6f}  pairing {match.perm}")

# On the real line the optimal pairing is just sorting.
print("sorted 1-D shortcut:", dist_sorted_1d(QTuple([1, 5, 2]), QTuple([0, 2, 6])))

# --- The splitting radius: below half of it, pairings are forced ---
v = QTuple([0.0, 0.0, 3.0])
print("split distance of [0,0,3]:", split_distance(v))
support, sigma = support_sigma(v)
print("support:", [(p.tolist(), m) for p, m in support], "sigma:", sigma)

# A perturbation within half the splitting radius decomposes uniquely
# around the support points of the center.
parts, assignment = local_split(QTuple([0, 0, 10]), QTuple([0.1, -0.1, 9.8]))
print("local split parts:", [p.points.ravel().tolist() for p in parts])
print("concatenation restores the tuple:",
      concatenate(parts[0], parts[1]) == QTuple([0.1, -0.1, 9.8]))

# --- The splitting lemma, checked numerically ---
rng = np.random.default_rng(0)
v = QTuple(rng.uniform(-1, 1, (4, 2)))
s = split_distance(v)
delta = rng.standard_normal((4, 2))
delta *= 0.5 * s / np.linalg.norm(delta)
w = QTuple(v.points + delta)
paired_cost = float(np.sqrt((np.linalg.norm(delta, axis=1) ** 2).sum()))
print("identity pairing cost:", paired_cost)
print("optimal matching cost:", dist(v, w, MetricKind.G2)[0])
