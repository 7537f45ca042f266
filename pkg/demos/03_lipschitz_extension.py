"""Extending Q-valued boundary data into the domain.

Run: python demos/03_lipschitz_extension.py
"""

import math

import numpy as np

from qvalued import (
    BoundarySample,
    QTuple,
    WhitneyExtension,
    cone_extend,
    extend_to_plane,
    disk_mask,
    empty_grid,
)
from qvalued.grids import OUTSIDE

# --- Cone extension on a ball: radial interpolation, cluster splitting ---
# Boundary data whose two branches live far apart: the construction splits
# them and extends each cluster on its own.
samples = []
for t in np.linspace(0, 2 * math.pi, 16, endpoint=False):
    loc = np.array([math.cos(t), math.sin(t)])
    value = QTuple([[0.05 * math.cos(t)], [10.0 + 0.05 * math.sin(t)]])
    samples.append((loc, value))
sample = BoundarySample(points=samples, R=1.0, m=2)

for q in ([1.0, 0.0], [0.5, 0.0], [0.0, 0.0]):
    out = cone_extend(sample, q)
    print(f"cone at {q}: {np.sort(out.points.ravel()).round(4)}")

# --- Dyadic-cube extension from scattered samples ---
data = [
    (np.array([0.1, 0.1]), QTuple([[0.0]])),
    (np.array([0.9, 0.2]), QTuple([[1.0]])),
    (np.array([0.5, 0.9]), QTuple([[0.5]])),
]
ext = WhitneyExtension(data, [[0, 1], [0, 1]], depth=7)
print("dyadic extension reproduces its data:",
      all(np.array_equal(ext.evaluate(x).points, v.points) for x, v in data))
grid = np.linspace(0.05, 0.95, 5)
field = np.array([[ext.evaluate([x, y]).points[0, 0] for y in grid] for x in grid])
print("dyadic extension on a 5x5 probe grid:")
print(field.round(3))

# --- Reflection to the plane: unchanged inside, decaying ring, zero far out ---
N = 17
g = empty_grid(2, 1, 1, N, disk_mask(N))
inside = g.mask != OUTSIDE
coords = g.all_coords()
g.values[..., 0, 0] = np.where(inside, coords[..., 0] + 1.0, np.nan)
E = extend_to_plane(g)
r = np.linalg.norm(E.all_coords(), axis=-1)
print("far nodes are the zero tuple:", bool(np.all(E.values[r >= 1.5] == 0.0)))
ring = (r >= 1.0) & (r < 1.5)
print("ring values decay toward zero: max |value| at r in [1,1.5):",
      float(np.abs(E.values[ring]).max()))
