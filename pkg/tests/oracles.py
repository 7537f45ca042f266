"""Independent oracles used by the tests: brute force over all pairings.

These deliberately avoid the library's assignment solvers so that the fast
paths are checked against an unrelated computation.
"""

import itertools
import math

import numpy as np


def pairing_cost(v_pts, w_pts, perm, kind):
    d = [
        float(np.linalg.norm(np.asarray(v_pts[i]) - np.asarray(w_pts[perm[i]])))
        for i in range(len(v_pts))
    ]
    if kind == "g1":
        return sum(d)
    if kind == "g2":
        return math.sqrt(sum(x * x for x in d))
    if kind == "ginf":
        return max(d)
    raise ValueError(kind)


def brute_force_dist(v_pts, w_pts, kind):
    """Minimum over all permutations; also returns the first lexicographic argmin."""
    best = math.inf
    arg = None
    for perm in itertools.permutations(range(len(v_pts))):
        val = pairing_cost(v_pts, w_pts, perm, kind)
        if val < best:
            best, arg = val, perm
    return best, arg


def brute_force_dist_batch(v_pts, w_pts, kind, perms):
    """Vectorized brute force given a precomputed permutation array."""
    v = np.asarray(v_pts)
    w = np.asarray(w_pts)
    D = np.linalg.norm(v[:, None, :] - w[None, :, :], axis=2)
    Q = v.shape[0]
    picked = D[np.arange(Q)[None, :], perms]  # (n_perms, Q)
    if kind == "g1":
        vals = picked.sum(axis=1)
    elif kind == "g2":
        vals = np.sqrt((picked * picked).sum(axis=1))
    else:
        vals = picked.max(axis=1)
    return float(vals.min())


def scalar_laplace_solve(mask_interior, boundary_values, shape):
    """Independent 5-point Laplacian solve on a 2-D grid.

    ``boundary_values`` maps node index to a scalar for every non-interior
    node adjacent to the interior; returns a dict interior index -> value.
    """
    from scipy.sparse import lil_matrix
    from scipy.sparse.linalg import spsolve

    order = {idx: i for i, idx in enumerate(sorted(mask_interior))}
    N = len(order)
    A = lil_matrix((N, N))
    b = np.zeros(N)
    for idx, row in order.items():
        deg = 0
        for axis in range(2):
            for step in (-1, 1):
                nb = list(idx)
                nb[axis] += step
                nb = tuple(nb)
                if not (0 <= nb[axis] < shape[axis]):
                    continue
                if nb in order:
                    A[row, order[nb]] = -1.0
                    deg += 1
                elif nb in boundary_values:
                    b[row] += boundary_values[nb]
                    deg += 1
        A[row, row] = deg
    x = spsolve(A.tocsr(), b)
    return {idx: x[row] for idx, row in order.items()}
