"""Embeddings of Q-tuple space into Euclidean and dual spaces.

Three constructions live here:

* the sorted-projection embedding ``xi``: project a tuple onto every
  direction of a frame of orthonormal bases, sort each list of projections,
  and concatenate.  It is 1-Lipschitz, a local isometry, and injective once
  the frame's directions separate well enough;
* the polynomial-coefficient embedding ``whitney_eta``: the coefficients of
  the monic polynomial whose roots (as linear forms) are the tuple's
  points, with a root-finding inverse in one (complex) variable;
* the dual-norm functional ``zeta``: a tuple acts on Lipschitz functions by
  summing values at its points; the dual distance is bracketed by a
  dictionary of 1-Lipschitz cone functions from below and the G1 metric
  from above.

``decode`` inverts ``xi`` approximately by local optimization; it is exact
on the image up to round-off but carries no global Lipschitz certificate.

Frames are immutable after construction and all operations are pure;
``decode`` keeps its optimizer state caller-local.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .qspace import MetricKind, QTuple, dist

_VALIDATION_SEED = 171717
_VALIDATION_DRAWS = 500


class FrameConstructionError(RuntimeError):
    """Raised when no direction frame passes validation within the size cap."""


class DecodeFailure(RuntimeError):
    """Decode did not converge; ``best`` holds the best iterate found."""

    def __init__(self, message: str, best: QTuple):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class EmbeddedVector:
    """Image of a tuple under ``xi``; length is Q * n * K of the frame."""

    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float))


class DirectionFrame:
    """K orthonormal bases of R^n whose leading directions separate vectors.

    The separation parameter ``epsilon`` is certified empirically at
    construction: over a fixed set of random draws of L = Q^2 unit vectors,
    some leading direction has inner product at least ``epsilon`` in
    absolute value with every vector of the draw.

    Parameters
    ----------
    n, Q : int
    bases : array_like, shape (K, n, n)
        ``bases[k, 0]`` is the distinguished direction of basis k; rows of
        each (n, n) block form an orthonormal basis.
    epsilon : float
    """

    def __init__(self, n: int, Q: int, bases, epsilon: float, *, validate: bool = True):
        self.n = int(n)
        self.Q = int(Q)
        self.bases = np.asarray(bases, dtype=float)
        if self.bases.ndim != 3 or self.bases.shape[1:] != (self.n, self.n):
            raise FrameConstructionError(
                f"bases must have shape (K, {self.n}, {self.n}), got {self.bases.shape}"
            )
        self.K = self.bases.shape[0]
        self.epsilon = float(epsilon)
        if self.epsilon <= 0:
            raise FrameConstructionError("epsilon must be positive")
        eye = np.eye(self.n)
        for k in range(self.K):
            gram = self.bases[k] @ self.bases[k].T
            if np.abs(gram - eye).max() > 1e-10:
                raise FrameConstructionError(f"basis {k} is not orthonormal to 1e-10")
        if validate:
            measured = measured_separation(self.bases[:, 0, :], self.Q)
            if measured < self.epsilon - 1e-12:
                raise FrameConstructionError(
                    f"separation validation failed: measured {measured}, stored {self.epsilon}"
                )
        self._dirmat = self.bases.reshape(self.K * self.n, self.n)

    @property
    def ambient_length(self) -> int:
        return self.Q * self.n * self.K

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "Q": self.Q,
                "K": self.K,
                "epsilon": self.epsilon,
                "bases": self.bases.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "DirectionFrame":
        obj = json.loads(text)
        return cls(obj["n"], obj["Q"], obj["bases"], obj["epsilon"])


def measured_separation(directions: np.ndarray, Q: int,
                        draws: int = _VALIDATION_DRAWS) -> float:
    """Largest epsilon the direction set certifies on the validation draws.

    For each draw of L = Q^2 random unit vectors, compute the best
    direction's worst absolute inner product; the certified epsilon is the
    minimum over draws.  The draw sequence is fixed, so the measurement is
    reproducible and re-validation of a stored frame is exact.
    """
    directions = np.asarray(directions, dtype=float)
    n = directions.shape[1]
    L = max(1, Q * Q)
    rng = np.random.default_rng(_VALIDATION_SEED)
    worst = math.inf
    for _ in range(draws):
        V = rng.standard_normal((L, n))
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        scores = np.abs(directions @ V.T)  # (K, L)
        worst = min(worst, scores.min(axis=1).max())
    return float(worst)


def _greedy_directions(pool: np.ndarray, K: int) -> np.ndarray:
    """Farthest-point packing on the sphere with antipodal identification."""
    chosen = [pool[0]]
    sims = np.abs(pool @ pool[0])
    while len(chosen) < K:
        i = int(np.argmin(sims))
        chosen.append(pool[i])
        sims = np.maximum(sims, np.abs(pool @ pool[i]))
    return np.array(chosen)


def _complete_basis(direction: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Orthonormal basis of R^n whose first row is the given unit direction."""
    n = direction.size
    M = np.empty((n, n))
    M[:, 0] = direction
    M[:, 1:] = rng.standard_normal((n, n - 1))
    Qmat, _ = np.linalg.qr(M)
    if np.dot(Qmat[:, 0], direction) < 0:
        Qmat = -Qmat
    return Qmat.T


def build_frame(n: int, Q: int, K="auto", *, seed: int = 0, eps_floor: float = 0.05,
                max_K: int = 512, pool_size: int = 4096) -> DirectionFrame:
    """Construct a direction frame by greedy max-min packing on the sphere.

    Directions are inserted one at a time, each maximizing its minimal
    angle (mod antipody) to the ones already chosen, then completed to
    orthonormal bases against a random complement.  ``epsilon`` is the
    largest value the fixed validation draws certify.  With ``K="auto"``
    the direction count doubles from 2n until the certified epsilon reaches
    ``eps_floor``; exceeding ``max_K`` raises FrameConstructionError.
    """
    if n < 1 or Q < 1:
        raise ValueError("n and Q must be positive")
    if n == 1:
        return DirectionFrame(1, Q, [[[1.0]]], 1.0)
    rng = np.random.default_rng(seed)
    pool = rng.standard_normal((pool_size, n))
    pool /= np.linalg.norm(pool, axis=1, keepdims=True)
    if K == "auto":
        schedule = []
        k = 2 * n
        while k <= max_K:
            schedule.append(k)
            k *= 2
    else:
        schedule = [int(K)]
    last_eps = 0.0
    for k in schedule:
        dirs = _greedy_directions(pool, k)
        eps = measured_separation(dirs, Q)
        last_eps = eps
        if eps >= eps_floor or K != "auto":
            if eps <= 0:
                raise FrameConstructionError("measured separation is zero")
            bases = np.array([_complete_basis(d, rng) for d in dirs])
            return DirectionFrame(n, Q, bases, eps)
    raise FrameConstructionError(
        f"no frame with K <= {max_K} reached eps_floor={eps_floor} (best {last_eps})"
    )


def pi_e(v: QTuple, e) -> np.ndarray:
    """Projections of the tuple's points onto a unit direction, sorted ascending.

    Ties between equal projections are broken by comparing the full points
    lexicographically, so the induced ordering of points is deterministic.
    """
    e = np.asarray(e, dtype=float).reshape(-1)
    if abs(np.linalg.norm(e) - 1.0) > 1e-10:
        raise ValueError("direction must be a unit vector to 1e-10")
    if e.size != v.n:
        raise ValueError(f"direction has dimension {e.size}, tuple has n={v.n}")
    proj = v.points @ e
    keys = tuple(v.points[:, j] for j in reversed(range(v.n))) + (proj,)
    order = np.lexsort(keys)
    return proj[order]


def _check_orthonormal(basis: np.ndarray) -> None:
    n = basis.shape[0]
    if basis.shape != (n, n) or np.abs(basis @ basis.T - np.eye(n)).max() > 1e-10:
        raise ValueError("basis rows must be orthonormal to 1e-10")


def xi0(v: QTuple, basis) -> np.ndarray:
    """Sorted projections onto every vector of one orthonormal basis, concatenated.

    This map is 1-Lipschitz and preserves the norm identity
    ``|xi0(v)| = G2(v, Q*[[0]])`` but is generally not injective.
    """
    basis = np.asarray(basis, dtype=float)
    if basis.shape != (v.n, v.n):
        raise ValueError(f"basis must be ({v.n}, {v.n}), got {basis.shape}")
    _check_orthonormal(basis)
    return np.concatenate([pi_e(v, basis[j]) for j in range(v.n)])


def xi(v: QTuple, frame: DirectionFrame) -> EmbeddedVector:
    """The frame embedding: per-basis sorted projections, scaled by K^(-1/2)."""
    if v.n != frame.n:
        raise ValueError(f"tuple has n={v.n}, frame has n={frame.n}")
    proj = frame._dirmat @ v.points.T  # (K*n, Q)
    proj = np.sort(proj, axis=1)
    return EmbeddedVector(proj.reshape(-1) / math.sqrt(frame.K))


def _xi_raw(points: np.ndarray, dirmat: np.ndarray) -> np.ndarray:
    """Unnormalized embedding of a raw point array (internal fast path)."""
    return np.sort(dirmat @ points.T, axis=1)


def xi_isometry_radius(v: QTuple, frame: DirectionFrame) -> float:
    """Half the minimal splitting gap among all K*n projected 1-D tuples.

    Within this G2 radius around v the embedding is an exact isometry.
    Infinite when every projection collapses to a single value.
    """
    if v.n != frame.n:
        raise ValueError(f"tuple has n={v.n}, frame has n={frame.n}")
    proj = frame._dirmat @ v.points.T
    best = math.inf
    for row in proj:
        vals = np.unique(row)
        if vals.size > 1:
            best = min(best, float(np.diff(vals).min()))
    return best / 2.0


def _candidate_from_basis(blocks: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Point array obtained by pairing the k-th basis' sorted blocks rank-wise."""
    # blocks: (n, Q) sorted projections onto basis rows; entry [j, i] is the
    # i-th smallest projection onto direction j.  Pair equal ranks.
    return blocks.T @ basis


def _rank_update(Y: np.ndarray, dirmat: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """One alternating step: re-rank projections, then solve for the points.

    With ranks frozen the objective is quadratic with normal matrix K*I
    (the bases resolve the identity), so the minimizer is an average of
    target values times directions.
    """
    proj = dirmat @ Y.T  # (R, Q) with R = K * n
    order = np.argsort(proj, axis=1, kind="stable")
    rank = np.argsort(order, axis=1, kind="stable")
    picked = np.take_along_axis(targets, rank, axis=1)
    k_count = dirmat.shape[0] // dirmat.shape[1]
    return np.einsum("ri,rn->in", picked, dirmat) / k_count


def _sorted_objective(Y: np.ndarray, dirmat: np.ndarray, targets: np.ndarray, K: int) -> float:
    s = _xi_raw(Y, dirmat)
    return float(((s - targets) ** 2).sum() / K)


def decode(z, frame: DirectionFrame, hint: QTuple = None, *, max_iter: int = 200,
           tol: float = 1e-14, extra_restarts: int = 8,
           search_budget: int = 50_000) -> QTuple:
    """Approximate inverse of ``xi``: a tuple locally minimizing |xi(v) - z|.

    Seeds come from the hint (if any) and from each basis of the frame,
    pairing its sorted blocks rank-wise.  Each seed is refined by
    alternating rank re-assignment with the closed-form least-squares point
    update, then polished by derivative-free coordinate search on the true
    objective.  On the image of ``xi`` the round trip is exact to G2 1e-6.

    Raises
    ------
    DecodeFailure
        If the refinement loop hits its iteration cap without converging;
        the exception carries the best iterate.
    """
    coords = z.coords if isinstance(z, EmbeddedVector) else np.asarray(z, dtype=float)
    if coords.size != frame.ambient_length:
        raise ValueError(
            f"embedded vector has length {coords.size}, frame expects {frame.ambient_length}"
        )
    Q, n, K = frame.Q, frame.n, frame.K
    dirmat = frame._dirmat
    raw = coords.reshape(K * n, Q) * math.sqrt(K)
    targets_sorted = np.sort(raw, axis=1)
    scale = 1.0 + float(np.abs(raw).max())

    seeds = []
    if hint is not None:
        if hint.Q != Q or hint.n != n:
            raise ValueError("hint must match the frame's Q and n")
        seeds.append(hint.points.copy())
    for k in range(K):
        blocks = targets_sorted[k * n : (k + 1) * n]
        seeds.append(_candidate_from_basis(blocks, frame.bases[k]))

    def alternate(Y):
        f_prev = _sorted_objective(Y, dirmat, targets_sorted, K)
        for _ in range(max_iter):
            Y_new = _rank_update(Y, dirmat, targets_sorted)
            f_new = _sorted_objective(Y_new, dirmat, targets_sorted, K)
            if f_new > f_prev - tol * scale * scale:
                if f_new <= f_prev:
                    return Y_new, f_new
                return Y, f_prev
            Y, f_prev = Y_new, f_new
        return Y, f_prev

    best_Y, best_f = None, math.inf
    for seed_Y in seeds:
        Y, f = alternate(seed_Y.copy())
        if f < best_f:
            best_Y, best_f = Y, f

    rng = np.random.default_rng(12345)
    restarts = 0
    while best_f > (1e-9 * scale) ** 2 and restarts < extra_restarts:
        noise = rng.standard_normal(best_Y.shape) * (math.sqrt(best_f) + 1e-6)
        Y, f = alternate(best_Y + noise)
        if f < best_f:
            best_Y, best_f = Y, f
        restarts += 1

    # polish on the true objective, which keeps the stored block order of z
    def true_objective(Y):
        return float(((np.sort(dirmat @ Y.T, axis=1) - raw) ** 2).sum() / K)

    Y, f, converged = _coordinate_search(
        best_Y, true_objective, step0=1e-3 * scale, min_step=1e-12 * scale,
        budget=search_budget,
    )
    if not converged:
        raise DecodeFailure("coordinate refinement hit its evaluation budget", QTuple(Y))
    return QTuple(Y)


def _coordinate_search(Y0, objective, step0: float, min_step: float, budget: int):
    """Pattern search over the point coordinates; only improvements accepted."""
    Y = Y0.copy()
    f = objective(Y)
    step = step0
    evals = 0
    while step > min_step:
        improved = False
        for idx in np.ndindex(*Y.shape):
            for sgn in (1.0, -1.0):
                Y[idx] += sgn * step
                f_try = objective(Y)
                evals += 1
                if f_try < f:
                    f = f_try
                    improved = True
                    break
                Y[idx] -= sgn * step
            if evals > budget:
                return Y, f, False
        if not improved:
            step /= 2.0
    return Y, f, True


def whitney_count(n: int, Q: int) -> int:
    """Number of polynomial coefficients: C(Q + n, n) - 1."""
    return math.comb(Q + n, n) - 1


def whitney_eta(v: QTuple, *, complex_mul: bool = False):
    """Coefficients of the monic polynomial with the tuple's points as roots.

    The polynomial is ``prod_i (x - <u, y_i>)`` expanded in the variables
    ``(u_1, ..., u_n, x)``; the output maps each multi-index ``alpha`` with
    ``1 <= |alpha| <= Q`` to the coefficient of ``u^alpha x^(Q - |alpha|)``
    and always has exactly ``C(Q+n, n) - 1`` entries.  The computation runs
    on the canonical form of the tuple, so permuting the input points
    yields bit-identical output.

    With ``complex_mul=True`` the points are read as complex numbers (n=2
    as re/im pairs, n=1 with zero imaginary part) and the classical
    one-variable coefficients ``{(i,): c_i}`` of ``prod (x - z_i)`` are
    returned.
    """
    v = v.canonical()
    if complex_mul:
        if v.n == 1:
            roots = v.points[:, 0].astype(complex)
        elif v.n == 2:
            roots = v.points[:, 0] + 1j * v.points[:, 1]
        else:
            raise ValueError("complex coefficients need n=1 or n=2 input")
        coeffs = np.array([1.0 + 0j])
        for z in roots:
            coeffs = np.convolve(coeffs, np.array([1.0, -z]))
        return {(i,): complex(coeffs[i]) for i in range(1, v.Q + 1)}

    n, Q = v.n, v.Q
    by_degree = [dict() for _ in range(Q + 1)]
    by_degree[0][(0,) * n] = 1.0
    for point in v.points:
        new = [dict() for _ in range(Q + 1)]
        for d in range(Q + 1):
            for alpha, c in by_degree[d].items():
                if d + 1 <= Q:
                    new[d + 1][alpha] = new[d + 1].get(alpha, 0.0) + c
                for j in range(n):
                    if point[j] == 0.0:
                        continue
                    beta = alpha[:j] + (alpha[j] + 1,) + alpha[j + 1 :]
                    new[d][beta] = new[d].get(beta, 0.0) - c * point[j]
        by_degree = new
    out = {}
    for i in range(1, Q + 1):
        for alpha in _multi_indices(n, i):
            out[alpha] = float(by_degree[Q - i].get(alpha, 0.0))
    return out


def _multi_indices(n: int, total: int):
    """All alpha in N^n with |alpha| == total, lexicographic order."""
    if n == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _multi_indices(n - 1, total - first):
            yield (first,) + rest


def whitney_eta_inverse_1d(coeffs, as_complex: bool = None) -> QTuple:
    """Roots of the monic polynomial ``x^Q + c_1 x^(Q-1) + ... + c_Q``.

    Computed as companion-matrix eigenvalues.  Returns an n=2 tuple of
    (re, im) points, collapsing to n=1 when the coefficients are real and
    every root is real to within round-off; pass ``as_complex`` to force
    either form.
    """
    c = np.asarray(list(coeffs))
    if c.ndim != 1 or c.size < 1:
        raise ValueError("coeffs must be a nonempty 1-D sequence")
    roots = np.roots(np.concatenate([[1.0], c]))
    if as_complex is None:
        as_complex = np.iscomplexobj(c) or (
            np.abs(roots.imag).max() > 1e-9 * (1.0 + np.abs(roots).max())
        )
    if as_complex:
        return QTuple(np.column_stack([roots.real, roots.imag]))
    return QTuple(roots.real.reshape(-1, 1))


def zeta_dual_gap(v: QTuple, w: QTuple, dictionary_size: int = 64, basepoint=None, *,
                  seed: int = 0):
    """Bracket the dual-norm distance of the summation functionals of v and w.

    The upper bound is the G1 distance (exact).  The lower bound maximizes
    ``|sum_i u(y_i) - sum_i u(y'_i)|`` over the dictionary of 1-Lipschitz
    cone functions ``u_a(y) = d(y, a) - d(a, y0)`` anchored at the points
    of both tuples plus ``dictionary_size`` random anchors.  Always
    ``lower <= true dual norm <= upper``.

    Returns
    -------
    (lower, upper) : pair of floats
    """
    if v.Q != w.Q or v.n != w.n:
        raise ValueError("tuples must share Q and n")
    upper, _ = dist(v, w, MetricKind.G1)
    pts = np.vstack([v.points, w.points])
    if basepoint is None:
        basepoint = np.zeros(v.n)
    basepoint = np.asarray(basepoint, dtype=float).reshape(v.n)
    rng = np.random.default_rng(seed)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = hi - lo
    extra = rng.uniform(lo - 0.5 * span - 0.1, hi + 0.5 * span + 0.1,
                        size=(dictionary_size, v.n))
    anchors = np.vstack([pts, extra])
    dv = np.linalg.norm(v.points[None, :, :] - anchors[:, None, :], axis=2).sum(axis=1)
    dw = np.linalg.norm(w.points[None, :, :] - anchors[:, None, :], axis=2).sum(axis=1)
    lower = float(np.abs(dv - dw).max())
    return lower, upper
