"""Empirical property harness for the provable identities and inequalities.

Every check draws random instances from a seeded generator, counts
violations at configurable tolerances, and reports the extremal observed
ratio along with up to five failing witnesses.  Checks are independent and
reproducible bit for bit under a fixed seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import embed
from .energy import _g2_value
from .grids import GridFunction, square_mask
from .qspace import MetricKind, QTuple, dist, split_distance

_CHECK_OFFSETS = {
    "metric_equivalence": 101,
    "splitting_lemma": 202,
    "xi": 303,
    "sqrt_q_bound": 404,
    "poincare": 505,
    "zeta_bounds": 606,
}

_DEFAULT_TOLERANCES = {
    "symmetry": 1e-12,
    "triangle": 1e-9,
    "equivalence": 1e-9,
    "splitting": 1e-12,
    "xi_upper": 1e-9,
    "xi_local": 1e-9,
    "xi_norm": 1e-12,
    "sqrt_q": 1e-6,
    "poincare_c": 64.0,
    "zeta": 1e-12,
}


@dataclass
class CheckConfig:
    """Scale and tolerances of the random-instance checks."""

    seed: int = 0
    trials: int = 200
    Q_range: tuple = (1, 4)
    n_range: tuple = (1, 3)
    m_range: tuple = (1, 2)
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        for name, rng in (("Q_range", self.Q_range), ("n_range", self.n_range),
                          ("m_range", self.m_range)):
            if len(rng) != 2 or rng[0] > rng[1] or rng[0] < 1:
                raise ValueError(f"{name} must be a nonempty range of positive integers")
        merged = dict(_DEFAULT_TOLERANCES)
        merged.update(self.tolerances)
        self.tolerances = merged

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "trials": self.trials,
                "Q_range": list(self.Q_range),
                "n_range": list(self.n_range),
                "m_range": list(self.m_range),
                "tolerances": self.tolerances,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "CheckConfig":
        obj = json.loads(text)
        return cls(
            seed=obj.get("seed", 0),
            trials=obj.get("trials", 200),
            Q_range=tuple(obj.get("Q_range", (1, 4))),
            n_range=tuple(obj.get("n_range", (1, 3))),
            m_range=tuple(obj.get("m_range", (1, 2))),
            tolerances=obj.get("tolerances", {}),
        )


@dataclass
class CheckReport:
    """Outcome of one check: failure count, extremal ratio, witnesses."""

    name: str
    trials: int
    failures: int
    worst_ratio: float
    witnesses: list = field(default_factory=list)

    def record_failure(self, witness: str):
        self.failures += 1
        if len(self.witnesses) < 5:
            self.witnesses.append(witness)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "trials": self.trials,
            "failures": self.failures,
            "worst_ratio": self.worst_ratio,
            "witnesses": self.witnesses,
        }


def _rng_for(cfg: CheckConfig, name: str) -> np.random.Generator:
    return np.random.default_rng(cfg.seed * 1000003 + _CHECK_OFFSETS[name])


def random_tuple(rng: np.random.Generator, Q: int, n: int,
                 cluster: bool = True) -> QTuple:
    """Points uniform in [-1, 1]^n, sometimes clustered to shrink the split gap."""
    if cluster and Q > 1 and rng.random() < 0.4:
        k = int(rng.integers(1, Q + 1))
        centers = rng.uniform(-1.0, 1.0, size=(k, n))
        assign = rng.integers(0, k, size=Q)
        pts = centers[assign] + 0.02 * rng.standard_normal((Q, n))
        return QTuple(pts)
    return QTuple(rng.uniform(-1.0, 1.0, size=(Q, n)))


def _draw_Qn(rng, cfg):
    Q = int(rng.integers(cfg.Q_range[0], cfg.Q_range[1] + 1))
    n = int(rng.integers(cfg.n_range[0], cfg.n_range[1] + 1))
    return Q, n


def check_metric_equivalence(cfg: CheckConfig, _dist=None) -> CheckReport:
    """G_inf <= G2 <= G1 <= Q G_inf and G2 <= sqrt(Q) G_inf on random pairs."""
    d = _dist or dist
    rng = _rng_for(cfg, "metric_equivalence")
    tol = cfg.tolerances["equivalence"]
    report = CheckReport("metric_equivalence", cfg.trials, 0, 0.0)
    for _ in range(cfg.trials):
        Q, n = _draw_Qn(rng, cfg)
        v = random_tuple(rng, Q, n)
        w = random_tuple(rng, Q, n)
        g1, _ = d(v, w, MetricKind.G1)
        g2, _ = d(v, w, MetricKind.G2)
        gi, _ = d(v, w, MetricKind.GINF)
        ok = (
            gi <= g2 + tol
            and g2 <= g1 + tol
            and g1 <= Q * gi + tol
            and g2 <= math.sqrt(Q) * gi + tol
        )
        if gi > 0:
            report.worst_ratio = max(report.worst_ratio, g1 / (Q * gi))
        if not ok:
            report.record_failure(json.dumps({"v": v.points.tolist(), "w": w.points.tolist()}))
    return report


def check_splitting_lemma(cfg: CheckConfig) -> CheckReport:
    """Within half the splitting radius the constructed pairing is optimal.

    Perturbations are scaled so the G2 distance is at most split/2, with
    the boundary case split/2 hit exactly on every fourth trial; the
    point-wise pairing cost must equal the assignment optimum exactly for
    all three aggregations.
    """
    rng = _rng_for(cfg, "splitting_lemma")
    tol = cfg.tolerances["splitting"]
    report = CheckReport("splitting_lemma", cfg.trials, 0, 0.0)
    for trial in range(cfg.trials):
        Q, n = _draw_Qn(rng, cfg)
        v = random_tuple(rng, Q, n)
        s = split_distance(v)
        radius = 1.0 if math.isinf(s) else s / 2.0
        delta = rng.standard_normal((Q, n))
        total = math.sqrt(float((delta * delta).sum()))
        if total == 0.0:
            continue
        scale = radius if trial % 4 == 0 else radius * rng.uniform(0.1, 0.999)
        delta *= scale / total
        w = QTuple(v.points + delta)
        paired = np.linalg.norm(delta, axis=1)
        targets = {
            MetricKind.G1: paired.sum(),
            MetricKind.G2: math.sqrt(float((paired * paired).sum())),
            MetricKind.GINF: paired.max(),
        }
        worst = 0.0
        ok = True
        for kind, target in targets.items():
            value, _ = dist(v, w, kind)
            gap = abs(value - target)
            worst = max(worst, gap / (1.0 + target))
            if gap > tol * (1.0 + target):
                ok = False
        report.worst_ratio = max(report.worst_ratio, worst)
        if not ok:
            report.record_failure(json.dumps({"v": v.points.tolist(), "w": w.points.tolist()}))
    return report


def check_xi(cfg: CheckConfig, frame: embed.DirectionFrame = None) -> CheckReport:
    """Upper bound, local isometry and norm identity of the frame embedding.

    The reported ratio is the empirical lower Lipschitz constant (the
    smallest observed |xi(v) - xi(w)| / G2(v, w)), which must stay positive.
    """
    rng = _rng_for(cfg, "xi")
    tol_up = cfg.tolerances["xi_upper"]
    tol_loc = cfg.tolerances["xi_local"]
    tol_norm = cfg.tolerances["xi_norm"]
    report = CheckReport("xi", cfg.trials, 0, math.inf)
    frames = {}
    for _ in range(cfg.trials):
        if frame is not None:
            Q, n, fr = frame.Q, frame.n, frame
        else:
            Q, n = _draw_Qn(rng, cfg)
            key = (n, Q)
            if key not in frames:
                frames[key] = embed.build_frame(n, Q, seed=7)
            fr = frames[key]
        v = random_tuple(rng, Q, n)
        w = random_tuple(rng, Q, n)
        g2, _ = dist(v, w, MetricKind.G2)
        dxi = float(np.linalg.norm(embed.xi(v, fr).coords - embed.xi(w, fr).coords))
        ok = dxi <= g2 + tol_up
        if g2 > 1e-12:
            report.worst_ratio = min(report.worst_ratio, dxi / g2)
        norm_gap = abs(
            float(np.linalg.norm(embed.xi(v, fr).coords))
            - dist(v, QTuple(np.zeros((Q, n))), MetricKind.G2)[0]
        )
        ok = ok and norm_gap <= tol_norm

        r = embed.xi_isometry_radius(v, fr)
        delta = rng.standard_normal((Q, n))
        total = math.sqrt(float((delta * delta).sum()))
        if total > 0:
            reach = 0.5 * min(r, 10.0) if math.isfinite(r) else 1.0
            delta *= reach * rng.uniform(0.05, 0.95) / total
            near = QTuple(v.points + delta)
            g2_near, _ = dist(v, near, MetricKind.G2)
            dxi_near = float(
                np.linalg.norm(embed.xi(v, fr).coords - embed.xi(near, fr).coords)
            )
            ok = ok and abs(dxi_near - g2_near) <= tol_loc
        if not ok:
            report.record_failure(json.dumps({"v": v.points.tolist(), "w": w.points.tolist()}))
    if math.isinf(report.worst_ratio):
        report.worst_ratio = 0.0
    if report.worst_ratio <= 0.0 and report.failures == 0:
        report.failures = 1
    return report


def _lipschitz_grid(rng, m: int, Q: int, n: int, N: int = 9) -> GridFunction:
    """A Lipschitz Q-valued grid function built from smooth branches."""
    mask = square_mask(N, m)
    shape = (N,) * m
    h = 2.0 / (N - 1)
    freq = rng.uniform(0.5, 2.0, size=(Q, n, m))
    phase = rng.uniform(0, 2 * math.pi, size=(Q, n))
    amp = rng.uniform(0.2, 1.0, size=(Q, n))
    values = np.zeros(shape + (Q, n))
    for idx in np.ndindex(*shape):
        x = (np.asarray(idx, dtype=float) - (N - 1) / 2.0) * h
        for i in range(Q):
            for c in range(n):
                values[idx][i, c] = amp[i, c] * math.sin(float(freq[i, c] @ x) + phase[i, c])
    return GridFunction(m, n, Q, shape, h, mask, values)


def check_sqrt_Q_bound(cfg: CheckConfig) -> CheckReport:
    """Embedded difference quotients stay below sqrt(Q) times the local slope.

    The local Lipschitz constant is measured in the max-pairing metric over
    the same neighbour pairs as the embedded quotient, which makes the
    sqrt(Q) factor sharp (a two-branch sign flip attains it).
    """
    rng = _rng_for(cfg, "sqrt_q_bound")
    tol = cfg.tolerances["sqrt_q"]
    report = CheckReport("sqrt_q_bound", cfg.trials, 0, 0.0)
    frames = {}
    trials = 0
    for _ in range(cfg.trials):
        Q = int(rng.integers(cfg.Q_range[0], min(cfg.Q_range[1], 3) + 1))
        n = int(rng.integers(cfg.n_range[0], cfg.n_range[1] + 1))
        m = int(rng.integers(cfg.m_range[0], cfg.m_range[1] + 1))
        f = _lipschitz_grid(rng, m, Q, n, N=7)
        key = (n, Q)
        if key not in frames:
            frames[key] = embed.build_frame(n, Q, seed=7)
        fr = frames[key]
        emb = {}
        for idx in f.nodes():
            emb[idx] = embed.xi(QTuple(f.values[idx]), fr).coords
        for u, v in f.edges():
            trials += 1
            quot = float(np.linalg.norm(emb[u] - emb[v])) / f.h
            gi, _ = dist(QTuple(f.values[u]), QTuple(f.values[v]), MetricKind.GINF)
            lip = gi / f.h
            if lip > 0:
                report.worst_ratio = max(report.worst_ratio, quot / (math.sqrt(Q) * lip))
            if quot > math.sqrt(Q) * lip + tol:
                report.record_failure(json.dumps({"edge": [list(u), list(v)]}))
    report.trials = trials
    return report


def check_poincare(cfg: CheckConfig) -> CheckReport:
    """Mean oscillation on convex subwindows is controlled by the q-energy.

    Finiteness of the constant is the assertion; its empirical value is the
    reported ratio and must stay below the configured cap.
    """
    rng = _rng_for(cfg, "poincare")
    cap = cfg.tolerances["poincare_c"]
    report = CheckReport("poincare", cfg.trials, 0, 0.0)
    for _ in range(cfg.trials):
        Q, n = _draw_Qn(rng, cfg)
        m = int(rng.integers(cfg.m_range[0], cfg.m_range[1] + 1))
        q = float(rng.choice([1.0, 2.0]))
        N = 7
        f = _lipschitz_grid(rng, m, Q, n, N=N)
        width = int(rng.integers(2, N + 1))
        lo = [int(rng.integers(0, N - width + 1)) for _ in range(m)]
        nodes = [
            tuple(l + i for l, i in zip(lo, idx))
            for idx in np.ndindex(*(width,) * m)
        ]
        cell = f.h**m
        diam = f.h * (width - 1) * math.sqrt(m)
        energy = 0.0
        for u, v in f.edges():
            if all(l <= u[a] < l + width and l <= v[a] < l + width
                   for a, l in enumerate(lo)):
                energy += f.h ** (m - q) * _g2_value(f.values[u], f.values[v]) ** q
        best = math.inf
        for cand in nodes:
            acc = sum(
                _g2_value(f.values[idx], f.values[cand]) ** q * cell for idx in nodes
            )
            best = min(best, acc)
        rhs = diam**q * energy
        if rhs == 0.0:
            if best > 1e-12:
                report.record_failure(json.dumps({"window": lo, "width": width}))
            continue
        C = best / rhs
        report.worst_ratio = max(report.worst_ratio, C)
        if C > cap:
            report.record_failure(json.dumps({"window": lo, "width": width, "C": C}))
    return report


def check_zeta_bounds(cfg: CheckConfig) -> CheckReport:
    """Dictionary lower bound below the G1 upper bound; ratio 1 when Q = 1.

    The reported ratio is the smallest observed lower/upper over trials
    with positive distance; it must stay positive.
    """
    rng = _rng_for(cfg, "zeta_bounds")
    tol = cfg.tolerances["zeta"]
    report = CheckReport("zeta_bounds", cfg.trials, 0, math.inf)
    for trial in range(cfg.trials):
        Q, n = _draw_Qn(rng, cfg)
        if trial % 3 == 0:
            Q = 1
        v = random_tuple(rng, Q, n)
        w = random_tuple(rng, Q, n)
        lower, upper = embed.zeta_dual_gap(v, w, dictionary_size=64,
                                           seed=int(rng.integers(0, 2**31)))
        ok = lower <= upper + tol
        if Q == 1 and upper > 1e-9:
            ok = ok and abs(lower - upper) <= 1e-12 * (1.0 + upper)
        if upper > 1e-12:
            ratio = lower / upper
            report.worst_ratio = min(report.worst_ratio, ratio)
            if ratio <= 0.0:
                ok = False
        if not ok:
            report.record_failure(json.dumps({"v": v.points.tolist(), "w": w.points.tolist()}))
    if math.isinf(report.worst_ratio):
        report.worst_ratio = 0.0
    return report


_ALL_CHECKS = (
    check_metric_equivalence,
    check_splitting_lemma,
    check_xi,
    check_sqrt_Q_bound,
    check_poincare,
    check_zeta_bounds,
)


def run_all(cfg: CheckConfig) -> list:
    """Run every check; reports in a fixed order."""
    return [check(cfg) for check in _ALL_CHECKS]
