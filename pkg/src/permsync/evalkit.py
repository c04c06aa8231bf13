"""Metrics, the synthetic instance generator, and sweep experiments."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .baselines import matcheig, spectral_greedy
from .matmodel import BlockStructure, PairwiseMatchings, UniverseAssignment, expand_consistent
from .sync import SyncConfig, nmfsync

__all__ = [
    "GenParams", "SyncReport", "Protocol", "ResultRow",
    "cycle_error", "gt_error", "pr_f", "evaluate", "generate",
    "run_experiment", "METHODS", "METRICS", "SWEEP_PARAMS",
]

METHODS = ("nmfsync", "spectral", "matcheig", "input", "nmfsync-spectral-init")
METRICS = ("cycle_error", "gt_error", "precision", "recall", "fscore", "num_matchings", "runtime")
SWEEP_PARAMS = ("k", "d", "rho", "sigma", "theta")


@dataclass(frozen=True)
class GenParams:
    k: int
    d: int
    rho: float
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if self.d < 1:
            raise ValueError("d must be at least 1")
        if not 0 <= self.rho <= 1:
            raise ValueError("rho must lie in [0, 1]")
        if not 0 <= self.sigma <= 1:
            raise ValueError("sigma must lie in [0, 1]")


@dataclass
class SyncReport:
    cycle_error: float
    gt_error: Optional[float] = None
    precision: Optional[float] = None
    recall: Optional[float] = None
    fscore: Optional[float] = None
    num_matchings: int = 0
    wall_times: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _check_same(W: PairwiseMatchings, Wgt: PairwiseMatchings):
    if W.structure != Wgt.structure:
        raise ValueError("matchings have different block structures")


def cycle_error(W: PairwiseMatchings) -> float:
    """Mean Frobenius mismatch of two-step compositions over all object triples.

    For each ``(i, l, j)`` the composition ``P_il P_lj`` is compared with
    ``P_ij`` on the rows of ``i`` matched into ``l`` and the columns of ``j``
    matched from ``l``; the ``k^3`` norms are averaged.
    """
    st = W.structure
    k, m = st.k, st.m
    if m == 0:
        return 0.0
    T = W.match_table()
    obj = st.object_of
    total = 0.0
    for l in range(k):
        x = T[:, l]
        has_x = x >= 0
        xs = np.where(has_x, x, 0)
        for j in range(k):
            a = np.where(has_x, T[xs, j], -1)
            b = T[:, j]
            bs = np.where(b >= 0, b, 0)
            b_ok = has_x & (b >= 0) & (T[bs, l] >= 0)
            a_ok = a >= 0
            both = a_ok & b_ok & (a == b)
            diff = a_ok.astype(np.int64) + b_ok - 2 * both
            per_obj = np.bincount(obj, weights=diff, minlength=k)
            total += float(np.sqrt(per_obj).sum())
    return total / k ** 3


def gt_error(W: PairwiseMatchings, Wgt: PairwiseMatchings) -> float:
    """Frobenius norm of ``W - W_gt`` over the full symmetric matrix."""
    _check_same(W, Wgt)
    diff = len(W.edge_set() ^ Wgt.edge_set())
    return math.sqrt(2 * diff)


def pr_f(W: PairwiseMatchings, Wgt: PairwiseMatchings) -> tuple[float, float, float, int]:
    """Precision, recall and f-score of off-diagonal matchings, plus ``#matchings``."""
    _check_same(W, Wgt)
    e, g = W.edge_set(), Wgt.edge_set()
    tp = len(e & g)
    precision = tp / len(e) if e else 0.0
    recall = tp / len(g) if g else 0.0
    denom = precision + recall
    f = 2 * precision * recall / denom if denom > 0 else 0.0
    return precision, recall, f, len(e)


def evaluate(W: PairwiseMatchings, Wgt: Optional[PairwiseMatchings] = None,
             wall_times: Optional[dict] = None) -> SyncReport:
    rep = SyncReport(cycle_error=cycle_error(W), num_matchings=W.num_matchings,
                     wall_times=dict(wall_times or {}))
    if Wgt is not None:
        rep.gt_error = gt_error(W, Wgt)
        rep.precision, rep.recall, rep.fscore, _ = pr_f(W, Wgt)
    return rep


def generate(params: GenParams) -> tuple[PairwiseMatchings, PairwiseMatchings, UniverseAssignment]:
    """Draw ``(W, W_gt, U_gt)``.

    Each object keeps every row of a random ``d x d`` permutation with
    probability ``rho``.  Every upper block of ``W_gt`` then has a fraction
    ``sigma`` of its rows (rounded) shuffled among themselves; the lower
    block mirrors it.
    """
    rng = np.random.default_rng(params.seed)
    k, d = params.k, params.d
    labels = []
    for _ in range(k):
        perm = rng.permutation(d)
        keep = rng.random(d) < params.rho
        labels.append(perm[keep])
    st = BlockStructure(tuple(len(x) for x in labels))
    Ugt = UniverseAssignment(st, d, np.concatenate(labels) if st.m else np.zeros(0, int))
    Wgt = expand_consistent(Ugt)
    if params.sigma == 0:
        return PairwiseMatchings(st, dict(Wgt.blocks)), Wgt, Ugt
    off = st.offsets
    rows, cols = [np.zeros(0, dtype=np.int64)], [np.zeros(0, dtype=np.int64)]
    for i in range(k):
        mi = st.sizes[i]
        for j in range(i + 1, k):
            f = Wgt.block(i, j).as_map()
            n_sel = int(math.floor(params.sigma * mi + 0.5))
            if n_sel > 1:
                sel = rng.choice(mi, size=n_sel, replace=False)
                f[sel] = f[sel[rng.permutation(n_sel)]]
            p = np.flatnonzero(f >= 0)
            rows.append(p + off[i])
            cols.append(f[p] + off[j])
    W = PairwiseMatchings.from_edges(st, np.concatenate(rows), np.concatenate(cols))
    return W, Wgt, Ugt


# --- experiments -----------------------------------------------------------

@dataclass(frozen=True)
class Protocol:
    """A one-parameter sweep.

    ``fixed`` holds ``k``, ``d``, ``rho``, ``sigma`` and ``theta`` for the
    non-swept parameters, plus optional ``true_d`` (universe size used by the
    generator; defaults to ``d``, the size handed to the methods) and ``tau``
    (MatchEig threshold).
    """

    sweep: str
    values: tuple
    methods: tuple[str, ...]
    metrics: tuple[str, ...] = ("cycle_error", "gt_error", "fscore", "num_matchings")
    trials: int = 100
    seed: int = 0
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sweep not in SWEEP_PARAMS:
            raise ValueError(f"sweep: unknown parameter {self.sweep!r}")
        if not self.values:
            raise ValueError("values: empty grid")
        if not self.methods:
            raise ValueError("methods: empty method list")
        for mth in self.methods:
            if mth not in METHODS:
                raise ValueError(f"methods: unknown method {mth!r}")
        for met in self.metrics:
            if met not in METRICS:
                raise ValueError(f"metrics: unknown metric {met!r}")
        if self.trials < 1:
            raise ValueError("trials: must be positive")
        missing = [p for p in ("k", "d", "rho", "sigma") if p != self.sweep and p not in self.fixed]
        if missing:
            raise ValueError(f"fixed: missing {missing[0]!r}")

    def point(self, value) -> dict:
        p = {"theta": 0.0, "tau": 0.5, **self.fixed, self.sweep: value}
        p.setdefault("true_d", p["d"])
        if self.sweep == "d" and "true_d" not in self.fixed:
            p["true_d"] = value
        return p


@dataclass(frozen=True)
class ResultRow:
    sweep_param: str
    value: float
    method: str
    metric: str
    mean: float
    stddev: float
    trials: int
    failures: int = 0


def run_method(method: str, W: PairwiseMatchings, p: dict, seed: int = 0) -> PairwiseMatchings:
    d = int(p["d"])
    if method == "input":
        return W
    if method == "nmfsync":
        return nmfsync(W, SyncConfig(d=d, theta=float(p["theta"]), seed=seed)).W
    if method == "nmfsync-spectral-init":
        return nmfsync(W, SyncConfig(d=d, theta=float(p["theta"]), seed=seed, init="spectral")).W
    if method == "spectral":
        return spectral_greedy(W, d, seed=seed)[1]
    if method == "matcheig":
        return matcheig(W, d, tau=float(p["tau"]), seed=seed)
    raise ValueError(f"unknown method {method!r}")


def _trial(args):
    p, methods, metrics, seed = args
    gp = GenParams(k=int(p["k"]), d=int(p["true_d"]), rho=float(p["rho"]),
                   sigma=float(p["sigma"]), seed=seed)
    W, Wgt, _ = generate(gp)
    out = {}
    for mth in methods:
        t0 = time.perf_counter()
        try:
            Ws = run_method(mth, W, p, seed=seed)
        except Exception:  # noqa: BLE001 - recorded as a failed trial
            out[mth] = None
            continue
        rt = time.perf_counter() - t0
        rep = evaluate(Ws, Wgt)
        vals = {"cycle_error": rep.cycle_error, "gt_error": rep.gt_error,
                "precision": rep.precision, "recall": rep.recall, "fscore": rep.fscore,
                "num_matchings": rep.num_matchings, "runtime": rt}
        out[mth] = {met: float(vals[met]) for met in metrics}
    return out


def trial_seed(master: int, trial: int) -> int:
    """Per-trial seed; shared across grid points so that sweeps use common draws."""
    return int(np.random.SeedSequence([master, trial]).generate_state(1)[0])


def run_experiment(protocol: Protocol, n_jobs: int = 1) -> list[ResultRow]:
    """Run every grid point and trial; one row per point x method x metric.

    Failed method runs count in ``failures`` and are excluded from the
    mean/stddev, whose ``trials`` field counts successful runs only.
    """
    jobs = []
    for v in protocol.values:
        p = protocol.point(v)
        for t in range(protocol.trials):
            jobs.append((p, protocol.methods, protocol.metrics, trial_seed(protocol.seed, t)))
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            results = list(ex.map(_trial, jobs))
    else:
        results = [_trial(j) for j in jobs]

    rows = []
    per_point = protocol.trials
    for vi, v in enumerate(protocol.values):
        chunk = results[vi * per_point:(vi + 1) * per_point]
        for mth in protocol.methods:
            ok = [r[mth] for r in chunk if r[mth] is not None]
            fails = len(chunk) - len(ok)
            for met in protocol.metrics:
                xs = np.array([r[met] for r in ok], dtype=float)
                mean = float(xs.mean()) if xs.size else float("nan")
                std = float(xs.std(ddof=1)) if xs.size > 1 else 0.0 if xs.size else float("nan")
                rows.append(ResultRow(protocol.sweep, float(v), mth, met, mean, std, int(xs.size), fails))
    rows.sort(key=lambda r: (r.value, r.method, r.metric))
    return rows


def summarise(rows: Sequence[ResultRow], metric: str) -> dict:
    """``{method: [(value, mean), ...]}`` for one metric, in grid order."""
    out: dict = {}
    for r in rows:
        if r.metric == metric:
            out.setdefault(r.method, []).append((r.value, r.mean))
    return out
