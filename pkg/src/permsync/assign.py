"""Rectangular linear assignment by auction, projection onto object-to-universe
assignments, and threshold pruning."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .matmodel import BlockStructure, UniverseAssignment

__all__ = ["AssignmentProblem", "auction_lap", "project_onto_universe", "prune"]

# largest integer magnitude kept exact after scaling
_INT_LIMIT = 2.0 ** 50


@dataclass(frozen=True, eq=False)
class AssignmentProblem:
    """Maximisation-form benefit matrix with no more rows than columns."""

    benefit: np.ndarray

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.benefit, dtype=float))
        object.__setattr__(self, "benefit", b)
        if b.shape[0] > b.shape[1]:
            raise ValueError(f"need rows <= cols, got shape {b.shape}")
        if not np.all(np.isfinite(b)):
            raise ValueError("benefits must be finite")


@numba.njit(cache=True)
def _auction_phase(a, prices, eps, person_obj, obj_person):
    n = a.shape[0]
    for i in range(n):
        person_obj[i] = -1
        obj_person[i] = -1
    stack = np.empty(n, dtype=np.int64)
    top = 0
    for i in range(n - 1, -1, -1):
        stack[top] = i
        top += 1
    while top > 0:
        top -= 1
        i = stack[top]
        best = -np.inf
        second = -np.inf
        bj = -1
        for j in range(n):
            v = a[i, j] - prices[j]
            if v > best:
                second = best
                best = v
                bj = j
            elif v > second:
                second = v
        if n == 1:
            second = best
        prices[bj] += best - second + eps
        prev = obj_person[bj]
        if prev >= 0:
            person_obj[prev] = -1
            stack[top] = prev
            top += 1
        obj_person[bj] = i
        person_obj[i] = bj


@numba.njit(cache=True)
def _cs_violation(a, prices, person_obj):
    """Largest amount by which any person's assignment misses its best profit."""
    n = a.shape[0]
    worst = 0.0
    for i in range(n):
        best = -np.inf
        for j in range(n):
            v = a[i, j] - prices[j]
            if v > best:
                best = v
        j = person_obj[i]
        gap = best - (a[i, j] - prices[j])
        if gap > worst:
            worst = gap
    return worst


def auction_lap(p: AssignmentProblem | np.ndarray, scale: float = 1e9) -> np.ndarray:
    """Optimal injective row -> column assignment maximising total benefit.

    Forward auction with epsilon scaling on benefits rounded to integers after
    multiplying by ``scale``.  Rectangular problems are padded to square with
    zero-benefit dummy rows.  The final phase runs at ``eps < 1/n``, which
    makes the assignment exactly optimal for the integer benefits; the result
    is then within ``rows / scale`` of the optimum for the unrounded ones.

    Returns
    -------
    ndarray of int, shape (rows,)
        Column assigned to each row.
    """
    if not isinstance(p, AssignmentProblem):
        p = AssignmentProblem(p)
    b = p.benefit
    r, c = b.shape
    if r == 0:
        return np.zeros(0, dtype=np.int64)
    absmax = float(np.abs(b).max())
    if absmax > 0:
        scale = min(scale, _INT_LIMIT / absmax)
    a = np.zeros((c, c))
    a[:r] = np.rint(b * scale)
    n = c
    eps_final = 1.0 / (n + 1)
    eps = max(float(np.abs(a).max()) / 2.0, eps_final)
    prices = np.zeros(n)
    person_obj = np.empty(n, dtype=np.int64)
    obj_person = np.empty(n, dtype=np.int64)
    while True:
        _auction_phase(a, prices, eps, person_obj, obj_person)
        if eps <= eps_final:
            break
        eps = max(eps / 5.0, eps_final)
    gap = _cs_violation(a, prices, person_obj)
    if gap > eps_final * (1 + 1e-9) + 1e-9 * np.abs(prices).max():
        raise RuntimeError(f"auction result violates complementary slackness by {gap:.3g}")
    return person_obj[:r].copy()


def project_onto_universe(Vrot: np.ndarray, structure: BlockStructure) -> UniverseAssignment:
    """Nearest object-to-universe assignment to ``Vrot``, one LAP per object.

    For each object the ``m_i x d`` block is assigned row-exactly and
    column-injectively so as to maximise the sum of selected entries.
    """
    Vrot = np.asarray(Vrot, dtype=float)
    m, d = Vrot.shape
    if m != structure.m:
        raise ValueError(f"Vrot has {m} rows, structure has {structure.m}")
    labels = np.zeros(m, dtype=np.int64)
    for i, mi in enumerate(structure.sizes):
        if mi > d:
            raise ValueError(f"universe size too small for object {i + 1}: m_i={mi} > d={d}")
        if mi == 0:
            continue
        sl = structure.block_slice(i)
        labels[sl] = auction_lap(Vrot[sl])
    return UniverseAssignment(structure, d, labels)


def prune(Vrot: np.ndarray, U: UniverseAssignment, theta: float) -> UniverseAssignment:
    """Move assignments with confidence ``Vrot[r, U(r)] < theta`` to new singleton columns.

    New columns are appended in order of global row index.  ``theta = 0``
    disables pruning.
    """
    if theta < 0:
        raise ValueError("theta must be non-negative")
    if theta == 0:
        return U
    conf = np.asarray(Vrot)[np.arange(U.labels.size), U.labels]
    low = np.flatnonzero(conf < theta)
    if low.size == 0:
        return U
    labels = U.labels.copy()
    labels[low] = U.d + np.arange(low.size)
    return UniverseAssignment(U.structure, U.d + low.size, labels)
