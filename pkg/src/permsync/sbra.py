"""Successive block rotation: an orthogonal ``Q`` that brings ``XQ`` close to
a stack of object-to-universe partial permutations.

The rotation maximises ``<C, XQ>`` for a binary activation mask ``C``, which is
grown one object block at a time until every row of ``X`` has one activated
entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import svd_small
from .matmodel import BlockStructure

__all__ = ["ActivationMask", "Rotation", "SbraError", "solve_rotation", "update_mask", "sbra"]


class SbraError(RuntimeError):
    """A block could not be activated without reusing a universe column."""

    def __init__(self, message, block):
        super().__init__(message)
        self.block = block


@dataclass(frozen=True, eq=False)
class ActivationMask:
    """Activated positions, one column per row at most (``-1`` = inactive)."""

    cols: np.ndarray
    d: int

    def __post_init__(self):
        object.__setattr__(self, "cols", np.asarray(self.cols, dtype=np.int64).ravel())

    @classmethod
    def empty(cls, m: int, d: int) -> "ActivationMask":
        return cls(np.full(m, -1, dtype=np.int64), d)

    @property
    def active_rows(self) -> np.ndarray:
        return np.flatnonzero(self.cols >= 0)

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.cols >= 0))

    def to_sparse(self) -> sp.csr_matrix:
        rows = self.active_rows
        return sp.csr_matrix((np.ones(rows.size), (rows, self.cols[rows])),
                             shape=(self.cols.size, self.d))

    def is_valid(self, structure: BlockStructure) -> bool:
        """At most one active column per row (by construction) and no column
        reused inside one object block."""
        for i in range(structure.k):
            blk = self.cols[structure.block_slice(i)]
            blk = blk[blk >= 0]
            if np.unique(blk).size != blk.size:
                return False
        return True

    def score(self, X: np.ndarray) -> float:
        """``<C, X>``."""
        rows = self.active_rows
        return float(X[rows, self.cols[rows]].sum())


@dataclass(frozen=True, eq=False)
class Rotation:
    """Orthogonal ``Q`` plus diagnostics from the routine that produced it."""

    Q: np.ndarray
    singular_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    nonunique: bool = False
    partial: bool = False
    iterations: int = 0
    blocks: tuple[int, ...] = ()
    scores: tuple[float, ...] = ()
    mask: ActivationMask | None = None


def solve_rotation(X: np.ndarray, C: ActivationMask, rank_tol: float = 1e-10) -> Rotation:
    """Orthogonal ``Q`` maximising ``<C, XQ>`` (orthogonal Procrustes).

    With ``X^T C = U S V^T`` the maximiser is ``Q = U V^T``.  A rank-deficient
    ``X^T C`` still yields a maximiser; ``nonunique`` is set in that case.
    """
    X = np.asarray(X, dtype=float)
    d = X.shape[1]
    rows = C.active_rows
    XtC_T = np.zeros((d, d))
    np.add.at(XtC_T, C.cols[rows], X[rows])
    U, s, V = svd_small(XtC_T.T)
    Q = U @ V.T
    nonunique = bool(s.size and s[-1] <= rank_tol * max(s[0], 1.0))
    return Rotation(Q=Q, singular_values=s, nonunique=nonunique)


def _greedy_columns(S: np.ndarray, pos_tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Injective row -> column choice from score matrix ``S``.

    Positive entries are taken first, largest first; rows left without a
    positive candidate take the largest-magnitude remaining entry.  Entries
    below ``pos_tol * max|S|`` do not count as positive, so round-off around
    zero cannot outrank a genuine negative peak.
    """
    n_rows, n_cols = S.shape
    flat = S.ravel()
    if flat.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    positive = flat > pos_tol * np.abs(flat).max()
    order = np.lexsort((-np.abs(flat), ~positive))
    row_of, col_of = np.divmod(order, n_cols)
    row_used = np.zeros(n_rows, dtype=bool)
    col_used = np.zeros(n_cols, dtype=bool)
    rr, cc = [], []
    target = min(n_rows, n_cols)
    for r, c in zip(row_of.tolist(), col_of.tolist()):
        if row_used[r] or col_used[c]:
            continue
        row_used[r] = col_used[c] = True
        rr.append(r)
        cc.append(c)
        if len(rr) == target:
            break
    return np.asarray(rr, dtype=np.int64), np.asarray(cc, dtype=np.int64)


def update_mask(C: ActivationMask, X_rot: np.ndarray, structure: BlockStructure,
                strict: bool = True) -> tuple[ActivationMask, int | None]:
    """Activate the inactive rows of the block with the most inactive rows.

    Ties go to the lowest block index.  Returns the grown mask and the block
    that was activated, or ``(C, None)`` when every row is already active.

    Raises
    ------
    SbraError
        If the block has more inactive rows than free universe columns and
        ``strict`` is set.  Otherwise as many rows as possible are activated.
    """
    inactive = C.cols < 0
    if not inactive.any():
        return C, None
    counts = np.bincount(structure.object_of[inactive], minlength=structure.k)
    b = int(np.argmax(counts))
    sl = structure.block_slice(b)
    blk_cols = C.cols[sl]
    rows_local = np.flatnonzero(blk_cols < 0)
    free = np.setdiff1d(np.arange(C.d), blk_cols[blk_cols >= 0])
    if free.size < rows_local.size and strict:
        raise SbraError(f"block {b + 1} has {rows_local.size} inactive rows but only "
                        f"{free.size} free universe columns", b)
    S = X_rot[sl][rows_local][:, free]
    rr, cc = _greedy_columns(S)
    cols = C.cols.copy()
    cols[sl.start + rows_local[rr]] = free[cc]
    return ActivationMask(cols, C.d), b


def initial_mask(structure: BlockStructure, d: int) -> ActivationMask:
    """Identity on the largest block (lowest index on ties), nothing elsewhere."""
    C = ActivationMask.empty(structure.m, d)
    if structure.m == 0:
        return C
    b = int(np.argmax(structure.sizes))
    if structure.sizes[b] > d:
        raise SbraError(f"block {b + 1} has {structure.sizes[b]} rows but d={d}", b)
    cols = C.cols.copy()
    cols[structure.block_slice(b)] = np.arange(structure.sizes[b])
    return ActivationMask(cols, d)


def sbra(X: np.ndarray, structure: BlockStructure, strict: bool = True) -> Rotation:
    """Successive block rotation of ``X`` (shape ``(m, d)``).

    Starts from an identity mask on the largest block, then alternates
    Procrustes solves with mask growth until every row is active.  At most one
    iteration per non-empty block.

    Parameters
    ----------
    X : (m, d) ndarray
    structure : BlockStructure
    strict : bool
        If False, a block that cannot be fully activated ends the loop with
        ``partial=True`` instead of raising :class:`SbraError`.
    """
    X = np.asarray(X, dtype=float)
    m, d = X.shape
    if m != structure.m:
        raise ValueError(f"X has {m} rows, structure has {structure.m}")
    if m == 0:
        return Rotation(Q=np.eye(d), mask=ActivationMask.empty(0, d))
    C = initial_mask(structure, d)
    blocks = [int(np.argmax(structure.sizes))]
    rot = solve_rotation(X, C)
    scores = [C.score(X @ rot.Q)]
    partial = False
    while True:
        X_rot = X @ rot.Q
        before = C.n_active
        C, b = update_mask(C, X_rot, structure, strict=strict)
        if b is None:
            break
        if C.n_active == before:
            partial = True
            break
        blocks.append(b)
        rot = solve_rotation(X, C)
        scores.append(C.score(X @ rot.Q))
        if C.n_active < m and C.cols[structure.block_slice(b)].min() < 0:
            # block could only be partly activated (non-strict mode)
            partial = True
            break
    return Rotation(Q=rot.Q, singular_values=rot.singular_values, nonunique=rot.nonunique,
                    partial=partial, iterations=len(blocks), blocks=tuple(blocks),
                    scores=tuple(scores), mask=C)
