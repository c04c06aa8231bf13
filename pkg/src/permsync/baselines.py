"""Comparison methods built on the same spectral factor.

``spectral_greedy`` rounds the eigenvector rows of each object to a universe
assignment (cycle-consistent output); ``matcheig`` rounds each block of
``X X^T`` independently (generally not cycle-consistent).
"""

from __future__ import annotations

import numpy as np

from .matmodel import PairwiseMatchings, UniverseAssignment, expand_consistent
from .sync import spectral_factor

__all__ = ["spectral_greedy", "matcheig", "greedy_rounding"]


def greedy_rounding(S: np.ndarray, threshold: float = -np.inf) -> tuple[np.ndarray, np.ndarray]:
    """Pick entries of ``S`` in descending order, one per row and per column.

    Entries below ``threshold`` are never picked.  Ties are broken by
    row-major position.
    """
    n_rows, n_cols = S.shape
    flat = S.ravel()
    cand = np.flatnonzero(flat >= threshold)
    cand = cand[np.argsort(-flat[cand], kind="stable")]
    row_used = np.zeros(n_rows, dtype=bool)
    col_used = np.zeros(n_cols, dtype=bool)
    rr, cc = [], []
    limit = min(n_rows, n_cols)
    for idx in cand.tolist():
        r, c = divmod(idx, n_cols)
        if row_used[r] or col_used[c]:
            continue
        row_used[r] = col_used[c] = True
        rr.append(r)
        cc.append(c)
        if len(rr) == limit:
            break
    return np.asarray(rr, dtype=np.int64), np.asarray(cc, dtype=np.int64)


def spectral_greedy(W: PairwiseMatchings, d: int, seed: int = 0
                    ) -> tuple[UniverseAssignment, PairwiseMatchings]:
    """Greedy rounding of ``|X|`` per object into a universe assignment."""
    st = W.structure
    if st.m and d < max(st.sizes):
        raise ValueError(f"universe size too small: d={d} < max m_i={max(st.sizes)}")
    X = np.abs(spectral_factor(W, d, seed=seed).X)
    labels = np.zeros(st.m, dtype=np.int64)
    for i in range(st.k):
        sl = st.block_slice(i)
        if sl.start == sl.stop:
            continue
        rr, cc = greedy_rounding(X[sl])
        labels[sl.start + rr] = cc
    U = UniverseAssignment(st, d, labels)
    return U, expand_consistent(U)


def matcheig(W: PairwiseMatchings, d: int, tau: float = 0.5, seed: int = 0) -> PairwiseMatchings:
    """Round every upper block of ``X X^T`` to a partial permutation.

    Blocks are handled independently; the lower triangle is the transpose.
    """
    st = W.structure
    X = spectral_factor(W, d, seed=seed).X
    off = st.offsets
    rows, cols = [np.zeros(0, dtype=np.int64)], [np.zeros(0, dtype=np.int64)]
    for i in range(st.k):
        Xi = X[st.block_slice(i)]
        if Xi.shape[0] == 0:
            continue
        for j in range(i + 1, st.k):
            Xj = X[st.block_slice(j)]
            if Xj.shape[0] == 0:
                continue
            rr, cc = greedy_rounding(Xi @ Xj.T, threshold=tau)
            rows.append(rr + off[i])
            cols.append(cc + off[j])
    return PairwiseMatchings.from_edges(st, np.concatenate(rows), np.concatenate(cols))
