"""Block-structured matching matrices and object-to-universe assignments.

All indices are 0-based in code.  Human-facing messages name blocks with
1-based object indices, which is also what the ``.pmx`` format uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

__all__ = [
    "BlockStructure",
    "PartialPermutation",
    "PairwiseMatchings",
    "UniverseAssignment",
    "ValidationResult",
    "validate_pairwise",
    "expand_consistent",
    "is_cycle_consistent",
]


@dataclass(frozen=True)
class BlockStructure:
    """Partition of the ``m`` features into ``k`` per-object blocks."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if len(sizes) < 2:
            raise ValueError(f"need at least 2 objects, got {len(sizes)}")
        if any(s < 0 for s in sizes):
            raise ValueError(f"block sizes must be non-negative, got {sizes}")

    @property
    def k(self) -> int:
        return len(self.sizes)

    @cached_property
    def offsets(self) -> np.ndarray:
        """Start index of each block, with a trailing entry equal to ``m``."""
        return np.concatenate([[0], np.cumsum(self.sizes, dtype=np.int64)])

    @property
    def m(self) -> int:
        return int(self.offsets[-1])

    @cached_property
    def object_of(self) -> np.ndarray:
        """Object index of every global row."""
        return np.repeat(np.arange(self.k), self.sizes)

    def block_slice(self, i: int) -> slice:
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    def split(self, global_idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Map global row indices to ``(object, local index)`` pairs."""
        global_idx = np.asarray(global_idx, dtype=np.int64)
        obj = self.object_of[global_idx]
        return obj, global_idx - self.offsets[obj]


@dataclass(frozen=True, eq=False)
class PartialPermutation:
    """A ``rows x cols`` binary matrix stored as its list of one-entries.

    Construction does not enforce the at-most-one-per-row/column rule, so that
    malformed input can be represented and then rejected by
    :func:`validate_pairwise`.  Use :meth:`is_valid` to check it.
    """

    rows: int
    cols: int
    r: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    c: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        r = np.asarray(self.r, dtype=np.int64).ravel()
        c = np.asarray(self.c, dtype=np.int64).ravel()
        if r.shape != c.shape:
            raise ValueError("row and column index arrays differ in length")
        order = np.lexsort((c, r))
        object.__setattr__(self, "r", r[order])
        object.__setattr__(self, "c", c[order])

    @classmethod
    def from_pairs(cls, rows: int, cols: int, pairs) -> "PartialPermutation":
        arr = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        return cls(rows, cols, arr[:, 0], arr[:, 1])

    @classmethod
    def from_dense(cls, a) -> "PartialPermutation":
        a = np.asarray(a)
        r, c = np.nonzero(a)
        return cls(a.shape[0], a.shape[1], r, c)

    @classmethod
    def identity(cls, n: int) -> "PartialPermutation":
        idx = np.arange(n)
        return cls(n, n, idx, idx)

    @property
    def nnz(self) -> int:
        return int(self.r.size)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.r.tolist(), self.c.tolist()))

    @property
    def T(self) -> "PartialPermutation":
        return PartialPermutation(self.cols, self.rows, self.c, self.r)

    def in_bounds(self) -> bool:
        return bool(np.all((self.r >= 0) & (self.r < self.rows) & (self.c >= 0) & (self.c < self.cols)))

    def max_row_sum(self) -> int:
        return int(np.bincount(self.r).max()) if self.nnz else 0

    def max_col_sum(self) -> int:
        return int(np.bincount(self.c).max()) if self.nnz else 0

    def is_valid(self) -> bool:
        return self.in_bounds() and self.max_row_sum() <= 1 and self.max_col_sum() <= 1

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.rows, self.cols))
        out[self.r, self.c] = 1.0
        return out

    def as_map(self) -> np.ndarray:
        """Column matched to each row, ``-1`` where the row is empty."""
        out = np.full(self.rows, -1, dtype=np.int64)
        out[self.r] = self.c
        return out

    def __eq__(self, other):
        if not isinstance(other, PartialPermutation):
            return NotImplemented
        return (self.shape == other.shape and np.array_equal(self.r, other.r)
                and np.array_equal(self.c, other.c))

    def __hash__(self):
        return hash((self.shape, self.r.tobytes(), self.c.tobytes()))

    def __repr__(self):
        return f"PartialPermutation({self.rows}x{self.cols}, {self.pairs()})"


class PairwiseMatchings:
    """Sparse symmetric block matrix ``W`` of pairwise partial matchings.

    Blocks are kept in a dict keyed by ``(i, j)``.  The canonical form, which
    every constructor in this package produces, stores only ``i < j``; the
    lower triangle is derived by transposition and diagonal blocks are
    implicit identities.  Other keys are accepted so that inconsistent input
    can be held and reported by :func:`validate_pairwise`.

    Parameters
    ----------
    structure : BlockStructure
    blocks : mapping of (i, j) -> PartialPermutation
    """

    def __init__(self, structure: BlockStructure,
                 blocks: Optional[Mapping[tuple[int, int], PartialPermutation]] = None):
        self.structure = structure
        self.blocks = dict(blocks or {})

    @classmethod
    def from_edges(cls, structure: BlockStructure, rows, cols) -> "PairwiseMatchings":
        """Build canonical blocks from global ``(row, col)`` index pairs.

        Each unordered pair may be given in either orientation; pairs within one
        object are ignored (diagonal blocks are implicit).
        """
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        oi, pi = structure.split(rows)
        oj, pj = structure.split(cols)
        swap = oi > oj
        oi, oj = np.where(swap, oj, oi), np.where(swap, oi, oj)
        pi, pj = np.where(swap, pj, pi), np.where(swap, pi, pj)
        keep = oi != oj
        oi, oj, pi, pj = oi[keep], oj[keep], pi[keep], pj[keep]
        blocks = {}
        if oi.size:
            key = oi * structure.k + oj
            order = np.argsort(key, kind="stable")
            key, oi, oj, pi, pj = key[order], oi[order], oj[order], pi[order], pj[order]
            starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
            ends = np.r_[starts[1:], key.size]
            sizes = structure.sizes
            for s, e in zip(starts, ends):
                i, j = int(oi[s]), int(oj[s])
                pp = PartialPermutation(sizes[i], sizes[j], pi[s:e], pj[s:e])
                # duplicates collapse to a single entry
                pairs = np.unique(np.stack([pp.r, pp.c], axis=1), axis=0)
                blocks[(i, j)] = PartialPermutation(sizes[i], sizes[j], pairs[:, 0], pairs[:, 1])
        return cls(structure, blocks)

    @classmethod
    def empty(cls, structure: BlockStructure) -> "PairwiseMatchings":
        return cls(structure, {})

    @property
    def k(self) -> int:
        return self.structure.k

    @property
    def m(self) -> int:
        return self.structure.m

    def block(self, i: int, j: int) -> PartialPermutation:
        sizes = self.structure.sizes
        if (i, j) in self.blocks:
            return self.blocks[(i, j)]
        if i == j:
            return PartialPermutation.identity(sizes[i])
        if (j, i) in self.blocks:
            return self.blocks[(j, i)].T
        return PartialPermutation(sizes[i], sizes[j])

    @cached_property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Global ``(row, col)`` indices of the upper off-diagonal one-entries, sorted."""
        off = self.structure.offsets
        rs, cs = [np.zeros(0, dtype=np.int64)], [np.zeros(0, dtype=np.int64)]
        seen = set()
        for (i, j), pp in self.blocks.items():
            if i == j:
                continue
            a, b = (i, j) if i < j else (j, i)
            if (a, b) in seen:
                continue
            seen.add((a, b))
            blk = self.block(a, b)
            rs.append(blk.r + off[a])
            cs.append(blk.c + off[b])
        r, c = np.concatenate(rs), np.concatenate(cs)
        order = np.lexsort((c, r))
        return r[order], c[order]

    @property
    def num_matchings(self) -> int:
        """Number of off-diagonal matchings, each unordered pair counted once."""
        return int(self.edges[0].size)

    def edge_set(self) -> set[tuple[int, int]]:
        r, c = self.edges
        return set(zip(r.tolist(), c.tolist()))

    def to_sparse(self) -> sp.csr_matrix:
        """The full symmetric ``m x m`` matrix with unit diagonal, in CSR form."""
        m = self.m
        r, c = self.edges
        diag = np.arange(m)
        rows = np.concatenate([r, c, diag])
        cols = np.concatenate([c, r, diag])
        data = np.ones(rows.size)
        return sp.csr_matrix((data, (rows, cols)), shape=(m, m))

    def to_dense(self) -> np.ndarray:
        """Dense ``m x m`` matrix.  Intended for tests on small instances only."""
        return self.to_sparse().toarray()

    def match_table(self) -> np.ndarray:
        """``(m, k)`` table: global index matched to row ``p`` in object ``j``, or -1.

        The own-object column holds ``p`` itself (identity diagonal block).
        """
        st = self.structure
        out = np.full((st.m, st.k), -1, dtype=np.int64)
        out[np.arange(st.m), st.object_of] = np.arange(st.m)
        r, c = self.edges
        out[r, st.object_of[c]] = c
        out[c, st.object_of[r]] = r
        return out

    def __eq__(self, other):
        if not isinstance(other, PairwiseMatchings):
            return NotImplemented
        if self.structure != other.structure:
            return False
        a, b = self.edges, other.edges
        return np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    __hash__ = None

    def __repr__(self):
        return (f"PairwiseMatchings(k={self.k}, m={self.m}, "
                f"matchings={self.num_matchings})")


@dataclass(frozen=True, eq=False)
class UniverseAssignment:
    """Stacked object-to-universe matchings ``U`` with exactly one entry per row.

    Stored as ``labels``: the universe column of every global row.
    """

    structure: BlockStructure
    d: int
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        object.__setattr__(self, "labels", labels)
        if labels.size != self.structure.m:
            raise ValueError(f"expected {self.structure.m} labels, got {labels.size}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.d):
            raise ValueError(f"labels must lie in [0, {self.d})")
        for i in range(self.structure.k):
            blk = labels[self.structure.block_slice(i)]
            if np.unique(blk).size != blk.size:
                raise ValueError(f"object {i + 1} maps two features to one universe feature")

    @classmethod
    def from_blocks(cls, structure: BlockStructure, d: int,
                    per_object: Sequence[PartialPermutation]) -> "UniverseAssignment":
        labels = np.zeros(structure.m, dtype=np.int64)
        for i, pp in enumerate(per_object):
            if pp.shape != (structure.sizes[i], d):
                raise ValueError(f"block {i + 1} has shape {pp.shape}, expected "
                                 f"{(structure.sizes[i], d)}")
            if pp.nnz != pp.rows or pp.max_row_sum() > 1:
                raise ValueError(f"block {i + 1} must have exactly one entry per row")
            labels[structure.block_slice(i)] = pp.as_map()
        return cls(structure, d, labels)

    @classmethod
    def from_dense(cls, structure: BlockStructure, u) -> "UniverseAssignment":
        u = np.asarray(u)
        if np.any(u.sum(axis=1) != 1):
            raise ValueError("every row of U must contain exactly one entry")
        return cls(structure, u.shape[1], np.argmax(u, axis=1))

    @property
    def per_object(self) -> list[PartialPermutation]:
        st = self.structure
        out = []
        for i in range(st.k):
            blk = self.labels[st.block_slice(i)]
            out.append(PartialPermutation(st.sizes[i], self.d, np.arange(blk.size), blk))
        return out

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.structure.m, self.d))
        out[np.arange(self.structure.m), self.labels] = 1.0
        return out

    def __eq__(self, other):
        if not isinstance(other, UniverseAssignment):
            return NotImplemented
        return (self.structure == other.structure and self.d == other.d
                and np.array_equal(self.labels, other.labels))

    __hash__ = None


@dataclass(frozen=True)
class ValidationResult:
    """Outcome of :func:`validate_pairwise`.

    ``kind`` is ``"structural"`` for shape or index problems and ``"semantic"``
    for violations of the matching constraints; ``block`` is 0-based.
    """

    ok: bool
    kind: Optional[str] = None
    message: str = ""
    block: Optional[tuple[int, int]] = None

    def __bool__(self):
        return self.ok


def _fail(kind, message, block):
    return ValidationResult(False, kind, message, block)


def validate_pairwise(W: PairwiseMatchings) -> ValidationResult:
    """Check every stored block of ``W``; report the first violation found."""
    st = W.structure
    k, sizes = st.k, st.sizes
    keys = sorted(W.blocks)
    for key in keys:
        i, j = key
        name = f"block ({i + 1},{j + 1})"
        if not (0 <= i < k and 0 <= j < k):
            return _fail("structural", f"{name} refers to a missing object", key)
        pp = W.blocks[key]
        if pp.shape != (sizes[i], sizes[j]):
            return _fail("structural", f"shape mismatch at {name}: {pp.shape} vs "
                         f"{(sizes[i], sizes[j])}", key)
        if not pp.in_bounds():
            return _fail("structural", f"index out of bounds at {name}", key)
    for key in keys:
        i, j = key
        pp = W.blocks[key]
        name = f"block ({i + 1},{j + 1})"
        if pp.max_row_sum() > 1:
            return _fail("semantic", f"row-sum violation at {name}", key)
        if pp.max_col_sum() > 1:
            return _fail("semantic", f"column-sum violation at {name}", key)
        if i == j and pp != PartialPermutation.identity(sizes[i]):
            return _fail("semantic", f"diagonal violation at {name}: not the identity", key)
        if i < j and (j, i) in W.blocks and W.blocks[(j, i)] != pp.T:
            return _fail("semantic", f"symmetry violation at {name}: block "
                         f"({j + 1},{i + 1}) is not its transpose", key)
    return ValidationResult(True)


def expand_consistent(U: UniverseAssignment) -> PairwiseMatchings:
    """The pairwise matchings ``P_i P_j^T`` induced by a universe assignment."""
    st = U.structure
    order = np.argsort(U.labels, kind="stable")
    lab = U.labels[order]
    starts = np.flatnonzero(np.r_[True, lab[1:] != lab[:-1]]) if lab.size else np.zeros(0, int)
    ends = np.r_[starts[1:], lab.size]
    rows, cols = [np.zeros(0, dtype=np.int64)], [np.zeros(0, dtype=np.int64)]
    for s, e in zip(starts, ends):
        n = e - s
        if n < 2:
            continue
        a, b = np.triu_indices(n, 1)
        members = order[s:e]
        rows.append(members[a])
        cols.append(members[b])
    return PairwiseMatchings.from_edges(st, np.concatenate(rows), np.concatenate(cols))


def is_cycle_consistent(W: PairwiseMatchings) -> bool:
    """Whether ``W`` factorises as ``U U^T`` for some universe assignment ``U``.

    Uses the graph view: the matching graph must be a disjoint union of
    cliques, none of which holds two features of the same object.
    """
    st = W.structure
    m = st.m
    if m == 0:
        return True
    r, c = W.edges
    adj = sp.csr_matrix((np.ones(r.size), (r, c)), shape=(m, m))
    n_comp, comp = connected_components(adj, directed=False)
    size = np.bincount(comp, minlength=n_comp)
    n_edges = np.bincount(comp[r], minlength=n_comp)
    if np.any(n_edges != size * (size - 1) // 2):
        return False
    # distinct (component, object) pairs must number one per node
    pair = comp.astype(np.int64) * st.k + st.object_of
    return np.unique(pair).size == m
