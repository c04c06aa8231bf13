"""The ``.pmx`` text format for pairwise matchings.

::

    PMX 1
    k m_1 m_2 ... m_k
    i j p q          # one line per matching, 1-based, (P_ij)_pq = 1

Diagonal identities are implicit.  Blank lines and ``#`` comments are ignored.
Lines with ``i > j`` are mirrored to ``(j, i, q, p)``.
"""

from __future__ import annotations

import io
import logging
from pathlib import Path
from typing import TextIO, Union

import numpy as np

from .matmodel import BlockStructure, PairwiseMatchings, PartialPermutation

__all__ = ["PmxParseError", "read_pmx", "write_pmx", "loads", "dumps"]

log = logging.getLogger(__name__)

PathLike = Union[str, Path]


class PmxParseError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


def _lines(fh: TextIO):
    for n, raw in enumerate(fh, start=1):
        text = raw.split("#", 1)[0].strip()
        if text:
            yield n, text


def load(fh: TextIO) -> PairwiseMatchings:
    """Parse a ``.pmx`` stream.

    Returns matchings whose stored blocks reflect the file literally, so that
    :func:`~permsync.matmodel.validate_pairwise` can report duplicate rows,
    asymmetric ``(i, j)``/``(j, i)`` lines or non-identity diagonal lines.
    Redundant identity diagonal lines are dropped with a warning.
    """
    it = _lines(fh)
    try:
        n, header = next(it)
    except StopIteration:
        raise PmxParseError("empty file") from None
    if header.split() != ["PMX", "1"]:
        raise PmxParseError(f"expected header 'PMX 1', got {header!r}", n)
    try:
        n, sizes_line = next(it)
    except StopIteration:
        raise PmxParseError("missing size line") from None
    try:
        nums = [int(x) for x in sizes_line.split()]
    except ValueError:
        raise PmxParseError(f"size line must be integers: {sizes_line!r}", n) from None
    if not nums or nums[0] != len(nums) - 1:
        raise PmxParseError("size line must read 'k m_1 ... m_k'", n)
    try:
        st = BlockStructure(tuple(nums[1:]))
    except ValueError as exc:
        raise PmxParseError(str(exc), n) from None

    entries: dict[tuple[int, int], list[tuple[int, int]]] = {}
    dropped = 0
    for n, text in it:
        parts = text.split()
        if len(parts) != 4:
            raise PmxParseError(f"expected 'i j p q', got {text!r}", n)
        try:
            i, j, p, q = (int(x) - 1 for x in parts)
        except ValueError:
            raise PmxParseError(f"non-integer field in {text!r}", n) from None
        if min(i, j, p, q) < 0:
            raise PmxParseError("indices are 1-based", n)
        if i == j and p == q:
            dropped += 1
            continue
        entries.setdefault((i, j), []).append((p, q))
    if dropped:
        log.warning("ignored %d redundant self-matching lines", dropped)

    sizes = st.sizes
    blocks = {}
    for (i, j), pairs in entries.items():
        rows = sizes[i] if i < st.k else 0
        cols = sizes[j] if j < st.k else 0
        if i == j:
            # identity part is implicit; keep it so validation sees the full block
            pairs = pairs + [(x, x) for x in range(rows)]
        blocks[(i, j)] = PartialPermutation.from_pairs(rows, cols, pairs)
    # fold i > j blocks into canonical orientation when no (j, i) was given
    for (i, j) in list(blocks):
        if i > j and (j, i) not in blocks:
            blocks[(j, i)] = blocks.pop((i, j)).T
    return PairwiseMatchings(st, blocks)


def loads(text: str) -> PairwiseMatchings:
    return load(io.StringIO(text))


def read_pmx(path: PathLike) -> PairwiseMatchings:
    with open(path, encoding="utf-8") as fh:
        return load(fh)


def dumps(W: PairwiseMatchings) -> str:
    """Serialise in canonical order (sorted by ``i, j, p, q``)."""
    st = W.structure
    out = ["PMX 1", " ".join(str(x) for x in (st.k, *st.sizes))]
    r, c = W.edges
    oi, pi = st.split(r)
    oj, pj = st.split(c)
    order = np.lexsort((pj, pi, oj, oi))
    for t in order.tolist():
        out.append(f"{oi[t] + 1} {oj[t] + 1} {pi[t] + 1} {pj[t] + 1}")
    return "\n".join(out) + "\n"


def write_pmx(W: PairwiseMatchings, path: PathLike) -> None:
    Path(path).write_text(dumps(W), encoding="utf-8")
