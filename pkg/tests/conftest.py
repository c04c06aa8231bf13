import numpy as np
import pytest

from permsync.matmodel import BlockStructure, UniverseAssignment


def random_universe(rng, k, d, rho):
    """Random object-to-universe assignment, built independently of the generator."""
    labels = []
    for _ in range(k):
        keep = rng.random(d) < rho
        labels.append(rng.permutation(d)[: keep.sum()])
    st = BlockStructure(tuple(len(x) for x in labels))
    lab = np.concatenate(labels) if st.m else np.zeros(0, dtype=int)
    return UniverseAssignment(st, d, lab)


def dense_blocks(W):
    """Dense ``P_ij`` for every ordered pair, from the dense matrix."""
    A = W.to_dense()
    st = W.structure
    return {(i, j): A[st.block_slice(i), st.block_slice(j)]
            for i in range(st.k) for j in range(st.k)}


def in_universe_set(Y, structure, tol=1e-8):
    """Whether ``Y`` is (numerically) a stacked object-to-universe assignment."""
    R = np.rint(Y)
    if np.abs(Y - R).max() > tol or not np.all((R == 0) | (R == 1)):
        return False
    if np.any(R.sum(axis=1) != 1):
        return False
    return all(np.all(R[structure.block_slice(i)].sum(axis=0) <= 1) for i in range(structure.k))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0].lstrip("#"))):
            terminalreporter.write_line(line)
