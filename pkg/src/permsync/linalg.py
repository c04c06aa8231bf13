"""Top-d spectrum of the sparse matching matrix, and small dense SVDs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .matmodel import PairwiseMatchings

__all__ = ["SpectralFactor", "EigenConvergenceError", "eig_topd", "svd_small", "as_operator"]

DENSE_MAX = 512


class EigenConvergenceError(RuntimeError):
    """The iterative eigensolver hit its iteration cap."""

    def __init__(self, message, residuals):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class SpectralFactor:
    """Scaled dominant eigenvectors ``X`` with ``X X^T`` approximating ``W``.

    Attributes
    ----------
    X : (m, d) ndarray
        ``eigvecs * sqrt(max(eigenvalues, 0))``.
    eigenvalues : (d,) ndarray
        Largest eigenvalues, descending (unclamped).
    eigvecs : (m, d) ndarray
        Orthonormal eigenvectors.
    """

    X: np.ndarray
    eigenvalues: np.ndarray
    eigvecs: np.ndarray


def as_operator(W) -> sp.csr_matrix | np.ndarray:
    """Accept :class:`PairwiseMatchings`, a scipy sparse matrix or a dense array."""
    if isinstance(W, PairwiseMatchings):
        return W.to_sparse()
    if sp.issparse(W):
        return W.tocsr()
    return np.asarray(W, dtype=float)


def eig_topd(W, d: int, method: str = "auto", tol: float = 1e-8,
             maxiter: int | None = None, seed: int = 0) -> SpectralFactor:
    """Compute the ``d`` algebraically largest eigenpairs of symmetric ``W``.

    Parameters
    ----------
    W : PairwiseMatchings, sparse matrix or ndarray
    d : int
        Number of eigenpairs, ``1 <= d <= m``.
    method : {"auto", "dense", "lanczos"}
        ``"auto"`` uses a dense solver for ``m <= 512`` (or when ``d`` is too
        close to ``m`` for a Krylov method) and implicitly restarted Lanczos
        otherwise.  The Lanczos path only touches ``W`` through products.
    tol : float
        Residual tolerance for the Lanczos path.
    maxiter : int, optional
        Restart cap for the Lanczos path, default ``300 * d``.
    seed : int
        Seeds the Lanczos start vector.
    """
    A = as_operator(W)
    m = A.shape[0]
    if not 1 <= d <= m:
        raise ValueError(f"d must satisfy 1 <= d <= m={m}, got {d}")
    if method == "auto":
        method = "dense" if (m <= DENSE_MAX or d >= m - 1) else "lanczos"
    if method == "dense":
        dense = A.toarray() if sp.issparse(A) else A
        vals, vecs = scipy.linalg.eigh(dense, subset_by_index=[m - d, m - 1])
    elif method == "lanczos":
        if d >= m - 1:
            raise ValueError("the Lanczos path needs d < m - 1")
        op = spla.aslinearoperator(A)
        v0 = np.random.default_rng(seed).standard_normal(m)
        try:
            vals, vecs = spla.eigsh(op, k=d, which="LA", tol=tol, v0=v0,
                                    maxiter=maxiter or 300 * d)
        except spla.ArpackNoConvergence as exc:
            resid = _residuals(A, exc.eigenvalues, exc.eigenvectors)
            raise EigenConvergenceError(
                f"eigensolver did not converge: {len(exc.eigenvalues)}/{d} pairs, "
                f"max residual {resid.max() if resid.size else np.nan:.3g}", resid) from exc
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    X = vecs * np.sqrt(np.maximum(vals, 0.0))
    return SpectralFactor(X=X, eigenvalues=vals, eigvecs=vecs)


def _residuals(A, vals, vecs):
    if vecs is None or len(vals) == 0:
        return np.zeros(0)
    return np.linalg.norm(A @ vecs - vecs * vals, axis=0)


def svd_small(A: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """SVD ``A = U diag(s) V^T`` of a small dense matrix; returns ``(U, s, V)``.

    Note that the third factor is ``V``, not ``V^T``.
    """
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise ValueError("svd_small requires finite entries")
    try:
        U, s, Vt = np.linalg.svd(A)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"SVD did not converge: {exc}") from exc
    return U, s, Vt.T
