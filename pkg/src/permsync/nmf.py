"""Non-negative factorisation ``W ~ V H`` by multiplicative updates.

Nothing here forms the dense ``m x m`` product ``V H``: the updates only need
products of ``W`` (sparse) with ``m x d`` factors and ``d x d`` Gram matrices,
and the objective is evaluated through the same quantities.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import SpectralFactor, as_operator

__all__ = ["FactorPair", "NmfConfig", "NmfError", "NmfResult", "init_factors",
           "nmf_step", "normalise", "run_nmf", "objective"]

log = logging.getLogger(__name__)


class NmfError(FloatingPointError):
    pass


@dataclass(frozen=True, eq=False)
class FactorPair:
    """Non-negative factors ``V`` (m x d) and ``H`` (d x m)."""

    V: np.ndarray
    H: np.ndarray
    flagged: tuple[int, ...] = ()

    def __post_init__(self):
        if self.V.shape[::-1] != self.H.shape:
            raise ValueError(f"incompatible factor shapes {self.V.shape} and {self.H.shape}")


@dataclass(frozen=True)
class NmfConfig:
    epsilon: float = 1e-12
    max_iterations: int = 500
    rel_tolerance: float = 1e-6

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.rel_tolerance <= 0:
            raise ValueError("rel_tolerance must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")


@dataclass(frozen=True, eq=False)
class NmfResult:
    factors: FactorPair
    trace: np.ndarray
    iterations: int
    converged: bool
    flagged: tuple[int, ...] = field(default=())


def init_factors(X, Q: np.ndarray | None = None) -> FactorPair:
    """``V = (X Q)_+`` and ``H = V^T``.  ``X`` may be a :class:`SpectralFactor`."""
    if isinstance(X, SpectralFactor):
        X = X.X
    Xr = X if Q is None else X @ Q
    V = np.maximum(Xr, 0.0)
    return FactorPair(V, V.T.copy())


def _w_norm2(A) -> float:
    if sp.issparse(A):
        return float(A.multiply(A).sum())
    return float(np.sum(A * A))


def objective(W, f: FactorPair) -> float:
    """``||W - V H||_F^2`` via ``||W||^2 - 2<W, VH> + ||VH||^2``.

    ``<W, VH> = sum(V * (W H^T))`` and ``||VH||^2 = <V^T V, H H^T>``; neither
    needs more than ``O(m d)`` extra memory.
    """
    A = as_operator(W)
    w2 = _w_norm2(A)
    V, H = f.V, f.H
    WHt = A @ H.T
    cross = float(np.sum(V * WHt))
    gram = float(np.sum((V.T @ V) * (H @ H.T)))
    return w2 - 2.0 * cross + gram


def nmf_step(W, f: FactorPair, cfg: NmfConfig = NmfConfig()) -> FactorPair:
    """One multiplicative update of ``H`` followed by one of ``V``.

    ``H <- H * (V^T W) / ((V^T V) H + eps)`` then
    ``V <- V * (W H^T) / (V (H H^T) + eps)``.
    """
    A = as_operator(W)
    return _step(A, f, cfg.epsilon)


def _step(A, f: FactorPair, eps: float) -> FactorPair:
    V, H = f.V, f.H
    with np.errstate(invalid="ignore", over="ignore"):
        VtW = (A.T @ V).T
        H = H * VtW / ((V.T @ V) @ H + eps)
        WHt = A @ H.T
        V = V * WHt / (V @ (H @ H.T) + eps)
    if not (np.all(np.isfinite(V)) and np.all(np.isfinite(H))):
        raise NmfError("non-finite values in multiplicative update")
    return FactorPair(V, H)


def normalise(f: FactorPair, zero_tol: float = 0.0) -> FactorPair:
    """Rescale so column ``j`` of ``V`` and row ``j`` of ``H`` have equal norms.

    Uses ``V <- V T^-1`` and ``H <- T H`` with ``T = diag(sqrt(|v_j| / |h_j|))``,
    which leaves ``V H`` unchanged.  Components with a zero column of ``V`` or
    zero row of ``H`` are left as they are and reported in ``flagged``.
    """
    vn = np.sqrt(np.sum(f.V * f.V, axis=0))
    hn = np.sqrt(np.sum(f.H * f.H, axis=1))
    ok = (vn > zero_tol) & (hn > zero_tol)
    t = np.ones_like(vn)
    t[ok] = np.sqrt(vn[ok] / hn[ok])
    flagged = tuple(int(j) for j in np.flatnonzero(~ok))
    if flagged:
        log.debug("normalise: degenerate components %s left unscaled", flagged)
    return FactorPair(f.V / t, f.H * t[:, None], flagged=flagged)


def run_nmf(W, f0: FactorPair, cfg: NmfConfig = NmfConfig()) -> NmfResult:
    """Iterate :func:`nmf_step` to convergence, then :func:`normalise` once.

    Stops when the relative objective decrease drops below
    ``cfg.rel_tolerance`` or after ``cfg.max_iterations`` steps.  The returned
    trace starts with the objective at ``f0``.
    """
    A = as_operator(W)
    w2 = _w_norm2(A)
    f = f0
    trace = [objective(A, f)]
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        try:
            f = _step(A, f, cfg.epsilon)
        except NmfError as exc:
            raise NmfError(f"{exc} at iteration {it}, last objective {trace[-1]:.6g}") from exc
        obj = objective(A, f)
        trace.append(obj)
        prev = trace[-2]
        # objective is a difference of O(w2) terms; treat round-off level as zero
        if prev <= 1e-12 * max(w2, 1.0) or (prev - obj) < cfg.rel_tolerance * prev:
            converged = True
            break
    f = normalise(f)
    return NmfResult(factors=f, trace=np.asarray(trace), iterations=it,
                     converged=converged, flagged=f.flagged)
