"""NmfSync: cycle-consistent synchronisation of noisy partial matchings.

Pipeline: spectral factor of ``W`` -> block rotation -> non-negative
factorisation -> second block rotation -> per-object assignment -> pruning ->
``W_sync = U U^T``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .assign import project_onto_universe, prune
from .linalg import SpectralFactor, eig_topd
from .matmodel import PairwiseMatchings, UniverseAssignment, expand_consistent
from .nmf import NmfConfig, init_factors, run_nmf
from .sbra import sbra

__all__ = ["SyncConfig", "SyncResult", "nmfsync", "spectral_factor"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SyncConfig:
    """Inputs of :func:`nmfsync` besides ``W``.

    ``init`` selects the factor initialisation: ``"sbra"`` rotates the
    spectral factor before clamping, ``"spectral"`` clamps it unrotated
    (kept for ablations).
    """

    d: int
    theta: float = 0.0
    nmf: NmfConfig = field(default_factory=NmfConfig)
    seed: int = 0
    init: str = "sbra"

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be at least 1")
        if self.theta < 0:
            raise ValueError("theta must be non-negative")
        if self.init not in ("sbra", "spectral"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass(eq=False)
class SyncResult:
    U: UniverseAssignment
    W: PairwiseMatchings
    diagnostics: dict


def spectral_factor(W: PairwiseMatchings, d: int, seed: int = 0) -> SpectralFactor:
    """``eig_topd`` padded with zero columns when ``d`` exceeds ``m``."""
    m = W.m
    r = min(d, m)
    if r == 0:
        z = np.zeros((m, d))
        return SpectralFactor(X=z, eigenvalues=np.zeros(d), eigvecs=z)
    f = eig_topd(W, r, seed=seed)
    if r == d:
        return f
    pad = np.zeros((m, d - r))
    return SpectralFactor(X=np.hstack([f.X, pad]),
                          eigenvalues=np.r_[f.eigenvalues, np.zeros(d - r)],
                          eigvecs=np.hstack([f.eigvecs, pad]))


def nmfsync(W: PairwiseMatchings, cfg: SyncConfig) -> SyncResult:
    """Synchronise ``W``; the returned matchings are cycle-consistent by construction."""
    st = W.structure
    if st.m and cfg.d < max(st.sizes):
        raise ValueError(f"d={cfg.d} is smaller than the largest object ({max(st.sizes)} features)")
    timings = {}
    warnings = []

    t0 = time.perf_counter()
    X = spectral_factor(W, cfg.d, seed=cfg.seed)
    timings["eig"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if cfg.init == "sbra":
        rot0 = sbra(X.X, st, strict=False)
        if rot0.partial:
            warnings.append("initial rotation only partially activated")
        f0 = init_factors(X, rot0.Q)
    else:
        rot0 = None
        f0 = init_factors(X)
    timings["init"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    A = W.to_sparse()
    res = run_nmf(A, f0, cfg.nmf)
    timings["nmf"] = time.perf_counter() - t0
    V = res.factors.V

    t0 = time.perf_counter()
    rot1 = sbra(V, st, strict=False)
    if rot1.partial:
        warnings.append("projection rotation only partially activated")
    Vrot = V @ rot1.Q
    U = project_onto_universe(Vrot, st)
    U = prune(Vrot, U, cfg.theta)
    timings["project"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    W_sync = expand_consistent(U)
    timings["expand"] = time.perf_counter() - t0

    for w in warnings:
        log.warning(w)
    diagnostics = {
        "objective_trace": res.trace,
        "nmf_iterations": res.iterations,
        "nmf_converged": res.converged,
        "eigenvalues": X.eigenvalues,
        "timings": timings,
        "warnings": warnings,
        "sbra_init_blocks": rot0.blocks if rot0 is not None else (),
        "sbra_projection_blocks": rot1.blocks,
        "pruned": U.d - cfg.d,
    }
    return SyncResult(U=U, W=W_sync, diagnostics=diagnostics)
