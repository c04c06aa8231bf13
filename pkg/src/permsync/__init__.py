"""Cycle-consistent synchronisation of partial multi-matchings."""

from .assign import auction_lap, project_onto_universe, prune
from .baselines import matcheig, spectral_greedy
from .evalkit import GenParams, SyncReport, cycle_error, generate, gt_error, pr_f
from .linalg import eig_topd, svd_small
from .matmodel import (BlockStructure, PairwiseMatchings, PartialPermutation,
                       UniverseAssignment, expand_consistent, is_cycle_consistent,
                       validate_pairwise)
from .nmf import FactorPair, NmfConfig, init_factors, nmf_step, normalise, run_nmf
from .sbra import sbra, solve_rotation, update_mask
from .sync import SyncConfig, nmfsync

__version__ = "0.1.0"
