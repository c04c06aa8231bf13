import numpy as np

from permsync.baselines import greedy_rounding, matcheig, spectral_greedy
from permsync.evalkit import GenParams, cycle_error, generate, gt_error
from permsync.matmodel import is_cycle_consistent
from permsync.sync import SyncConfig, nmfsync


def test_greedy_rounding_order_and_threshold():
    S = np.array([[0.9, 0.8], [0.85, 0.1]])
    rr, cc = greedy_rounding(S)
    assert list(zip(rr.tolist(), cc.tolist())) == [(0, 0), (1, 1)]
    rr, cc = greedy_rounding(S, threshold=0.5)
    assert list(zip(rr.tolist(), cc.tolist())) == [(0, 0)]


def test_spectral_exact_on_full_noise_free():
    for seed in range(5):
        W, Wgt, _ = generate(GenParams(k=6, d=7, rho=1.0, sigma=0.0, seed=seed))
        U, Ws = spectral_greedy(W, 7)
        assert Ws == Wgt
        assert is_cycle_consistent(Ws)


def test_spectral_not_better_than_nmfsync_on_average():
    e_spec, e_nmf = [], []
    for seed in range(100):
        W, Wgt, _ = generate(GenParams(k=10, d=10, rho=0.7, sigma=0.3, seed=seed))
        e_spec.append(gt_error(spectral_greedy(W, 10)[1], Wgt))
        e_nmf.append(gt_error(nmfsync(W, SyncConfig(d=10)).W, Wgt))
    assert np.mean(e_spec) >= np.mean(e_nmf)


def test_matcheig_is_generally_inconsistent():
    inconsistent = 0
    for seed in range(20):
        W, _, _ = generate(GenParams(k=10, d=10, rho=0.7, sigma=0.4, seed=seed))
        inconsistent += cycle_error(matcheig(W, 10)) > 0
    assert inconsistent > 10


def test_matcheig_threshold_above_one_returns_nothing():
    W, _, _ = generate(GenParams(k=5, d=6, rho=0.8, sigma=0.0, seed=0))
    assert matcheig(W, 6, tau=1.5).num_matchings == 0
    assert matcheig(W, 6, tau=0.5) == W
