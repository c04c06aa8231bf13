"""
Synchronising noisy pairwise matchings
======================================

Draw a synthetic multi-object matching problem, corrupt some of the pairwise
matchings, and clean them up with ``nmfsync``.
"""

# %%
# A ground truth universe of 20 features, seen by 12 objects.  Each object
# observes roughly 70% of the universe; 30% of the rows of every pairwise
# matching are shuffled.
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from permsync import GenParams, SyncConfig, generate, nmfsync
from permsync.evalkit import evaluate

W, Wgt, Ugt = generate(GenParams(k=12, d=20, rho=0.7, sigma=0.3, seed=1))
print("features per object:", W.structure.sizes)
print("matchings in input:", W.num_matchings)

# %%
# The noisy input is not cycle-consistent, and it is some way off the truth.
before = evaluate(W, Wgt)
print(f"input   cycle-error {before.cycle_error:.3f}  gt-error {before.gt_error:.1f}  "
      f"f-score {before.fscore:.3f}")

# %%
# Synchronise with a universe of size 20.
res = nmfsync(W, SyncConfig(d=20))
after = evaluate(res.W, Wgt, res.diagnostics["timings"])
print(f"nmfsync cycle-error {after.cycle_error:.3f}  gt-error {after.gt_error:.1f}  "
      f"f-score {after.fscore:.3f}")
print("stage timings (s):", {k: round(v, 4) for k, v in after.wall_times.items()})

# %%
# Side by side: the truth, the input and the output.  Each black dot is a
# matched pair of features.
fig, axes = plt.subplots(1, 3, figsize=(12, 4))
for ax, M, title in zip(axes, (Wgt, W, res.W), ("ground truth", "noisy input", "nmfsync")):
    ax.spy(M.to_sparse(), markersize=0.6)
    ax.set_title(title)
    ax.set_xticks([])
    ax.set_yticks([])
fig.tight_layout()
fig.savefig("synchronise_noisy_matchings.png", dpi=120)

# %%
# The NMF objective decreases monotonically.
trace = res.diagnostics["objective_trace"]
print("objective: first", round(trace[0], 2), "last", round(trace[-1], 2),
      "after", res.diagnostics["nmf_iterations"], "iterations")
assert np.all(np.diff(trace) <= 1e-9)
