"""What the kickout measure rewards, shown on a small model-selection run.

Kickout compares the applicants a scorecard accepts before (A1) and after
(A2) reject inference. Bad cases pushed out of A1 count in its favor, and
Good cases pushed out count against it. It needs no reject labels, which
makes it attractive for choosing among reject inference variants.

This demo runs the model-selection experiment on a reduced configuration
and prints, per shallow self-learning variant:

* its unbiased-sample AUC (the quantity we actually care about),
* its kickout,
* how many A1 members were kicked out and how many rejects took their place.

Watch the last two columns: on this simulator, kickout grows with the
number of rejects a variant pulls into A2, and it does so even when the
variant ranks the unbiased sample worse.

Run with ``python demos/02_kickout_displacement.py``. Takes about a minute.
"""

from dataclasses import replace

from reject_inference.harness import ExperimentConfig, run_experiment2
from reject_inference.metrics import spearman

cfg = replace(ExperimentConfig().with_seed(4), n_bootstraps=0, k_folds=3)
rep = run_experiment2(cfg, write=False)

print(f"{'variant':<56} {'unb AUC':>8} {'kickout':>8} {'kicked':>7} {'rejects in A2':>14}")
for p in sorted(rep.points, key=lambda p: p["kickout_rejects_in_a2"]):
    name = p["variant"].replace("shallow_self_learning", "ssl").replace("max_iterations=5,", "")
    kicked = p["kickout_k_bad"] + p["kickout_k_good"]
    print(f"{name:<56} {p['unbiased_auc']:8.4f} {p['kickout']:8.3f} {kicked:7d} {p['kickout_rejects_in_a2']:14d}")

print()
for a, b in (("kickout", "unbiased_auc"), ("accepts_auc", "unbiased_auc")):
    print(f"spearman({a}, {b}) = {rep.correlation(a, b):+.3f}")
ok = [p for p in rep.points if p["kickout"] is not None]
rho = spearman([p["kickout"] for p in ok], [p["kickout_rejects_in_a2"] for p in ok])
print(f"spearman(kickout, rejects in A2) = {rho:+.3f}")
by_id = {p["variant_id"]: p for p in rep.points}
for e in rep.selection:
    chosen = by_id[e["variant_id"]]
    print(f"selected by {e['criterion']}: {e['variant']} (unbiased AUC {chosen['unbiased_auc']:.4f})")
