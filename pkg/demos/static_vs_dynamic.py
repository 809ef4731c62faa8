"""
Static versus time-varying topology
===================================

The same digraphs, initial states and random draws, with the edges either always
present or spread over windows of five rounds (each window's union is the full
digraph). Sparser per-round graphs slow the token walks down.
"""

from statistics import median

from quantavg.experiments import load_preset, run_experiment, with_overrides

static = with_overrides(load_preset("fig3-static"), trials=100,
                        graph={"generator": {"density": 0.3, "per_trial": True}})
dynamic = with_overrides(static, topology={"mode": "window_union", "window_l": 5})

for label, cfg in (("static", static), ("window l=5", dynamic)):
    recs = run_experiment(cfg).records
    rounds = [r.stabilization_round for r in recs]
    print(f"{label:>11}: fixed {sum(r.converged for r in recs)}/100, "
          f"median {median(rounds)}, max {max(rounds)}")
