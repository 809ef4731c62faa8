"""
Why each node keeps one token
=============================

With one token per node and no kept piece, the lone tokens keep wandering, so
the quantized states flip between 4 and 5 forever. Starting from two tokens and
always keeping one freezes them.
"""

from quantavg.graph import four_node_digraph
from quantavg.protocol import Variant
from quantavg.randomness import SeededSource
from quantavg.simulation import run_trial

g, y0 = four_node_digraph(), (5, 3, 7, 2)

osc = run_trial(g, y0, Variant.OSCILLATING, SeededSource(0), max_rounds=40, require_absorbed=True)
print("oscillating, last 10 snapshots of q_s:")
for row in osc.q[-10:]:
    print("   ", row.tolist())

fixed = run_trial(g, y0, Variant.NO_OSCILLATION, SeededSource(0), require_absorbed=True, observe_after=40)
print(f"non-oscillating: fixed at round {fixed.stabilization_round} as {fixed.q[-1].tolist()}, "
      f"{fixed.q_changes_after(fixed.stabilization_round)} changes in the next {fixed.rounds - fixed.stabilization_round} rounds")
