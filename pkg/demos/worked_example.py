"""
The four-node worked example
============================

Replays the scripted first two rounds on the four-node digraph with initial
states (5, 3, 7, 2), then lets seeded random choices finish the run.
"""

from quantavg.cli import replay_worked_example
from quantavg.metrics import consensus_target

# The exact average is 17/4, so every node should settle on 4 or 5.
target = consensus_target((5, 3, 7, 2))
print(f"q = {target.q}, floor = {target.floor_q}, ceil = {target.ceil_q}")

rec, mismatches = replay_worked_example(seed=1)
print("mismatches against the hand-worked table:", mismatches or "none")

# Each row is one snapshot: masses (y, z) and the quantized state q_s.
for k in range(rec.rounds + 1):
    cells = "  ".join(f"({y:2d},{z})->{q}" for y, z, q in zip(rec.y[k], rec.z[k], rec.q[k]))
    print(f"k={k:2d}  {cells}  Y={rec.Y[k]}")

# Fixation is certified: every token is 4 or 5 and no free 4-token can move a 5-node.
print("absorbed at detection:", bool(rec.absorbed[rec.detected_round]))
