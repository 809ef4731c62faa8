"""Synchronous-round engine and batch runner.

Round ``k`` proceeds as follows: every node refreshes its state variables
from its mass (this is snapshot ``k``), the stopping rule is evaluated, the
round-``k`` digraph is taken from the schedule, every node splits and stages
its mass in ascending node order, messages are delivered, and every node
merges its kept portion with its inbox. Delivery is instantaneous and
lossless, so at each snapshot all mass is held by nodes.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import IO, Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from .graph import Digraph, TopologyMode, TopologySchedule, schedule_round
from .metrics import ConsensusTarget, consensus_target, floor_token_count, k0_bound, lyapunov, y_init
from .protocol import Message, NodeState, TargetSource, Variant, initialize, receive_and_merge, refresh, split_and_stage
from .randomness import ScriptedChoice, ScriptedSource, SeededSource

__all__ = [
    "ConservationViolation", "InvariantViolation", "Message", "TrialConfig", "TrialRecord",
    "default_max_rounds", "is_absorbed", "run_batch", "run_trial", "summary_rows", "trace_rows",
    "write_summary_csv", "write_trace",
]

P0_DEFAULT = 0.9


class InvariantViolation(AssertionError):
    """A protocol invariant failed during simulation."""


class ConservationViolation(InvariantViolation):
    pass


@dataclass(frozen=True)
class TrialRecord:
    """Per-round audit trail of one trial.

    Row ``k`` of the 2-D arrays is snapshot ``k``: held masses ``y, z`` and the
    state variables refreshed from them. ``staged_y``/``staged_z`` are the
    mid-round sums over kept portions plus in-flight messages of round ``k``
    and ``messages`` counts transmissions (no entry for the final snapshot,
    so these are one element shorter).
    """

    n: int
    variant: Variant
    mode: TopologyMode
    seed: Optional[int]
    target: ConsensusTarget
    y_init: int
    d_plus_max: int
    window_l: int
    y: np.ndarray
    z: np.ndarray
    y_s: np.ndarray
    z_s: np.ndarray
    q: np.ndarray
    Y1: np.ndarray
    Y2: np.ndarray
    in_target: np.ndarray
    absorbed: np.ndarray
    staged_y: np.ndarray
    staged_z: np.ndarray
    messages: np.ndarray
    convergence_round: Optional[int]
    stabilization_round: Optional[int]
    converged: bool
    detected_round: Optional[int]
    max_rounds: int
    trial_id: int = 0
    error: Optional[str] = None

    @property
    def Y(self) -> np.ndarray:
        return self.Y1 + self.Y2

    @property
    def rounds(self) -> int:
        """Number of rounds executed (snapshots minus one)."""
        return max(len(self.y) - 1, 0)

    @property
    def y_sum(self) -> np.ndarray:
        return self.y.sum(axis=1)

    @property
    def z_sum(self) -> np.ndarray:
        return self.z.sum(axis=1)

    @property
    def failed(self) -> bool:
        return self.error is not None

    def lyapunov_increases(self) -> list[int]:
        """Rounds ``k`` with ``Y[k+1] > Y[k]``."""
        Y = self.Y
        return [int(k) for k in np.nonzero(Y[1:] > Y[:-1])[0]]

    def q_changes_after(self, k: int) -> int:
        """Count of (round, node) pairs whose quantized state changes after snapshot ``k``."""
        q = self.q[k:]
        return int((q[1:] != q[:-1]).sum())

    def first_all_admissible(self) -> Optional[int]:
        lo, hi = self.target.floor_q, self.target.ceil_q
        ok = ((self.q >= lo) & (self.q <= hi)).all(axis=1)
        idx = np.nonzero(ok)[0]
        return int(idx[0]) if len(idx) else None

    def floor_tokens(self, k: int) -> int:
        """Unit tokens carrying floor(q) at snapshot ``k``."""
        return floor_token_count(zip(self.y[k].tolist(), self.z[k].tolist()), self.target)

    def summary(self) -> dict:
        return {
            "trial_id": self.trial_id,
            "n": self.n,
            "variant": self.variant.value,
            "mode": self.mode.value,
            "seed": self.seed,
            "converged": self.converged,
            "convergence_round": self.convergence_round,
            "stabilization_round": self.stabilization_round,
        }


def default_max_rounds(schedule: TopologySchedule, y0: Sequence[int], p0: float = P0_DEFAULT) -> int:
    """Ten times the fixation bound at probability ``p0``."""
    n = schedule.n
    return 10 * k0_bound(n, max(schedule.nominal.max_out_degree, 1), y_init(y0), p0, schedule.window)


def is_absorbed(masses: Sequence[tuple[int, int]], target: ConsensusTarget, variant: Variant) -> bool:
    """True when no quantized state can ever change again.

    Requires every unit token to carry floor(q) or ceil(q). With the
    kept-piece rule a node's state is floor(q) exactly when it holds a floor
    token, and it then keeps one forever; a ceil-state node can only change
    by receiving a floor token. So the state is final once either every node
    holds a floor token or no floor token is free to travel. The oscillating
    baseline only settles when all tokens are equal.
    """
    L, U = target.floor_q, target.ceil_q
    for y, z in masses:
        if z > 0 and not (y >= L * z and y <= U * z):
            return False
    if target.R == 0:
        return True
    if not variant.keeps_piece:
        return False
    free = 0
    holders = 0
    for y, z in masses:
        c = floor_token_count([(y, z)], target)
        if c:
            holders += 1
            free += c - 1
    return holders == len(masses) or free == 0


def _as_schedule(g: Union[Digraph, TopologySchedule]) -> TopologySchedule:
    return TopologySchedule.static(g) if isinstance(g, Digraph) else g


def run_trial(g: Union[Digraph, TopologySchedule], y0: Sequence[int],
              variant: Variant = Variant.NO_OSCILLATION, source: Optional[TargetSource] = None,
              max_rounds: Optional[int] = None, stability_window: Optional[int] = None, *,
              topology_seed: int = 0, require_absorbed: bool = False, observe_after: int = 0,
              trial_id: int = 0) -> TrialRecord:
    """Run one trial until fixation is detected or ``max_rounds`` rounds have executed.

    Fixation is detected once every quantized state has stayed unchanged and
    inside ``{floor(q), ceil(q)}``, with zero Lyapunov error, for
    ``stability_window`` rounds (default ``2n``). ``require_absorbed`` also
    demands :func:`is_absorbed` at detection time. ``observe_after`` keeps
    simulating that many rounds past detection, for post-fixation checks.
    """
    schedule = _as_schedule(g)
    n = schedule.n
    y0 = [int(v) for v in y0]
    if len(y0) != n:
        raise ValueError(f"{len(y0)} initial states for a {n}-node digraph")
    if source is None:
        source = SeededSource(0)
    if max_rounds is None:
        max_rounds = default_max_rounds(schedule, y0)
    if stability_window is None:
        stability_window = 2 * n
    if max_rounds < 1 or stability_window < 1:
        raise ValueError("max_rounds and stability_window must be >= 1")

    target = consensus_target(y0)
    L, U = target.floor_q, target.ceil_q
    total_y = variant.initial_tokens * target.S
    total_z = variant.initial_tokens * n
    mult = Fraction(variant.initial_tokens)
    static_out = [schedule.nominal.out_neighbors(j) for j in range(n)] if schedule.mode is TopologyMode.STATIC else None

    held: list[NodeState] = [initialize(v, variant) for v in y0]
    rows_y, rows_z, rows_ys, rows_zs, rows_q = [], [], [], [], []
    Y1s, Y2s, flags, absorbed_flags = [], [], [], []
    staged_y, staged_z, msg_counts = [], [], []

    convergence_round = None
    stabilization_round = None
    streak_start = None
    detected = None
    prev_q = None
    prev_conv = False
    k = 0
    while True:
        held = [refresh(s) for s in held]
        masses = [(s.y, s.z) for s in held]
        if sum(m[0] for m in masses) != total_y or sum(m[1] for m in masses) != total_z:
            raise ConservationViolation(f"held sums drifted at snapshot {k}")
        if variant.keeps_piece and any(m[1] < 1 for m in masses):
            raise InvariantViolation(f"a node lost its last token at snapshot {k}")
        q = [s.q_s for s in held]
        lyap = lyapunov(masses, target, mult)
        conv = lyap.Y == 0 and all(L <= v <= U for v in q)
        absorbed = conv and is_absorbed(masses, target, variant)
        rows_y.append([m[0] for m in masses])
        rows_z.append([m[1] for m in masses])
        rows_ys.append([s.y_s for s in held])
        rows_zs.append([s.z_s for s in held])
        rows_q.append(q)
        Y1s.append(lyap.Y1)
        Y2s.append(lyap.Y2)
        flags.append(conv)
        absorbed_flags.append(absorbed)

        if conv and convergence_round is None:
            convergence_round = k
        if conv and prev_conv and q == prev_q:
            pass
        elif conv:
            streak_start = k
        else:
            streak_start = None
        prev_q, prev_conv = q, conv
        if (detected is None and streak_start is not None and k - streak_start >= stability_window
                and (absorbed or not require_absorbed)):
            detected = k
            stabilization_round = streak_start
        if detected is not None and k >= detected + observe_after:
            break
        if k >= max_rounds:
            break

        if static_out is not None:
            out = static_out
        else:
            gk = schedule_round(schedule, k, topology_seed)
            out = [gk.out_neighbors(j) for j in range(n)]
        inbox: list[list[Message]] = [[] for _ in range(n)]
        kept: list[tuple[int, int]] = []
        sy = sz = sent = 0
        for j in range(n):
            held[j], batch = split_and_stage(held[j], j, out[j], source, variant, k)
            kj = batch.kept
            kept.append(kj)
            sy += kj[0]
            sz += kj[1]
            allowed = out[j]
            for msg in batch.messages(k):
                if msg.dst not in allowed:
                    raise InvariantViolation(f"message {msg} uses an inactive edge")
                inbox[msg.dst].append(msg)
                sy += msg.c_y
                sz += msg.c_z
                sent += 1
        if sy != total_y or sz != total_z:
            raise ConservationViolation(f"kept plus in-flight sums drifted in round {k}")
        staged_y.append(sy)
        staged_z.append(sz)
        msg_counts.append(sent)
        held = [receive_and_merge(held[j], kept[j], inbox[j]) for j in range(n)]
        k += 1

    return TrialRecord(
        n=n, variant=variant, mode=schedule.mode, seed=getattr(source, "seed", None),
        target=target, y_init=y_init(y0), d_plus_max=schedule.nominal.max_out_degree,
        window_l=schedule.window,
        y=np.array(rows_y, dtype=np.int64), z=np.array(rows_z, dtype=np.int64),
        y_s=np.array(rows_ys, dtype=np.int64), z_s=np.array(rows_zs, dtype=np.int64),
        q=np.array(rows_q, dtype=np.int64),
        Y1=np.array(Y1s, dtype=np.int64), Y2=np.array(Y2s, dtype=np.int64),
        in_target=np.array(flags, dtype=bool), absorbed=np.array(absorbed_flags, dtype=bool),
        staged_y=np.array(staged_y, dtype=np.int64), staged_z=np.array(staged_z, dtype=np.int64),
        messages=np.array(msg_counts, dtype=np.int64),
        convergence_round=convergence_round, stabilization_round=stabilization_round,
        converged=detected is not None, detected_round=detected, max_rounds=max_rounds,
        trial_id=trial_id,
    )


@dataclass(frozen=True)
class TrialConfig:
    schedule: TopologySchedule
    y0: tuple[int, ...]
    variant: Variant = Variant.NO_OSCILLATION
    seed: int = 0
    max_rounds: Optional[int] = None
    stability_window: Optional[int] = None
    topology_seed: int = 0
    trial_id: int = 0
    script: Optional[tuple[ScriptedChoice, ...]] = None
    script_fallback: bool = True
    require_absorbed: bool = False
    observe_after: int = 0

    def source(self) -> TargetSource:
        seeded = SeededSource(self.seed)
        if self.script is None:
            return seeded
        return ScriptedSource(self.script, seeded if self.script_fallback else None)


def _failed_record(cfg: TrialConfig, error: BaseException) -> TrialRecord:
    empty2 = np.zeros((0, cfg.schedule.n), dtype=np.int64)
    empty1 = np.zeros(0, dtype=np.int64)
    target = consensus_target(cfg.y0)
    return TrialRecord(
        n=cfg.schedule.n, variant=cfg.variant, mode=cfg.schedule.mode, seed=cfg.seed, target=target,
        y_init=y_init(cfg.y0), d_plus_max=cfg.schedule.nominal.max_out_degree, window_l=cfg.schedule.window,
        y=empty2, z=empty2, y_s=empty2, z_s=empty2, q=empty2, Y1=empty1, Y2=empty1,
        in_target=empty1.astype(bool), absorbed=empty1.astype(bool),
        staged_y=empty1, staged_z=empty1, messages=empty1,
        convergence_round=None, stabilization_round=None, converged=False, detected_round=None,
        max_rounds=cfg.max_rounds or 0, trial_id=cfg.trial_id,
        error=f"{type(error).__name__}: {error}",
    )


def execute(cfg: TrialConfig) -> TrialRecord:
    """Run one configured trial; aborts become failure records."""
    try:
        return run_trial(cfg.schedule, cfg.y0, cfg.variant, cfg.source(), cfg.max_rounds,
                         cfg.stability_window, topology_seed=cfg.topology_seed,
                         require_absorbed=cfg.require_absorbed, observe_after=cfg.observe_after,
                         trial_id=cfg.trial_id)
    except Exception as exc:
        return _failed_record(cfg, exc)


def run_batch(configs: Sequence[TrialConfig], parallelism: int = 1) -> list[TrialRecord]:
    """Run trials, optionally on a process pool; results keep input order."""
    if not configs:
        raise ValueError("configs is empty")
    if parallelism <= 1 or len(configs) == 1:
        return [execute(c) for c in configs]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(execute, configs, chunksize=max(1, len(configs) // (4 * parallelism))))


SUMMARY_FIELDS = ["trial_id", "n", "variant", "mode", "seed", "converged", "convergence_round", "stabilization_round"]


def summary_rows(records: Iterable[TrialRecord]) -> Iterator[dict]:
    for r in records:
        yield r.summary()


def write_summary_csv(records: Iterable[TrialRecord], fh: IO[str]) -> None:
    writer = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in summary_rows(records):
        writer.writerow({k: ("" if v is None else v) for k, v in row.items()})


def trace_rows(record: TrialRecord) -> Iterator[dict]:
    """One JSON-ready object per snapshot."""
    Y = record.Y
    for k in range(len(record.y)):
        yield {
            "k": k,
            "y": record.y[k].tolist(),
            "z": record.z[k].tolist(),
            "y_s": record.y_s[k].tolist(),
            "z_s": record.z_s[k].tolist(),
            "q_s": record.q[k].tolist(),
            "y_sum": int(record.y[k].sum()),
            "z_sum": int(record.z[k].sum()),
            "Y1": int(record.Y1[k]),
            "Y2": int(record.Y2[k]),
            "Y": int(Y[k]),
            "converged": bool(record.in_target[k]),
        }


def write_trace(record: TrialRecord, fh: IO[str]) -> None:
    for row in trace_rows(record):
        fh.write(json.dumps(row, separators=(",", ":")))
        fh.write("\n")
