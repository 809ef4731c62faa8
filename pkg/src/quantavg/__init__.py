"""Finite-time quantized average consensus over static and dynamic digraphs."""

from .graph import (
    Digraph,
    TopologyMode,
    TopologySchedule,
    four_node_digraph,
    is_strongly_connected,
    random_strongly_connected,
    schedule_round,
    split_collection,
)
from .metrics import (
    ConsensusTarget,
    LyapunovSnapshot,
    consensus_target,
    dynamic_walk_bound,
    floor_token_count,
    k0_bound,
    lyapunov,
    y_init,
)
from .protocol import (
    IntegerOverflow,
    Message,
    NodeState,
    OutboundBatch,
    Variant,
    initialize,
    quantized_state,
    receive_and_merge,
    split_and_stage,
)
from .randomness import ReplayMismatch, ScriptedChoice, ScriptedSource, SeededSource, SplitMix64
from .simulation import TrialConfig, TrialRecord, run_batch, run_trial

__all__ = [
    "ConsensusTarget", "Digraph", "IntegerOverflow", "LyapunovSnapshot", "Message", "NodeState",
    "OutboundBatch", "ReplayMismatch", "ScriptedChoice", "ScriptedSource", "SeededSource", "SplitMix64",
    "TopologyMode", "TopologySchedule", "TrialConfig", "TrialRecord", "Variant", "consensus_target",
    "dynamic_walk_bound", "four_node_digraph", "floor_token_count", "initialize", "is_strongly_connected",
    "k0_bound", "lyapunov", "quantized_state", "random_strongly_connected", "receive_and_merge",
    "run_batch", "run_trial", "schedule_round", "split_and_stage", "split_collection", "y_init",
]

__version__ = "0.1.0"
