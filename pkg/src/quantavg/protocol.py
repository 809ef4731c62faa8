"""Per-node transitions of the token-splitting quantized averaging protocol.

A node holds integer mass ``(y, z)``: ``z`` unit tokens carrying a total of
``y``. Each round it splits the mass into ``z`` near-equal pieces, keeps one
minimum piece, and sends each of the other ``z - 1`` pieces to a target drawn
uniformly from its out-neighbors plus itself. Incoming pieces are summed into
the mass for the next round.

The :attr:`Variant.OSCILLATING` baseline starts each node with a single token
and sends every piece, keeping none; its quantized states keep flipping
between floor and ceiling of the average instead of settling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple, Protocol, Sequence

INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1


class IntegerOverflow(ArithmeticError):
    """A mass variable left the signed 64-bit range."""


class TargetSource(Protocol):
    def draw_target(self, k: int, node: int, piece: int, candidates: Sequence[int]) -> int: ...


class Variant(Enum):
    NO_OSCILLATION = "no-oscillation"
    OSCILLATING = "oscillating"

    @property
    def initial_tokens(self) -> int:
        return 2 if self is Variant.NO_OSCILLATION else 1

    @property
    def split_guard(self) -> int:
        """A node splits only when it holds more than this many tokens."""
        return 1 if self is Variant.NO_OSCILLATION else 0

    @property
    def keeps_piece(self) -> bool:
        return self is Variant.NO_OSCILLATION


@dataclass(slots=True)
class NodeState:
    y: int
    z: int
    y_s: int
    z_s: int
    q_s: int


class Message(NamedTuple):
    """One ``(c_y, c_z)`` transmission along an active edge in round ``round``."""

    src: int
    dst: int
    c_y: int
    c_z: int
    round: int


@dataclass(slots=True)
class OutboundBatch:
    """Per-target accumulators; only targets that received a piece appear."""

    node: int
    c_y: dict[int, int] = field(default_factory=dict)
    c_z: dict[int, int] = field(default_factory=dict)

    def add(self, target: int, value: int, tokens: int = 1) -> None:
        self.c_y[target] = self.c_y.get(target, 0) + value
        self.c_z[target] = self.c_z.get(target, 0) + tokens

    @property
    def kept(self) -> tuple[int, int]:
        return self.c_y.get(self.node, 0), self.c_z.get(self.node, 0)

    def messages(self, k: int) -> list[Message]:
        """Transmissions for every non-self target with ``c_z > 0``."""
        return [Message(self.node, l, self.c_y[l], cz, k)
                for l, cz in sorted(self.c_z.items()) if l != self.node and cz > 0]


def _checked(v: int) -> int:
    if v < INT64_MIN or v > INT64_MAX:
        raise IntegerOverflow(f"value {v} exceeds signed 64-bit range")
    return v


def initialize(y0: int, variant: Variant = Variant.NO_OSCILLATION) -> NodeState:
    m = variant.initial_tokens
    y = _checked(m * int(y0))
    return NodeState(y=y, z=m, y_s=y, z_s=m, q_s=y // m)


def refresh(s: NodeState) -> NodeState:
    """Copy the mass into the state variables.

    Happens whenever the node holds at least one token; a node with ``z = 0``
    (oscillating variant only) keeps its previous state variables.
    """
    if s.z < 1:
        return s
    return NodeState(s.y, s.z, s.y, s.z, s.y // s.z)


def quantized_state(s: NodeState) -> int:
    return s.q_s


def split_and_stage(s: NodeState, node: int, out_neighbors: Iterable[int], source: TargetSource,
                    variant: Variant = Variant.NO_OSCILLATION, k: int = 0) -> tuple[NodeState, OutboundBatch]:
    """Refresh state variables and distribute the mass for round ``k``.

    Returns the refreshed state (mass unchanged; it is consumed by the batch)
    and the per-target accumulators, including the self entry.
    """
    s = refresh(s)
    batch = OutboundBatch(node)
    y, z = s.y, s.z
    if z <= variant.split_guard:
        batch.add(node, y, z)
        return s, batch
    candidates = sorted(set(out_neighbors) | {node})
    delta, rem = divmod(y, z)
    staged = z - 1 if variant.keeps_piece else z
    draw = source.draw_target
    for piece in range(staged):
        target = draw(k, node, piece, candidates)
        if target not in candidates:
            raise ValueError(f"source returned {target}, not among {candidates}")
        batch.add(target, delta + 1 if piece < rem else delta)
    if variant.keeps_piece:
        # rem <= z - 1, so every +1 went to a staged piece and the kept one is minimal
        batch.add(node, delta)
    return s, batch


def receive_and_merge(s: NodeState, kept: tuple[int, int], inbox: Iterable[Message]) -> NodeState:
    """New mass = kept self portion plus every incoming ``(c_y, c_z)``."""
    y, z = kept
    for msg in inbox:
        y += msg.c_y
        z += msg.c_z
    return NodeState(_checked(y), z, s.y_s, s.z_s, s.q_s)
