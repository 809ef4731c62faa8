"""Random sources for target selection.

Two sources share one interface, ``draw_target(k, node, piece, candidates)``:

* :class:`SeededSource` draws uniformly from the candidate list using
  SplitMix64 (Steele, Lea & Flood, 2014). The generator is implemented here
  rather than taken from the host language so that streams are bit-identical
  on every platform. Test vectors live in ``tests/test_randomness.py``.
* :class:`ScriptedSource` replays recorded choices keyed on
  ``(round, node, piece)``, which makes hand-worked examples reproducible.

Bounded integers use Lemire's multiply-shift method with the exact rejection
step, so draws are unbiased. A rejection needs ``m`` values out of ``2**64``
to be hit, which for candidate lists this small never happens in practice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


class ReplayMismatch(RuntimeError):
    """A scripted source was asked for a draw it cannot answer."""


def mix64(z: int) -> int:
    """SplitMix64 output finalizer (a bijection on 64-bit words)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """Hash a base seed and integer keys into a fresh 64-bit seed."""
    h = mix64(seed & MASK64)
    for key in keys:
        h = mix64(h ^ mix64((key + GOLDEN_GAMMA) & MASK64))
    return h


def trial_seed(base: int, index: int) -> int:
    """Seed for the ``index``-th trial of a batch."""
    return (base ^ index) & MASK64


class SplitMix64:
    """SplitMix64 pseudo-random generator on 64-bit words."""

    __slots__ = ("state",)

    def __init__(self, seed: int) -> None:
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, m: int) -> int:
        """Uniform integer in ``[0, m)``."""
        if m <= 0:
            raise ValueError("m must be positive")
        prod = self.next_u64() * m
        low = prod & MASK64
        if low < m:
            threshold = ((1 << 64) - m) % m
            while low < threshold:
                prod = self.next_u64() * m
                low = prod & MASK64
        return prod >> 64

    def random(self) -> float:
        """Uniform float in ``[0, 1)`` with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


class SeededSource:
    """Uniform target selection driven by a seeded SplitMix64 stream.

    Exactly one 64-bit word is consumed per draw (barring the rejection case
    described in the module docstring), including forced single-candidate
    draws, so the stream position depends only on how many pieces were staged.
    """

    def __init__(self, seed: int) -> None:
        self.seed = seed & MASK64
        self._gen = SplitMix64(self.seed)
        self.draws = 0

    def draw_target(self, k: int, node: int, piece: int, candidates: Sequence[int]) -> int:
        if not candidates:
            raise ValueError("candidates must be nonempty")
        self.draws += 1
        return candidates[self._gen.below(len(candidates))]


@dataclass(frozen=True)
class ScriptedChoice:
    k: int
    node: int
    piece: int
    target: int


class ScriptedSource:
    """Replays recorded target choices.

    Lookups key on ``(k, node, piece)`` so that the order in which nodes are
    processed does not matter. With ``fallback=None`` an uncovered draw raises
    :class:`ReplayMismatch`; otherwise the draw is delegated to ``fallback``.
    A scripted target that is not among the candidates always raises.
    """

    def __init__(self, choices: Iterable[ScriptedChoice], fallback: Optional[SeededSource] = None) -> None:
        self.script: dict[tuple[int, int, int], int] = {}
        for c in choices:
            key = (c.k, c.node, c.piece)
            if key in self.script:
                raise ValueError(f"duplicate scripted draw for (k, node, piece) = {key}")
            self.script[key] = c.target
        self.fallback = fallback
        self.used: set[tuple[int, int, int]] = set()

    def draw_target(self, k: int, node: int, piece: int, candidates: Sequence[int]) -> int:
        key = (k, node, piece)
        target = self.script.get(key)
        if target is None:
            if self.fallback is None:
                raise ReplayMismatch(f"no scripted choice for round {k}, node {node}, piece {piece}")
            return self.fallback.draw_target(k, node, piece, candidates)
        if target not in candidates:
            raise ReplayMismatch(
                f"scripted target {target} for round {k}, node {node}, piece {piece} "
                f"is not among candidates {list(candidates)}"
            )
        self.used.add(key)
        return target

    def unused(self) -> list[tuple[int, int, int]]:
        return sorted(set(self.script) - self.used)

    @classmethod
    def from_records(cls, records: Iterable[Mapping], fallback: Optional[SeededSource] = None) -> "ScriptedSource":
        choices = []
        for i, rec in enumerate(records):
            try:
                choices.append(ScriptedChoice(int(rec["k"]), int(rec["node"]), int(rec["piece"]), int(rec["target"])))
            except KeyError as exc:
                raise ValueError(f"scripted choice #{i} is missing field {exc.args[0]!r}") from None
        return cls(choices, fallback)

    @classmethod
    def load(cls, path: str | Path, fallback: Optional[SeededSource] = None) -> "ScriptedSource":
        with open(path) as fh:
            return cls.from_records(json.load(fh), fallback)


def dump_script(choices: Iterable[ScriptedChoice]) -> str:
    return json.dumps([{"k": c.k, "node": c.node, "piece": c.piece, "target": c.target} for c in choices], indent=1)
