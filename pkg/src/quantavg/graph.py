"""Directed communication graphs and per-round topology schedules.

Edges are ordered pairs ``(j, i)`` meaning *node i can transmit to node j*.
Nodes are dense indices ``0..n-1``. Out-neighbors of ``j`` are therefore the
``l`` with ``(l, j)`` in the edge set.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from math import isclose
from pathlib import Path
from typing import Iterable, Sequence

from .randomness import SplitMix64, derive_seed

Edge = tuple[int, int]


@dataclass(frozen=True)
class Digraph:
    n: int
    edges: frozenset[Edge] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"a digraph needs at least 2 nodes, got {self.n}")
        edges = frozenset((int(j), int(i)) for j, i in self.edges)
        for j, i in edges:
            if j == i:
                raise ValueError(f"self-edge ({j}, {i}) not allowed")
            if not (0 <= j < self.n and 0 <= i < self.n):
                raise ValueError(f"edge ({j}, {i}) has a node outside [0, {self.n})")
        object.__setattr__(self, "edges", edges)

    @cached_property
    def _out(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.n)]
        for j, i in self.edges:
            out[i].append(j)
        return tuple(tuple(sorted(x)) for x in out)

    @cached_property
    def _in(self) -> tuple[tuple[int, ...], ...]:
        inn: list[list[int]] = [[] for _ in range(self.n)]
        for j, i in self.edges:
            inn[j].append(i)
        return tuple(tuple(sorted(x)) for x in inn)

    def out_neighbors(self, j: int) -> tuple[int, ...]:
        return self._out[j]

    def in_neighbors(self, j: int) -> tuple[int, ...]:
        return self._in[j]

    def out_degree(self, j: int) -> int:
        return len(self._out[j])

    def in_degree(self, j: int) -> int:
        return len(self._in[j])

    @property
    def max_out_degree(self) -> int:
        return max(len(x) for x in self._out)

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def union(self, *others: "Digraph") -> "Digraph":
        edges = set(self.edges)
        for g in others:
            if g.n != self.n:
                raise ValueError("union of digraphs with different node counts")
            edges |= g.edges
        return Digraph(self.n, frozenset(edges))

    def to_dict(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.sorted_edges()]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "Digraph":
        try:
            return cls(int(doc["n"]), frozenset((int(e[0]), int(e[1])) for e in doc["edges"]))
        except KeyError as exc:
            raise ValueError(f"graph document is missing field {exc.args[0]!r}") from None

    @classmethod
    def from_json(cls, text: str) -> "Digraph":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "Digraph":
        return cls.from_json(Path(path).read_text())

    @classmethod
    def from_transmissions(cls, n: int, arcs: Iterable[tuple[int, int]]) -> "Digraph":
        """Build from ``(sender, receiver)`` pairs."""
        return cls(n, frozenset((dst, src) for src, dst in arcs))


def _reaches_all(n: int, adj: Sequence[Sequence[int]], start: int) -> bool:
    seen = [False] * n
    seen[start] = True
    count = 1
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                queue.append(v)
    return count == n


def is_strongly_connected(g: Digraph) -> bool:
    """True iff every node reaches every other node along directed edges."""
    return _reaches_all(g.n, g._out, 0) and _reaches_all(g.n, g._in, 0)


def random_strongly_connected(n: int, density: float, seed: int) -> Digraph:
    """Random strongly connected digraph.

    A directed Hamiltonian cycle over a random node permutation is laid down
    first; every remaining ordered pair is then added independently with
    probability ``density``.
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"density must lie in [0, 1], got {density}")
    rng = SplitMix64(derive_seed(seed, n))
    order = list(range(n))
    rng.shuffle(order)
    edges = {(order[(t + 1) % n], order[t]) for t in range(n)}
    for j in range(n):
        for i in range(n):
            if i != j and (j, i) not in edges and rng.random() < density:
                edges.add((j, i))
    return Digraph(n, frozenset(edges))


def four_node_digraph() -> Digraph:
    """The four-node digraph of the worked example.

    Edges m21, m31, m42, m13, m23, m34 in one-based naming.
    """
    named = [(2, 1), (3, 1), (4, 2), (1, 3), (2, 3), (3, 4)]
    return Digraph(4, frozenset((j - 1, i - 1) for j, i in named))


class TopologyMode(Enum):
    STATIC = "static"
    WINDOW_UNION = "window_union"
    IID_COLLECTION = "iid"


@dataclass(frozen=True)
class TopologySchedule:
    """Per-round edge sets over a fixed node set.

    Use the :meth:`static`, :meth:`window_union` and :meth:`iid` constructors.
    For the i.i.d. model ``nominal`` is the union of the collection.
    """

    mode: TopologyMode
    nominal: Digraph
    window_l: int = 1
    duplication: float = 0.0
    collection: tuple[Digraph, ...] = ()
    probabilities: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.mode is TopologyMode.WINDOW_UNION:
            if self.window_l < 1:
                raise ValueError(f"window_l must be >= 1, got {self.window_l}")
            if not 0.0 <= self.duplication <= 1.0:
                raise ValueError(f"duplication must lie in [0, 1], got {self.duplication}")
        if self.mode is TopologyMode.IID_COLLECTION:
            if not self.collection:
                raise ValueError("i.i.d. collection is empty")
            if len(self.collection) != len(self.probabilities):
                raise ValueError("collection and probabilities differ in length")
            if any(p <= 0 for p in self.probabilities):
                raise ValueError("every selection probability must be positive")
            if not isclose(sum(self.probabilities), 1.0, rel_tol=0, abs_tol=1e-9):
                raise ValueError(f"selection probabilities sum to {sum(self.probabilities)}, not 1")
            if any(g.n != self.nominal.n for g in self.collection):
                raise ValueError("collection members must share the node count")
            union = self.collection[0].union(*self.collection[1:])
            if union != self.nominal:
                raise ValueError("nominal digraph must equal the union of the collection")
            if not is_strongly_connected(union):
                raise ValueError("union of the collection is not strongly connected")

    @classmethod
    def static(cls, g: Digraph) -> "TopologySchedule":
        return cls(TopologyMode.STATIC, g)

    @classmethod
    def window_union(cls, g: Digraph, window_l: int, duplication: float = 0.0) -> "TopologySchedule":
        return cls(TopologyMode.WINDOW_UNION, g, window_l=window_l, duplication=duplication)

    @classmethod
    def iid(cls, collection: Sequence[Digraph], probabilities: Sequence[float]) -> "TopologySchedule":
        collection = tuple(collection)
        if not collection:
            raise ValueError("i.i.d. collection is empty")
        nominal = collection[0].union(*collection[1:])
        return cls(TopologyMode.IID_COLLECTION, nominal, collection=collection,
                   probabilities=tuple(float(p) for p in probabilities))

    @property
    def n(self) -> int:
        return self.nominal.n

    @property
    def window(self) -> int:
        """Rounds after which every nominal edge has been active at least once."""
        return self.window_l if self.mode is TopologyMode.WINDOW_UNION else 1


def split_collection(g: Digraph, members: int, seed: int) -> TopologySchedule:
    """Equiprobable i.i.d. collection whose members partition ``g``'s edges."""
    if members < 1:
        raise ValueError("members must be >= 1")
    rng = SplitMix64(derive_seed(seed, 0xC011))
    parts: list[set[Edge]] = [set() for _ in range(members)]
    for e in g.sorted_edges():
        parts[rng.below(members)].add(e)
    graphs = [Digraph(g.n, frozenset(p)) for p in parts]
    return TopologySchedule.iid(graphs, [1.0 / members] * members)


@lru_cache(maxsize=256)
def _window_partition(nominal: Digraph, window_l: int, duplication: float,
                      window: int, seed: int) -> tuple[Digraph, ...]:
    rng = SplitMix64(derive_seed(seed, 0x57, window))
    rounds: list[set[Edge]] = [set() for _ in range(window_l)]
    for e in nominal.sorted_edges():
        home = rng.below(window_l)
        rounds[home].add(e)
        if duplication > 0.0:
            for t in range(window_l):
                if t != home and rng.random() < duplication:
                    rounds[t].add(e)
    return tuple(Digraph(nominal.n, frozenset(r)) for r in rounds)


def schedule_round(s: TopologySchedule, k: int, seed: int) -> Digraph:
    """Digraph active in round ``k``; a pure function of ``(s, k, seed)``.

    Window-union schedules assign each nominal edge to one uniformly chosen
    round of every window ``[m*l, (m+1)*l)``, so each window's union is the
    nominal digraph.
    """
    if k < 0:
        raise ValueError(f"round index must be >= 0, got {k}")
    if s.mode is TopologyMode.STATIC:
        return s.nominal
    if s.mode is TopologyMode.WINDOW_UNION:
        w, offset = divmod(k, s.window_l)
        return _window_partition(s.nominal, s.window_l, s.duplication, w, seed)[offset]
    if len(s.collection) == 1:
        return s.collection[0]
    u = SplitMix64(derive_seed(seed, 0x11D, k)).random()
    acc = 0.0
    for g, p in zip(s.collection, s.probabilities):
        acc += p
        if u < acc:
            return g
    return s.collection[-1]
