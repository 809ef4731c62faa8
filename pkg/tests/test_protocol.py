import pytest
from hypothesis import given, strategies as st

from quantavg.protocol import (
    IntegerOverflow,
    Message,
    NodeState,
    Variant,
    initialize,
    receive_and_merge,
    refresh,
    split_and_stage,
)
from quantavg.randomness import ScriptedChoice, ScriptedSource, SeededSource


class Distinct:
    """Sends piece p to node p + 1, so every piece lands on its own target."""

    def draw_target(self, k, node, piece, candidates):
        return piece + 1


def test_initialize_doubles():
    s = initialize(7)
    assert (s.y, s.z, s.y_s, s.z_s, s.q_s) == (14, 2, 14, 2, 7)
    osc = initialize(7, Variant.OSCILLATING)
    assert (osc.y, osc.z, osc.q_s) == (7, 1, 7)


def test_refresh_floor_division_negative():
    s = refresh(NodeState(-7, 2, 0, 1, 0))
    assert s.q_s == -4  # mathematical floor


def test_split_exhaustive():
    # every |y| <= 200, 2 <= z <= 20: the first r staged pieces carry d+1, the rest and the kept piece d
    out = tuple(range(1, 21))
    for y in range(-200, 201):
        for z in range(2, 21):
            _, batch = split_and_stage(NodeState(y, z, 0, 1, 0), 0, out, Distinct())
            d, r = divmod(y, z)
            staged = [batch.c_y[p + 1] for p in range(z - 1)]
            assert staged == [d + 1] * r + [d] * (z - 1 - r)
            assert all(batch.c_z[p + 1] == 1 for p in range(z - 1))
            assert batch.kept == (d, 1)


def test_single_token_stays():
    for variant_y in (-3, 0, 9):
        s = NodeState(variant_y, 1, 0, 1, 0)
        _, batch = split_and_stage(s, 2, (0, 1), SeededSource(0))
        assert batch.kept == (variant_y, 1)
        assert batch.messages(0) == []


def test_oscillating_sends_every_piece():
    src = ScriptedSource([ScriptedChoice(0, 0, 0, 1)])
    _, batch = split_and_stage(NodeState(5, 1, 5, 1, 5), 0, (1,), src, Variant.OSCILLATING)
    assert batch.kept == (0, 0)
    assert batch.messages(0) == [Message(0, 1, 5, 1, 0)]


def test_oscillating_zero_tokens_keep_state():
    s = NodeState(0, 0, 9, 2, 4)
    s2, batch = split_and_stage(s, 0, (1,), SeededSource(0), Variant.OSCILLATING)
    assert (s2.y_s, s2.z_s, s2.q_s) == (9, 2, 4)
    assert batch.messages(0) == []


def test_round0_worked_example():
    # v1 holds (10, 2): one piece of 5 goes to v2, one piece of 5 is kept
    src = ScriptedSource([ScriptedChoice(0, 0, 0, 1)])
    _, batch = split_and_stage(initialize(5), 0, (1, 2), src)
    assert batch.kept == (5, 1)
    assert batch.messages(0) == [Message(0, 1, 5, 1, 0)]
    # v2 holds (6, 2) and sends its piece to itself, then receives v1's piece
    src = ScriptedSource([ScriptedChoice(0, 1, 0, 1)])
    s, batch = split_and_stage(initialize(3), 1, (0, 2, 3), src)
    assert batch.kept == (6, 2)
    merged = refresh(receive_and_merge(s, batch.kept, [Message(0, 1, 5, 1, 0)]))
    assert (merged.y, merged.z, merged.y_s, merged.z_s, merged.q_s) == (11, 3, 11, 3, 3)


def test_remainder_goes_to_staged_pieces():
    # (11, 3) at v2: d=3, r=2; both staged pieces carry 4 and the kept piece 3
    src = ScriptedSource([ScriptedChoice(1, 1, 0, 3), ScriptedChoice(1, 1, 1, 3)])
    _, batch = split_and_stage(NodeState(11, 3, 11, 3, 3), 1, (0, 2, 3), src, k=1)
    assert batch.kept == (3, 1)
    assert batch.messages(1) == [Message(1, 3, 8, 2, 1)]


def test_source_outside_candidates():
    class Bad:
        def draw_target(self, k, node, piece, candidates):
            return 99

    with pytest.raises(ValueError, match="not among"):
        split_and_stage(NodeState(4, 2, 4, 2, 2), 0, (1,), Bad())


masses = st.tuples(st.integers(-10**6, 10**6), st.integers(1, 50))


@given(masses, st.lists(masses, max_size=6))
def test_merge_is_additive(kept, incoming):
    msgs = [Message(i + 1, 0, y, z, 0) for i, (y, z) in enumerate(incoming)]
    s = receive_and_merge(NodeState(0, 1, 0, 1, 0), kept, msgs)
    assert s.y == kept[0] + sum(y for y, _ in incoming)
    assert s.z == kept[1] + sum(z for _, z in incoming)


@given(st.integers(-10**9, 10**9), st.integers(2, 40), st.integers(0, 2**32))
def test_split_conserves(y, z, seed):
    _, batch = split_and_stage(NodeState(y, z, 0, 1, 0), 0, (1, 2, 3, 4), SeededSource(seed))
    pieces = [batch.c_y[t] for t in batch.c_y]
    assert sum(pieces) == y and sum(batch.c_z.values()) == z
    assert batch.kept[1] >= 1


def test_overflow_detected():
    with pytest.raises(IntegerOverflow):
        initialize(2**62)
    with pytest.raises(IntegerOverflow):
        receive_and_merge(NodeState(0, 1, 0, 1, 0), (2**62, 1), [Message(1, 0, 2**62, 1, 0)])
