from decimal import Decimal, ROUND_CEILING, localcontext
from fractions import Fraction
from math import ceil

import pytest
from hypothesis import given, strategies as st

from quantavg.metrics import (
    consensus_target,
    dynamic_walk_bound,
    floor_token_count,
    k0_bound,
    lyapunov,
    y_init,
)


def test_target_worked_example():
    t = consensus_target((5, 3, 7, 2))
    assert t.q == Fraction(17, 4)
    assert (t.floor_q, t.ceil_q, t.L, t.R) == (4, 5, 4, 1)


def test_target_constant():
    t = consensus_target((6,) * 5)
    assert t.floor_q == t.ceil_q == 6 and t.R == 0


def test_target_batch_average():
    y0 = [26] * 14 + [27] * 6
    assert sum(y0) == 526
    t = consensus_target(y0)
    assert (t.floor_q, t.ceil_q) == (26, 27)


def test_target_negative_average():
    t = consensus_target((-3, 0))
    assert (t.floor_q, t.ceil_q) == (-2, -1)


def test_target_empty():
    with pytest.raises(ValueError):
        consensus_target(())


@pytest.mark.parametrize("y0,expected", [((5, 3, 7, 2), 5), ((4, 4, 4), 0), ((0, 10), 10)])
def test_y_init(y0, expected):
    assert y_init(y0) == expected


def test_lyapunov_worked_example():
    t = consensus_target((5, 3, 7, 2))
    snap = lyapunov([(10, 2), (6, 2), (14, 2), (4, 2)], t)
    assert (snap.Y1, snap.Y2, snap.Y) == (2, 3, 5)


def test_lyapunov_zero_at_target():
    t = consensus_target((5, 3, 7, 2))
    assert lyapunov([(4, 1), (5, 1), (4, 1)], t).Y == 0
    assert lyapunov([(9, 1)], consensus_target((9,))).Y == 0


def unit_oracle(entries, target):
    """Expand every mass into explicit unit tokens and total the errors."""
    units = []
    for y, z in entries:
        lo = y // z
        units += [lo + 1] * (y - lo * z) + [lo] * (z - (y - lo * z))
        assert sum(units[-z:]) == y
    hi, lo_t = target.ceil_q, target.floor_q
    e1 = sum(u - hi for u in units if u > hi)
    e2 = sum(lo_t - u for u in units if u < lo_t)
    m = Fraction(len(units), target.n)
    return ceil(e1 / m), ceil(e2 / m)


@given(st.lists(st.integers(-50, 50), min_size=2, max_size=8), st.data())
def test_lyapunov_matches_unit_oracle(y0, data):
    t = consensus_target(y0)
    n = len(y0)
    total_z = 2 * n
    # random partition of 2n tokens and 2*S mass over n nodes
    cuts = sorted(data.draw(st.lists(st.integers(0, total_z - n), min_size=n - 1, max_size=n - 1)))
    zs = [b - a + 1 for a, b in zip([0] + cuts, cuts + [total_z - n])]
    ys = data.draw(st.lists(st.integers(-300, 300), min_size=n - 1, max_size=n - 1))
    ys.append(2 * t.S - sum(ys))
    entries = list(zip(ys, zs))
    snap = lyapunov(entries, t)
    assert (snap.Y1, snap.Y2) == unit_oracle(entries, t)


def test_lyapunov_initial_equals_y_init():
    for y0 in [(5, 3, 7, 2), (0, 10), (1, 50, 3, 44, 27), (-5, 5, 12)]:
        assert lyapunov([(2 * v, 2) for v in y0], consensus_target(y0)).Y == y_init(y0)


def test_floor_token_count():
    t = consensus_target((5, 3, 7, 2))
    # (9, 2) = tokens {4, 5}; (8, 2) = {4, 4}; (5, 1) = {5}
    assert floor_token_count([(9, 2), (8, 2), (5, 1)], t) == 3


def decimal_k0(n, d, yi, p0, prec=80):
    with localcontext() as ctx:
        ctx.prec = prec
        m = Decimal(yi + n)
        two = Decimal(2)
        ln2 = two.ln()
        log2p0 = Decimal(p0).ln() / ln2
        eps = 1 - (log2p0 / m * ln2).exp()
        miss = 1 - Decimal(1) / Decimal(1 + d) ** (n - 1)
        value = m * ((eps.ln() / ln2) / (miss.ln() / ln2)) * (n - 1)
        return int(value.to_integral_value(rounding=ROUND_CEILING))


@pytest.mark.parametrize("args", [(4, 2, 5, 0.5), (4, 2, 5, 0.9), (10, 3, 120, 0.9), (20, 5, 231, 0.9), (2, 1, 0, 0.3)])
def test_k0_matches_decimal_oracle(args):
    assert k0_bound(*args) == decimal_k0(*args)


def test_k0_monotone_in_p0():
    vals = [k0_bound(6, 2, 20, p) for p in (0.1, 0.5, 0.9, 0.99, 0.999999)]
    assert vals == sorted(vals) and len(set(vals)) == len(vals)


def test_k0_grows_with_y_init():
    assert k0_bound(6, 2, 40, 0.9) > k0_bound(6, 2, 20, 0.9)


def test_k0_large_n_finite():
    k = k0_bound(200, 20, 5000, 0.9)
    assert k > 10**200


@pytest.mark.parametrize("p0", [0.0, 1.0, -0.2, 1.5])
def test_k0_rejects_p0(p0):
    with pytest.raises(ValueError, match="p0"):
        k0_bound(4, 2, 5, p0)


def test_k0_window_scales_exponent():
    assert k0_bound(5, 2, 10, 0.9, window_l=3) > k0_bound(5, 2, 10, 0.9)


def test_walk_bound():
    assert dynamic_walk_bound(2, 1, 1) == Fraction(1, 2)
    assert dynamic_walk_bound(4, 2, 1) == Fraction(1, 27)
    assert dynamic_walk_bound(4, 2, 3) < dynamic_walk_bound(4, 2, 2) < dynamic_walk_bound(4, 2, 1)
    assert dynamic_walk_bound(4, 2, p_theta_min=0.5) == Fraction(1, 6) ** 3
    with pytest.raises(ValueError):
        dynamic_walk_bound(4, 2, 0)
