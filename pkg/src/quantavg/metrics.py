"""Consensus targets, Lyapunov error measures and convergence-time bounds.

Everything except the bound calculators is exact integer/rational arithmetic.

Lyapunov accounting works on *unit tokens*. A mass ``(y, z)`` stands for
``z`` unit tokens whose values are the balanced split of ``y``: ``y mod z``
tokens of value ``y // z + 1`` and the rest of value ``y // z``, which is
exactly how the protocol hands out pieces. Merging at a node replaces a
multiset of tokens by its balanced split, and the balanced split minimizes
any separable convex cost, so the unit-token error can never increase from
one round to the next. Counting each mass once (regardless of ``z``) does not
have this property: splitting one large mass over two nodes can double its
contribution.

Since the protocol starts from ``m`` copies of every initial state (``m = 2``
for the non-oscillating variant), raw unit-token errors are divided by the
multiplicity ``m = sum(z) / n`` and rounded up. This puts the round-0 value at
exactly :func:`y_init` and keeps monotonicity.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import mpmath


@dataclass(frozen=True)
class ConsensusTarget:
    """Exact average ``q = S / n`` with ``S = n*L + R``, ``0 <= R < n``."""

    n: int
    S: int
    q: Fraction
    L: int
    R: int

    @property
    def floor_q(self) -> int:
        return self.L

    @property
    def ceil_q(self) -> int:
        return self.L + (1 if self.R else 0)

    def admissible(self, value: int) -> bool:
        return self.L <= value <= self.ceil_q


def consensus_target(y0: Sequence[int]) -> ConsensusTarget:
    if len(y0) == 0:
        raise ValueError("initial state list is empty")
    n = len(y0)
    S = sum(int(v) for v in y0)
    L, R = divmod(S, n)
    return ConsensusTarget(n=n, S=S, q=Fraction(S, n), L=L, R=R)


def y_init(y0: Sequence[int]) -> int:
    """Total initial state error: excess above ceil(q) plus deficit below floor(q)."""
    t = consensus_target(y0)
    hi, lo = t.ceil_q, t.floor_q
    return sum(v - hi for v in y0 if v > hi) + sum(lo - v for v in y0 if v < lo)


@dataclass(frozen=True)
class LyapunovSnapshot:
    Y1: int
    Y2: int
    raw_Y1: int
    raw_Y2: int

    @property
    def Y(self) -> int:
        return self.Y1 + self.Y2


def _unit_errors(entries: Iterable[tuple[int, int]], hi: int, lo: int) -> tuple[int, int, int]:
    """Raw (excess, deficit, token count) over the unit tokens of ``entries``."""
    e1 = e2 = tokens = 0
    for y, z in entries:
        if z <= 0:
            if z < 0 or y != 0:
                raise ValueError(f"invalid mass ({y}, {z})")
            continue
        tokens += z
        d, r = divmod(y, z)
        # r units at d + 1, z - r units at d
        if d + 1 > hi:
            e1 += r * (d + 1 - hi)
        if d > hi:
            e1 += (z - r) * (d - hi)
        if d < lo:
            e2 += (z - r) * (lo - d)
        if d + 1 < lo:
            e2 += r * (lo - d - 1)
    return e1, e2, tokens


def lyapunov(entries: Iterable[tuple[int, int]], target: ConsensusTarget,
             multiplicity: Optional[Fraction] = None) -> LyapunovSnapshot:
    """Lyapunov error of a set of masses relative to ``target``.

    ``multiplicity`` defaults to the token count divided by ``target.n``.
    """
    e1, e2, tokens = _unit_errors(entries, target.ceil_q, target.floor_q)
    if multiplicity is None:
        multiplicity = Fraction(tokens, target.n) if tokens else Fraction(1)
    m = Fraction(multiplicity)
    # ceil(e / m) = ceil(e * den / num)
    Y1 = -((-e1 * m.denominator) // m.numerator)
    Y2 = -((-e2 * m.denominator) // m.numerator)
    return LyapunovSnapshot(Y1=Y1, Y2=Y2, raw_Y1=e1, raw_Y2=e2)


def floor_token_count(entries: Iterable[tuple[int, int]], target: ConsensusTarget) -> int:
    """Number of unit tokens whose value equals floor(q)."""
    count = 0
    for y, z in entries:
        if z <= 0:
            continue
        d, r = divmod(y, z)
        if d == target.L:
            count += z - r
        elif d + 1 == target.L:
            count += r
    return count


def _check_probability(name: str, p: float) -> None:
    if not 0.0 < p < 1.0:
        raise ValueError(f"{name} must lie strictly between 0 and 1, got {p}")


def k0_bound(n: int, d_plus_max: int, y_init: int, p0: float, window_l: int = 1) -> int:
    """Rounds after which fixation holds with probability at least ``p0``.

    Evaluates

        (y_init + n) * log2(1 - 2**(log2(p0) / (y_init + n)))
                     / log2(1 - (1 + d_plus_max)**(-w)) * w,   w = window_l * (n - 1)

    and rounds up. ``window_l > 1`` gives the jointly-connected dynamic
    version, where one path step may take a whole window. The inner power
    underflows doubles for moderate ``n``, so the evaluation runs in mpmath
    with precision sized to the exponent.
    """
    _check_probability("p0", p0)
    if n < 2:
        raise ValueError("n must be >= 2")
    if d_plus_max < 1:
        raise ValueError("d_plus_max must be >= 1")
    if y_init < 0:
        raise ValueError("y_init must be >= 0")
    if window_l < 1:
        raise ValueError("window_l must be >= 1")
    w = window_l * (n - 1)
    m = y_init + n
    digits = int(w * mpmath.log10(1 + d_plus_max)) + 40
    with mpmath.workdps(digits):
        p0m = mpmath.mpf(p0)
        eps = 1 - mpmath.power(2, mpmath.log(p0m, 2) / m)
        miss = 1 - mpmath.power(1 + d_plus_max, -w)
        value = m * (mpmath.log(eps, 2) / mpmath.log(miss, 2)) * w
        return int(mpmath.ceil(value))


def dynamic_walk_bound(n: int, d_plus_max: int, l: int = 1,
                       p_theta_min: Optional[float] = None) -> Fraction:
    """Lower bound on the probability that a given token sits at a given node.

    Window-union model: ``(1 + d_plus_max) ** -(l * (n - 1))`` after ``l*(n-1)``
    rounds; ``l = 1`` is the static bound. I.i.d. model (``p_theta_min``
    given): ``(p_theta_min / (1 + d_plus_max)) ** (n - 1)`` after ``n - 1``
    rounds. Returned exactly as a fraction.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if d_plus_max < 1:
        raise ValueError("d_plus_max must be >= 1")
    if l < 1:
        raise ValueError("l must be >= 1")
    if p_theta_min is None:
        return Fraction(1, (1 + d_plus_max) ** (l * (n - 1)))
    if not 0.0 < p_theta_min <= 1.0:
        raise ValueError(f"p_theta_min must lie in (0, 1], got {p_theta_min}")
    return (Fraction(p_theta_min) / (1 + d_plus_max)) ** (n - 1)
