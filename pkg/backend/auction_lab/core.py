"""Simultaneous second-price mechanism in exact rational arithmetic.

Bidders and items are 0-based; sets of items are int bitmasks (bit j = item j).
A bid profile is an n-tuple of m-tuples of Fractions.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .errors import DimensionMismatch
from .rationals import ZERO

BidRow = tuple[Fraction, ...]
BidProfile = tuple[BidRow, ...]


@dataclass(frozen=True)
class Instance:
    valuations: tuple
    m: int

    def __post_init__(self):
        if not self.valuations:
            raise DimensionMismatch("an instance needs at least one bidder")
        if self.m < 1:
            raise DimensionMismatch("an instance needs at least one item")
        for i, v in enumerate(self.valuations):
            if v.m != self.m:
                raise DimensionMismatch(f"valuation of bidder {i} is over {v.m} items, instance has {self.m}",
                                        bidder=i)

    @property
    def n(self) -> int:
        return len(self.valuations)

    @property
    def full_mask(self) -> int:
        return (1 << self.m) - 1

    def scaled(self, factor: Fraction) -> "Instance":
        return Instance(tuple(v.scaled(factor) for v in self.valuations), self.m)

    def to_dict(self) -> dict:
        return {"m": self.m, "valuations": [v.to_dict() for v in self.valuations]}


@dataclass(frozen=True)
class TieBreak:
    """Per-item priority order, most preferred bidder first."""

    orders: tuple[tuple[int, ...], ...]
    _rank: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ranks = []
        for j, order in enumerate(self.orders):
            if sorted(order) != list(range(len(order))):
                raise DimensionMismatch(f"tie-break order of item {j} is not a permutation", item=j)
            ranks.append({bidder: pos for pos, bidder in enumerate(order)})
        object.__setattr__(self, "_rank", tuple(ranks))

    @classmethod
    def ascending(cls, n: int, m: int) -> "TieBreak":
        return cls(tuple(tuple(range(n)) for _ in range(m)))

    @classmethod
    def descending(cls, n: int, m: int) -> "TieBreak":
        return cls(tuple(tuple(reversed(range(n))) for _ in range(m)))

    def rank(self, j: int, bidder: int) -> int:
        return self._rank[j][bidder]

    def check(self, n: int, m: int):
        if len(self.orders) != m or any(len(o) != n for o in self.orders):
            raise DimensionMismatch(f"tie-break is not {n} bidders x {m} items")

    def to_lists(self) -> list[list[int]]:
        """1-based bidder labels, as in scenario and trace files."""
        return [[i + 1 for i in o] for o in self.orders]


@dataclass(frozen=True)
class Outcome:
    winners: tuple[Optional[int], ...]
    prices: tuple[Fraction, ...]
    allocation: tuple[int, ...]
    utilities: tuple[Fraction, ...]
    declared_utilities: tuple[Fraction, ...]
    sw: Fraction
    dw: Fraction


def zero_profile(n: int, m: int) -> BidProfile:
    return tuple(tuple(ZERO for _ in range(m)) for _ in range(n))


def as_profile(rows: Sequence[Sequence]) -> BidProfile:
    return tuple(tuple(Fraction(x) for x in row) for row in rows)


def replace_row(bids: BidProfile, i: int, row: BidRow) -> BidProfile:
    return bids[:i] + (tuple(row),) + bids[i + 1:]


def check_profile(instance: Instance, bids: BidProfile):
    if len(bids) != instance.n:
        raise DimensionMismatch(f"bid profile has {len(bids)} rows, instance has {instance.n} bidders")
    for i, row in enumerate(bids):
        if len(row) != instance.m:
            raise DimensionMismatch(f"bid row {i} has {len(row)} entries, instance has {instance.m} items",
                                    bidder=i)
        for j, b in enumerate(row):
            if b < 0:
                raise DimensionMismatch(f"negative bid {b} of bidder {i} on item {j}", bidder=i, item=j)


def opposing_maxima(bids: BidProfile, i: int) -> tuple[Fraction, ...]:
    """Per item, the highest bid among bidders other than i (0 for a single bidder)."""
    m = len(bids[0])
    return tuple(max((row[j] for k, row in enumerate(bids) if k != i), default=ZERO) for j in range(m))


def clear_items(bids: BidProfile, tie: TieBreak, allocate_zero_bids: bool = True) -> tuple[tuple, tuple, tuple]:
    """Winners, prices and per-bidder won masks; needs no valuations."""
    n, m = len(bids), len(bids[0])
    winners: list[Optional[int]] = []
    prices: list[Fraction] = []
    for j in range(m):
        column = [bids[i][j] for i in range(n)]
        top = max(column)
        if top == 0 and not allocate_zero_bids:
            winners.append(None)
            prices.append(ZERO)
            continue
        winner = min((i for i in range(n) if column[i] == top), key=lambda i: tie.rank(j, i))
        winners.append(winner)
        prices.append(max((column[k] for k in range(n) if k != winner), default=ZERO))

    allocation = [0] * n
    for j, w in enumerate(winners):
        if w is not None:
            allocation[w] |= 1 << j
    return tuple(winners), tuple(prices), tuple(allocation)


def allocate(instance: Instance, bids: BidProfile, tie: TieBreak, allocate_zero_bids: bool = True) -> Outcome:
    check_profile(instance, bids)
    tie.check(instance.n, instance.m)
    n, m = instance.n, instance.m
    winners, prices, allocation = clear_items(bids, tie, allocate_zero_bids)

    utilities, declared = [], []
    sw = ZERO
    for i in range(n):
        won = [j for j in range(m) if winners[j] == i]
        value = instance.valuations[i].value(allocation[i])
        paid = sum((prices[j] for j in won), ZERO)
        sw += value
        utilities.append(value - paid)
        declared.append(sum((bids[i][j] - prices[j] for j in won), ZERO))

    return Outcome(
        winners=tuple(winners),
        prices=tuple(prices),
        allocation=tuple(allocation),
        utilities=tuple(utilities),
        declared_utilities=tuple(declared),
        sw=sw,
        dw=declared_welfare(bids),
    )


def declared_welfare(bids: BidProfile) -> Fraction:
    if not bids:
        return ZERO
    m = len(bids[0])
    return sum((max(row[j] for row in bids) for j in range(m)), ZERO)


def social_welfare(instance: Instance, outcome: Outcome) -> Fraction:
    return sum((v.value(s) for v, s in zip(instance.valuations, outcome.allocation)), ZERO)


def declared_utility(instance: Instance, bids: BidProfile, tie: TieBreak, i: int,
                     allocate_zero_bids: bool = True) -> Fraction:
    return allocate(instance, bids, tie, allocate_zero_bids).declared_utilities[i]


def utility(instance: Instance, bids: BidProfile, tie: TieBreak, i: int,
            allocate_zero_bids: bool = True) -> Fraction:
    return allocate(instance, bids, tie, allocate_zero_bids).utilities[i]


def residual_utility(valuation, prices: Sequence[Fraction], s: int) -> Fraction:
    """v(S) minus the summed prices of S; `prices` are the opposing maxima."""
    paid = ZERO
    j = 0
    mask = s
    while mask:
        if mask & 1:
            paid += prices[j]
        mask >>= 1
        j += 1
    return valuation.value(s) - paid
