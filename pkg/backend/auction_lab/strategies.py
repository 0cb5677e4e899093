"""Bid-update rules and the checkers for aggressiveness, safety and no-overbidding."""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import ClassVar, Optional, Sequence

from .config import Config
from .core import BidProfile, BidRow, Instance, TieBreak, allocate, opposing_maxima, replace_row, residual_utility
from .errors import DimensionMismatch, InvalidScript, SizeGuardExceeded, ValuationKindError
from .rationals import ZERO, format_row, items_of, parse_row
from .valuations import (ClassCheck, DemandMode, ExplicitTable, Valuation, additive_underapprox, best_utility,
                         check_class, demand_sets, subset_sums, xos_clause)

logger = logging.getLogger(__name__)

# Arten mit exakter additiver Stütz-Klausel
XOS_KINDS = frozenset({"additive", "unit_demand", "xos", "budgeted_additive", "coverage"})


@dataclass(frozen=True)
class UpdateReport:
    row: BidRow
    demand_set: int
    alpha: Optional[Fraction]
    strong: Optional[bool]
    weak: bool
    grand: bool
    declared_utility: Fraction
    utility: Fraction
    best_utility: Fraction

    @property
    def is_best_response(self) -> bool:
        return self.utility == self.best_utility


def measure_aggressiveness(instance: Instance, old_bids: BidProfile, new_row: Sequence[Fraction], tie: TieBreak,
                           i: int, best: Fraction = None, allocate_zero_bids: bool = True) -> Optional[Fraction]:
    """Declared utility after the update over the best utility before it; None when the latter is 0."""
    if best is None:
        best = best_utility(instance.valuations[i], opposing_maxima(old_bids, i))
    if best == 0:
        return None
    after = allocate(instance, replace_row(old_bids, i, tuple(new_row)), tie, allocate_zero_bids)
    return after.declared_utilities[i] / best


def _row_sum(row: Sequence[Fraction], mask: int) -> Fraction:
    return sum((row[j] for j in items_of(mask)), ZERO)


def check_no_overbidding(v: Valuation, row: Sequence[Fraction], mode: str = "strong", won: int = None) -> ClassCheck:
    """Strong: every set; weak: the won set; grand: all of M. The witness is the violating mask."""
    if mode == "grand":
        full = (1 << v.m) - 1
        return ClassCheck(True) if sum(row, ZERO) <= v.value(full) else ClassCheck(False, (full,))
    if mode == "weak":
        if won is None:
            raise ValuationKindError("weak no-overbidding needs the won set")
        return ClassCheck(True) if _row_sum(row, won) <= v.value(won) else ClassCheck(False, (won,))
    if mode != "strong":
        raise ValuationKindError(f"unknown no-overbidding mode: {mode}")

    support = sum(1 << j for j, b in enumerate(row) if b > 0)
    monotone = v.monotone_by_construction
    # für monotone v genügen Teilmengen des Trägers
    domain = support if monotone else (1 << v.m) - 1
    items = items_of(domain)
    if len(items) > Config.CLASS_CHECK_ITEM_LIMIT:
        raise SizeGuardExceeded("strong no-overbidding check", len(items), Config.CLASS_CHECK_ITEM_LIMIT)
    sums = subset_sums([row[j] for j in items])
    for local in range(1, len(sums)):
        s = sum(1 << j for pos, j in enumerate(items) if local >> pos & 1)
        if sums[local] > v.value(s):
            return ClassCheck(False, (s,))
    return ClassCheck(True)


@dataclass(frozen=True)
class SafetyReport:
    feasible: bool
    beta: Optional[Fraction]
    witness: Optional[tuple[int, int]] = None

    def holds(self, beta: Fraction) -> bool:
        return self.feasible and self.beta <= beta

    def to_dict(self) -> dict:
        return {"feasible": self.feasible, "beta": None if self.beta is None else str(self.beta),
                "witness": None if self.witness is None else {"t": self.witness[0], "bidder": self.witness[1] + 1}}


def check_safety(trace) -> SafetyReport:
    """Smallest beta >= 1 with declared utility <= beta * utility on every recorded profile."""
    beta, witness = Fraction(1), None
    for record in trace.records:
        for i, (ud, u) in enumerate(zip(record.declared_utilities, record.utilities)):
            if u < 0 or (u == 0 and ud > 0):
                return SafetyReport(False, None, (record.t, i))
            if u > 0 and ud / u > beta:
                beta, witness = ud / u, (record.t, i)
    return SafetyReport(True, beta, witness)


def xos_convertible(v: Valuation) -> bool:
    if v.kind in XOS_KINDS:
        return True
    return isinstance(v, ExplicitTable) and check_class(v, "xos-consistent").holds


def subadditive(v: Valuation) -> bool:
    if v.subadditive_by_construction:
        return True
    return isinstance(v, ExplicitTable) and check_class(v, "subadditive").holds


def make_report(instance: Instance, bids: BidProfile, tie: TieBreak, i: int, row: Sequence[Fraction],
                demand: int, best: Fraction, allocate_zero_bids: bool = True) -> UpdateReport:
    """Report for bidder i switching to `row` against `bids`; `best` is the best utility before."""
    v = instance.valuations[i]
    row = tuple(row)
    after = allocate(instance, replace_row(bids, i, row), tie, allocate_zero_bids)
    try:
        strong = check_no_overbidding(v, row, "strong").holds
    except SizeGuardExceeded:
        strong = None
    return UpdateReport(
        row=row,
        demand_set=demand,
        alpha=None if best == 0 else after.declared_utilities[i] / best,
        strong=strong,
        weak=check_no_overbidding(v, row, "weak", after.allocation[i]).holds,
        grand=check_no_overbidding(v, row, "grand").holds,
        declared_utility=after.declared_utilities[i],
        utility=after.utilities[i],
        best_utility=best,
    )


class Strategy:
    kind: ClassVar[str] = "abstract"

    def check_compatible(self, instance: Instance, i: int):
        pass

    def update(self, instance: Instance, bids: BidProfile, tie: TieBreak, i: int, activation: int,
               allocate_zero_bids: bool = True) -> UpdateReport:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.kind}

    def __eq__(self, other):
        return type(other) is type(self) and other.to_dict() == self.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))


class XOSUpdate(Strategy):
    """Bid the supporting clause of a demand set, zero elsewhere."""

    kind = "xos_update"

    def check_compatible(self, instance, i):
        v = instance.valuations[i]
        if not xos_convertible(v):
            raise ValuationKindError(f"bidder {i + 1} has a {v.kind} valuation, not XOS", bidder=i + 1)

    def choose(self, instance, bids, i, activation, prices) -> int:
        return demand_sets(instance.valuations[i], prices, DemandMode.INCLUSION_MINIMAL).set

    def update(self, instance, bids, tie, i, activation, allocate_zero_bids=True):
        v = instance.valuations[i]
        prices = opposing_maxima(bids, i)
        best = best_utility(v, prices)
        demand = self.choose(instance, bids, i, activation, prices)
        row = xos_clause(v, demand) if demand else tuple(ZERO for _ in range(instance.m))
        return make_report(instance, bids, tie, i, row, demand, best, allocate_zero_bids)


class PotentialProcedure(XOSUpdate):
    """XOS update whose demand set comes from a per-activation script."""

    kind = "potential_procedure"

    def __init__(self, selector: Sequence[int], cycle: bool = True):
        self.selector = tuple(selector)
        self.cycle = cycle

    def choose(self, instance, bids, i, activation, prices):
        if not self.selector or (not self.cycle and activation > len(self.selector)):
            return super().choose(instance, bids, i, activation, prices)
        chosen = self.selector[(activation - 1) % len(self.selector)]
        v = instance.valuations[i]
        if residual_utility(v, prices, chosen) != best_utility(v, prices):
            raise InvalidScript(f"scripted set of bidder {i + 1} is not a demand set at activation {activation}",
                                bidder=i + 1, activation=activation)
        return chosen

    def to_dict(self):
        return {"kind": self.kind, "selector": [[j + 1 for j in items_of(s)] for s in self.selector],
                "cycle": self.cycle}


class SubadditiveNoOverbid(Strategy):
    """Second price plus an additive under-approximation of the residual utility on a minimal demand set."""

    kind = "subadditive_no_overbid"
    aggressive = False

    def check_compatible(self, instance, i):
        v = instance.valuations[i]
        if not subadditive(v):
            raise ValuationKindError(f"bidder {i + 1} has a {v.kind} valuation, not subadditive", bidder=i + 1)

    def surplus(self, v: Valuation, prices: Sequence[Fraction], demand: int) -> list[Fraction]:
        approx = additive_underapprox(lambda s: residual_utility(v, prices, s), demand)
        row = approx.as_row(len(prices))
        if self.aggressive:
            gamma = residual_utility(v, prices, demand) / approx.total
            row = [a * gamma for a in row]
        return row

    def update(self, instance, bids, tie, i, activation, allocate_zero_bids=True):
        v = instance.valuations[i]
        prices = opposing_maxima(bids, i)
        result = demand_sets(v, prices, DemandMode.INCLUSION_MINIMAL)
        demand = result.set
        if not demand:
            row = [ZERO] * instance.m
        else:
            surplus = self.surplus(v, prices, demand)
            row = [surplus[j] + prices[j] if demand >> j & 1 else ZERO for j in range(instance.m)]
        return make_report(instance, bids, tie, i, row, demand, result.utility, allocate_zero_bids)


class SubadditiveAggressive(SubadditiveNoOverbid):
    """Like SubadditiveNoOverbid, with the surplus scaled up to the full residual utility."""

    kind = "subadditive_aggressive"
    aggressive = True


class Scripted(Strategy):
    """Fixed bid rows per activation; past the end of the script the current row is kept."""

    kind = "scripted"

    def __init__(self, rows: Sequence[Sequence[Fraction]], cycle: bool = False):
        self.rows = tuple(tuple(r) for r in rows)
        self.cycle = cycle

    def check_compatible(self, instance, i):
        for a, row in enumerate(self.rows, start=1):
            if len(row) != instance.m:
                raise DimensionMismatch(f"scripted row {a} of bidder {i + 1} has {len(row)} entries",
                                        bidder=i + 1, activation=a)
            if any(b < 0 for b in row):
                raise DimensionMismatch(f"scripted row {a} of bidder {i + 1} has a negative bid",
                                        bidder=i + 1, activation=a)

    def row_for(self, current: BidRow, activation: int) -> BidRow:
        if not self.rows:
            return current
        if self.cycle:
            return self.rows[(activation - 1) % len(self.rows)]
        return self.rows[activation - 1] if activation <= len(self.rows) else current

    def update(self, instance, bids, tie, i, activation, allocate_zero_bids=True):
        v = instance.valuations[i]
        prices = opposing_maxima(bids, i)
        best = best_utility(v, prices)
        row = self.row_for(bids[i], activation)
        demand = sum(1 << j for j, b in enumerate(row) if b > 0)
        return make_report(instance, bids, tie, i, row, demand, best, allocate_zero_bids)

    def to_dict(self):
        return {"kind": self.kind, "rows": [format_row(r) for r in self.rows], "cycle": self.cycle}


class Hold(Scripted):
    """Never changes the bid."""

    kind = "hold"

    def __init__(self):
        super().__init__(())

    def to_dict(self):
        return {"kind": self.kind}


STRATEGIES = {
    cls.kind: cls for cls in (XOSUpdate, PotentialProcedure, SubadditiveNoOverbid, SubadditiveAggressive,
                              Scripted, Hold)
}


def strategy_from_dict(data: dict) -> Strategy:
    """Scenario form; selector sets use 1-based item labels."""
    kind = data.get("kind")
    if kind not in STRATEGIES:
        raise ValuationKindError(f"unknown strategy kind: {kind!r}")
    if kind == "potential_procedure":
        selector = [sum(1 << (j - 1) for j in items) for items in data.get("selector", [])]
        return PotentialProcedure(selector, bool(data.get("cycle", True)))
    if kind == "scripted":
        return Scripted([parse_row(r) for r in data.get("rows", [])], bool(data.get("cycle", False)))
    return STRATEGIES[kind]()
