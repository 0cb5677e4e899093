"""Valuation families and their oracles.

Every valuation is an immutable dataclass over `m` items with `value(mask)`.
Exhaustive oracles work on the cached value table (2^m entries) and are
guarded by the limits in `Config`.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Callable, ClassVar, Optional, Sequence

import numpy as np

from .config import Config
from .errors import PreconditionViolated, SizeGuardExceeded, ValuationKindError
from .lp import maximize
from .rationals import ZERO, format_row, harmonic, items_of, parse_rational, parse_row

logger = logging.getLogger(__name__)


class DemandMode(str, Enum):
    ANY_MAX = "any_max"
    INCLUSION_MINIMAL = "inclusion_minimal"
    ALL = "all"


@dataclass(frozen=True)
class DemandResult:
    sets: tuple[int, ...]
    utility: Fraction

    @property
    def set(self) -> int:
        return self.sets[0]


@dataclass(frozen=True)
class ClassCheck:
    holds: bool
    witness: Optional[tuple] = None


@dataclass(frozen=True)
class Underapprox:
    items: tuple[int, ...]
    weights: tuple[Fraction, ...]
    optimum: Fraction
    ratio: Fraction
    repaired: bool

    @property
    def total(self) -> Fraction:
        return sum(self.weights, ZERO)

    def as_row(self, m: int) -> list[Fraction]:
        row = [ZERO] * m
        for j, a in zip(self.items, self.weights):
            row[j] = a
        return row


def _mask_sum(weights: Sequence[Fraction], mask: int) -> Fraction:
    total = ZERO
    j = 0
    while mask:
        if mask & 1:
            total += weights[j]
        mask >>= 1
        j += 1
    return total


def subset_sums(weights: Sequence[Fraction]) -> list[Fraction]:
    """Sum of `weights` over every bitmask, by extending the lowest set bit."""
    sums = [ZERO] * (1 << len(weights))
    for mask in range(1, len(sums)):
        low = mask & -mask
        sums[mask] = sums[mask ^ low] + weights[low.bit_length() - 1]
    return sums


class Valuation:
    kind: ClassVar[str] = "abstract"
    monotone_by_construction: ClassVar[bool] = True
    subadditive_by_construction: ClassVar[bool] = True
    m: int

    def value(self, s: int) -> Fraction:
        raise NotImplementedError

    @cached_property
    def table(self) -> list[Fraction]:
        if self.m > Config.EXHAUSTIVE_ITEM_LIMIT:
            raise SizeGuardExceeded(f"value table of {self.kind}", self.m, Config.EXHAUSTIVE_ITEM_LIMIT)
        return [self.value(s) for s in range(1 << self.m)]

    def supporting_clause(self, s: int) -> Optional[tuple[Fraction, ...]]:
        """Additive clause a <= v with a(S) = v(S), zero outside S; None if none exists."""
        sub = additive_support(self.value, s, self.m)
        return sub if _mask_sum(sub, s) == self.value(s) else None

    def structured_demand(self, prices: Sequence[Fraction], mode: DemandMode) -> Optional[DemandResult]:
        return None

    def scaled(self, factor: Fraction) -> "Valuation":
        raise ValuationKindError(f"{self.kind} valuations cannot be scaled")

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Additive(Valuation):
    weights: tuple[Fraction, ...]
    kind: ClassVar[str] = "additive"

    @property
    def m(self) -> int:
        return len(self.weights)

    def value(self, s: int) -> Fraction:
        return _mask_sum(self.weights, s)

    @cached_property
    def table(self) -> list[Fraction]:
        if self.m > Config.EXHAUSTIVE_ITEM_LIMIT:
            raise SizeGuardExceeded("value table of additive", self.m, Config.EXHAUSTIVE_ITEM_LIMIT)
        return subset_sums(self.weights)

    def supporting_clause(self, s: int):
        return tuple(w if s >> j & 1 else ZERO for j, w in enumerate(self.weights))

    def scaled(self, factor):
        return Additive(tuple(w * factor for w in self.weights))

    def to_dict(self):
        return {"kind": self.kind, "weights": format_row(self.weights)}


@dataclass(frozen=True)
class UnitDemand(Valuation):
    weights: tuple[Fraction, ...]
    kind: ClassVar[str] = "unit_demand"

    @property
    def m(self) -> int:
        return len(self.weights)

    def value(self, s: int) -> Fraction:
        return max((self.weights[j] for j in items_of(s)), default=ZERO)

    def supporting_clause(self, s: int):
        clause = [ZERO] * self.m
        if s:
            best = max(items_of(s), key=lambda j: (self.weights[j], -j))
            clause[best] = self.weights[best]
        return tuple(clause)

    def scaled(self, factor):
        return UnitDemand(tuple(w * factor for w in self.weights))

    def to_dict(self):
        return {"kind": self.kind, "weights": format_row(self.weights)}


@dataclass(frozen=True)
class XOS(Valuation):
    clauses: tuple[tuple[Fraction, ...], ...]
    kind: ClassVar[str] = "xos"

    def __post_init__(self):
        if not self.clauses:
            raise ValuationKindError("an XOS valuation needs at least one clause")
        width = len(self.clauses[0])
        for clause in self.clauses:
            if len(clause) != width:
                raise ValuationKindError("XOS clauses must all cover the same items")
            if any(w < 0 for w in clause):
                raise ValuationKindError("XOS clause weights must be nonnegative")

    @property
    def m(self) -> int:
        return len(self.clauses[0])

    def value(self, s: int) -> Fraction:
        return max(_mask_sum(clause, s) for clause in self.clauses)

    @cached_property
    def table(self) -> list[Fraction]:
        if self.m > Config.EXHAUSTIVE_ITEM_LIMIT:
            raise SizeGuardExceeded("value table of xos", self.m, Config.EXHAUSTIVE_ITEM_LIMIT)
        sums = [subset_sums(clause) for clause in self.clauses]
        return [max(col) for col in zip(*sums)]

    def supporting_clause(self, s: int):
        best = max(range(len(self.clauses)), key=lambda l: (_mask_sum(self.clauses[l], s), -l))
        return tuple(w if s >> j & 1 else ZERO for j, w in enumerate(self.clauses[best]))

    def scaled(self, factor):
        return XOS(tuple(tuple(w * factor for w in clause) for clause in self.clauses))

    def to_dict(self):
        return {"kind": self.kind, "clauses": [format_row(c) for c in self.clauses]}


def _greedy_clause(value: Callable[[int], Fraction], m: int, s: int) -> tuple[Fraction, ...]:
    """Marginal contributions along ascending item order inside S (exact for submodular v)."""
    clause = [ZERO] * m
    prefix = 0
    previous = ZERO
    for j in items_of(s):
        prefix |= 1 << j
        current = value(prefix)
        clause[j] = current - previous
        previous = current
    return tuple(clause)


@dataclass(frozen=True)
class BudgetedAdditive(Valuation):
    weights: tuple[Fraction, ...]
    budget: Fraction
    kind: ClassVar[str] = "budgeted_additive"

    @property
    def m(self) -> int:
        return len(self.weights)

    def value(self, s: int) -> Fraction:
        return min(self.budget, _mask_sum(self.weights, s))

    def supporting_clause(self, s: int):
        return _greedy_clause(self.value, self.m, s)

    def scaled(self, factor):
        return BudgetedAdditive(tuple(w * factor for w in self.weights), self.budget * factor)

    def to_dict(self):
        return {"kind": self.kind, "weights": format_row(self.weights), "budget": str(self.budget)}


@dataclass(frozen=True)
class Coverage(Valuation):
    """v(S) = total weight of ground elements covered by the items of S."""

    ground: int
    covers: tuple[int, ...]
    element_weights: Optional[tuple[Fraction, ...]] = None
    kind: ClassVar[str] = "coverage"

    @property
    def m(self) -> int:
        return len(self.covers)

    def _weight(self, covered: int) -> Fraction:
        if self.element_weights is None:
            return Fraction(bin(covered).count("1"))
        return _mask_sum(self.element_weights, covered)

    def value(self, s: int) -> Fraction:
        covered = 0
        for j in items_of(s):
            covered |= self.covers[j]
        return self._weight(covered)

    def supporting_clause(self, s: int):
        return _greedy_clause(self.value, self.m, s)

    def scaled(self, factor):
        weights = self.element_weights or tuple(Fraction(1) for _ in range(self.ground))
        return Coverage(self.ground, self.covers, tuple(w * factor for w in weights))

    def to_dict(self):
        out = {"kind": self.kind, "ground": self.ground,
               "covers": [[e + 1 for e in items_of(c)] for c in self.covers]}
        if self.element_weights is not None:
            out["element_weights"] = format_row(self.element_weights)
        return out


@dataclass(frozen=True)
class ExplicitTable(Valuation):
    values: tuple[Fraction, ...]
    kind: ClassVar[str] = "explicit_table"
    monotone_by_construction: ClassVar[bool] = False
    subadditive_by_construction: ClassVar[bool] = False

    def __post_init__(self):
        size = len(self.values)
        m = size.bit_length() - 1
        if size < 2 or 1 << m != size:
            raise ValuationKindError("an explicit table needs 2^m entries")
        if m > Config.EXHAUSTIVE_ITEM_LIMIT:
            raise SizeGuardExceeded("explicit table", m, Config.EXHAUSTIVE_ITEM_LIMIT)
        if self.values[0] != 0:
            raise ValuationKindError("v(empty set) must be 0")
        if any(v < 0 for v in self.values):
            raise ValuationKindError("valuations must be nonnegative")

    @property
    def m(self) -> int:
        return len(self.values).bit_length() - 1

    def value(self, s: int) -> Fraction:
        return self.values[s]

    @cached_property
    def table(self) -> list[Fraction]:
        return list(self.values)

    def scaled(self, factor):
        return ExplicitTable(tuple(v * factor for v in self.values))

    def to_dict(self):
        return {"kind": self.kind, "values": format_row(self.values)}


@dataclass(frozen=True)
class MPH(Valuation):
    """Maximum over clauses of summed hyperedge weights contained in S."""

    m_items: int
    rank: int
    clauses: tuple[tuple[tuple[int, Fraction], ...], ...]
    kind: ClassVar[str] = "mph"
    subadditive_by_construction: ClassVar[bool] = False

    def __post_init__(self):
        for clause in self.clauses:
            for edge, weight in clause:
                if weight < 0:
                    raise ValuationKindError("hyperedge weights must be nonnegative")
                if bin(edge).count("1") > self.rank:
                    raise ValuationKindError(f"hyperedge larger than rank {self.rank}")
                if edge >> self.m_items:
                    raise ValuationKindError("hyperedge outside the item range")

    @property
    def m(self) -> int:
        return self.m_items

    def value(self, s: int) -> Fraction:
        return max((sum((w for edge, w in clause if edge & s == edge), ZERO) for clause in self.clauses),
                   default=ZERO)

    def scaled(self, factor):
        return MPH(self.m_items, self.rank,
                   tuple(tuple((e, w * factor) for e, w in clause) for clause in self.clauses))

    def to_dict(self):
        return {"kind": self.kind, "m": self.m_items, "rank": self.rank,
                "clauses": [[{"items": [j + 1 for j in items_of(e)], "weight": str(w)} for e, w in clause]
                            for clause in self.clauses]}


# --- Orakel -----------------------------------------------------------------

def value(v: Valuation, s: int) -> Fraction:
    return v.value(s)


def residual_table(v: Valuation, prices: Sequence[Fraction]) -> list[Fraction]:
    return [a - b for a, b in zip(v.table, subset_sums(prices))]


def demand_sets(v: Valuation, prices: Sequence[Fraction], mode: DemandMode = DemandMode.ANY_MAX) -> DemandResult:
    """Utility-maximizing bundles; ties go to the smallest item bitmask.

    The smallest-bitmask maximizer has no maximizing strict subset (every strict
    subset has a smaller mask), so AnyMax and InclusionMinimal agree here.
    """
    if any(p < 0 for p in prices):
        raise PreconditionViolated("demand query prices must be nonnegative")
    mode = DemandMode(mode)
    if mode is not DemandMode.ALL:
        structured = v.structured_demand(prices, mode)
        if structured is not None:
            return structured
    if v.m > Config.EXHAUSTIVE_ITEM_LIMIT:
        raise SizeGuardExceeded(f"demand query on {v.kind}", v.m, Config.EXHAUSTIVE_ITEM_LIMIT)

    utilities = residual_table(v, prices)
    best = max(utilities)
    if mode is DemandMode.ALL:
        return DemandResult(tuple(s for s, u in enumerate(utilities) if u == best), best)
    return DemandResult((utilities.index(best),), best)


def best_utility(v: Valuation, prices: Sequence[Fraction]) -> Fraction:
    return demand_sets(v, prices).utility


def xos_clause(v: Valuation, s: int) -> tuple[Fraction, ...]:
    clause = v.supporting_clause(s)
    if clause is None:
        raise ValuationKindError(f"{v.kind} valuation has no supporting additive clause on this set")
    return clause


def _submasks(mask: int):
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def check_class(v: Valuation, cls: str) -> ClassCheck:
    """Exhaustive class test; the witness is the violating pair (or set)."""
    if v.m > Config.CLASS_CHECK_ITEM_LIMIT:
        raise SizeGuardExceeded(f"class check on {v.kind}", v.m, Config.CLASS_CHECK_ITEM_LIMIT)
    table = v.table
    full = (1 << v.m) - 1

    if cls == "monotone":
        for s in range(full + 1):
            for j in range(v.m):
                if not s >> j & 1 and table[s | 1 << j] < table[s]:
                    return ClassCheck(False, (s, s | 1 << j))
        return ClassCheck(True)

    if cls == "subadditive":
        if check_class(v, "monotone").holds:
            # disjoint pairs suffice for monotone v
            for union in range(1, full + 1):
                for s in _submasks(union):
                    t = union ^ s
                    if 0 < s < t and table[union] > table[s] + table[t]:
                        return ClassCheck(False, (s, t))
            return ClassCheck(True)
        for s in range(1, full + 1):
            for t in range(s, full + 1):
                if table[s | t] > table[s] + table[t]:
                    return ClassCheck(False, (s, t))
        return ClassCheck(True)

    if cls == "xos-consistent":
        monotone = check_class(v, "monotone")
        if not monotone.holds:
            return monotone
        for s in range(1, full + 1):
            clause = v.supporting_clause(s)
            if clause is None or _mask_sum(clause, s) != table[s] or any(w < 0 for w in clause):
                return ClassCheck(False, (s,))
            for t in _submasks(s):
                if _mask_sum(clause, t) > table[t]:
                    return ClassCheck(False, (s, t))
        return ClassCheck(True)

    raise ValuationKindError(f"unknown valuation class: {cls}")


def additive_support(f: Callable[[int], Fraction], domain: int, m: int) -> tuple:
    """Largest additive a on `domain` with a(T) <= f(T) for every T within it (zero outside)."""
    items = items_of(domain)
    if not items:
        return tuple(ZERO for _ in range(m))
    values = [f(_lift(local, items)) for local in range(1 << len(items))]
    weights = _solve_underapprox(values)
    row = [ZERO] * m
    for j, a in zip(items, weights):
        row[j] = a
    return tuple(row)


def _lift(local: int, items: Sequence[int]) -> int:
    mask = 0
    for pos, j in enumerate(items):
        if local >> pos & 1:
            mask |= 1 << j
    return mask


def _solve_underapprox(values: list[Fraction]) -> tuple[Fraction, ...]:
    """Cutting-plane loop: start from the singleton constraints, add the most violated subset."""
    size = len(values).bit_length() - 1
    active = [1 << j for j in range(size)]
    ones = [Fraction(1)] * size
    while True:
        rows = [[Fraction(mask >> j & 1) for j in range(size)] for mask in active]
        solution = maximize(ones, rows, [values[mask] for mask in active])
        sums = subset_sums(solution.x)
        worst, worst_mask = ZERO, None
        for mask in range(1, len(values)):
            gap = sums[mask] - values[mask]
            if gap > worst:
                worst, worst_mask = gap, mask
        if worst_mask is None:
            return solution.x
        active.append(worst_mask)


def additive_underapprox(f: Callable[[int], Fraction], domain: int) -> Underapprox:
    """Maximize sum(a) subject to a(S) <= f(S) for all S within `domain`, then make a positive."""
    items = tuple(items_of(domain))
    if len(items) > Config.UNDERAPPROX_ITEM_LIMIT:
        raise SizeGuardExceeded("additive under-approximation", len(items), Config.UNDERAPPROX_ITEM_LIMIT)
    if not items:
        return Underapprox(items, (), ZERO, Fraction(1), False)

    values = [f(_lift(local, items)) for local in range(1 << len(items))]
    if any(x <= 0 for x in values[1:]):
        raise PreconditionViolated("under-approximation needs f(S) > 0 on every nonempty subset")

    weights = _solve_underapprox(values)
    optimum = sum(weights, ZERO)
    full_value = values[-1]
    repaired = False

    if any(a == 0 for a in weights):
        # a <- (1-delta) a + delta u, u_j = min_{S containing j} f(S) / |D|
        size = len(items)
        u = [min(values[mask] for mask in range(1, len(values)) if mask >> j & 1) / size for j in range(size)]
        delta = parse_rational(Config.POSITIVITY_BLEND)
        floor = full_value / harmonic(size)
        u_total = sum(u, ZERO)
        if optimum > u_total:
            # (1-delta) * optimum + delta * u_total >= floor
            delta = min(delta, max(optimum - floor, ZERO) / (2 * (optimum - u_total)))
        if delta > 0:
            weights = tuple((1 - delta) * a + delta * b for a, b in zip(weights, u))
            repaired = True
            logger.debug("positivity repair on %d items with delta=%s", size, delta)
        else:
            logger.warning("positivity repair skipped, the optimum %s already sits on the floor %s", optimum, floor)

    total = sum(weights, ZERO)
    return Underapprox(items, tuple(weights), optimum, total / full_value, repaired)


# --- Generatoren --------------------------------------------------------------

def _random_rational(rng: np.random.Generator, den: int) -> Fraction:
    return Fraction(int(rng.integers(0, den + 1)), den)


def generate(kind: str, params: dict, seed: int) -> Valuation:
    """Deterministic random valuation; `params` holds m plus kind-specific sizes."""
    rng = np.random.default_rng(seed)
    den = int(params.get("denominator", Config.GENERATOR_DENOMINATOR))
    if den < 1 or den > Config.GENERATOR_DENOMINATOR:
        raise ValuationKindError(f"denominator must lie in 1..{Config.GENERATOR_DENOMINATOR}")
    try:
        m = int(params["m"])
    except KeyError as exc:
        raise ValuationKindError("generator params need m") from exc
    if m < 1:
        raise ValuationKindError("m must be positive")

    if kind == "additive":
        return Additive(tuple(_random_rational(rng, den) for _ in range(m)))
    if kind == "unit_demand":
        return UnitDemand(tuple(_random_rational(rng, den) for _ in range(m)))
    if kind == "xos":
        count = int(params.get("clauses", 3))
        if count < 1:
            raise ValuationKindError("clauses must be positive")
        return XOS(tuple(tuple(_random_rational(rng, den) for _ in range(m)) for _ in range(count)))
    if kind == "budgeted_additive":
        weights = tuple(_random_rational(rng, den) for _ in range(m))
        share = Fraction(int(rng.integers(30, 91)), 100)
        return BudgetedAdditive(weights, share * sum(weights, ZERO))
    if kind == "coverage":
        ground = int(params.get("ground", 10))
        p = float(parse_rational(params.get("p", "3/10")))
        covers = []
        for _ in range(m):
            hits = rng.random(ground) < p
            covers.append(sum(1 << e for e in range(ground) if hits[e]))
        return Coverage(ground, tuple(covers))
    raise ValuationKindError(f"no generator for kind {kind!r}")


# --- Serialisierung -------------------------------------------------------------

def valuation_from_dict(data: dict) -> Valuation:
    kind = data.get("kind")
    if kind == "additive":
        return Additive(parse_row(data["weights"]))
    if kind == "unit_demand":
        return UnitDemand(parse_row(data["weights"]))
    if kind == "xos":
        return XOS(tuple(parse_row(c) for c in data["clauses"]))
    if kind == "budgeted_additive":
        return BudgetedAdditive(parse_row(data["weights"]), parse_rational(data["budget"]))
    if kind == "coverage":
        covers = tuple(sum(1 << (e - 1) for e in c) for c in data["covers"])
        weights = data.get("element_weights")
        return Coverage(int(data["ground"]), covers, parse_row(weights) if weights is not None else None)
    if kind == "explicit_table":
        return ExplicitTable(parse_row(data["values"]))
    if kind == "mph":
        clauses = tuple(tuple((sum(1 << (j - 1) for j in e["items"]), parse_rational(e["weight"])) for e in c)
                        for c in data["clauses"])
        return MPH(int(data["m"]), int(data["rank"]), clauses)
    if kind in ("set_cover", "subspace"):
        # gf2 importiert dieses Modul, daher erst hier
        from .gf2 import SetCoverValuation, SubspaceValuation
        cls = SetCoverValuation if kind == "set_cover" else SubspaceValuation
        return cls(int(data["k"]))
    raise ValuationKindError(f"unknown valuation kind: {kind!r}")
