"""Linear algebra over F_2 and the two-bidder hard instance built from it.

Item j (0-based) is the nonzero k-bit vector j+1; vectors are plain ints.
Cover set S_i contains the items whose vector has odd dot product with i.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import combinations, product
from math import lcm
from typing import Optional, Sequence

import numpy as np

from .config import Config
from .core import BidProfile, Instance, TieBreak, clear_items
from .errors import PreconditionViolated, SizeGuardExceeded, ValuationKindError
from .rationals import ZERO
from .valuations import DemandMode, DemandResult, Valuation

logger = logging.getLogger(__name__)

# obere Schranke für max v2, mit der die Zertifikate rechnen
V2_MAX_BOUND = 4


def dot(a: int, b: int) -> int:
    return bin(a & b).count("1") & 1


def gaussian_binomial(k: int, d: int) -> int:
    """Number of d-dimensional subspaces of F_2^k."""
    if d < 0 or d > k:
        return 0
    num, den = 1, 1
    for r in range(d):
        num *= (1 << (k - r)) - 1
        den *= (1 << (r + 1)) - 1
    return num // den


def span(basis: Sequence[int]) -> list[int]:
    vectors = [0]
    for b in basis:
        vectors += [v ^ b for v in vectors]
    return vectors[1:]


def vectors_to_mask(vectors) -> int:
    mask = 0
    for v in vectors:
        mask |= 1 << (v - 1)
    return mask


@lru_cache(maxsize=None)
def cover_sets(k: int) -> tuple[int, ...]:
    """Item masks of S_1..S_m (index i-1 holds S_i)."""
    if not 1 <= k <= Config.COVER_SETS_K_LIMIT:
        raise SizeGuardExceeded("cover sets", k, Config.COVER_SETS_K_LIMIT)
    m = (1 << k) - 1
    return tuple(vectors_to_mask(j for j in range(1, m + 1) if dot(i, j)) for i in range(1, m + 1))


def cover_union(k: int, indices: Sequence[int]) -> int:
    sets = cover_sets(k)
    mask = 0
    for i in indices:
        mask |= sets[i - 1]
    return mask


@lru_cache(maxsize=None)
def _min_cover_table(k: int) -> tuple[int, ...]:
    m = (1 << k) - 1
    if m > Config.EXACT_COVER_ITEM_LIMIT:
        raise SizeGuardExceeded("exact set cover", m, Config.EXACT_COVER_ITEM_LIMIT)
    sets = cover_sets(k)
    containing = [[s for s in sets if s >> j & 1] for j in range(m)]
    table = [0] * (1 << m)
    for mask in range(1, 1 << m):
        # irgendeine Menge muss das niedrigste Item abdecken
        j = (mask & -mask).bit_length() - 1
        table[mask] = 1 + min(table[mask & ~s] for s in containing[j])
    return tuple(table)


def greedy_cover(k: int, target: int) -> list[int]:
    sets = cover_sets(k)
    chosen = []
    left = target
    while left:
        i = max(range(len(sets)), key=lambda x: (bin(sets[x] & left).count("1"), -x))
        chosen.append(i + 1)
        left &= ~sets[i]
    return chosen


@dataclass(frozen=True)
class CoverValue:
    value: int
    exact: bool


def v1_value(k: int, target: int) -> CoverValue:
    """Minimum number of cover sets for `target`; greedy upper bound beyond the exact range."""
    m = (1 << k) - 1
    if target >> m:
        raise PreconditionViolated("target contains items outside M")
    if m <= Config.EXACT_COVER_ITEM_LIMIT:
        return CoverValue(_min_cover_table(k)[target], True)
    return CoverValue(len(greedy_cover(k, target)), False)


@dataclass(frozen=True)
class Subspace:
    basis: tuple[int, ...]
    vectors: tuple[int, ...]
    mask: int

    @property
    def items(self) -> tuple[int, ...]:
        return tuple(v - 1 for v in self.vectors)

    @property
    def size(self) -> int:
        return len(self.vectors)


def _rref_bases(k: int, d: int):
    for pivots in combinations(range(k - 1, -1, -1), d):
        pivot_set = set(pivots)
        free = [[p for p in range(c) if p not in pivot_set] for c in pivots]
        for bits in product(*[product((0, 1), repeat=len(f)) for f in free]):
            basis = []
            for c, positions, chosen in zip(pivots, free, bits):
                row = 1 << c
                for p, bit in zip(positions, chosen):
                    if bit:
                        row |= 1 << p
                basis.append(row)
            yield tuple(basis)


@lru_cache(maxsize=None)
def enumerate_subspaces(k: int, d: int) -> tuple[Subspace, ...]:
    """All d-dimensional subspaces (zero vector dropped), sorted by item mask."""
    if k > Config.SUBSPACE_K_LIMIT:
        raise SizeGuardExceeded("subspace enumeration", k, Config.SUBSPACE_K_LIMIT)
    if not 1 <= d <= k:
        raise PreconditionViolated(f"subspace dimension {d} outside 1..{k}")
    out = []
    for basis in _rref_bases(k, d):
        vectors = tuple(sorted(span(basis)))
        out.append(Subspace(basis, vectors, vectors_to_mask(vectors)))
    out.sort(key=lambda s: s.mask)
    logger.debug("enumerated %d subspaces of dimension %d in F_2^%d", len(out), d, k)
    return tuple(out)


@lru_cache(maxsize=None)
def _subspace_index(k: int, d: int) -> np.ndarray:
    return np.array([s.items for s in enumerate_subspaces(k, d)], dtype=np.int64)


def subspace_incidence(k: int, d: int) -> np.ndarray:
    """Number of d-dimensional subspaces through each nonzero vector, indexed by item."""
    return np.bincount(_subspace_index(k, d).ravel(), minlength=(1 << k) - 1)


def _invert(rows: Sequence[int], k: int) -> list[int]:
    """Inverse of the k x k matrix whose row r is the bit vector rows[r]."""
    work = [row | (1 << (k + r)) for r, row in enumerate(rows)]
    for col in range(k):
        pivot = next(r for r in range(col, k) if work[r] >> col & 1)
        work[col], work[pivot] = work[pivot], work[col]
        for r in range(k):
            if r != col and work[r] >> col & 1:
                work[r] ^= work[col]
    return [row >> k for row in work]


def basis_cover(k: int, subspace: Subspace) -> list[int]:
    """Cover-set indices whose union contains every item outside the subspace.

    Extends the subspace basis to a basis x_1..x_k of F_2^k and returns the
    rows d+1..k of the inverse basis matrix.
    """
    basis = list(subspace.basis)
    reduced = {}
    for b in basis:
        v = b
        for lead, r in sorted(reduced.items(), reverse=True):
            if v >> lead & 1:
                v ^= r
        reduced[v.bit_length() - 1] = v
    for e in range(k):
        v = 1 << e
        for lead, r in sorted(reduced.items(), reverse=True):
            if v >> lead & 1:
                v ^= r
        if v:
            basis.append(1 << e)
            reduced[v.bit_length() - 1] = v
    inverse = _invert(basis, k)
    d = len(subspace.basis)
    # Spalte l der Inversen ist der duale Vektor zu x_l
    return [sum(1 << c for c in range(k) if inverse[c] >> l & 1) for l in range(d, k)]


class SetCoverValuation(Valuation):
    """v1: minimum number of cover sets needed for S."""

    kind = "set_cover"

    def __init__(self, k: int):
        self.k = k

    @property
    def m(self) -> int:
        return (1 << self.k) - 1

    def __eq__(self, other):
        return isinstance(other, SetCoverValuation) and other.k == self.k

    def __hash__(self):
        return hash((self.kind, self.k))

    def value(self, s: int) -> Fraction:
        if self.m <= Config.EXACT_COVER_ITEM_LIMIT:
            return Fraction(_min_cover_table(self.k)[s])
        if s == (1 << self.m) - 1:
            return Fraction(self.k)
        raise SizeGuardExceeded("exact set cover", self.m, Config.EXACT_COVER_ITEM_LIMIT)

    @cached_property
    def table(self) -> list[Fraction]:
        return [Fraction(x) for x in _min_cover_table(self.k)]

    def to_dict(self):
        return {"kind": self.kind, "k": self.k}


class SubspaceValuation(Valuation):
    """v2 = rho * max_D w_D with w_D(T) = 0, |D|/2 or |D| (disjoint, partial, full)."""

    kind = "subspace"

    def __init__(self, k: int):
        self.k = k
        self.d = k - (k.bit_length() - 1)
        self.rho = Fraction(4 * k, (1 << k) - 1)
        self.size = (1 << self.d) - 1

    @property
    def m(self) -> int:
        return (1 << self.k) - 1

    def __eq__(self, other):
        return isinstance(other, SubspaceValuation) and other.k == self.k

    def __hash__(self):
        return hash((self.kind, self.k))

    @cached_property
    def _subspace_masks(self) -> tuple[int, ...]:
        return tuple(s.mask for s in enumerate_subspaces(self.k, self.d))

    def contains_subspace(self, s: int) -> bool:
        if bin(s).count("1") < self.size:
            return False
        return any(s & mask == mask for mask in self._subspace_masks)

    def value(self, s: int) -> Fraction:
        if s == 0:
            return ZERO
        if self.contains_subspace(s):
            return self.rho * self.size
        # jede nichtleere Menge schneidet ein D, der Schnitt ist dann echt
        return self.rho * self.size / 2

    @property
    def max_value(self) -> Fraction:
        return self.rho * self.size

    def structured_demand(self, prices, mode):
        return _structured_v2_demand(self, prices)

    def to_dict(self):
        return {"kind": self.kind, "k": self.k}


@dataclass(frozen=True)
class HardInstance:
    k: int

    @property
    def m(self) -> int:
        return (1 << self.k) - 1

    @property
    def d(self) -> int:
        return self.k - (self.k.bit_length() - 1)

    @property
    def rho(self) -> Fraction:
        return Fraction(4 * self.k, self.m)

    @property
    def subspace_size(self) -> int:
        return (1 << self.d) - 1

    @property
    def max_v2(self) -> Fraction:
        return self.rho * self.subspace_size

    @property
    def proof_bound(self) -> Fraction:
        """SW bound right after a player-2 update: k - d + rho 2^d."""
        return self.k - self.d + self.rho * (1 << self.d)

    @cached_property
    def covers(self) -> tuple[int, ...]:
        return cover_sets(self.k)

    @cached_property
    def subspaces(self) -> tuple[Subspace, ...]:
        return enumerate_subspaces(self.k, self.d)

    @cached_property
    def v1(self) -> SetCoverValuation:
        return SetCoverValuation(self.k)

    @cached_property
    def v2(self) -> SubspaceValuation:
        return SubspaceValuation(self.k)

    def instance(self) -> Instance:
        return Instance((self.v1, self.v2), self.m)

    def to_dict(self) -> dict:
        return {"kind": "hard_instance", "k": self.k}


def build_hard_instance(k: int) -> HardInstance:
    if k < 2 or k & (k - 1):
        raise ValuationKindError(f"hard instance needs k a power of two, got {k}")
    if k > Config.COVER_SETS_K_LIMIT:
        raise SizeGuardExceeded("hard instance", k, Config.COVER_SETS_K_LIMIT)
    return HardInstance(k)


def _scaled_sums(k: int, d: int, prices: Sequence[Fraction]):
    """Exact price sums of every subspace as integers over a common denominator."""
    scale = lcm(*(Fraction(p).denominator for p in prices))
    ints = [Fraction(p).numerator * (scale // Fraction(p).denominator) for p in prices]
    index = _subspace_index(k, d)
    if max(ints, default=0) * index.shape[1] < 2 ** 62:
        return index, np.asarray(ints, dtype=np.int64)[index].sum(axis=1).tolist(), scale
    return index, [sum(ints[j] for j in row) for row in index.tolist()], scale


def cheap_subspace(hard: HardInstance, row: Sequence[Fraction]) -> Optional[Subspace]:
    """First subspace in canonical order whose bid sum is below rho |D| / 2."""
    _, sums, scale = _scaled_sums(hard.k, hard.d, row)
    # sum/scale < 2 k |D| / m  <=>  sum * m < 2 k |D| scale
    threshold = 2 * hard.k * hard.subspace_size * scale
    for pos, total in enumerate(sums):
        if total * hard.m < threshold:
            return hard.subspaces[pos]
    return None


def _structured_v2_demand(v2: SubspaceValuation, prices: Sequence[Fraction]) -> DemandResult:
    # Kandidaten: leere Menge, billigstes Einzel-Item, billigster Unterraum
    candidates = [(ZERO, 0)]
    cheapest = min(prices)
    single_value = v2.rho * v2.size if v2.size == 1 else v2.rho * v2.size / 2
    for j, p in enumerate(prices):
        if p == cheapest:
            candidates.append((single_value - p, 1 << j))
    _, sums, scale = _scaled_sums(v2.k, v2.d, prices)
    low = min(sums)
    subspaces = enumerate_subspaces(v2.k, v2.d)
    for pos, total in enumerate(sums):
        if total == low:
            candidates.append((v2.max_value - Fraction(low, scale), subspaces[pos].mask))
    best = max(u for u, _ in candidates)
    return DemandResult((min(mask for u, mask in candidates if u == best),), best)


def v2_demand_set(hard: HardInstance, prices: Sequence[Fraction],
                  mode: DemandMode = DemandMode.INCLUSION_MINIMAL) -> DemandResult:
    if any(p < 0 for p in prices):
        raise PreconditionViolated("demand query prices must be nonnegative")
    if DemandMode(mode) is DemandMode.ALL:
        from .valuations import demand_sets
        return demand_sets(hard.v2, prices, DemandMode.ALL)
    return _structured_v2_demand(hard.v2, prices)


def full_subspace_in(hard: HardInstance, s: int) -> Optional[Subspace]:
    return next((sub for sub in hard.subspaces if s & sub.mask == sub.mask), None)


@dataclass(frozen=True)
class DeviationCertificate:
    row: tuple[Fraction, ...]
    won_by_player2: int
    subspace: Subspace
    cover: tuple[int, ...]
    bid_sum: Fraction
    chain_bound: Fraction
    certificate_bound: Fraction
    certified: bool
    gain_bound: int
    wins_all: bool


def construct_deviation(hard: HardInstance, bids: BidProfile, tie: TieBreak) -> DeviationCertificate:
    """Player 1 outbids player 2 by 1/m on everything player 2 wins."""
    _, _, allocation = clear_items(bids, tie)
    won = allocation[1]
    subspace = full_subspace_in(hard, won)
    if subspace is None:
        raise PreconditionViolated("player 2 does not win a full subspace")
    cover = tuple(basis_cover(hard.k, subspace))
    m = hard.m

    b1, b2 = bids
    paid2 = sum((b2[j] for j in range(m) if won >> j & 1), ZERO)
    if paid2 > hard.v2.value(won):
        raise PreconditionViolated("player 2 overbids on the set he wins")
    rest = allocation[0]
    paid1 = sum((b1[j] for j in range(m) if rest >> j & 1), ZERO)
    # v1(M \ W) <= v1(M \ D') <= |cover|
    cap1 = hard.v1.value(rest) if m <= Config.EXACT_COVER_ITEM_LIMIT else Fraction(len(cover))
    if paid1 > cap1:
        raise PreconditionViolated("player 1 overbids on the set he wins")

    step = Fraction(1, m)
    row = tuple(b2[j] + step if won >> j & 1 else b1[j] for j in range(m))
    bid_sum = sum(row, ZERO)
    chain_bound = hard.v2.value(won) + 1 + len(cover)
    certificate_bound = Fraction(V2_MAX_BOUND + 1 + (hard.k - hard.d))
    _, _, after = clear_items((row, b2), tie)
    return DeviationCertificate(
        row=row,
        won_by_player2=won,
        subspace=subspace,
        cover=cover,
        bid_sum=bid_sum,
        chain_bound=chain_bound,
        certificate_bound=certificate_bound,
        certified=bid_sum <= chain_bound <= certificate_bound <= hard.k,
        gain_bound=hard.d - V2_MAX_BOUND,
        wins_all=after[0] == (1 << m) - 1,
    )
