# tests/test_valuations.py
from fractions import Fraction

import pytest

from auction_lab.errors import PreconditionViolated, SizeGuardExceeded, ValuationKindError
from auction_lab.gf2 import build_hard_instance
from auction_lab.rationals import harmonic, items_of, parse_rational
from auction_lab.valuations import (MPH, XOS, Additive, BudgetedAdditive, Coverage, DemandMode, ExplicitTable,
                                    UnitDemand, additive_underapprox, check_class, demand_sets, generate,
                                    subset_sums, valuation_from_dict, xos_clause)

F = Fraction


def test_rationals_reject_floats():
    assert parse_rational("3/6") == F(1, 2)
    assert parse_rational(4) == 4
    with pytest.raises(ValueError):
        parse_rational(0.5)
    with pytest.raises(ValueError):
        parse_rational("0.5")
    assert harmonic(3) == F(11, 6)


def test_values_of_basic_kinds():
    assert Additive((F(1), F(2), F(3))).value(0b101) == 4
    assert UnitDemand((F(1), F(2), F(3))).value(0b011) == 2
    assert XOS(((F(1), F(0)), (F(0), F(3)))).value(0b11) == 3
    assert BudgetedAdditive((F(2), F(2)), F(3)).value(0b11) == 3
    # Item 1 deckt {1,2}, Item 2 deckt {2,3}
    cov = Coverage(3, (0b011, 0b110))
    assert cov.value(0b11) == 3
    assert cov.value(0b01) == 2
    mph = MPH(3, 2, (((0b011, F(2)), (0b100, F(1))),))
    assert mph.value(0b111) == 3
    assert mph.value(0b101) == 1


def test_subset_sums():
    assert subset_sums([F(1), F(2)]) == [0, 1, 2, 3]


# Die stützende Klausel einer XOS-Bewertung
def test_supporting_clause_xos():
    v = XOS(((F(1), F(1), F(0)), (F(0), F(2), F(2))))
    assert v.supporting_clause(0b010) == (0, 2, 0)
    assert v.supporting_clause(0b001) == (1, 0, 0)
    assert xos_clause(v, 0b110) == (0, 2, 2)
    assert check_class(v, "xos-consistent").holds
    # superadditive Tabelle: keine Klausel erreicht v({1,2}) = 3
    with pytest.raises(ValuationKindError):
        xos_clause(ExplicitTable((F(0), F(1), F(1), F(3))), 0b11)


# Budget-additiv und Coverage sind submodular, also XOS-konsistent
def test_submodular_kinds_are_xos_consistent():
    assert check_class(BudgetedAdditive((F(2), F(1), F(3)), F(4)), "xos-consistent").holds
    assert check_class(Coverage(4, (0b0011, 0b0110, 0b1100)), "xos-consistent").holds


def test_check_class_finds_witnesses():
    # v({1,2}) = 3 > v({1}) + v({2}) = 2
    supermodular = ExplicitTable((F(0), F(1), F(1), F(3)))
    verdict = check_class(supermodular, "subadditive")
    assert not verdict.holds
    assert verdict.witness == (1, 2)
    assert not check_class(supermodular, "xos-consistent").holds

    shrinking = ExplicitTable((F(0), F(2), F(1), F(1)))
    assert not check_class(shrinking, "monotone").holds
    with pytest.raises(ValuationKindError):
        check_class(shrinking, "concave")


def test_explicit_table_validation():
    with pytest.raises(ValuationKindError):
        ExplicitTable((F(0), F(1), F(1)))
    with pytest.raises(ValuationKindError):
        ExplicitTable((F(1), F(1)))


# Nachfrage: bei Gleichstand gewinnt die kleinste Bitmaske
def test_demand_sets_tie_break():
    v = UnitDemand((F(2), F(2), F(1)))
    result = demand_sets(v, (F(1), F(1), F(0)))
    assert result.utility == 1
    assert result.set == 0b001
    every = demand_sets(v, (F(1), F(1), F(0)), DemandMode.ALL)
    assert set(every.sets) == {0b001, 0b010, 0b100, 0b101, 0b110}


def test_demand_minimal_is_empty_when_nothing_pays():
    v = Additive((F(1), F(1)))
    result = demand_sets(v, (F(2), F(1)), DemandMode.INCLUSION_MINIMAL)
    assert result.utility == 0
    assert result.set == 0


def test_demand_rejects_negative_prices():
    with pytest.raises(PreconditionViolated):
        demand_sets(Additive((F(1),)), (F(-1),))


# Budget-additiv (1,1,1), B=2: jedes Paar ist optimal, {1,2} hat die kleinste Maske
def test_demand_minimal_budgeted_pair():
    v = BudgetedAdditive((F(1), F(1), F(1)), F(2))
    result = demand_sets(v, (F(0),) * 3, DemandMode.INCLUSION_MINIMAL)
    assert result.sets == (0b011,)
    assert result.utility == 2


# Kein echtes Teilbündel der minimalen Nachfrage erreicht denselben Nutzen
def test_demand_minimal_has_no_optimal_subset():
    kinds = ("xos", "budgeted_additive", "coverage", "unit_demand")
    for seed in range(12):
        v = generate(kinds[seed % 4], {"m": 4, "denominator": 4}, seed)
        prices = generate("additive", {"m": 4, "denominator": 8}, seed + 100).weights
        minimal = demand_sets(v, prices, DemandMode.INCLUSION_MINIMAL)
        every = demand_sets(v, prices, DemandMode.ALL)
        assert minimal.utility == every.utility
        for s in minimal.sets:
            assert s in every.sets
            assert not any(sub in every.sets for sub in range(s) if sub & s == sub)


# Additive Unterapproximation einer additiven Funktion ist exakt
def test_underapprox_of_additive_is_exact():
    weights = (F(1), F(2), F(3))
    approx = additive_underapprox(Additive(weights).value, 0b111)
    assert approx.weights == weights
    assert approx.ratio == 1
    assert not approx.repaired


# Nullgewichte werden positiv gemacht, die Schranke a(T) <= f(T) bleibt
def test_underapprox_positivity_repair():
    f = UnitDemand((F(1), F(1), F(1))).value
    approx = additive_underapprox(f, 0b111)
    assert all(a > 0 for a in approx.weights)
    row = approx.as_row(3)
    for mask in range(1, 8):
        assert sum(row[j] for j in items_of(mask)) <= f(mask)
    assert approx.total >= f(0b111) / harmonic(3)


def test_underapprox_needs_positive_values():
    with pytest.raises(PreconditionViolated):
        additive_underapprox(Additive((F(0), F(1))).value, 0b11)


# Liegt das Optimum genau auf f(D)/H, bleibt die Summe nach der Reparatur dort
def test_underapprox_repair_keeps_floor(monkeypatch):
    f = UnitDemand((F(3), F(1), F(1))).value
    monkeypatch.setattr("auction_lab.valuations._solve_underapprox", lambda values: (F(3), F(0), F(0)))
    approx = additive_underapprox(f, 0b111)
    assert approx.repaired
    assert all(a > 0 for a in approx.weights)
    assert approx.total >= f(0b111) / harmonic(3)

    monkeypatch.setattr("auction_lab.valuations.harmonic", lambda size: F(1))
    approx = additive_underapprox(f, 0b111)
    assert approx.total == f(0b111)
    assert not approx.repaired


def test_underapprox_of_set_cover_k2():
    v1 = build_hard_instance(2).v1
    approx = additive_underapprox(v1.value, 0b111)
    assert approx.weights == (F(1, 2),) * 3
    assert approx.ratio == F(3, 4)
    assert not approx.repaired


def test_underapprox_size_guard(monkeypatch):
    from auction_lab.config import Config
    monkeypatch.setattr(Config, "UNDERAPPROX_ITEM_LIMIT", 2)
    with pytest.raises(SizeGuardExceeded):
        additive_underapprox(Additive((F(1),) * 3).value, 0b111)


# Generatoren sind deterministisch pro Seed
def test_generators_are_deterministic():
    for kind in ("additive", "unit_demand", "xos", "budgeted_additive", "coverage"):
        first = generate(kind, {"m": 4}, 7)
        assert first == generate(kind, {"m": 4}, 7)
        assert first.m == 4
        assert first.kind == kind
    with pytest.raises(ValuationKindError):
        generate("mph", {"m": 4}, 0)


def test_valuation_dict_form():
    v = valuation_from_dict({"kind": "coverage", "ground": 3, "covers": [[1, 2], [2, 3]]})
    assert v == Coverage(3, (0b011, 0b110))
    assert valuation_from_dict(v.to_dict()) == v
    with pytest.raises(ValuationKindError):
        valuation_from_dict({"kind": "gross_substitutes"})
