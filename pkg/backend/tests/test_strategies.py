# tests/test_strategies.py
from fractions import Fraction

import pytest

from auction_lab.core import Instance, TieBreak
from auction_lab.dynamics import RunConfig, run
from auction_lab.errors import InvalidScript, ValuationKindError
from auction_lab.gf2 import build_hard_instance
from auction_lab.rationals import harmonic
from auction_lab.strategies import (Hold, PotentialProcedure, Scripted, SubadditiveAggressive, SubadditiveNoOverbid,
                                    XOSUpdate, check_no_overbidding, check_safety, measure_aggressiveness,
                                    strategy_from_dict)
from auction_lab.valuations import MPH, XOS, Additive, BudgetedAdditive, ExplicitTable
from tests.conftest import make_bids

F = Fraction


@pytest.fixture
def xos_pair():
    v0 = XOS(((F(1), F(1), F(0)), (F(0), F(2), F(2))))
    return Instance((v0, Additive((F(1), F(0), F(0)))), 3)


# XOS-Update bietet die stützende Klausel der Nachfragemenge
def test_xos_update_bids_supporting_clause(xos_pair):
    bids = make_bids([0, 0, 0], [1, 0, 0])
    report = XOSUpdate().update(xos_pair, bids, TieBreak.ascending(2, 3), 0, 1)
    assert report.demand_set == 0b110
    assert report.row == (0, 2, 2)
    assert report.best_utility == 4
    assert report.alpha == 1
    assert report.strong and report.weak and report.grand
    assert report.is_best_response


def test_measure_aggressiveness(xos_pair):
    bids = make_bids([0, 0, 0], [1, 0, 0])
    alpha = measure_aggressiveness(xos_pair, bids, (F(0), F(1), F(1)), TieBreak.ascending(2, 3), 0)
    assert alpha == F(1, 2)
    # ohne positive Bestnutzen gibt es kein alpha
    assert measure_aggressiveness(xos_pair, make_bids([5, 5, 5], [0, 0, 0]), (F(1), F(0), F(0)),
                                  TieBreak.ascending(2, 3), 1) is None


def test_no_overbidding_modes():
    v = Additive((F(1), F(1)))
    assert check_no_overbidding(v, (F(1), F(1))).holds
    strong = check_no_overbidding(v, (F(2), F(0)))
    assert not strong.holds
    assert strong.witness == (0b01,)
    assert check_no_overbidding(v, (F(2), F(0)), "grand").holds
    assert check_no_overbidding(v, (F(2), F(0)), "weak", won=0b10).holds
    assert not check_no_overbidding(v, (F(2), F(0)), "weak", won=0b01).holds
    assert not check_no_overbidding(v, (F(2), F(1)), "grand").holds
    with pytest.raises(ValuationKindError):
        check_no_overbidding(v, (F(1), F(1)), "weak")
    with pytest.raises(ValuationKindError):
        check_no_overbidding(v, (F(1), F(1)), "gross")


# Zweitpreis plus Unterapproximation auf der minimalen Nachfragemenge
def test_subadditive_no_overbid_row():
    instance = Instance((BudgetedAdditive((F(2), F(2)), F(3)), Additive((F(1), F(0)))), 2)
    bids = make_bids([0, 0], [1, 0])
    for strategy in (SubadditiveNoOverbid(), SubadditiveAggressive()):
        report = strategy.update(instance, bids, TieBreak.ascending(2, 2), 0, 1)
        assert report.demand_set == 0b10
        assert report.row == (0, 2)
        assert report.alpha == 1
        assert report.strong


def test_compatibility_checks():
    table = Instance((ExplicitTable((F(0), F(1), F(1), F(3))),), 2)
    with pytest.raises(ValuationKindError):
        XOSUpdate().check_compatible(table, 0)
    with pytest.raises(ValuationKindError):
        SubadditiveNoOverbid().check_compatible(table, 0)
    mph = Instance((MPH(2, 2, (((0b11, F(1)),),)),), 2)
    with pytest.raises(ValuationKindError):
        XOSUpdate().check_compatible(mph, 0)


# Ein geskripteter Nachfragesatz muss wirklich eine Nachfragemenge sein
def test_potential_procedure_rejects_non_demand_set(xos_pair):
    bids = make_bids([0, 0, 0], [1, 0, 0])
    strategy = PotentialProcedure([0b001])
    with pytest.raises(InvalidScript):
        strategy.update(xos_pair, bids, TieBreak.ascending(2, 3), 0, 1)
    report = PotentialProcedure([0b110]).update(xos_pair, bids, TieBreak.ascending(2, 3), 0, 1)
    assert report.row == (0, 2, 2)


def test_scripted_and_hold():
    script = Scripted([(F(1),), (F(2),)])
    assert script.row_for((F(5),), 1) == (1,)
    assert script.row_for((F(5),), 2) == (2,)
    assert script.row_for((F(5),), 3) == (5,)
    cyclic = Scripted([(F(1),), (F(2),)], cycle=True)
    assert cyclic.row_for((F(5),), 3) == (1,)
    assert Hold().row_for((F(7),), 4) == (7,)


def test_strategy_dict_form():
    for strategy in (XOSUpdate(), PotentialProcedure([0b011], cycle=False), Scripted([(F(1, 2), F(0))]), Hold()):
        assert strategy_from_dict(strategy.to_dict()) == strategy
    assert strategy_from_dict({"kind": "potential_procedure", "selector": [[1, 2]]}).selector == (0b011,)
    with pytest.raises(ValuationKindError):
        strategy_from_dict({"kind": "truthful"})


def test_check_safety(xos_pair):
    trace = run(xos_pair, RunConfig((XOSUpdate(), XOSUpdate()), steps=4))
    safety = check_safety(trace)
    assert safety.feasible
    # starkes No-Overbidding ist 1-safe
    assert safety.beta == 1
    assert safety.holds(safety.beta)


# Gewinn über dem eigenen Wert: negativer Nutzen, kein beta möglich
def test_check_safety_infeasible():
    instance = Instance((Additive((F(1),)), Additive((F(2),))), 1)
    config = RunConfig((Scripted([(F(3),)]), Hold()), steps=1, initial=make_bids([0], [2]))
    safety = check_safety(run(instance, config))
    assert not safety.feasible
    assert safety.beta is None
    assert safety.witness == (1, 0)


# Aggressives Bieten: nach Verlust eines Items übersteigt der deklarierte Nutzen den echten
def test_check_safety_aggressive():
    v1 = build_hard_instance(2).v1
    instance = Instance((v1, Additive((F(1), F(0), F(0)))), 3)
    config = RunConfig((SubadditiveAggressive(), Scripted([(F(1), F(0), F(0))])), steps=2)
    trace = run(instance, config)
    assert trace.records[1].row_after == (F(2, 3),) * 3
    safety = check_safety(trace)
    assert safety.feasible
    assert safety.beta == F(4, 3)
    assert safety.witness == (2, 0)
    assert 1 < safety.beta <= harmonic(3)
