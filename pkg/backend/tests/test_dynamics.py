# tests/test_dynamics.py
import csv
import json
from fractions import Fraction

import pytest

from auction_lab.core import Instance, TieBreak
from auction_lab.dynamics import RunConfig, Schedule, is_pne, mean_sw, run, sw_series, validate_trace
from auction_lab.errors import DimensionMismatch, TraceMismatch
from auction_lab.schemas import load_trace
from auction_lab.strategies import XOSUpdate
from auction_lab.valuations import Additive
from tests.conftest import FIXTURES, make_bids

F = Fraction


def single_item(*values):
    return Instance(tuple(Additive((F(v),)) for v in values), 1)


# Der Lauf reproduziert die Golden-Trace Zeile für Zeile
def test_tightness_xos_matches_golden_trace(tightness_xos):
    trace = run(tightness_xos.instance, tightness_xos.config)
    golden = [json.loads(line) for line in (FIXTURES / "tightness_xos.jsonl").read_text().splitlines()]
    assert [trace.header()] + [r.to_dict() for r in trace.records] == golden
    assert sw_series(trace) == [F(2001, 1000), F(2001, 1000), F(1003, 1000), F(1003, 1000)]
    assert mean_sw(trace, start=2) == F(1003, 1000)


def test_golden_trace_replays_cleanly():
    trace = load_trace(FIXTURES / "tightness_xos.jsonl")
    validation = validate_trace(trace)
    assert validation.steps == 3
    assert validation.lazy_steps == 0


# Manipulierte Werte werden beim Replay mit Schritt gemeldet
def test_corrupted_trace_is_detected(tmp_path):
    lines = (FIXTURES / "tightness_xos.jsonl").read_text().splitlines()
    step = json.loads(lines[3])
    step["sw"] = "1"
    lines[3] = json.dumps(step)
    path = tmp_path / "corrupted.jsonl"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(TraceMismatch) as exc:
        validate_trace(load_trace(path))
    assert exc.value.step == 2
    assert exc.value.field == "sw"


def test_schedules():
    assert Schedule.round_robin().bidders(3, 5) == [0, 1, 2, 0, 1]
    assert Schedule.scripted([1, 0]).bidders(2, 5) == [1, 0, 1, 0, 1]
    assert Schedule.scripted([1, 0], cycle=False).bidders(2, 5) == [1, 0]
    draws = Schedule.uniform_random(5).bidders(3, 20)
    assert draws == Schedule.uniform_random(5).bidders(3, 20)
    assert set(draws) <= {0, 1, 2}
    with pytest.raises(DimensionMismatch):
        Schedule.scripted([3]).check(2)


# Lazy: ein Bieter mit bester Antwort behält sein Gebot
def test_lazy_step_keeps_bid():
    trace = run(single_item(1), RunConfig((XOSUpdate(),), steps=3, lazy=True))
    assert not trace.allocate_zero_bids
    assert trace.records[0].winners == (None,)
    assert not trace.records[1].lazy
    assert trace.records[1].row_after == (1,)
    assert trace.records[2].lazy
    assert trace.records[2].demand_set is None
    assert trace.activated() == frozenset({0})
    assert validate_trace(trace).lazy_steps == 2


def test_stop_on_fixed_point():
    trace = run(single_item(1), RunConfig((XOSUpdate(),), steps=10, stop_on_fixed_point=True))
    assert trace.steps == 1
    assert is_pne(trace.instance, trace.profile(1), trace.tie).is_pne


# Abbruch frühestens nach der ersten Runde, dann beim ersten Gleichgewicht
def test_stop_waits_for_first_round():
    trace = run(single_item(1, 1), RunConfig((XOSUpdate(), XOSUpdate()), steps=10, stop_on_fixed_point=True))
    assert is_pne(trace.instance, trace.profile(1), trace.tie).is_pne
    assert trace.steps == 2


def test_is_pne():
    instance = single_item(1, 1)
    tie = TieBreak.ascending(2, 1)
    assert is_pne(instance, make_bids([1], [0]), tie).is_pne
    result = is_pne(instance, make_bids([0], [0]), tie)
    assert not result.is_pne
    assert result.bidder == 1


def test_trace_files(tmp_path, tightness_xos):
    trace = run(tightness_xos.instance, tightness_xos.config)
    trace.write_jsonl(tmp_path / "out" / "trace.jsonl")
    trace.write_summary(tmp_path / "out" / "trace.csv")
    assert load_trace(tmp_path / "out" / "trace.jsonl").records == trace.records
    with open(tmp_path / "out" / "trace.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 4
    assert rows[2] == {"t": "2", "bidder": "2", "sw": "1003/1000", "dw": "1003/1000", "alpha": "1", "lazy": "0"}


def test_wrong_strategy_count():
    with pytest.raises(DimensionMismatch):
        run(single_item(1, 1), RunConfig((XOSUpdate(),)))


def test_trace_queries(tightness_xos):
    trace = run(tightness_xos.instance, tightness_xos.config)
    assert trace.last_update_times() == {0: 1, 1: 2, 2: 3}
    assert trace.last_update_times(2) == {0: 1, 1: 2}
    assert trace.running_maxima(2) == (F(1001, 1000), 0, F(1003, 1000))
    assert trace.profile(2)[1] == (0, 0, F(1003, 1000))
    assert trace.activated(1) == frozenset({0})
