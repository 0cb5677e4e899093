"""Best-response dynamics: schedules, eager and lazy stepping, traces and fixed points."""
import csv
import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import (BidProfile, BidRow, Instance, Outcome, TieBreak, allocate, check_profile, opposing_maxima,
                   replace_row, zero_profile)
from .errors import DimensionMismatch, PreconditionViolated, TraceMismatch
from .rationals import ZERO, format_rational, format_row, items_of
from .strategies import Strategy, make_report
from .valuations import DemandMode, demand_sets

logger = logging.getLogger(__name__)

SCHEDULE_KINDS = ("round_robin", "uniform_random", "scripted")


@dataclass(frozen=True)
class Schedule:
    """Activation order; `order` holds 0-based bidders for scripted schedules."""

    kind: str = "round_robin"
    seed: int = 0
    order: tuple[int, ...] = ()
    cycle: bool = True

    @classmethod
    def round_robin(cls) -> "Schedule":
        return cls("round_robin")

    @classmethod
    def uniform_random(cls, seed: int) -> "Schedule":
        return cls("uniform_random", seed=seed)

    @classmethod
    def scripted(cls, order: Sequence[int], cycle: bool = True) -> "Schedule":
        return cls("scripted", order=tuple(order), cycle=cycle)

    def check(self, n: int):
        if self.kind not in SCHEDULE_KINDS:
            raise PreconditionViolated(f"unknown schedule kind: {self.kind}")
        if self.kind == "scripted":
            if not self.order:
                raise PreconditionViolated("a scripted schedule needs a nonempty order")
            bad = [i for i in self.order if not 0 <= i < n]
            if bad:
                raise DimensionMismatch(f"scripted schedule names bidder {bad[0] + 1}, instance has {n}")

    def bidders(self, n: int, steps: int) -> list[int]:
        if self.kind == "round_robin":
            return [(t - 1) % n for t in range(1, steps + 1)]
        if self.kind == "uniform_random":
            rng = np.random.default_rng(self.seed)
            return [int(i) for i in rng.integers(0, n, size=steps)]
        if self.cycle:
            return [self.order[(t - 1) % len(self.order)] for t in range(1, steps + 1)]
        return list(self.order[:steps])

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "uniform_random":
            out["seed"] = self.seed
        if self.kind == "scripted":
            out["order"] = [i + 1 for i in self.order]
            out["cycle"] = self.cycle
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Schedule":
        kind = data.get("kind", "round_robin")
        if kind == "scripted":
            return cls.scripted([i - 1 for i in data.get("order", [])], bool(data.get("cycle", True)))
        return cls(kind, seed=int(data.get("seed", 0)))


@dataclass(frozen=True)
class RunConfig:
    strategies: tuple[Strategy, ...]
    schedule: Schedule = field(default_factory=Schedule.round_robin)
    tie: Optional[TieBreak] = None
    steps: Optional[int] = None
    lazy: bool = False
    stop_on_fixed_point: bool = False
    initial: Optional[BidProfile] = None

    @property
    def allocate_zero_bids(self) -> bool:
        # im Lazy-Modus wird kein Item mit Gebot 0 gewonnen
        return not self.lazy

    def resolved_steps(self, n: int) -> int:
        return 10 * n if self.steps is None else self.steps


@dataclass(frozen=True)
class StepRecord:
    t: int
    bidder: Optional[int]
    lazy: bool
    row_before: Optional[BidRow]
    row_after: Optional[BidRow]
    winners: tuple[Optional[int], ...]
    prices: tuple[Fraction, ...]
    sw: Fraction
    dw: Fraction
    utilities: tuple[Fraction, ...]
    declared_utilities: tuple[Fraction, ...]
    alpha: Optional[Fraction]
    best_utility: Optional[Fraction]
    demand_set: Optional[int]
    strong: Optional[bool]
    weak: Optional[bool]
    grand: Optional[bool]
    running_max: tuple[Fraction, ...]

    def to_dict(self) -> dict:
        def opt(x):
            return None if x is None else format_rational(x)

        return {
            "type": "step",
            "t": self.t,
            "bidder": None if self.bidder is None else self.bidder + 1,
            "lazy": self.lazy,
            "row_before": None if self.row_before is None else format_row(self.row_before),
            "row_after": None if self.row_after is None else format_row(self.row_after),
            "winners": [None if w is None else w + 1 for w in self.winners],
            "prices": format_row(self.prices),
            "sw": format_rational(self.sw),
            "dw": format_rational(self.dw),
            "utilities": format_row(self.utilities),
            "declared_utilities": format_row(self.declared_utilities),
            "alpha": opt(self.alpha),
            "best_utility": opt(self.best_utility),
            "demand_set": None if self.demand_set is None else [j + 1 for j in items_of(self.demand_set)],
            "strong": self.strong,
            "weak": self.weak,
            "grand": self.grand,
            "running_max": format_row(self.running_max),
        }


@dataclass
class Trace:
    instance: Instance
    tie: TieBreak
    initial: BidProfile
    lazy: bool = False
    allocate_zero_bids: bool = True
    schedule: Optional[Schedule] = None
    strategies: tuple = ()
    records: list[StepRecord] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.instance.n

    @property
    def steps(self) -> int:
        return len(self.records) - 1

    @cached_property
    def profiles(self) -> list[BidProfile]:
        out = [self.initial]
        for record in self.records[1:]:
            out.append(replace_row(out[-1], record.bidder, record.row_after))
        return out

    def profile(self, t: int) -> BidProfile:
        return self.profiles[t]

    def running_maxima(self, t: int) -> tuple[Fraction, ...]:
        return self.records[t].running_max

    def activated(self, upto: int = None) -> frozenset:
        """Bidders with at least one non-lazy update up to step `upto`."""
        upto = self.steps if upto is None else upto
        return frozenset(r.bidder for r in self.records[1:upto + 1] if not r.lazy)

    def last_update_times(self, upto: int = None) -> dict[int, int]:
        upto = self.steps if upto is None else upto
        times = {}
        for r in self.records[1:upto + 1]:
            if not r.lazy:
                times[r.bidder] = r.t
        return times

    def is_round_robin(self) -> bool:
        return all(r.bidder == (r.t - 1) % self.n for r in self.records[1:])

    def header(self) -> dict:
        return {
            "type": "header",
            "instance": self.instance.to_dict(),
            "tie_break": self.tie.to_lists(),
            "initial": [format_row(row) for row in self.initial],
            "lazy": self.lazy,
            "allocate_zero_bids": self.allocate_zero_bids,
            "schedule": None if self.schedule is None else self.schedule.to_dict(),
            "strategies": [s.to_dict() for s in self.strategies],
        }

    def write_jsonl(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as f:
            f.write(json.dumps(self.header()) + "\n")
            for record in self.records:
                f.write(json.dumps(record.to_dict()) + "\n")

    def write_summary(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=["t", "bidder", "sw", "dw", "alpha", "lazy"])
            writer.writeheader()
            for r in self.records:
                writer.writerow({
                    "t": r.t,
                    "bidder": "" if r.bidder is None else r.bidder + 1,
                    "sw": format_rational(r.sw),
                    "dw": format_rational(r.dw),
                    "alpha": "" if r.alpha is None else format_rational(r.alpha),
                    "lazy": int(r.lazy),
                })


def _running(previous: Optional[Sequence[Fraction]], bids: BidProfile) -> tuple[Fraction, ...]:
    current = [max(row[j] for row in bids) for j in range(len(bids[0]))]
    if previous is None:
        return tuple(current)
    return tuple(max(a, b) for a, b in zip(previous, current))


def _record(t, bidder, lazy, before, report, outcome: Outcome, running) -> StepRecord:
    return StepRecord(
        t=t,
        bidder=bidder,
        lazy=lazy,
        row_before=before,
        row_after=None if report is None else report.row,
        winners=outcome.winners,
        prices=outcome.prices,
        sw=outcome.sw,
        dw=outcome.dw,
        utilities=outcome.utilities,
        declared_utilities=outcome.declared_utilities,
        alpha=None if report is None else report.alpha,
        best_utility=None if report is None else report.best_utility,
        demand_set=None if report is None or lazy else report.demand_set,
        strong=None if report is None else report.strong,
        weak=None if report is None else report.weak,
        grand=None if report is None else report.grand,
        running_max=running,
    )


def run(instance: Instance, config: RunConfig) -> Trace:
    n, m = instance.n, instance.m
    if len(config.strategies) != n:
        raise DimensionMismatch(f"{len(config.strategies)} strategies for {n} bidders")
    tie = config.tie or TieBreak.ascending(n, m)
    tie.check(n, m)
    config.schedule.check(n)
    steps = config.resolved_steps(n)
    if steps < 1:
        raise PreconditionViolated("the step budget must be at least 1")
    for i, strategy in enumerate(config.strategies):
        strategy.check_compatible(instance, i)

    bids = config.initial if config.initial is not None else zero_profile(n, m)
    check_profile(instance, bids)
    azb = config.allocate_zero_bids
    outcome = allocate(instance, bids, tie, azb)
    running = _running(None, bids)
    trace = Trace(instance, tie, bids, config.lazy, azb, config.schedule, tuple(config.strategies))
    trace.records.append(_record(0, None, False, None, None, outcome, running))

    activations = [0] * n
    for t, i in enumerate(config.schedule.bidders(n, steps), start=1):
        activations[i] += 1
        before = bids[i]
        lazy = False
        if config.lazy:
            best = demand_sets(instance.valuations[i], opposing_maxima(bids, i), DemandMode.ANY_MAX).utility
            if outcome.utilities[i] == best:
                lazy = True
                report = make_report(instance, bids, tie, i, before, 0, best, azb)
        if not lazy:
            report = config.strategies[i].update(instance, bids, tie, i, activations[i], azb)

        bids = replace_row(bids, i, report.row)
        outcome = allocate(instance, bids, tie, azb)
        running = _running(running, bids)
        trace.records.append(_record(t, i, lazy, before, report, outcome, running))
        logger.debug("t=%d bidder=%d lazy=%s sw=%s", t, i + 1, lazy, outcome.sw)

        # erst prüfen, wenn jeder Bieter einmal dran war
        if config.stop_on_fixed_point and min(activations) > 0:
            if is_pne(instance, bids, tie, azb).is_pne:
                logger.info("fixed point reached at t=%d", t)
                break
    return trace


@dataclass(frozen=True)
class PNEResult:
    is_pne: bool
    bidder: Optional[int] = None
    improving_set: Optional[int] = None


def is_pne(instance: Instance, bids: BidProfile, tie: TieBreak, allocate_zero_bids: bool = True) -> PNEResult:
    outcome = allocate(instance, bids, tie, allocate_zero_bids)
    for i, v in enumerate(instance.valuations):
        best = demand_sets(v, opposing_maxima(bids, i), DemandMode.ANY_MAX)
        if outcome.utilities[i] < best.utility:
            return PNEResult(False, i, best.set)
    return PNEResult(True)


@dataclass(frozen=True)
class TraceValidation:
    steps: int
    lazy_steps: int

    def to_dict(self) -> dict:
        return {"clean": True, "steps": self.steps, "lazy_steps": self.lazy_steps}


def _expect(t: int, name: str, recorded, replayed):
    if recorded != replayed:
        raise TraceMismatch(f"{name} differs from the replay at step {t}", step=t, field=name)


def validate_trace(trace: Trace) -> TraceValidation:
    """Replay every step and compare outcomes, utilities, alpha and running maxima."""
    instance, tie, azb = trace.instance, trace.tie, trace.allocate_zero_bids
    if not trace.records or trace.records[0].t != 0:
        raise TraceMismatch("trace has no initial record", step=0)
    bids = trace.initial
    running = None
    lazy_steps = 0
    for t, record in enumerate(trace.records):
        _expect(t, "t", record.t, t)
        best = None
        if t > 0:
            i = record.bidder
            if i is None or not 0 <= i < instance.n:
                raise TraceMismatch(f"step {t} names no valid bidder", step=t, field="bidder")
            _expect(t, "row_before", record.row_before, bids[i])
            if record.lazy:
                lazy_steps += 1
                _expect(t, "row_after", record.row_after, bids[i])
            best = demand_sets(instance.valuations[i], opposing_maxima(bids, i), DemandMode.ANY_MAX).utility
            _expect(t, "best_utility", record.best_utility, best)
            try:
                bids = replace_row(bids, i, record.row_after)
                check_profile(instance, bids)
            except (TypeError, DimensionMismatch) as exc:
                raise TraceMismatch(f"bid row at step {t} is malformed", step=t, field="row_after") from exc

        outcome = allocate(instance, bids, tie, azb)
        _expect(t, "winners", record.winners, outcome.winners)
        _expect(t, "prices", record.prices, outcome.prices)
        _expect(t, "sw", record.sw, outcome.sw)
        _expect(t, "dw", record.dw, outcome.dw)
        _expect(t, "utilities", record.utilities, outcome.utilities)
        _expect(t, "declared_utilities", record.declared_utilities, outcome.declared_utilities)
        if any(u < 0 for u in outcome.declared_utilities):
            raise TraceMismatch(f"negative declared utility at step {t}", step=t, field="declared_utilities")
        if t > 0:
            alpha = None if best == 0 else outcome.declared_utilities[record.bidder] / best
            _expect(t, "alpha", record.alpha, alpha)
        running = _running(running, bids)
        _expect(t, "running_max", record.running_max, running)
    logger.debug("trace of %d steps replayed cleanly", trace.steps)
    return TraceValidation(trace.steps, lazy_steps)


def sw_series(trace: Trace) -> list[Fraction]:
    return [r.sw for r in trace.records]


def mean_sw(trace: Trace, start: int = 0) -> Fraction:
    values = sw_series(trace)[start:]
    return sum(values, ZERO) / len(values) if values else ZERO
