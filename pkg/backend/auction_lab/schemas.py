"""Scenario files and trace lines, validated by strict pydantic models.

Files use 1-based bidder and item labels and "p/q" strings for rationals;
everything built from them is 0-based.
"""
import json
import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

from pydantic import AfterValidator, BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, model_validator

from .core import Instance, TieBreak, check_profile
from .dynamics import RunConfig, Schedule, StepRecord, Trace
from .errors import AuctionLabError, ScenarioError
from .gf2 import build_hard_instance
from .rationals import format_row, parse_rational
from .strategies import STRATEGIES, strategy_from_dict
from .valuations import generate, valuation_from_dict

logger = logging.getLogger(__name__)


def _nonnegative(x: Fraction) -> Fraction:
    if x < 0:
        raise ValueError(f"must be nonnegative, got {x}")
    return x


Rational = Annotated[Fraction, BeforeValidator(parse_rational)]
NonNegRational = Annotated[Fraction, BeforeValidator(parse_rational), AfterValidator(_nonnegative)]
Label = Annotated[int, Field(ge=1)]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True)


class ValuationModel(_Strict):
    kind: Literal["additive", "unit_demand", "xos", "budgeted_additive", "coverage", "explicit_table", "mph",
                  "set_cover", "subspace"]
    weights: Optional[list[NonNegRational]] = None
    clauses: Optional[list[list[Any]]] = None
    budget: Optional[NonNegRational] = None
    ground: Optional[int] = None
    covers: Optional[list[list[Label]]] = None
    element_weights: Optional[list[NonNegRational]] = None
    values: Optional[list[Rational]] = None
    m: Optional[int] = None
    rank: Optional[int] = None
    k: Optional[int] = None


class GeneratorModel(_Strict):
    kind: str
    n: int = Field(ge=1)
    params: dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None


class HardInstanceModel(_Strict):
    k: int


class InstanceModel(_Strict):
    m: Optional[int] = Field(None, ge=1)
    valuations: Optional[list[ValuationModel]] = None
    generator: Optional[GeneratorModel] = None
    hard_instance: Optional[HardInstanceModel] = None

    @model_validator(mode="after")
    def _one_form(self):
        forms = [self.valuations is not None, self.generator is not None, self.hard_instance is not None]
        if sum(forms) != 1:
            raise ValueError("give exactly one of valuations, generator or hard_instance")
        if self.valuations is not None and self.m is None:
            raise ValueError("inline valuations need m")
        return self


class StrategyModel(_Strict):
    kind: Literal[tuple(STRATEGIES)]
    selector: Optional[list[list[Label]]] = None
    rows: Optional[list[list[NonNegRational]]] = None
    cycle: Optional[bool] = None


class ScheduleModel(_Strict):
    kind: Literal["round_robin", "uniform_random", "scripted"] = "round_robin"
    seed: Optional[int] = None
    order: Optional[list[Label]] = None
    cycle: bool = True


class ScenarioModel(_Strict):
    instance: InstanceModel
    strategies: Union[StrategyModel, list[StrategyModel]]
    initial: Optional[list[list[NonNegRational]]] = None
    schedule: ScheduleModel = Field(default_factory=ScheduleModel)
    tie_break: Union[Literal["ascending", "descending"], list[list[Label]]] = "ascending"
    steps: Optional[int] = Field(None, ge=1)
    lazy: bool = False
    stop_on_fixed_point: bool = False
    seed: int = 0
    trace: Optional[str] = None
    summary: Optional[str] = None


class TraceHeaderModel(_Strict):
    type: Literal["header"]
    instance: InstanceModel
    tie_break: list[list[Label]]
    initial: list[list[NonNegRational]]
    lazy: bool
    allocate_zero_bids: bool
    schedule: Optional[ScheduleModel] = None
    strategies: list[StrategyModel] = Field(default_factory=list)


class StepModel(_Strict):
    type: Literal["step"]
    t: int = Field(ge=0)
    bidder: Optional[Label]
    lazy: bool
    row_before: Optional[list[NonNegRational]]
    row_after: Optional[list[NonNegRational]]
    winners: list[Optional[Label]]
    prices: list[Rational]
    sw: Rational
    dw: Rational
    utilities: list[Rational]
    declared_utilities: list[Rational]
    alpha: Optional[Rational]
    best_utility: Optional[Rational]
    demand_set: Optional[list[Label]]
    strong: Optional[bool]
    weak: Optional[bool]
    grand: Optional[bool]
    running_max: list[Rational]


# --- Aufbau ---------------------------------------------------------------------

def _dump(model: BaseModel) -> dict:
    """Model back to plain file form (rationals as strings, unset fields dropped)."""
    def plain(x):
        if isinstance(x, Fraction):
            return str(x)
        if isinstance(x, list):
            return [plain(v) for v in x]
        if isinstance(x, dict):
            return {k: plain(v) for k, v in x.items()}
        return x
    return plain(model.model_dump(exclude_none=True))


def build_instance(spec: InstanceModel, seed: int = 0) -> Instance:
    try:
        if spec.hard_instance is not None:
            return build_hard_instance(spec.hard_instance.k).instance()
        if spec.generator is not None:
            gen = spec.generator
            base = seed if gen.seed is None else gen.seed
            params = gen.params
            return Instance(tuple(generate(gen.kind, params, base + i) for i in range(gen.n)), int(params["m"]))
        valuations = []
        for i, v in enumerate(spec.valuations):
            try:
                valuations.append(valuation_from_dict(_dump(v)))
            except (KeyError, TypeError, ValueError) as exc:
                raise ScenarioError(f"valuation of bidder {i + 1} is incomplete: {exc}",
                                    field=f"instance.valuations.{i}") from exc
        return Instance(tuple(valuations), spec.m)
    except ScenarioError:
        raise
    except AuctionLabError as exc:
        raise ScenarioError(exc.message, field="instance") from exc
    except KeyError as exc:
        raise ScenarioError(f"generator params need {exc}", field="instance.generator.params") from exc


def _tie_break(raw, n: int, m: int) -> TieBreak:
    if raw == "ascending":
        return TieBreak.ascending(n, m)
    if raw == "descending":
        return TieBreak.descending(n, m)
    try:
        tie = TieBreak(tuple(tuple(i - 1 for i in order) for order in raw))
        tie.check(n, m)
    except AuctionLabError as exc:
        raise ScenarioError(exc.message, field="tie_break") from exc
    return tie


@dataclass(frozen=True)
class Scenario:
    instance: Instance
    config: RunConfig
    instance_spec: dict
    seed: int = 0
    trace_path: Optional[str] = None
    summary_path: Optional[str] = None

    def defaults(self) -> dict:
        """The resolved settings, as echoed by `run`."""
        return {
            "n": self.instance.n,
            "m": self.instance.m,
            "steps": self.config.steps,
            "tie_break": self.config.tie.to_lists(),
            "schedule": self.config.schedule.to_dict(),
            "lazy": self.config.lazy,
            "stop_on_fixed_point": self.config.stop_on_fixed_point,
            "seed": self.seed,
        }

    def to_dict(self) -> dict:
        out = {
            "instance": self.instance_spec,
            "strategies": [s.to_dict() for s in self.config.strategies],
            "schedule": self.config.schedule.to_dict(),
            "tie_break": self.config.tie.to_lists(),
            "steps": self.config.steps,
            "lazy": self.config.lazy,
            "stop_on_fixed_point": self.config.stop_on_fixed_point,
            "seed": self.seed,
        }
        if self.config.initial is not None:
            out["initial"] = [format_row(row) for row in self.config.initial]
        if self.trace_path is not None:
            out["trace"] = self.trace_path
        if self.summary_path is not None:
            out["summary"] = self.summary_path
        return out


def _line_of(text: Optional[str], key) -> Optional[int]:
    if not text or not isinstance(key, str):
        return None
    needle = f'"{key}"'
    for number, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return number
    return None


def _validation_error(exc: ValidationError, text: Optional[str]) -> ScenarioError:
    first = exc.errors()[0]
    loc = [str(x) for x in first["loc"]]
    names = [x for x in first["loc"] if isinstance(x, str)]
    return ScenarioError(f"{'.'.join(loc) or 'scenario'}: {first['msg']}", field=".".join(loc) or None,
                         line=_line_of(text, names[-1] if names else None))


def scenario_from_dict(data: dict, text: str = None) -> Scenario:
    try:
        model = ScenarioModel.model_validate(data)
    except ValidationError as exc:
        raise _validation_error(exc, text) from exc

    instance = build_instance(model.instance, model.seed)
    n, m = instance.n, instance.m
    raw = model.strategies if isinstance(model.strategies, list) else [model.strategies] * n
    if len(raw) != n:
        raise ScenarioError(f"{len(raw)} strategies for {n} bidders", field="strategies",
                            line=_line_of(text, "strategies"))
    strategies = tuple(strategy_from_dict(_dump(s)) for s in raw)

    sched = model.schedule
    if sched.kind == "scripted":
        if not sched.order or any(i > n for i in sched.order):
            raise ScenarioError("scripted schedule needs an order of bidders 1..n", field="schedule.order",
                                line=_line_of(text, "order"))
        schedule = Schedule.scripted([i - 1 for i in sched.order], sched.cycle)
    elif sched.kind == "uniform_random":
        schedule = Schedule.uniform_random(model.seed if sched.seed is None else sched.seed)
    else:
        schedule = Schedule.round_robin()

    initial = None
    if model.initial is not None:
        initial = tuple(tuple(row) for row in model.initial)
        try:
            check_profile(instance, initial)
        except AuctionLabError as exc:
            raise ScenarioError(exc.message, field="initial", line=_line_of(text, "initial")) from exc

    config = RunConfig(
        strategies=strategies,
        schedule=schedule,
        tie=_tie_break(model.tie_break, n, m),
        steps=model.steps if model.steps is not None else 10 * n,
        lazy=model.lazy,
        stop_on_fixed_point=model.stop_on_fixed_point,
        initial=initial,
    )
    for i, strategy in enumerate(strategies):
        try:
            strategy.check_compatible(instance, i)
        except AuctionLabError as exc:
            raise ScenarioError(exc.message, field=f"strategies.{i}") from exc
    return Scenario(instance, config, _dump(model.instance), model.seed, model.trace, model.summary)


def parse_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc.msg}", line=exc.lineno) from exc
    scenario = scenario_from_dict(data, text)
    logger.debug("scenario %s parsed: %s", path, scenario.defaults())
    return scenario


# --- Traces ---------------------------------------------------------------------

def _minus_one(labels):
    return None if labels is None else [None if x is None else x - 1 for x in labels]


def _record(step: StepModel) -> StepRecord:
    return StepRecord(
        t=step.t,
        bidder=None if step.bidder is None else step.bidder - 1,
        lazy=step.lazy,
        row_before=None if step.row_before is None else tuple(step.row_before),
        row_after=None if step.row_after is None else tuple(step.row_after),
        winners=tuple(_minus_one(step.winners)),
        prices=tuple(step.prices),
        sw=step.sw,
        dw=step.dw,
        utilities=tuple(step.utilities),
        declared_utilities=tuple(step.declared_utilities),
        alpha=step.alpha,
        best_utility=step.best_utility,
        demand_set=None if step.demand_set is None else sum(1 << (j - 1) for j in step.demand_set),
        strong=step.strong,
        weak=step.weak,
        grand=step.grand,
        running_max=tuple(step.running_max),
    )


def load_trace(path) -> Trace:
    """Read a JSON-lines trace; structure is checked here, consistency by `validate_trace`."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ScenarioError(f"cannot read trace {path}: {exc.strerror}") from exc
    if not lines:
        raise ScenarioError("trace file is empty", line=1)

    header, records = None, []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
            if header is None:
                header = TraceHeaderModel.model_validate(data)
            else:
                records.append(_record(StepModel.model_validate(data)))
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"trace line is not valid JSON: {exc.msg}", line=number) from exc
        except ValidationError as exc:
            first = exc.errors()[0]
            raise ScenarioError(f"trace line {number}: {first['msg']}",
                                field=".".join(str(x) for x in first["loc"]) or None, line=number) from exc

    instance = build_instance(header.instance)
    tie = _tie_break(header.tie_break, instance.n, instance.m)
    schedule = None
    if header.schedule is not None:
        schedule = Schedule.from_dict(_dump(header.schedule))
    initial = tuple(tuple(row) for row in header.initial)
    try:
        check_profile(instance, initial)
        strategies = tuple(strategy_from_dict(_dump(s)) for s in header.strategies)
    except AuctionLabError as exc:
        raise ScenarioError(exc.message, field="header", line=1) from exc
    return Trace(instance, tie, initial, header.lazy, header.allocate_zero_bids, schedule, strategies, records)


def load_scenario_text(text: str) -> Scenario:
    """Parse scenario JSON given as a string (used by tests and `run -`)."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc.msg}", line=exc.lineno) from exc
    return scenario_from_dict(data, text)
