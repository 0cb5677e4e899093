"""Optimal welfare, bound checkers over traces, Monte Carlo and the named reproductions.

Every checker returns a `BoundReport` whose inequalities are exact rational
comparisons. The constants alpha and beta are always measured from the trace.
"""
import logging
import operator
from dataclasses import dataclass, field, replace
from fractions import Fraction
from multiprocessing import Pool
from typing import Callable, Optional

import numpy as np

from .config import Config
from .core import Instance, TieBreak
from .dynamics import RunConfig, Schedule, Trace, is_pne, run
from .errors import NonQualifyingTrace, PreconditionViolated, ScenarioError, SizeGuardExceeded, UnknownExperiment
from .gf2 import (V2_MAX_BOUND, basis_cover, build_hard_instance, cheap_subspace, construct_deviation,
                  cover_union, full_subspace_in, gaussian_binomial, subspace_incidence, v2_demand_set)
from .rationals import ONE, ZERO, format_rational, harmonic, items_of, mask_of, parse_rational
from .strategies import (Hold, PotentialProcedure, Scripted, SubadditiveAggressive, SubadditiveNoOverbid, XOSUpdate,
                         check_safety)
from .valuations import (MPH, Additive, DemandMode, UnitDemand, additive_underapprox, check_class, demand_sets,
                         generate, subset_sums)

logger = logging.getLogger(__name__)

_RELATIONS = {">=": operator.ge, "<=": operator.le, "==": operator.eq}


def _jsonable(value):
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


# --- Optimum ------------------------------------------------------------------

@dataclass(frozen=True)
class OptResult:
    value: Fraction
    allocation: tuple[int, ...]

    def bundle_value(self, instance: Instance, bidders) -> Fraction:
        """Sum of v_i(S*_i) over the given bidders."""
        return sum((instance.valuations[i].value(self.allocation[i]) for i in bidders), ZERO)

    def to_dict(self) -> dict:
        return {"value": format_rational(self.value),
                "allocation": [[j + 1 for j in items_of(s)] for s in self.allocation]}


def _closure(table: list[Fraction]) -> tuple[list[Fraction], list[int]]:
    """best[S] = max value over subsets of S, arg[S] a subset attaining it."""
    best, arg = list(table), list(range(len(table)))
    for s in range(1, len(best)):
        rest = s
        while rest:
            bit = rest & -rest
            if best[s ^ bit] > best[s]:
                best[s], arg[s] = best[s ^ bit], arg[s ^ bit]
            rest ^= bit
    return best, arg


def compute_opt(instance: Instance) -> OptResult:
    """Exact welfare optimum by a subset dynamic program over the bidders."""
    n, m = instance.n, instance.m
    limit = Config.EXHAUSTIVE_ITEM_LIMIT if n <= 2 else Config.OPT_ITEM_LIMIT
    if m > limit:
        raise SizeGuardExceeded("optimal welfare", m, limit)
    full = instance.full_mask
    tables = [v.table for v in instance.valuations]
    below, arg = _closure(tables[-1])

    choices = []
    for i in range(n - 2, -1, -1):
        table = tables[i]
        values, choice = [ZERO] * (full + 1), [0] * (full + 1)
        # für Bieter 0 zählt nur M selbst
        for s in ((full,) if i == 0 else range(full + 1)):
            top, pick = below[s], 0
            t = s
            while t:
                x = table[t] + below[s ^ t]
                if x > top:
                    top, pick = x, t
                t = (t - 1) & s
            values[s], choice[s] = top, pick
        choices.append(choice)
        below = values

    allocation, rest = [], full
    for choice in reversed(choices):
        allocation.append(choice[rest])
        rest ^= choice[rest]
    allocation.append(arg[rest])
    return OptResult(below[full], tuple(allocation))


# --- Reports ------------------------------------------------------------------

@dataclass(frozen=True)
class InequalityCheck:
    name: str
    left: Fraction
    right: Fraction
    relation: str = ">="
    t: Optional[int] = None
    scope: str = ""

    @property
    def holds(self) -> bool:
        return _RELATIONS[self.relation](self.left, self.right)

    def to_dict(self) -> dict:
        out = {"name": self.name, "left": format_rational(self.left), "relation": self.relation,
               "right": format_rational(self.right), "holds": self.holds}
        if self.t is not None:
            out["t"] = self.t
        if self.scope:
            out["scope"] = self.scope
        return out


@dataclass
class BoundReport:
    theorem: str
    params: dict = field(default_factory=dict)
    checks: list[InequalityCheck] = field(default_factory=list)
    values: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def add(self, name: str, left, right, relation: str = ">=", t: int = None, scope: str = "") -> InequalityCheck:
        check = InequalityCheck(name, Fraction(left), Fraction(right), relation, t, scope)
        self.checks.append(check)
        if not check.holds:
            logger.warning("%s: %s failed%s (%s %s %s)", self.theorem, name, "" if t is None else f" at t={t}",
                           check.left, relation, check.right)
        return check

    def absorb(self, other: "BoundReport", scope: str):
        self.checks.extend(replace(c, scope=scope) for c in other.checks)
        self.notes.extend(f"{scope}: {note}" for note in other.notes)

    @property
    def failures(self) -> list[InequalityCheck]:
        return [c for c in self.checks if not c.holds]

    @property
    def passed(self) -> bool:
        return not self.failures

    def worst_ratio(self, name: str) -> Optional[Fraction]:
        ratios = [c.left / c.right for c in self.checks if c.name == name and c.right > 0]
        return min(ratios, default=None)

    def counts(self) -> dict[str, list[int]]:
        out = {}
        for c in self.checks:
            seen = out.setdefault(c.name, [0, 0])
            seen[0] += 1
            seen[1] += not c.holds
        return out

    def to_dict(self, detail: bool = False) -> dict:
        failures = self.failures
        out = {
            "theorem": self.theorem,
            "passed": not failures,
            "params": _jsonable(self.params),
            "values": _jsonable(self.values),
            "checked": len(self.checks),
            "failed": len(failures),
            "failures": [c.to_dict() for c in failures[:50]],
            "notes": list(self.notes),
        }
        if detail:
            out["checks"] = [c.to_dict() for c in self.checks]
        return out

    def table(self) -> str:
        lines = [f"{self.theorem}: {'PASS' if self.passed else 'FAIL'}"]
        for key, value in _jsonable({**self.params, **self.values}).items():
            lines.append(f"  {key:<24} {value}")
        for name, (total, failed) in self.counts().items():
            lines.append(f"  {name:<24} {total - failed}/{total} hold")
        for c in self.failures[:10]:
            where = "" if c.t is None else f" t={c.t}"
            lines.append(f"  ! {c.scope}{' ' if c.scope else ''}{c.name}{where}: "
                         f"{format_rational(c.left)} {c.relation} {format_rational(c.right)}")
        lines.extend(f"  note: {note}" for note in self.notes)
        return "\n".join(lines)


# --- Gemessene Konstanten -------------------------------------------------------

def measured_alpha(trace: Trace, upto: int = None) -> Fraction:
    """Smallest alpha-hat over non-lazy steps, capped at 1; 1 when no step had positive best utility."""
    upto = trace.steps if upto is None else upto
    values = [r.alpha for r in trace.records[1:upto + 1] if not r.lazy and r.alpha is not None]
    return min(min(values, default=ONE), ONE)


def _bound_constants(trace: Trace) -> tuple[Fraction, Fraction]:
    alpha = measured_alpha(trace)
    if alpha == 0:
        raise NonQualifyingTrace("no update is aggressive (alpha-hat is 0)")
    safety = check_safety(trace)
    if not safety.feasible:
        raise NonQualifyingTrace("the trace is not beta-safe for any beta", **safety.to_dict()["witness"])
    return alpha, safety.beta


def _params(trace: Trace, alpha, beta) -> dict:
    return {"alpha": alpha, "beta": beta, "n": trace.n, "m": trace.instance.m, "T": trace.steps,
            "lazy": trace.lazy}


def _require_round_robin(trace: Trace):
    if not trace.is_round_robin():
        raise NonQualifyingTrace("the bound needs a round-robin trace")
    if trace.steps < trace.n:
        raise NonQualifyingTrace(f"the trace has {trace.steps} steps, the bound needs at least n = {trace.n}")


# --- Schranken ----------------------------------------------------------------

def check_lemmas(trace: Trace, opt: OptResult, alpha: Fraction = None, beta: Fraction = None) -> BoundReport:
    """Window lemmas on round-robin traces, the arbitrary-schedule variants otherwise."""
    records = trace.records
    n = trace.n
    if alpha is None:
        alpha = measured_alpha(trace)
    if beta is None:
        safety = check_safety(trace)
        beta = safety.beta if safety.feasible else None
    report = BoundReport("lemmas", _params(trace, alpha, beta))
    if beta is None:
        report.notes.append("no feasible beta, the safety lemmas are skipped")

    if trace.is_round_robin():
        for t in range(n, trace.steps + 1):
            dw, dw_back = records[t].dw, records[t - n].dw
            window = sum((records[s].declared_utilities[records[s].bidder] for s in range(t - n + 1, t + 1)), ZERO)
            report.add("aux", window, dw, "<=", t)
            if beta is not None:
                report.add("initial-high", dw, alpha / beta * dw_back, ">=", t)
            if trace.lazy:
                active = trace.activated(t)
                if active:
                    report.add("initial-low-lazy", (2 * alpha + 1) * dw + alpha * dw_back,
                               alpha * opt.bundle_value(trace.instance, active), ">=", t)
            else:
                report.add("initial-low", (alpha + 1) * dw + alpha * dw_back, alpha * opt.value, ">=", t)
    else:
        report.notes.append("not round-robin: window lemmas replaced by the max-low lemma")
        report.checks.extend(check_max_low(trace, opt, alpha).checks)
    report.checks.extend(check_aux_variant(trace).checks)

    if beta is not None:
        for r in records:
            report.add("declared-vs-actual", r.dw, beta * r.sw, "<=", r.t)
    return report


def check_pointwise(trace: Trace, opt: OptResult) -> BoundReport:
    """SW(b^t) >= alpha / ((1 + alpha + beta) beta) OPT at every t >= n (lazy: 2 alpha)."""
    _require_round_robin(trace)
    alpha, beta = _bound_constants(trace)
    n = trace.n
    if trace.lazy:
        factor = alpha / ((1 + 2 * alpha + beta) * beta)
        everyone = frozenset(range(n))
        qualifying = [t for t in range(n, trace.steps + 1) if trace.activated(t) == everyone]
        if not qualifying:
            raise NonQualifyingTrace("no step after which every bidder has made an aggressive update")
        theorem = "pointwise-lazy"
    else:
        factor = alpha / ((1 + alpha + beta) * beta)
        qualifying = range(n, trace.steps + 1)
        theorem = "pointwise"

    report = BoundReport(theorem, _params(trace, alpha, beta))
    for t in qualifying:
        report.add("sw", trace.records[t].sw, factor * opt.value, ">=", t)
    report.values.update({"factor": factor, "opt": opt.value, "first_checked": qualifying[0]})
    if opt.value:
        report.values["worst_ratio"] = min(trace.records[t].sw / opt.value for t in qualifying)
    lemmas = check_lemmas(trace, opt, alpha, beta)
    report.checks.extend(lemmas.checks)
    report.notes.extend(lemmas.notes)
    return report


def check_average(trace: Trace, opt: OptResult) -> BoundReport:
    """(1/T) sum_{t=1..T} SW(b^t) >= alpha / ((2 alpha + 1) beta) (1 - n/T) OPT."""
    _require_round_robin(trace)
    alpha, beta = _bound_constants(trace)
    T, n = trace.steps, trace.n
    average = sum((r.sw for r in trace.records[1:]), ZERO) / T
    factor = alpha / ((2 * alpha + 1) * beta) * (1 - Fraction(n, T))
    report = BoundReport("average", _params(trace, alpha, beta))
    report.add("average-sw", average, factor * opt.value, ">=")
    report.values.update({"average": average, "factor": factor, "opt": opt.value})
    return report


def check_aux_variant(trace: Trace) -> BoundReport:
    """sum over updated bidders of u^D_i(b^{t_i}) <= DW(b^T) at every prefix T."""
    report = BoundReport("aux-variant", {"n": trace.n, "T": trace.steps})
    last: dict[int, Fraction] = {}
    for r in trace.records[1:]:
        if not r.lazy:
            last[r.bidder] = r.declared_utilities[r.bidder]
        if last:
            report.add("aux-variant", sum(last.values(), ZERO), r.dw, "<=", r.t)
    return report


def check_max_low(trace: Trace, opt: OptResult, alpha: Fraction = None) -> BoundReport:
    """(alpha+1) DW(b^T) + alpha sum_j y_j >= alpha sum_{i in N'} v_i(S*_i) at every prefix T."""
    alpha = measured_alpha(trace) if alpha is None else alpha
    report = BoundReport("max-low", {"alpha": alpha, "n": trace.n, "T": trace.steps})
    for r in trace.records[1:]:
        active = trace.activated(r.t)
        if not active:
            continue
        report.add("max-low", (alpha + 1) * r.dw + alpha * sum(r.running_max, ZERO),
                   alpha * opt.bundle_value(trace.instance, active), ">=", r.t)
    return report


def check_homogeneity(instance: Instance, config: RunConfig, factor: Fraction) -> BoundReport:
    """Scaling values and initial bids by `factor` leaves the welfare ratios and every verdict unchanged."""
    if factor <= 0:
        raise PreconditionViolated("the scaling factor must be positive")
    if any(isinstance(s, Scripted) for s in config.strategies):
        raise PreconditionViolated("scripted rows do not scale with the instance")
    scaled_config = config
    if config.initial is not None:
        scaled_config = replace(config, initial=tuple(tuple(b * factor for b in row) for row in config.initial))
    base, scaled = run(instance, config), run(instance.scaled(factor), scaled_config)
    opt, opt_scaled = compute_opt(instance), compute_opt(instance.scaled(factor))

    report = BoundReport("homogeneity", {"factor": factor, "n": instance.n, "m": instance.m})
    report.add("opt", opt_scaled.value, factor * opt.value, "==")
    for a, b in zip(base.records, scaled.records):
        report.add("sw", b.sw, factor * a.sw, "==", a.t)
    verdicts = []
    for trace, o in ((base, opt), (scaled, opt_scaled)):
        try:
            verdicts.append(check_pointwise(trace, o).passed)
        except NonQualifyingTrace:
            verdicts.append(None)
    report.values["verdicts"] = verdicts
    report.add("same-verdict", int(verdicts[0] == verdicts[1]), 1, "==")
    return report


# --- Monte Carlo ----------------------------------------------------------------

def _as_fraction(x: float) -> Fraction:
    return Fraction(x).limit_denominator(10 ** 9)


def monte_carlo_random_activation(instance: Instance, config: RunConfig, trials: int = None,
                                  seed: int = 0) -> BoundReport:
    """E[SW(b^T)] >= alpha / (2 (1 + 4 alpha) beta) OPT under uniform random activation."""
    trials = Config.MONTE_CARLO_TRIALS if trials is None else trials
    if trials < 2:
        raise PreconditionViolated("Monte Carlo needs at least two trials")
    n, m = instance.n, instance.m
    steps = n if config.steps is None else config.steps
    if steps < n:
        raise PreconditionViolated(f"T = {steps} is below n = {n}")
    opt = compute_opt(instance)

    welfare, finals, maxima = [], [], []
    alphas, betas = [], []
    max_low_failures = 0
    for trial in range(trials):
        trace = run(instance, replace(config, schedule=Schedule.uniform_random(seed + trial), steps=steps))
        last = trace.records[-1]
        welfare.append(last.sw)
        finals.append([max(row[j] for row in trace.profile(trace.steps)) for j in range(m)])
        maxima.append(list(last.running_max))
        alphas.append(measured_alpha(trace))
        safety = check_safety(trace)
        if not safety.feasible:
            raise NonQualifyingTrace(f"trial {trial} is not beta-safe", trial=trial)
        betas.append(safety.beta)
        max_low_failures += len(check_max_low(trace, opt, alphas[-1]).failures)

    alpha, beta = min(alphas), max(betas)
    if alpha == 0:
        raise NonQualifyingTrace("no update is aggressive (alpha-hat is 0)")
    bound = alpha / (2 * (1 + 4 * alpha) * beta) * opt.value
    mean = sum(welfare, ZERO) / trials
    se = _as_fraction(float(np.std(np.array(welfare, dtype=float), ddof=1)) / np.sqrt(trials))

    report = BoundReport("random-activation", {"alpha": alpha, "beta": beta, "n": n, "m": m, "T": steps,
                                               "trials": trials, "seed": seed})
    report.add("mean-sw", mean, bound, ">=")
    report.add("mean-sw-3se", mean - 3 * se, Fraction(9, 10) * bound, ">=")
    report.add("max-low-failures", max_low_failures, 0, "==")
    if n > 1:
        growth = (1 - Fraction(1, n)) ** (-steps)
        y, p = np.array(maxima, dtype=float), np.array(finals, dtype=float)
        for j in range(m):
            mean_y = sum((row[j] for row in maxima), ZERO) / trials
            mean_p = sum((row[j] for row in finals), ZERO) / trials
            se_y = _as_fraction(float(np.std(y[:, j], ddof=1)) / np.sqrt(trials))
            se_p = _as_fraction(float(np.std(p[:, j], ddof=1)) / np.sqrt(trials))
            report.add(f"max-vs-final[{j + 1}]", mean_y - 3 * se_y, growth * (mean_p + 3 * se_p), "<=")
    else:
        report.notes.append("a single bidder has no max-vs-final gap")
    report.values.update({"opt": opt.value, "bound": bound, "mean": mean, "standard_error": se,
                          "ratio": mean / opt.value if opt.value else None})
    return report


# --- Schwierige Instanz ----------------------------------------------------------

def _sample_grand_row(rng: np.random.Generator, m: int, budget: Fraction) -> tuple[Fraction, ...]:
    """Random row with total at most `budget`, i.e. no overbidding on the grand bundle."""
    den = Config.GENERATOR_DENOMINATOR
    weights = rng.integers(0, den + 1, size=m)
    total = int(weights.sum())
    if total == 0:
        return tuple(ZERO for _ in range(m))
    scale = Fraction(int(rng.integers(1, den + 1)), den) * budget
    return tuple(Fraction(int(w), total) * scale for w in weights)


def check_hard_instance(k: int, samples: int = None, steps: int = 40, seed: int = 0,
                        subspace_limit: int = None) -> tuple[BoundReport, Optional[Trace]]:
    """Lemma-level checks on the hard instance plus, for k <= 4, simulated dynamics."""
    hard = build_hard_instance(k)
    samples = Config.HARD_INSTANCE_SAMPLES if samples is None else samples
    report = BoundReport(f"hard-instance-k{k}", {"k": k, "m": hard.m, "d": hard.d, "rho": hard.rho,
                                                  "samples": samples, "seed": seed})
    report.values.update({"subspaces": len(hard.subspaces), "rho_2d": hard.rho * (1 << hard.d),
                          "max_v2": hard.max_v2, "proof_bound": hard.proof_bound})
    report.add("subspace-count", len(hard.subspaces), gaussian_binomial(k, hard.d), "==")
    report.add("max-v2", hard.max_v2, V2_MAX_BOUND, "<=")
    incidence = subspace_incidence(k, hard.d)
    per_item = gaussian_binomial(k - 1, hard.d - 1)
    report.add("subspace-symmetry", int((incidence != per_item).sum()), 0, "==")
    report.values["per_item_subspaces"] = sorted(set(incidence.tolist()))

    rng = np.random.default_rng(seed)
    cheap_found = superset_found = 0
    for _ in range(samples):
        row = _sample_grand_row(rng, hard.m, Fraction(k))
        cheap_found += cheap_subspace(hard, row) is not None
        demand = v2_demand_set(hard, row).set
        superset_found += full_subspace_in(hard, demand) is not None
    report.add("cheap-subspace", cheap_found, samples, "==")
    report.add("demand-superset", superset_found, samples, "==")

    subspaces = hard.subspaces if subspace_limit is None else hard.subspaces[:subspace_limit]
    if len(subspaces) < len(hard.subspaces):
        report.notes.append(f"basis covers checked on the first {len(subspaces)} subspaces")
    outside = (1 << hard.m) - 1
    longest, uncovered = 0, 0
    for sub in subspaces:
        cover = basis_cover(k, sub)
        longest = max(longest, len(cover))
        uncovered += (outside & ~sub.mask) & ~cover_union(k, cover) != 0
    report.add("cover-size", longest, k - hard.d, "<=")
    report.add("cover-union", uncovered, 0, "==")

    trace = None
    if k <= 4:
        instance = hard.instance()
        trace = run(instance, RunConfig((SubadditiveNoOverbid(), SubadditiveNoOverbid()), steps=steps))
        for r in trace.records[1:]:
            if r.bidder == 1:
                report.add("sw-after-player-2", r.sw, hard.proof_bound, "<=", r.t)
        opt = compute_opt(instance)
        report.values.update({"opt": opt.value, "worst_ratio": min(r.sw for r in trace.records[1:]) / opt.value,
                              "player_2_updates": sum(r.bidder == 1 for r in trace.records[1:])})
    else:
        report.notes.append("dynamics are simulated only for k <= 4; OPT >= v1(M) = k")
    return report, trace


def check_no_pne(k: int = 8, seed: int = 0) -> BoundReport:
    """Certificates showing that no weakly no-overbidding profile is a pure equilibrium."""
    hard = build_hard_instance(k)
    log_k = k.bit_length() - 1
    report = BoundReport("no-pne-lemmas", {"k": k, "m": hard.m, "d": hard.d, "seed": seed})
    report.notes.append("non-existence is certified by the lemma chain, not by search")
    report.values.update({"rho_2d": hard.rho * (1 << hard.d), "max_v2": hard.max_v2})
    report.add("max-v2", hard.max_v2, V2_MAX_BOUND, "<=")
    report.add("chain", V2_MAX_BOUND + 1 + log_k, k, "<=")
    report.add("gain", hard.d - V2_MAX_BOUND, 1, ">=")

    # Beispielprofil: Spieler 2 gewinnt genau einen billigen Unterraum
    rng = np.random.default_rng(seed)
    b1 = _sample_grand_row(rng, hard.m, Fraction(k - hard.d))
    sub = cheap_subspace(hard, b1)
    report.add("grand-bundle-average", int(sub is not None), 1, "==")
    if sub is None:
        return report
    target = hard.rho * sub.size / 2
    lift = (target - sum((b1[j] for j in sub.items), ZERO)) / sub.size
    b2 = tuple(b1[j] + lift if sub.mask >> j & 1 else ZERO for j in range(hard.m))
    certificate = construct_deviation(hard, (b1, b2), TieBreak.ascending(2, hard.m))
    report.add("cover", len(certificate.cover), k - hard.d, "<=")
    report.add("deviation-bid", certificate.bid_sum, certificate.chain_bound, "<=")
    report.add("deviation-chain", certificate.chain_bound, certificate.certificate_bound, "<=")
    report.add("deviation-wins-all", int(certificate.wins_all), 1, "==")
    report.values.update({"deviation_bid_sum": certificate.bid_sum, "gain_bound": certificate.gain_bound})
    return report


# --- Orakel ---------------------------------------------------------------------

def check_oracles(prices: int, functions: int, seed: int = 0) -> BoundReport:
    """Structured v2 demand against exhaustive enumeration at k=2, then the additive
    under-approximation re-checked against every constraint on random subadditive functions."""
    hard = build_hard_instance(2)
    report = BoundReport("oracle-equivalence", {"prices": prices, "functions": functions, "seed": seed})
    rng = np.random.default_rng(seed)

    mismatches = 0
    for idx in range(prices):
        # kleiner Nenner erzeugt Gleichstände
        den = (3, Config.GENERATOR_DENOMINATOR)[idx % 2]
        row = tuple(Fraction(int(x), den) for x in rng.integers(0, 3 * den + 1, size=hard.m))
        structured = v2_demand_set(hard, row)
        exhaustive = demand_sets(hard.v2, row, DemandMode.ALL)
        mismatches += structured.utility != exhaustive.utility or structured.set not in exhaustive.sets
    report.add("oracle-mismatches", mismatches, 0, "==")

    infeasible = nonpositive = below = skipped = 0
    margin = None
    for _ in range(functions):
        kind = ("xos", "budgeted_additive", "coverage")[int(rng.integers(0, 3))]
        m = int(rng.integers(1, 6))
        v = generate(kind, {"m": m, "clauses": int(rng.integers(1, 4))}, int(rng.integers(0, 2 ** 31)))
        domain = mask_of(j for j in range(m) if v.value(1 << j) > 0)
        if not domain or not check_class(v, "subadditive").holds:
            skipped += 1
            continue
        approx = additive_underapprox(v.value, domain)
        sums = subset_sums(approx.as_row(m))
        t = domain
        while t:
            infeasible += sums[t] > v.value(t)
            t = (t - 1) & domain
        nonpositive += any(a <= 0 for a in approx.weights)
        bound = 1 / harmonic(len(approx.items))
        below += approx.ratio < bound
        margin = approx.ratio / bound if margin is None else min(margin, approx.ratio / bound)
    report.add("underapprox-infeasible", infeasible, 0, "==")
    report.add("underapprox-nonpositive", nonpositive, 0, "==")
    report.add("underapprox-ratio", below, 0, "==")
    report.values.update({"oracle_mismatches": mismatches, "checked_functions": functions - skipped,
                          "skipped": skipped, "worst_ratio_over_bound": margin})
    return report


# --- Konstruktionen --------------------------------------------------------------

@dataclass
class ExperimentResult:
    name: str
    report: BoundReport
    trace: Optional[Trace] = None

    def to_dict(self, detail: bool = False) -> dict:
        return {"name": self.name, **self.report.to_dict(detail)}


def _tightness_xos(eps: Fraction) -> ExperimentResult:
    instance = Instance((UnitDemand((ONE, ZERO, ZERO)),
                         UnitDemand((1 + eps, 1 + 2 * eps, 1 + 3 * eps)),
                         UnitDemand((ZERO, ZERO, ONE))), 3)
    initial = ((ZERO,) * 3, (1 + eps, ZERO, ZERO), (ZERO,) * 3)
    trace = run(instance, RunConfig((XOSUpdate(),) * 3, tie=TieBreak.descending(3, 3), steps=3, initial=initial))
    opt = compute_opt(instance)
    report = check_pointwise(trace, opt)
    report.theorem = "tightness-xos"
    report.params["eps"] = eps
    report.add("sw-final", trace.records[3].sw, 1 + 3 * eps, "==", 3)
    report.add("opt", opt.value, 3 + 2 * eps, "==")
    report.values["ratio"] = trace.records[3].sw / opt.value
    return ExperimentResult("tightness-xos", report, trace)


def _gross_underbidding(n: int, big: Fraction, eps: Fraction, steps: int) -> ExperimentResult:
    if n < 2 or steps * eps > 1:
        raise PreconditionViolated("gross underbidding needs n >= 2 and steps * eps <= 1")
    instance = Instance((Additive((big,)),) + tuple(Additive((ONE,)) for _ in range(n - 1)), 1)
    rounds = steps // n + 1
    strategies = (Hold(),) + tuple(Scripted([((n * (a - 1) + b) * eps,) for a in range(1, rounds + 1)])
                                   for b in range(1, n))
    schedule = Schedule.scripted(list(range(1, n)) + [0])
    trace = run(instance, RunConfig(strategies, schedule, steps=steps))
    opt = compute_opt(instance)

    report = BoundReport("gross-underbidding", {"n": n, "C": big, "eps": eps, "T": steps})
    report.add("opt", opt.value, big, "==")
    for r in trace.records[1:]:
        report.add("sw", r.sw, ONE, "==", r.t)
    alphas = [r.alpha for r in trace.records[1:] if r.bidder != 0 and r.alpha is not None]
    report.values.update({"opt": opt.value, "ratio": ONE / big, "alpha_min": min(alphas, default=None),
                          "alpha_min_all": measured_alpha(trace)})
    report.notes.append("scripted increments; the underbidding bidders are not claimed to best-respond")
    return ExperimentResult("gross-underbidding", report, trace)


def _gross_overbidding(n: int, big: Fraction, eps: Fraction) -> ExperimentResult:
    if n < 2:
        raise PreconditionViolated("gross overbidding needs n >= 2")
    instance = Instance((Additive((big,)),) + tuple(Additive((ONE,)) for _ in range(n - 1)), 1)
    strategies = (XOSUpdate(),) * (n - 1) + (Scripted([(big + eps,)]),)
    trace = run(instance, RunConfig(strategies, steps=10 * n, stop_on_fixed_point=True))
    opt = compute_opt(instance)
    final = trace.records[-1]

    report = BoundReport("gross-overbidding", {"n": n, "C": big, "eps": eps})
    report.add("opt", opt.value, big, "==")
    report.add("sw-final", final.sw, ONE, "==", final.t)
    report.add("fixed-point", int(is_pne(instance, trace.profile(trace.steps), trace.tie).is_pne), 1, "==")
    overbid = trace.records[n]
    report.add("grand-overbid", int(overbid.grand is False), 1, "==", overbid.t)
    report.values.update({"opt": opt.value, "stopped_at": final.t, "ratio": final.sw / opt.value})
    return ExperimentResult("gross-overbidding", report, trace)


def _adversarial_cycle(n: int, eps: Fraction, steps: int) -> ExperimentResult:
    if n < 3:
        raise PreconditionViolated("the adversarial cycle needs n >= 3")
    m = n - 1
    valuations = [UnitDemand(tuple(1 + eps for _ in range(m)))]
    valuations += [UnitDemand(tuple(ONE if j == i - 1 else ZERO for j in range(m))) for i in range(1, n)]
    instance = Instance(tuple(valuations), m)
    strategies = (PotentialProcedure([1 << j for j in range(m)], cycle=True),) + (XOSUpdate(),) * (n - 1)
    order = [x for i in range(1, n) for x in (0, i)]
    trace = run(instance, RunConfig(strategies, Schedule.scripted(order), steps=steps))
    opt = compute_opt(instance)

    report = BoundReport("adversarial-cycle", {"n": n, "m": m, "eps": eps, "T": steps})
    report.add("opt", opt.value, n - 1 + eps, "==")
    for r in trace.records[1:]:
        report.add("sw", r.sw, 1 + eps, "==", r.t)
    ratio = (1 + eps) / opt.value
    report.add("ratio", ratio, (1 + eps) / (n - 1), "<=")
    report.values.update({"opt": opt.value, "ratio": ratio})
    return ExperimentResult("adversarial-cycle", report, trace)


def mph3_instance(k: int) -> tuple[Instance, TieBreak, tuple[tuple[int, int], ...]]:
    """Bundle bidders 0..k-1, unit bidders k..2k+3 (one per item); returns the two bundles per bundle bidder."""
    if k < 3:
        raise PreconditionViolated("the MPH-3 construction needs k >= 3")
    m = k + 4
    a, b, c, e = k, k + 1, k + 2, k + 3
    bundles = [(mask_of((i, a, b)), mask_of((i, c, e))) for i in range(k - 1)]
    bundles.append((mask_of((k - 1, a, c)), mask_of((k - 1, b, e))))
    valuations = [MPH(m, 3, (((first, Fraction(3)),), ((second, Fraction(3)),))) for first, second in bundles]
    valuations += [Additive(tuple(ONE if j == item else ZERO for j in range(m))) for item in range(m)]

    units = list(range(k, k + m))
    lower = list(range(k - 2, -1, -1))
    orders = [list(range(k)) + units for _ in range(k)]
    orders += [[k - 1] + lower + units, lower + [k - 1] + units, lower + [k - 1] + units, [k - 1] + lower + units]
    return Instance(tuple(valuations), m), TieBreak(tuple(tuple(o) for o in orders)), tuple(bundles)


def _mph3(k: int, cycles: int) -> ExperimentResult:
    instance, tie, bundles = mph3_instance(k)
    n, m = instance.n, instance.m

    def row(mask):
        return tuple(ONE if mask >> j & 1 else ZERO for j in range(m))

    strategies = tuple(Scripted([row(first), row(second)], cycle=True) for first, second in bundles)
    strategies += tuple(Hold() for _ in range(m))
    initial = tuple(row(second) for _, second in bundles) + tuple(row(1 << j) for j in range(m))
    trace = run(instance, RunConfig(strategies, tie=tie, steps=cycles * n, initial=initial))
    opt = compute_opt(instance)

    report = BoundReport("mph3", {"k": k, "n": n, "m": m, "T": trace.steps})
    report.add("opt", opt.value, k + 4, "==")
    for r in trace.records[1:]:
        report.add("best-response", r.utilities[r.bidder], r.best_utility, "==", r.t)
    for r in trace.records:
        report.add("sw-upper", r.sw, 4, "<=", r.t)
        report.add("sw-lower", r.sw, 3, ">=", r.t)
    report.values.update({"opt": opt.value, "sw_values": sorted({r.sw for r in trace.records}),
                          "ratio_bound": Fraction(4, k + 4)})
    report.notes.append("priorities: bidder k first on items k+1 and k+4, bidders 1..k-1 (higher index first) "
                        "on items k+2 and k+3")
    return ExperimentResult("mph3", report, trace)


def _random_instance(kind: str, rng: np.random.Generator, n_range=(2, 5), m_range=(2, 8)) -> Instance:
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    m = int(rng.integers(m_range[0], m_range[1] + 1))
    params = {"m": m, "clauses": int(rng.integers(1, 5))}
    base = int(rng.integers(0, 2 ** 31))
    return Instance(tuple(generate(kind, params, base + i) for i in range(n)), m)


def _strong_initial_row(instance: Instance, i: int, rng: np.random.Generator) -> tuple[Fraction, ...]:
    """A scaled supporting clause on a random set: strong no-overbidding, usually not a best response."""
    v = instance.valuations[i]
    s = int(rng.integers(0, instance.full_mask + 1))
    clause = v.supporting_clause(s) if s else None
    if clause is None:
        return tuple(ZERO for _ in range(instance.m))
    share = Fraction(int(rng.integers(0, 11)), 10)
    return tuple(x * share for x in clause)


def _suite(name: str, count: int, seed: int, build: Callable) -> BoundReport:
    report = BoundReport(name, {"count": count, "seed": seed})
    rng = np.random.default_rng(seed)
    alphas, betas, ratios, skipped = [], [], [], 0
    for idx in range(count):
        scope = f"instance {idx + 1}"
        sub = build(rng, scope)
        if sub is None:
            skipped += 1
            continue
        report.absorb(sub, scope)
        alphas.append(sub.params.get("alpha"))
        betas.append(sub.params.get("beta"))
        if sub.values.get("worst_ratio") is not None:
            ratios.append(sub.values["worst_ratio"])
    report.values.update({"alpha_min": min((a for a in alphas if a is not None), default=None),
                          "beta_max": max((b for b in betas if b is not None), default=None),
                          "worst_ratio": min(ratios, default=None), "skipped": skipped})
    return report


def _pointwise_job(kind_of: Callable, strategy: Callable, lazy: bool = False, initial: bool = False):
    def build(rng, scope):
        instance = _random_instance(kind_of(rng), rng)
        start = None
        if initial:
            start = tuple(_strong_initial_row(instance, i, rng) for i in range(instance.n))
        trace = run(instance, RunConfig(tuple(strategy() for _ in range(instance.n)), lazy=lazy, initial=start))
        try:
            return check_pointwise(trace, compute_opt(instance))
        except NonQualifyingTrace as exc:
            if lazy:
                logger.info("%s skipped: %s", scope, exc.message)
                return None
            raise
    return build


def _aggressive_job(rng, scope):
    instance = _random_instance(_subadditive_kind(rng), rng)
    n = instance.n
    trace = run(instance, RunConfig(tuple(SubadditiveAggressive() for _ in range(n)), steps=2 * n))
    opt = compute_opt(instance)
    report = check_average(trace, opt)
    beta = report.params["beta"]
    report.add("beta-harmonic", beta, harmonic(instance.m), "<=")
    lemmas = check_lemmas(trace, opt, report.params["alpha"], beta)
    report.checks.extend(lemmas.checks)
    return report


def _subadditive_kind(rng) -> str:
    return ("budgeted_additive", "coverage")[int(rng.integers(0, 2))]


def _random_activation(n: int, m: int, trials: int, seed: int) -> ExperimentResult:
    instance = Instance(tuple(generate("xos", {"m": m, "clauses": 3}, seed + i) for i in range(n)), m)
    report = monte_carlo_random_activation(instance, RunConfig((XOSUpdate(),) * n, steps=n), trials, seed)
    return ExperimentResult("random-activation", report)


def _hard(k: int):
    def job(samples: int, steps: int, seed: int) -> ExperimentResult:
        report, trace = check_hard_instance(k, samples, steps, seed)
        return ExperimentResult(f"hard-instance-k{k}", report, trace)
    return job


_EPS = Config.DEFAULT_EPSILON

EXPERIMENTS: dict[str, tuple[Callable, dict]] = {
    "tightness-xos": (_tightness_xos, {"eps": "1/1000"}),
    "gross-underbidding": (_gross_underbidding, {"n": 3, "big": 10, "eps": _EPS, "steps": 30}),
    "gross-overbidding": (_gross_overbidding, {"n": 3, "big": 10, "eps": _EPS}),
    "adversarial-cycle": (_adversarial_cycle, {"n": 6, "eps": _EPS, "steps": 100}),
    "mph3": (_mph3, {"k": 5, "cycles": 3}),
    "hard-instance-k2": (_hard(2), {"samples": Config.HARD_INSTANCE_SAMPLES, "steps": 40, "seed": 0}),
    "hard-instance-k4": (_hard(4), {"samples": Config.HARD_INSTANCE_SAMPLES, "steps": 40, "seed": 0}),
    "hard-instance-k8": (_hard(8), {"samples": Config.HARD_INSTANCE_SAMPLES, "steps": 40, "seed": 0}),
    "no-pne-lemmas": (lambda k, seed: ExperimentResult("no-pne-lemmas", check_no_pne(k, seed)), {"k": 8, "seed": 0}),
    "oracle-equivalence": (lambda prices, functions, seed: ExperimentResult(
        "oracle-equivalence", check_oracles(prices, functions, seed)), {"prices": 1000, "functions": 200, "seed": 0}),
    "lazy-xos": (lambda count, seed: ExperimentResult("lazy-xos", _suite(
        "lazy-xos", count, seed, _pointwise_job(lambda rng: "xos", XOSUpdate, lazy=True, initial=True))),
        {"count": 100, "seed": 0}),
    "xos-suite": (lambda count, seed: ExperimentResult("xos-suite", _suite(
        "xos-suite", count, seed, _pointwise_job(lambda rng: "xos", XOSUpdate))),
        {"count": 200, "seed": 0}),
    "subadditive-suite": (lambda count, seed: ExperimentResult("subadditive-suite", _suite(
        "subadditive-suite", count, seed, _pointwise_job(_subadditive_kind, SubadditiveNoOverbid))),
        {"count": 100, "seed": 0}),
    "aggressive-suite": (lambda count, seed: ExperimentResult("aggressive-suite", _suite(
        "aggressive-suite", count, seed, _aggressive_job)),
        {"count": 100, "seed": 0}),
    "random-activation": (_random_activation, {"n": 4, "m": 6, "trials": Config.MONTE_CARLO_TRIALS, "seed": 0}),
}

_RATIONAL_PARAMS = {"eps", "big"}


def _resolve_params(name: str, defaults: dict, params: Optional[dict]) -> dict:
    resolved = dict(defaults)
    for key, raw in (params or {}).items():
        if key not in defaults:
            raise ScenarioError(f"experiment {name} has no parameter {key!r}", field=key)
        resolved[key] = raw
    try:
        return {key: parse_rational(v) if key in _RATIONAL_PARAMS else int(v) for key, v in resolved.items()}
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad value for a parameter of {name}: {exc}") from exc


def run_named_experiment(name: str, params: dict = None) -> ExperimentResult:
    if name not in EXPERIMENTS:
        raise UnknownExperiment(name)
    func, defaults = EXPERIMENTS[name]
    resolved = _resolve_params(name, defaults, params)
    logger.info("experiment %s started with %s", name, resolved)
    result = func(**resolved)
    result.report.params.setdefault("experiment", name)
    logger.info("experiment %s finished: %s", name, "pass" if result.report.passed else "FAIL")
    return result


def _run_job(name: str) -> dict:
    return run_named_experiment(name).to_dict()


def run_all_experiments(workers: int = None, names=None) -> list[dict]:
    """Every named experiment with its defaults; reports come back in name order."""
    names = list(EXPERIMENTS) if names is None else list(names)
    workers = Config.WORKERS if workers is None else workers
    if workers <= 1:
        return [_run_job(name) for name in names]
    with Pool(workers) as pool:
        return pool.map(_run_job, names)
