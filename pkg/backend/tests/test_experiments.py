# tests/test_experiments.py
from dataclasses import replace
from fractions import Fraction

import pytest

from auction_lab.core import Instance
from auction_lab.dynamics import RunConfig, Schedule, run
from auction_lab.errors import (NonQualifyingTrace, PreconditionViolated, ScenarioError, SizeGuardExceeded,
                                UnknownExperiment)
from auction_lab.experiments import (EXPERIMENTS, BoundReport, check_average, check_hard_instance, check_homogeneity,
                                     check_lemmas, check_no_pne, check_pointwise, compute_opt, measured_alpha,
                                     mph3_instance, run_all_experiments, run_named_experiment)
from auction_lab.strategies import Hold, XOSUpdate
from auction_lab.valuations import Additive

F = Fraction


@pytest.fixture
def tightness_trace(tightness_xos):
    return run(tightness_xos.instance, tightness_xos.config)


def test_compute_opt(tightness_xos):
    opt = compute_opt(tightness_xos.instance)
    assert opt.value == F(3002, 1000)
    assert opt.bundle_value(tightness_xos.instance, range(3)) == opt.value
    assert opt.to_dict()["value"] == "1501/500"


def test_compute_opt_size_guard():
    instance = Instance(tuple(Additive((F(1),) * 15) for _ in range(3)), 15)
    with pytest.raises(SizeGuardExceeded):
        compute_opt(instance)


# Die punktweise Schranke gilt auf der Golden-Trace, inklusive aller Lemmata
def test_pointwise_on_tightness(tightness_trace, tightness_xos):
    report = check_pointwise(tightness_trace, compute_opt(tightness_xos.instance))
    assert report.passed
    assert report.params["alpha"] == 1
    assert report.params["beta"] == 1
    assert report.values["factor"] == F(1, 3)
    assert report.values["first_checked"] == 3
    assert report.values["worst_ratio"] == F(1003, 3002)
    assert {"sw", "aux", "initial-high", "initial-low", "aux-variant", "declared-vs-actual"} <= set(report.counts())


def test_average_and_lemmas_on_tightness(tightness_trace, tightness_xos):
    opt = compute_opt(tightness_xos.instance)
    assert check_average(tightness_trace, opt).passed
    lemmas = check_lemmas(tightness_trace, opt)
    assert lemmas.passed
    initial_low = [c for c in lemmas.checks if c.name == "initial-low"]
    assert initial_low[0].left == F(3007, 1000)
    assert initial_low[0].right == F(3002, 1000)


def test_bound_report_records_failures():
    report = BoundReport("demo")
    report.add("ok", 2, 1)
    report.add("bad", 1, 2, ">=", t=4)
    assert not report.passed
    assert [c.name for c in report.failures] == ["bad"]
    assert report.counts() == {"ok": [1, 0], "bad": [1, 1]}
    payload = report.to_dict()
    assert payload["failed"] == 1
    assert payload["failures"][0] == {"name": "bad", "left": "1", "relation": ">=", "right": "2", "holds": False,
                                      "t": 4}
    assert "FAIL" in report.table()


# Nicht qualifizierende Traces werden abgelehnt statt falsch bewertet
def test_non_qualifying_traces():
    instance = Instance((Additive((F(1),)), Additive((F(1),))), 1)
    opt = compute_opt(instance)
    short = run(instance, RunConfig((XOSUpdate(), XOSUpdate()), steps=1))
    with pytest.raises(NonQualifyingTrace):
        check_pointwise(short, opt)
    scripted = run(instance, RunConfig((XOSUpdate(), XOSUpdate()), Schedule.scripted([1, 0]), steps=4))
    with pytest.raises(NonQualifyingTrace):
        check_pointwise(scripted, opt)
    # bei beliebiger Reihenfolge greifen die Max-Varianten
    lemmas = check_lemmas(scripted, opt)
    assert lemmas.passed
    assert "max-low" in lemmas.counts()
    lazy = run(instance, RunConfig((XOSUpdate(), XOSUpdate()), steps=2, lazy=True))
    with pytest.raises(NonQualifyingTrace):
        check_pointwise(lazy, opt)


def test_measured_alpha_defaults_to_one():
    instance = Instance((Additive((F(0),)),), 1)
    trace = run(instance, RunConfig((XOSUpdate(),), steps=2))
    assert measured_alpha(trace) == 1


def test_homogeneity(tightness_xos):
    report = check_homogeneity(tightness_xos.instance, tightness_xos.config, F(3))
    assert report.passed
    assert report.values["verdicts"] == [True, True]


# Enge Instanz: SW landet bei 1+3eps, OPT ist 3+2eps
def test_tightness_experiment():
    result = run_named_experiment("tightness-xos")
    assert result.report.passed
    assert result.report.values["ratio"] == F(1003, 3002)
    assert result.trace.records[-1].winners == (2, 2, 1)


def test_gross_underbidding_and_overbidding():
    under = run_named_experiment("gross-underbidding", {"steps": "9"})
    assert under.report.passed
    assert under.report.values["ratio"] == F(1, 10)
    over = run_named_experiment("gross-overbidding")
    assert over.report.passed
    assert over.report.values["stopped_at"] == 4


def test_adversarial_cycle():
    result = run_named_experiment("adversarial-cycle", {"n": "4", "steps": "24"})
    assert result.report.passed
    assert result.report.values["opt"] == 3 + F(1, 100)


def test_mph3_construction():
    instance, tie, bundles = mph3_instance(5)
    assert instance.n == 14
    assert instance.m == 9
    assert len(bundles) == 5
    result = run_named_experiment("mph3", {"cycles": "2"})
    assert result.report.passed
    assert set(result.report.values["sw_values"]) <= {3, 4}


def test_hard_instance_k2():
    report, trace = check_hard_instance(2, samples=20, steps=10)
    assert report.passed
    assert report.values["opt"] == F(11, 3)
    assert trace.steps == 10


def test_hard_instance_k8_limited():
    report, trace = check_hard_instance(8, samples=50, subspace_limit=500)
    assert report.passed, report.table()
    assert trace is None
    assert report.values["subspaces"] == 97155
    assert report.values["per_item_subspaces"] == [11811]
    assert report.values["max_v2"] == F(992, 255)
    assert report.values["rho_2d"] == F(1024, 255)
    assert any("first 500 subspaces" in note for note in report.notes)


def test_no_pne_certificates():
    report = check_no_pne(8)
    assert report.passed
    assert report.values["gain_bound"] == 1


def test_suites_with_small_counts():
    for name in ("xos-suite", "lazy-xos", "subadditive-suite", "aggressive-suite"):
        result = run_named_experiment(name, {"count": "3", "seed": "1"})
        assert result.report.passed, result.report.table()


# Strukturiertes Orakel und Unterapproximation auf kleinen Stichproben
def test_oracle_equivalence_small():
    result = run_named_experiment("oracle-equivalence", {"prices": "60", "functions": "20", "seed": "3"})
    assert result.report.passed, result.report.table()
    assert result.report.values["oracle_mismatches"] == 0
    assert result.report.values["checked_functions"] > 0
    assert result.report.values["worst_ratio_over_bound"] >= 1


def test_random_activation_small():
    result = run_named_experiment("random-activation", {"n": "2", "m": "3", "trials": "40"})
    checks = {c.name: c for c in result.report.checks}
    assert checks["mean-sw"].holds
    assert checks["max-low-failures"].holds
    assert result.report.params["T"] == 2


def test_experiment_registry_errors():
    with pytest.raises(UnknownExperiment):
        run_named_experiment("table-9")
    with pytest.raises(ScenarioError):
        run_named_experiment("tightness-xos", {"delta": "1"})
    with pytest.raises(ScenarioError):
        run_named_experiment("tightness-xos", {"eps": "0.1"})
    assert "hard-instance-k8" in EXPERIMENTS


def test_run_all_subset():
    reports = run_all_experiments(workers=1, names=["tightness-xos", "gross-overbidding"])
    assert [r["name"] for r in reports] == ["tightness-xos", "gross-overbidding"]
    assert all(r["passed"] for r in reports)


def test_homogeneity_rejects_scripted(tightness_xos):
    config = replace(tightness_xos.config, strategies=(Hold(),) * 3)
    with pytest.raises(PreconditionViolated):
        check_homogeneity(tightness_xos.instance, config, F(2))
