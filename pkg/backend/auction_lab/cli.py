"""Command line: `flask auction ...` or `python run.py ...`.

Exit codes: 0 success, 1 a checked bound or trace failed, 2 invalid input.
Errors are printed to stdout as `{"error": ...}` JSON.
"""
import functools
import json
import logging
from pathlib import Path

import click
from flask import Blueprint, current_app

from .dynamics import run, validate_trace
from .errors import AuctionLabError, ScenarioError
from .experiments import (EXPERIMENTS, BoundReport, check_average, check_lemmas, check_pointwise, compute_opt,
                          run_all_experiments, run_named_experiment)
from .schemas import load_trace, parse_scenario
from .strategies import check_safety

bp = Blueprint("cli", __name__, cli_group="auction")
logger = logging.getLogger(__name__)

THEOREMS = ("pointwise", "average", "lemmas", "safety")


def _emit(payload: dict):
    click.echo(json.dumps(payload))


def _guarded(func):
    """Library errors become a JSON payload plus the matching exit code."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except AuctionLabError as exc:
            logger.info("%s aborted: %s", func.__name__, exc.message)
            _emit(exc.to_dict())
            click.get_current_context().exit(exc.exit_code)
    return wrapper


def _locate(raw: str) -> Path:
    """Relative paths that do not exist are looked up in the fixtures directory."""
    path = Path(raw)
    if not path.exists() and not path.is_absolute():
        candidate = Path(current_app.config["FIXTURES_DIR"]) / path
        if candidate.exists():
            return candidate
    return path


def _parse_params(pairs) -> dict:
    params = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise ScenarioError(f"parameter {pair!r} is not of the form key=value", field="param")
        params[key.strip()] = value.strip()
    return params


def _write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")


@bp.cli.command("run")
@click.option("--scenario", "scenario_path", required=True, help="Scenario JSON file.")
@click.option("--trace", "trace_path", default=None, help="Write the JSON-lines trace here.")
@click.option("--summary", "summary_path", default=None, help="Write the per-step CSV summary here.")
@_guarded
def run_command(scenario_path, trace_path, summary_path):
    """Simulate the dynamics of a scenario."""
    scenario = parse_scenario(_locate(scenario_path))
    trace = run(scenario.instance, scenario.config)

    trace_path = trace_path or scenario.trace_path
    summary_path = summary_path or scenario.summary_path
    if trace_path and not summary_path:
        summary_path = str(Path(trace_path).with_suffix(".csv"))
    if trace_path:
        trace.write_jsonl(trace_path)
    if summary_path:
        trace.write_summary(summary_path)

    last = trace.records[-1]
    _emit({
        "defaults": scenario.defaults(),
        "steps": trace.steps,
        "final_sw": str(last.sw),
        "final_dw": str(last.dw),
        "trace": trace_path,
        "summary": summary_path,
    })


def _safety_report(trace) -> BoundReport:
    safety = check_safety(trace)
    report = BoundReport("safety", {"n": trace.n, "T": trace.steps})
    report.values.update(safety.to_dict())
    report.add("beta-feasible", int(safety.feasible), 1, "==")
    return report


@bp.cli.command("verify")
@click.option("--trace", "trace_path", required=True, help="JSON-lines trace written by `run`.")
@click.option("--theorem", type=click.Choice(THEOREMS), default="pointwise", show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Print the full report as JSON instead of a table.")
@_guarded
def verify_command(trace_path, theorem, as_json):
    """Replay a trace and check a bound or the lemmas on it."""
    trace = load_trace(_locate(trace_path))
    validation = validate_trace(trace)

    if theorem == "safety":
        report = _safety_report(trace)
    else:
        opt = compute_opt(trace.instance)
        check = {"pointwise": check_pointwise, "average": check_average, "lemmas": check_lemmas}[theorem]
        report = check(trace, opt)
    report.values["validated_steps"] = validation.steps

    if as_json:
        _emit(report.to_dict(detail=True))
    else:
        click.echo(report.table())
    if not report.passed:
        first = report.failures[0]
        _emit({"error": f"{report.theorem} violated", "step": first.t, "failures": len(report.failures),
               "first": first.to_dict()})
        click.get_current_context().exit(1)


@bp.cli.command("reproduce")
@click.option("--name", default=None, help="Named experiment, see `list`.")
@click.option("--param", "params", multiple=True, help="Override a default, key=value.")
@click.option("--all", "run_all", is_flag=True, help="Run every named experiment with its defaults.")
@click.option("--workers", type=int, default=None, help="Worker processes for --all.")
@click.option("--report", "report_path", default=None, help="Write the JSON report here.")
@click.option("--trace", "trace_path", default=None, help="Write the experiment's trace here, if it has one.")
@click.option("--json", "as_json", is_flag=True, help="Print the full report as JSON instead of a table.")
@_guarded
def reproduce_command(name, params, run_all, workers, report_path, trace_path, as_json):
    """Run a named construction or suite and check its expected values."""
    if run_all == (name is not None):
        raise ScenarioError("give either --name or --all", field="name")

    if run_all:
        reports = run_all_experiments(workers or current_app.config["WORKERS"])
        if report_path:
            _write_json(report_path, reports)
        failed = [r["name"] for r in reports if not r["passed"]]
        for r in reports:
            click.echo(f"{r['name']:<22} {'PASS' if r['passed'] else 'FAIL'}  ({r['checked']} checks)")
        if failed:
            _emit({"error": "experiments failed", "failed": failed})
            click.get_current_context().exit(1)
        return

    result = run_named_experiment(name, _parse_params(params))
    if report_path:
        _write_json(report_path, result.to_dict(detail=True))
    if trace_path and result.trace is not None:
        result.trace.write_jsonl(trace_path)
    if as_json:
        _emit(result.to_dict())
    else:
        click.echo(result.report.table())
    if not result.report.passed:
        first = result.report.failures[0]
        _emit({"error": f"{name} failed", "step": first.t, "first": first.to_dict()})
        click.get_current_context().exit(1)


@bp.cli.command("list")
def list_command():
    """Named experiments and their default parameters."""
    for name, (_, defaults) in EXPERIMENTS.items():
        click.echo(f"{name:<22} " + " ".join(f"{k}={v}" for k, v in defaults.items()))


def main(argv=None) -> int:
    from . import create_app

    app = create_app()
    with app.app_context():
        try:
            code = bp.cli.main(args=argv, prog_name="auction", standalone_mode=False)
        except click.ClickException as exc:
            exc.show()
            return exc.exit_code
        except click.exceptions.Abort:
            return 1
    return code or 0
