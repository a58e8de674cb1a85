"""
otflow command line.

Every subcommand takes either a run config (--config) or separate parameter
and metric files (--params, --metric), evaluates each metric of the run
(one metric or a sweep) and writes one canonical JSON document.
"""
from __future__ import annotations

import functools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import click
import numpy as np

from otflow import __version__, config
from otflow.errors import EXIT_CONFIG, EXIT_STRICT, ConfigError, OTFlowError
from otflow.exact import max_norm, to_complex
from otflow.exterior import hermitian_coefficients, hermitian_form
from otflow.flow import (
    FlowState,
    chern_ricci_trace,
    convergence_report,
    generalized_flow,
    integrate_pluriclosed,
    write_trace_csv,
)
from otflow.hermitian import (
    HermitianMetric,
    bismut_ricci_11,
    bismut_ricci_matrix,
    chern_ricci,
    chern_ricci_matrix,
    classify_pluriclosed,
    is_pluriclosed,
    ot_bismut_ricci_matrix,
    semidirect_chern_ricci_closed_form,
)
from otflow.lie_core import StructureConstants, check_integrability, validate_algebra
from otflow.ot_model import (
    ConditionFlags,
    OTParams,
    admissible_off_diagonal_indices,
    admits_pluriclosed_metric,
    build_ot_algebra,
    build_semidirect,
)
from otflow.schemas import (
    MetricSpec,
    OTParamsSpec,
    RunConfig,
    complex_rows,
    dumps,
    load_run_config,
    parse_model,
    parse_params,
    read_json,
)
from otflow.soliton import (
    classify_chern_ricci_soliton,
    classify_pluriclosed_soliton,
    detect_algebraic_soliton,
    theorem_lauret_equivalence_check,
)

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


@dataclass
class Algebra:
    sc: StructureConstants
    ot: Optional[OTParams] = None
    flags: Optional[ConditionFlags] = None


@dataclass
class RunResult:
    payload: Dict[str, Any]
    negative: bool = False
    artifacts: List[Path] = field(default_factory=list)


def build_algebra(run: RunConfig) -> Algebra:
    if isinstance(run.params, OTParamsSpec):
        p = run.params.to_params()
        return Algebra(build_ot_algebra(p, run.exact), ot=p)
    sc, flags = build_semidirect(run.params.to_params(), exact=run.exact)
    return Algebra(sc, flags=flags)


def _metric(spec: MetricSpec, algebra: Algebra, exact: bool) -> HermitianMetric:
    return spec.to_metric(algebra.sc.n_h, exact)


def _classify(run: RunConfig, algebra: Algebra, spec: MetricSpec) -> Tuple[dict, bool]:
    metric = _metric(spec, algebra, run.exact)
    result = classify_pluriclosed(algebra.ot, metric)
    oracle = is_pluriclosed(algebra.sc, metric)
    entry = result.to_dict()
    entry.update({"oracle": oracle, "agrees": oracle == result.pluriclosed})
    return entry, not result.pluriclosed


def _curvature(run: RunConfig, algebra: Algebra, spec: MetricSpec) -> Tuple[dict, bool]:
    metric = _metric(spec, algebra, run.exact)
    if run.which == "chern":
        coeffs = chern_ricci_matrix(algebra.sc, metric)
    else:
        coeffs = bismut_ricci_matrix(algebra.sc, metric)
    entry = {
        "which": run.which,
        "matrix": complex_rows(coeffs),
        "form": hermitian_form(coeffs).render(algebra.sc.n_h),
    }
    closed = None
    if run.which == "bismut" and algebra.ot is not None and algebra.ot.admissible:
        try:
            closed = ot_bismut_ricci_matrix(algebra.ot, metric)
        except OTFlowError as exc:
            entry["closed_form"] = f"not applicable: {exc}"
    elif run.which == "chern" and algebra.flags is not None:
        closed = hermitian_coefficients(semidirect_chern_ricci_closed_form(run.params.to_params()))
    if closed is not None:
        defect = max_norm(to_complex(coeffs) - to_complex(closed))
        entry["closed_form_defect"] = defect
        return entry, defect > config.settings.tol
    return entry, False


def _soliton(run: RunConfig, algebra: Algebra, spec: MetricSpec) -> Tuple[dict, bool]:
    metric = _metric(spec, algebra, run.exact)
    if run.flow.flow == "chern-ricci":
        rho = chern_ricci(algebra.sc, metric)
    else:
        rho = bismut_ricci_11(algebra.sc, metric)
    cert = detect_algebraic_soliton(algebra.sc, metric, rho)
    entry: Dict[str, Any] = {
        "flow": run.flow.flow,
        "soliton": cert is not None,
        "certificate": cert.to_dict() if cert is not None else None,
    }
    if algebra.ot is not None:
        shape = classify_chern_ricci_soliton if run.flow.flow == "chern-ricci" else classify_pluriclosed_soliton
        entry["shape_test"] = shape(algebra.ot, metric)
    if run.flow.flow == "chern-ricci":
        entry["criteria"] = theorem_lauret_equivalence_check(algebra.sc, metric, rho).to_dict()
    return entry, cert is None


def _flow(run: RunConfig, algebra: Algebra, spec: MetricSpec, index: int, total: int) -> Tuple[dict, bool]:
    metric = _metric(spec, algebra, False)
    controls = run.flow.controls()
    which = run.flow.flow
    if which == "pluriclosed":
        trace = integrate_pluriclosed(FlowState.from_metric(metric), algebra.ot, run.flow.t_max, controls)
    elif which == "chern-ricci":
        trace = chern_ricci_trace(algebra.sc, metric, run.flow.t_max, controls)
    else:
        params = algebra.ot if algebra.ot is not None else run.params.to_params()
        trace = generalized_flow(algebra.sc, metric, run.flow.t_max, controls,
                                 closed_form=run.flow.closed_form, flags=algebra.flags, params=params)
    report = convergence_report(trace, metric)
    entry = {
        "flow": which,
        "t_max": run.flow.t_max,
        "samples": len(trace.times),
        "max_residual": float(np.max(trace.residuals)),
        "report": report.to_dict(),
        "final_metric": MetricSpec.from_matrix(trace.final, trace.n_h).model_dump(mode="json", exclude_none=True),
    }
    if trace.closed_form_residuals is not None:
        checked = trace.closed_form_residuals[~np.isnan(trace.closed_form_residuals)]
        entry["closed_form_residual"] = float(np.max(checked)) if checked.size else None
    if run.output.csv_path:
        path = Path(run.output.csv_path)
        if total > 1:
            path = path.with_name(f"{path.stem}_{index + 1}{path.suffix}")
        write_trace_csv(trace, path)
        entry["csv"] = str(path)
    return entry, not report.passed


def _report(run: RunConfig, algebra: Algebra, spec: MetricSpec) -> Tuple[dict, bool]:
    metric = _metric(spec, algebra, run.exact)
    entry: Dict[str, Any] = {
        "chern_ricci": complex_rows(chern_ricci_matrix(algebra.sc, metric)),
        "bismut_ricci": complex_rows(bismut_ricci_matrix(algebra.sc, metric)),
        "pluriclosed": is_pluriclosed(algebra.sc, metric),
    }
    if algebra.ot is not None:
        entry["classification"] = classify_pluriclosed(algebra.ot, metric).to_dict()
    solitons = {}
    for name, rho in (("chern-ricci", chern_ricci(algebra.sc, metric)),
                      ("pluriclosed", bismut_ricci_11(algebra.sc, metric))):
        cert = detect_algebraic_soliton(algebra.sc, metric, rho)
        solitons[name] = cert.to_dict() if cert is not None else None
    entry["solitons"] = solitons
    return entry, False


def _algebra_summary(run: RunConfig, algebra: Algebra) -> Tuple[dict, bool]:
    report = validate_algebra(algebra.sc)
    summary: Dict[str, Any] = {"validation": report.to_dict(), "integrable": check_integrability(algebra.sc)}
    if algebra.ot is not None:
        p = algebra.ot
        summary["admits_pluriclosed_metric"] = admits_pluriclosed_metric(p)
        if p.admissible:
            summary["admissible_off_diagonal"] = [q + 1 for q in admissible_off_diagonal_indices(p)]
            if p.permutation is not None:
                summary["permutation"] = [q + 1 for q in p.permutation]
    if algebra.flags is not None:
        summary["conditions"] = algebra.flags.to_dict()
    return summary, not report.passed


def _sweep(run: RunConfig, evaluate: Callable[[int, MetricSpec], Tuple[dict, bool]],
           jobs: int) -> Tuple[List[dict], bool]:
    metrics = run.metrics
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        outcomes = list(pool.map(lambda item: evaluate(*item), enumerate(metrics)))
    results = []
    for k, (entry, _) in enumerate(outcomes):
        results.append({"index": k + 1, **entry})
    return results, any(negative for _, negative in outcomes)


def run(run_config: RunConfig, jobs: Optional[int] = None) -> RunResult:
    """Execute one run config and return its JSON payload; writes CSV traces for flows."""
    jobs = config.settings.jobs if jobs is None else jobs
    algebra = build_algebra(run_config)
    summary, negative = _algebra_summary(run_config, algebra)
    payload: Dict[str, Any] = {
        "command": run_config.command,
        "version": __version__,
        "params": run_config.params.model_dump(mode="json", by_alias=True, exclude_none=True),
        "exact": run_config.exact,
        **summary,
    }
    command = run_config.command
    total = len(run_config.metrics)
    evaluators: Dict[str, Callable[[int, MetricSpec], Tuple[dict, bool]]] = {
        "classify-pluriclosed": lambda k, m: _classify(run_config, algebra, m),
        "curvature": lambda k, m: _curvature(run_config, algebra, m),
        "soliton": lambda k, m: _soliton(run_config, algebra, m),
        "flow": lambda k, m: _flow(run_config, algebra, m, k, total),
        "report": lambda k, m: _report(run_config, algebra, m),
    }
    if command in evaluators:
        results, sweep_negative = _sweep(run_config, evaluators[command], jobs)
        payload["results"] = results
        negative = negative or sweep_negative
    artifacts = [Path(r["csv"]) for r in payload.get("results", []) if "csv" in r]
    logger.info("run finished command=%s metrics=%d negative=%s", command, total, negative)
    return RunResult(payload, negative, artifacts)


# --- click surface ------------------------------------------------------------------------------


def handle_errors(func):
    """Map OTFlowError subclasses to their exit codes."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return func(*args, **kwargs)
        except OTFlowError as exc:
            logger.error("%s: %s", type(exc).__name__, exc)
            click.echo(f"error: {exc}", err=True)
            ctx.exit(exc.exit_code)

    return wrapper


def run_options(func):
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False),
                     help="Run config JSON; command-line options override its fields."),
        click.option("--params", "params_path", type=click.Path(dir_okay=False),
                     help="OT or semidirect parameter JSON."),
        click.option("--metric", "metric_path", type=click.Path(dir_okay=False), help="Metric JSON."),
        click.option("--exact", is_flag=True, help="Gaussian rational arithmetic."),
        click.option("--strict", is_flag=True, help="Exit 1 on a negative result."),
        click.option("--jobs", type=click.IntRange(min=1), default=None, help="Workers for sweeps."),
        click.option("--json-out", type=click.Path(dir_okay=False), default=None,
                     help="Write JSON here instead of stdout."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _assemble(command: str, config_path: Optional[str], params_path: Optional[str],
              metric_path: Optional[str], extra: Dict[str, Any]) -> RunConfig:
    overrides: Dict[str, Any] = {"command": command}
    if params_path:
        overrides["params"] = parse_params(read_json(params_path), params_path).model_dump(
            mode="json", by_alias=True)
    if metric_path:
        overrides["metric"] = parse_model(MetricSpec, read_json(metric_path), metric_path).model_dump(
            mode="json", exclude_none=True)
    if config_path:
        return load_run_config(config_path, {**extra, **overrides})
    if "params" not in overrides:
        raise ConfigError("either --config or --params is required")
    return parse_model(RunConfig, {**extra, **overrides}, "command line")


def _emit(ctx: click.Context, result: RunResult, json_out: Optional[str], strict: bool) -> None:
    text = dumps(result.payload)
    if json_out:
        Path(json_out).write_text(text, encoding="utf-8")
        logger.info("wrote json path=%s", json_out)
    else:
        click.echo(text, nl=False)
    if strict and result.negative:
        ctx.exit(EXIT_STRICT)


def _execute(ctx: click.Context, command: str, config_path, params_path, metric_path,
             exact, strict, jobs, json_out, **fields) -> None:
    extra: Dict[str, Any] = {k: v for k, v in fields.items() if v is not None and k not in ("flow", "output")}
    for group in ("flow", "output"):
        values = {k: v for k, v in (fields.get(group) or {}).items() if v is not None}
        if values:
            extra[group] = values
    if exact:
        extra["exact"] = True
    if strict:
        extra["strict"] = True
    run_config = _assemble(command, config_path, params_path, metric_path, extra)
    result = run(run_config, jobs)
    _emit(ctx, result, json_out or run_config.output.json_path, run_config.strict)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
@click.version_option(__version__, prog_name="otflow")
@click.pass_context
def main(ctx: click.Context, verbose: bool) -> None:
    """Hermitian curvature flows on Oeljeklaus-Toma type Lie algebras.

    \b
    Exit codes:
      0  success
      1  negative result under --strict (validation failed, not pluriclosed,
         no soliton, or a convergence condition failed)
      2  usage error
      3  malformed or incomplete JSON input
      4  metric not Hermitian or not positive definite
      5  parameter or structure error, including failed algebra validation
      6  flow integration failure
    """
    try:
        config.settings = config.get_settings()
    except ValueError as exc:
        click.echo(f"error: invalid OTFLOW_* setting: {exc}", err=True)
        ctx.exit(EXIT_CONFIG)
    level = "DEBUG" if verbose else config.settings.log_level.upper()
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


@main.command()
@run_options
@click.pass_context
@handle_errors
def validate(ctx, **options):
    """Check the Lie algebra axioms and report the admissibility data."""
    _execute(ctx, "validate", **options)


@main.command("classify-pluriclosed")
@run_options
@click.pass_context
@handle_errors
def classify_pluriclosed_command(ctx, **options):
    """Decide whether each metric is pluriclosed, with the del-delbar oracle alongside."""
    _execute(ctx, "classify-pluriclosed", **options)


@main.command()
@run_options
@click.option("--which", type=click.Choice(["chern", "bismut"]), default=None)
@click.pass_context
@handle_errors
def curvature(ctx, **options):
    """Chern-Ricci or Bismut-Ricci (1,1) form of each metric."""
    _execute(ctx, "curvature", **options)


@main.command()
@run_options
@click.option("--flow", "flow_name", type=click.Choice(["chern-ricci", "pluriclosed"]), default=None)
@click.pass_context
@handle_errors
def soliton(ctx, flow_name, **options):
    """Search for an algebraic soliton certificate."""
    _execute(ctx, "soliton", flow={"flow": flow_name}, **options)


@main.command()
@run_options
@click.option("--flow", "flow_name", type=click.Choice(["chern-ricci", "pluriclosed", "generalized"]),
              default=None)
@click.option("--t-max", type=click.FloatRange(min=0, min_open=True), default=None)
@click.option("--rtol", type=click.FloatRange(min=0, min_open=True), default=None)
@click.option("--closed-form", is_flag=True, help="Generalized flow only.")
@click.option("--csv-out", type=click.Path(dir_okay=False), default=None, help="CSV trace path.")
@click.pass_context
@handle_errors
def flow(ctx, flow_name, t_max, rtol, closed_form, csv_out, **options):
    """Integrate a flow and report the convergence diagnostics."""
    _execute(ctx, "flow", flow={"flow": flow_name, "t_max": t_max, "rtol": rtol, "closed_form": closed_form or None},
             output={"csv": csv_out}, **options)


@main.command()
@run_options
@click.pass_context
@handle_errors
def report(ctx, **options):
    """Curvature, pluriclosed status and soliton search for each metric in one document."""
    _execute(ctx, "report", **options)


if __name__ == "__main__":
    main()
