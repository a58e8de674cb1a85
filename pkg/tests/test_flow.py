import csv

import numpy as np
import pytest

from otflow import flow as flow_module
from otflow.errors import FlowIntegrationError, MetricError, ParameterError
from otflow.flow import (
    FlowControls,
    FlowState,
    chern_ricci_flow_at,
    chern_ricci_trace,
    cheeger_gromov_limit,
    cheeger_gromov_pullback,
    convergence_report,
    generalized_flow,
    integrate_pluriclosed,
    pluriclosed_rhs,
    sample_times,
    write_trace_csv,
)
from otflow.hermitian import (
    HermitianMetric,
    bismut_ricci_matrix,
    canonical_metric,
    classify_pluriclosed,
    is_pluriclosed,
    metric_from_normal_form,
)
from otflow.ot_model import OTParams, SemidirectParams, build_ot_algebra, build_semidirect, semidirect_from_ot

from conftest import random_admissible_params, random_metric, random_normal_form, random_orthogonal_metric


@pytest.fixture
def ode_start():
    return FlowState(0.0, (1.0, 1.0), (1.0, 1.0), {0: np.sqrt(0.5)})


@pytest.fixture(scope="module")
def long_trace():
    p = OTParams(2, 2, -np.eye(2), np.array([[0.3, 0.5], [0.0, -0.2]]))
    start = FlowState(0.0, (1.0, 1.0), (1.0, 1.0), {0: np.sqrt(0.5)})
    return p, start, integrate_pluriclosed(start, p, 1e5)


def test_sample_grid_is_geometric_and_ends_at_t_max():
    times = sample_times(10.0, FlowControls(first_sample=0.5, growth=2.0))
    assert list(times) == [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 10.0]


def test_sample_grid_rejects_non_positive_t_max():
    with pytest.raises(ParameterError):
        sample_times(0.0, FlowControls())


def test_controls_are_validated():
    with pytest.raises(ParameterError):
        FlowControls(growth=1.0)
    with pytest.raises(ParameterError):
        FlowControls(rtol=-1.0)


def test_flow_state_rejects_degenerate_gap():
    with pytest.raises(MetricError):
        FlowState(0.0, (1.0,), (1.0,), {0: 1.0})
    with pytest.raises(MetricError):
        FlowState(0.0, (1.0,), (-1.0,))


def test_rhs_values(ot_pair, ode_start):
    p, _ = ot_pair
    rates = pluriclosed_rhs(ode_start, p)
    u = 0.5
    assert rates.A[0] == pytest.approx(0.75 * (1 + 0.5 / u))
    assert rates.A[1] == 0.75
    assert rates.B == (0.0, 0.0)
    cpp = 0.3
    k = 3 / 16 + cpp ** 2 / 4 + 1j * cpp / 4
    assert rates.C[0] == pytest.approx(-k * np.sqrt(0.5) / u)


def test_rhs_matches_bismut_flow(ot_pair, ode_start):
    p, sc = ot_pair
    rates = pluriclosed_rhs(ode_start, p).matrix()
    assert np.max(np.abs(rates + bismut_ricci_matrix(sc, ode_start.metric()))) < 1e-12


def test_pluriclosed_ode_asymptotics(long_trace):
    _, _, trace = long_trace
    states = trace.states
    assert trace.times[-1] == 1e5
    assert all(st.B == (1.0, 1.0) for st in states)
    moduli = trace.c_moduli()[0]
    assert np.all(np.diff(moduli) <= 1e-12)
    for earlier, later, t0, t1 in zip(states[:-1], states[1:], trace.times[:-1], trace.times[1:]):
        assert (later.gap(0) - earlier.gap(0)) / (t1 - t0) >= 0.75 * later.B[0] - 1e-9
    final = states[-1]
    for a in final.A:
        assert abs(a / (1 + final.t) - 0.75) < 0.01
    assert np.max(trace.residuals) < 1e-7


def test_pluriclosed_ode_rejects_stray_index(ot_pair):
    p, _ = ot_pair
    start = FlowState(0.0, (1.0, 1.0), (1.0, 1.0), {1: 0.3})
    with pytest.raises(ParameterError, match="non-admissible"):
        integrate_pluriclosed(start, p, 1.0)


def test_pluriclosed_ode_rejects_general_params():
    p = OTParams(2, 1, np.array([[-1.0], [-1.0]]), np.zeros((2, 1)))
    with pytest.raises(ParameterError):
        integrate_pluriclosed(FlowState(0.0, (1.0,), (1.0,)), p, 1.0)


def test_ode_matches_generic_integration(ot_pair, ode_start):
    p, sc = ot_pair
    ode = integrate_pluriclosed(ode_start, p, 100.0)
    generic = generalized_flow(sc, ode_start.metric(), 100.0)
    assert np.allclose(ode.times, generic.times)
    for a, b in zip(ode.metrics, generic.metrics):
        assert np.max(np.abs(a - b)) <= 1e-6 * np.max(np.abs(a))


def test_chern_ricci_closed_form(rng):
    metric = random_metric(rng, 4, 2)
    g = chern_ricci_flow_at(metric, 3.0)
    expected = np.array(metric.g)
    expected[0, 0] += 0.75
    expected[1, 1] += 0.75
    assert np.allclose(g, expected)
    assert np.allclose(chern_ricci_flow_at(metric, 3.0, normalized=True), expected / 4)
    with pytest.raises(ParameterError):
        chern_ricci_flow_at(metric, -1.0)


def test_chern_ricci_trace_solves_the_flow(ot_pair, rng):
    _, sc = ot_pair
    trace = chern_ricci_trace(sc, random_metric(rng, 4, 2), 50.0)
    assert np.max(trace.residuals) < 1e-6


def test_generalized_closed_form_matches_integration(rng):
    for _ in range(3):
        lam = rng.normal(size=(2, 2)) + 0.1j * rng.uniform(-1, 1, size=(2, 2))
        sc, flags = build_semidirect(SemidirectParams(lam))
        metric = random_orthogonal_metric(rng, 2, 2)
        closed = generalized_flow(sc, metric, 20.0, closed_form=True, flags=flags)
        generic = generalized_flow(sc, metric, 20.0)
        for a, b in zip(closed.metrics, generic.metrics):
            assert np.max(np.abs(a - b)) <= 1e-6 * np.max(np.abs(a))
        assert np.max(closed.residuals) < 1e-8


def test_generalized_closed_form_needs_hypotheses(rng):
    sc, flags = build_semidirect(SemidirectParams(np.array([[0.2 + 0.1j, -0.3j]])))
    with pytest.raises(ParameterError):
        generalized_flow(sc, canonical_metric(1, 2), 1.0, closed_form=True)
    mixed = np.eye(3, dtype=complex)
    mixed[0, 1] = mixed[1, 0] = 0.2
    with pytest.raises(ParameterError, match="orthogonal"):
        generalized_flow(sc, HermitianMetric(mixed, 1), 1.0, closed_form=True, flags=flags)


def test_generalized_flow_reports_breakdown():
    # h-rate 1/2 - 2 < 0 drives g_{1 1bar} through zero before t = 1
    sc, _ = build_semidirect(SemidirectParams(np.array([[-2j]])))
    with pytest.raises(FlowIntegrationError):
        generalized_flow(sc, canonical_metric(1, 1), 1.0)


def test_pullback_scales_blocks():
    g = np.array([[4.0, 2.0], [2.0, 3.0]], dtype=complex)
    out = cheeger_gromov_pullback(g, 3.0, 1)
    assert out[0, 0] == pytest.approx(1.0)
    assert out[0, 1] == pytest.approx(1.0)
    assert out[1, 1] == pytest.approx(3.0)
    with pytest.raises(ParameterError):
        cheeger_gromov_pullback(g, -0.5, 1)


def test_limit_forms():
    g0 = metric_from_normal_form([1.0], [2.0])
    assert np.allclose(cheeger_gromov_limit("pluriclosed", g0).g, np.diag([0.75, 2.0]))
    assert np.allclose(cheeger_gromov_limit("chern-ricci", g0).g, np.diag([0.25, 2.0]))
    with pytest.raises(ParameterError):
        cheeger_gromov_limit("ricci", g0)


def test_pluriclosed_convergence_report(long_trace):
    _, start, trace = long_trace
    report = convergence_report(trace, start.metric())
    assert report.flow == "pluriclosed"
    assert report.limit_scale == 0.75
    assert report.ideal_drift == 0.0
    assert report.pullback_defect < 0.01
    assert report.passed
    data = report.to_dict()
    assert data["condition_2"]["passed"] and data["pullback"]["passed"]


def test_chern_ricci_convergence_report(ot_pair):
    _, sc = ot_pair
    g0 = metric_from_normal_form([1.0, 2.0], [1.0, 0.5], {0: 0.3})
    trace = chern_ricci_trace(sc, g0, 1e5)
    report = convergence_report(trace, g0)
    assert report.flow == "chern-ricci"
    assert report.limit_scale == 0.25
    assert report.pullback_defect < 0.01
    assert report.passed


def test_short_run_does_not_converge(ot_pair, ode_start):
    p, _ = ot_pair
    trace = integrate_pluriclosed(ode_start, p, 1.0)
    report = convergence_report(trace, ode_start.metric())
    assert not report.limit_converged
    assert not report.passed


def test_csv_trace_columns(tmp_path, ot_pair, ode_start):
    p, _ = ot_pair
    trace = integrate_pluriclosed(ode_start, p, 1.0)
    path = tmp_path / "trace.csv"
    write_trace_csv(trace, path)
    with open(path, newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["t", "A_1", "A_2", "B_1", "B_2", "ReC_1", "ImC_1", "u_1", "norm_resid"]
    assert len(rows) == len(trace.times) + 1
    assert float(rows[1][0]) == 0.0
    assert float(rows[-1][0]) == 1.0


def test_csv_matrix_columns(tmp_path, ot_pair, diagonal_metric):
    _, sc = ot_pair
    trace = chern_ricci_trace(sc, diagonal_metric, 1.0)
    path = tmp_path / "chern.csv"
    write_trace_csv(trace, path)
    header = path.read_text(encoding="utf-8").splitlines()[0].split(",")
    assert header[:3] == ["t", "Reg_1_1", "Img_1_1"]
    assert header[-1] == "norm_resid"
    assert len(header) == 2 + 2 * 10


def test_semidirect_embedding_flows_like_ot(ot_pair):
    p, _ = ot_pair
    sc, flags = build_semidirect(semidirect_from_ot(p))
    g0 = metric_from_normal_form([1.0, 1.5], [1.0, 2.0])
    trace = generalized_flow(sc, g0, 10.0, closed_form=True, flags=flags)
    assert trace.final[0, 0] == pytest.approx(1.0 + 7.5)
    assert trace.final[1, 1] == pytest.approx(1.5 + 7.5)


def test_integration_failure_is_typed(ot_pair, ode_start, monkeypatch):
    p, _ = ot_pair

    def failing(*args, **kwargs):
        raise FlowIntegrationError("boom")

    monkeypatch.setattr("otflow.flow.solve_ivp", failing)
    with pytest.raises(FlowIntegrationError):
        integrate_pluriclosed(ode_start, p, 1.0)


def _random_start(rng):
    s = int(rng.integers(1, 4))
    p = random_admissible_params(rng, s)
    A, B, C = random_normal_form(rng, p)
    return p, build_ot_algebra(p), FlowState(0.0, A, B, C)


def test_halving_rtol_barely_moves_terminal_state(ot_pair, ode_start):
    p, _ = ot_pair
    rtol = 1e-7
    coarse = integrate_pluriclosed(ode_start, p, 100.0, FlowControls(rtol=rtol))
    fine = integrate_pluriclosed(ode_start, p, 100.0, FlowControls(rtol=rtol / 2))
    for a, b in zip(coarse.states[-1].A, fine.states[-1].A):
        assert abs(a - b) / abs(b) < 10 * rtol
    assert abs(coarse.states[-1].C[0] - fine.states[-1].C[0]) < 10 * rtol


def test_pluriclosed_ode_matches_generic_flow_from_random_starts(rng):
    for _ in range(5):
        p, sc, start = _random_start(rng)
        ode = integrate_pluriclosed(start, p, 10.0)
        generic = generalized_flow(sc, start.metric(), 10.0)
        assert np.max(np.abs(pluriclosed_rhs(start, p).matrix() + bismut_ricci_matrix(sc, start.metric()))) < 1e-10
        for a, b in zip(ode.metrics, generic.metrics):
            assert np.max(np.abs(a - b)) <= 1e-6 * np.max(np.abs(a))


def test_generic_flow_stays_pluriclosed(rng):
    for _ in range(4):
        p, sc, start = _random_start(rng)
        trace = generalized_flow(sc, start.metric(), 10.0, FlowControls(first_sample=1.0))
        for g in trace.metrics:
            metric = HermitianMetric(g, p.s)
            assert is_pluriclosed(sc, metric, 1e-8)
            assert classify_pluriclosed(p, metric, 1e-8).pluriclosed


def test_generalized_flow_checks_ot_closed_form(ot_pair, ode_start):
    p, sc = ot_pair
    trace = generalized_flow(sc, ode_start.metric(), 10.0, params=p)
    residuals = trace.closed_form_residuals
    assert residuals is not None and len(residuals) == len(trace.times)
    assert not np.any(np.isnan(residuals))
    assert np.max(residuals) < 1e-8


def test_generalized_flow_checks_h_rates_on_non_diagonal_block(rng):
    lam = rng.normal(size=(2, 2)) + 0.1j * rng.uniform(-1, 1, size=(2, 2))
    p = SemidirectParams(lam)
    sc, flags = build_semidirect(p)
    metric = random_orthogonal_metric(rng, 2, 2, diagonal_h=False)
    trace = generalized_flow(sc, metric, 5.0, flags=flags, params=p)
    assert not np.any(np.isnan(trace.closed_form_residuals))
    assert np.max(trace.closed_form_residuals) < 1e-8
    g0 = np.array(metric.g)
    assert trace.final[0, 1] == pytest.approx(g0[0, 1], abs=1e-9)
    assert np.allclose(trace.final[2:, 2:], g0[2:, 2:], atol=1e-9)


def test_generalized_flow_tracks_linear_solution_under_hypotheses(rng):
    lam = rng.normal(size=(2, 2)) + 0.1j * rng.uniform(-1, 1, size=(2, 2))
    p = SemidirectParams(lam)
    sc, flags = build_semidirect(p)
    assert flags.closed_form_hypotheses
    metric = random_orthogonal_metric(rng, 2, 2)
    for closed_form in (False, True):
        trace = generalized_flow(sc, metric, 20.0, closed_form=closed_form, flags=flags, params=p)
        assert np.max(trace.closed_form_residuals) < 1e-6


def test_generalized_flow_skips_check_without_closed_form():
    p = SemidirectParams(np.array([[0.3 + 0.05j, -0.2 - 0.05j]]))
    sc, _ = build_semidirect(p)
    g = np.eye(3, dtype=complex)
    g[0, 1] = g[1, 0] = 0.2
    trace = generalized_flow(sc, HermitianMetric(g, 1), 1.0, params=p)
    assert np.all(np.isnan(trace.closed_form_residuals))
    assert generalized_flow(sc, HermitianMetric(g, 1), 1.0).closed_form_residuals is None


def test_generalized_flow_aborts_when_closed_form_fails(rng, monkeypatch):
    lam = rng.normal(size=(2, 2)) + 0.1j * rng.uniform(-1, 1, size=(2, 2))
    p = SemidirectParams(lam)
    sc, flags = build_semidirect(p)
    metric = random_orthogonal_metric(rng, 2, 2)
    real_rates = flow_module.semidirect_bismut_h_rates
    monkeypatch.setattr(flow_module, "semidirect_bismut_h_rates",
                        lambda *args, **kwargs: real_rates(*args, **kwargs) + 0.1)
    with pytest.raises(FlowIntegrationError, match="closed form"):
        generalized_flow(sc, metric, 1.0, flags=flags, params=p)
