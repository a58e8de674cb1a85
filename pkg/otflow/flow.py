"""
Left-invariant Hermitian curvature flows.

Chern-Ricci flow: d/dt omega = -rho_C, solved in closed form since rho_C does
not depend on the metric. Pluriclosed flow: d/dt omega = -rho_B^{1,1}; on
pluriclosed OT metrics it reduces to an ODE in (A, B, C), integrated with an
embedded Runge-Kutta pair. The generalized flow integrates the full metric
matrix under -rho_B^{1,1} for any algebra.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import linalg as sla
from scipy.integrate import solve_ivp

from otflow import config
from otflow.errors import FlowIntegrationError, MetricError, ParameterError
from otflow.exact import to_complex
from otflow.hermitian import (
    HermitianMetric,
    LimitForm,
    bismut_ricci_matrix,
    chern_ricci_matrix,
    metric_from_normal_form,
    normal_form_from_metric,
    omega_infinity,
    ot_bismut_ricci_matrix,
    semidirect_bismut_h_rates,
)
from otflow.lie_core import StructureConstants
from otflow.ot_model import (
    ConditionFlags,
    OTParams,
    SemidirectParams,
    admissible_off_diagonal_indices,
    build_ot_algebra,
)

logger = logging.getLogger(__name__)

FLOWS = ("chern-ricci", "pluriclosed", "generalized")

# Normalized limit of g_t/(1+t) on the h-block, in units of the identity.
LIMIT_SCALES = {"chern-ricci": 0.25, "pluriclosed": 0.75, "generalized": 0.75}


@dataclass
class FlowControls:
    rtol: float = field(default_factory=lambda: config.settings.rtol)
    atol: float = field(default_factory=lambda: config.settings.atol)
    max_step: float = field(default_factory=lambda: config.settings.max_step)
    first_sample: float = field(default_factory=lambda: config.settings.first_sample)
    growth: float = field(default_factory=lambda: config.settings.sample_growth)
    method: str = "RK45"

    def __post_init__(self):
        if min(self.rtol, self.atol, self.max_step, self.first_sample) <= 0:
            raise ParameterError("flow controls must be positive")
        if self.growth <= 1:
            raise ParameterError("sample growth factor must exceed 1")


def sample_times(t_max: float, controls: FlowControls) -> np.ndarray:
    """0, then first_sample growing geometrically, always ending exactly at t_max."""
    if not t_max > 0:
        raise ParameterError(f"t_max must be positive, got {t_max}")
    times = [0.0]
    t = min(controls.first_sample, t_max)
    while t < t_max:
        times.append(t)
        t *= controls.growth
    times.append(float(t_max))
    return np.array(times)


@dataclass(frozen=True)
class FlowState:
    t: float
    A: Tuple[float, ...]
    B: Tuple[float, ...]
    C: Dict[int, complex] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "A", tuple(float(a) for a in self.A))
        object.__setattr__(self, "B", tuple(float(b) for b in self.B))
        object.__setattr__(self, "C", {int(q): complex(v) for q, v in sorted(self.C.items())})
        if len(self.A) != len(self.B):
            raise MetricError(f"A has {len(self.A)} entries, B has {len(self.B)}")
        if min(self.A + self.B) <= 0:
            raise MetricError(f"A and B must be positive at t={self.t:g}")
        for q in self.C:
            if not 0 <= q < len(self.A):
                raise MetricError(f"C index {q + 1} outside 1..{len(self.A)}")
            if self.gap(q) <= 0:
                raise MetricError(f"A_{q + 1} B_{q + 1} - |C|^2 must be positive at t={self.t:g}")

    @property
    def s(self) -> int:
        return len(self.A)

    def gap(self, q: int) -> float:
        """u = A_q B_q - |C_q|^2."""
        return self.A[q] * self.B[q] - abs(self.C.get(q, 0.0)) ** 2

    def metric(self) -> HermitianMetric:
        return metric_from_normal_form(self.A, self.B, self.C)

    @classmethod
    def from_metric(cls, metric: HermitianMetric, t: float = 0.0) -> "FlowState":
        A, B, C = normal_form_from_metric(metric)
        return cls(t, A, B, C)


@dataclass(frozen=True)
class FlowRates:
    A: Tuple[float, ...]
    B: Tuple[float, ...]
    C: Dict[int, complex]

    def matrix(self) -> np.ndarray:
        s = len(self.A)
        out = np.zeros((2 * s, 2 * s), dtype=complex)
        out[np.arange(s), np.arange(s)] = self.A
        out[s + np.arange(s), s + np.arange(s)] = self.B
        for q, v in self.C.items():
            out[q, s + q] = v
            out[s + q, q] = np.conj(v)
        return out


def _mixed_factor(p: OTParams, q: int) -> complex:
    cpp = p.c[q, q]
    return 3 / 16 + cpp ** 2 / 4 + 1j * cpp / 4


def pluriclosed_rhs(state: FlowState, p: OTParams) -> FlowRates:
    """A' = 3/4 (1 + |C|^2/u), B' = 0, C' = -(3/16 + c^2/4 + i c/4) B C / u."""
    A = [0.75] * state.s
    C = {}
    for q, value in state.C.items():
        u = state.gap(q)
        if u <= 0:
            raise FlowIntegrationError(f"Gram gap u_{q + 1} = {u:g} is not positive at t={state.t:g}")
        A[q] = 0.75 * (1 + abs(value) ** 2 / u)
        C[q] = -_mixed_factor(p, q) * state.B[q] * value / u
    return FlowRates(tuple(A), (0.0,) * state.s, C)


@dataclass
class FlowTrace:
    """Sampled trajectory.

    ``residuals`` depends on the flow: for the pluriclosed ODE it is
    max|d/dt g + rho_B^{1,1}(g)| evaluated on the full Bismut formula; for the
    Chern-Ricci flow the same with a finite-difference derivative and rho_C;
    for the generalized flow the drift max|rho_B^{1,1}(g_t) - rho_B^{1,1}(g_0)|.

    ``closed_form_residuals`` is only filled by the generalized flow when it
    is given params: per sample, the gap between rho_B^{1,1}(g_t) and its
    closed form (the OT formula, or the semidirect h-rates together with the
    vanishing blocks), and, when the closed-form hypotheses hold, the relative
    gap between g_t and g_0 - t rho_B^{1,1}(g_0). Samples where no closed
    form applies hold NaN.
    """

    flow: str
    n_h: int
    times: np.ndarray
    metrics: List[np.ndarray]
    residuals: np.ndarray
    states: Optional[List[FlowState]] = None
    closed_form_residuals: Optional[np.ndarray] = None

    @property
    def final(self) -> np.ndarray:
        return self.metrics[-1]

    def normalized_h_diagonal(self) -> np.ndarray:
        h = self.n_h
        return np.array([np.real(np.diag(g[:h, :h])) / (1 + t) for t, g in zip(self.times, self.metrics)])

    def c_moduli(self) -> Dict[int, np.ndarray]:
        if not self.states:
            return {}
        return {q: np.array([abs(st.C[q]) for st in self.states]) for q in self.states[0].C}

    def gaps(self) -> Dict[int, np.ndarray]:
        if not self.states:
            return {}
        return {q: np.array([st.gap(q) for st in self.states]) for q in self.states[0].C}


def _segments(fun: Callable, y0: np.ndarray, times: np.ndarray, controls: FlowControls,
              check: Callable[[float, np.ndarray], None]) -> List[np.ndarray]:
    ys = [np.array(y0, dtype=float)]
    y = ys[0]
    for t0, t1 in zip(times[:-1], times[1:]):
        try:
            sol = solve_ivp(fun, (t0, t1), y, method=controls.method, rtol=controls.rtol,
                            atol=controls.atol, max_step=controls.max_step * max(1.0, t0))
        except (MetricError, FlowIntegrationError) as exc:
            raise FlowIntegrationError(f"integration aborted in [{t0:g}, {t1:g}]: {exc}") from exc
        if not sol.success:
            raise FlowIntegrationError(f"integrator failed in [{t0:g}, {t1:g}]: {sol.message}")
        y = sol.y[:, -1]
        check(t1, y)
        ys.append(y)
        logger.debug("segment done t=%g nfev=%d", t1, sol.nfev)
    return ys


def integrate_pluriclosed(state0: FlowState, p: OTParams, t_max: float,
                          controls: Optional[FlowControls] = None) -> FlowTrace:
    controls = controls or FlowControls()
    if not p.admissible:
        raise ParameterError("the pluriclosed ODE needs pluriclosed-admissible params")
    if state0.s != p.s:
        raise ParameterError(f"state has s={state0.s}, params have s={p.s}")
    stray = sorted(set(state0.C) - set(admissible_off_diagonal_indices(p)))
    if stray:
        raise ParameterError(f"C at non-admissible indices {[q + 1 for q in stray]}")
    s = p.s
    idx = sorted(state0.C)
    k = len(idx)
    factors = np.array([_mixed_factor(p, q) for q in idx])

    def pack(st: FlowState) -> np.ndarray:
        c = np.array([st.C[q] for q in idx], dtype=complex)
        return np.concatenate([st.A, st.B, c.real, c.imag])

    def unpack(t: float, y: np.ndarray) -> FlowState:
        c = y[2 * s:2 * s + k] + 1j * y[2 * s + k:]
        return FlowState(t, y[:s], y[s:2 * s], dict(zip(idx, c)))

    def fun(t: float, y: np.ndarray) -> np.ndarray:
        A, B = y[:s], y[s:2 * s]
        c = y[2 * s:2 * s + k] + 1j * y[2 * s + k:]
        dA = np.full(s, 0.75)
        dc = np.zeros(k, dtype=complex)
        for j, q in enumerate(idx):
            u = A[q] * B[q] - abs(c[j]) ** 2
            if u <= 0:
                raise FlowIntegrationError(f"Gram gap u_{q + 1} = {u:g} at t={t:g}")
            dA[q] = 0.75 * (1 + abs(c[j]) ** 2 / u)
            dc[j] = -factors[j] * B[q] * c[j] / u
        return np.concatenate([dA, np.zeros(s), dc.real, dc.imag])

    def check(t: float, y: np.ndarray) -> None:
        try:
            unpack(t, y)
        except MetricError as exc:
            raise FlowIntegrationError(f"invariant breach, reduce max_step or rtol: {exc}") from exc

    times = sample_times(t_max, controls)
    ys = _segments(fun, pack(state0), times, controls, check)
    states = [unpack(t, y) for t, y in zip(times, ys)]
    sc = build_ot_algebra(p)
    metrics, residuals = [], []
    for st in states:
        metric = st.metric()
        rates = pluriclosed_rhs(st, p).matrix()
        residuals.append(float(np.max(np.abs(rates + bismut_ricci_matrix(sc, metric)))))
        metrics.append(to_complex(metric.g))
    logger.info("pluriclosed flow done t_max=%g samples=%d max_resid=%.3e",
                t_max, len(times), max(residuals))
    return FlowTrace("pluriclosed", p.r, times, metrics, np.array(residuals), states)


def _floating(sc: StructureConstants) -> StructureConstants:
    if not sc.exact:
        return sc
    return StructureConstants(sc.n_h, sc.n_i, to_complex(sc.brackets), sc.ot_type)


def chern_ricci_flow_at(metric0: HermitianMetric, t: float, normalized: bool = False) -> np.ndarray:
    """g_t = g_0 + t omega_infinity; optionally divided by 1 + t."""
    if t < 0:
        raise ParameterError(f"t must be non-negative, got {t}")
    g = to_complex(metric0.g) + t * omega_infinity(metric0.n_h, metric0.n_i).g
    return g / (1 + t) if normalized else g


def chern_ricci_trace(sc: StructureConstants, metric0: HermitianMetric, t_max: float,
                      controls: Optional[FlowControls] = None) -> FlowTrace:
    controls = controls or FlowControls()
    flat = _floating(sc)
    times = sample_times(t_max, controls)
    metrics, residuals = [], []
    for t in times:
        g = chern_ricci_flow_at(metric0, t)
        h = 1e-6 * max(1.0, t)
        lo = max(0.0, t - h)
        derivative = (chern_ricci_flow_at(metric0, t + h) - chern_ricci_flow_at(metric0, lo)) / (t + h - lo)
        rho = chern_ricci_matrix(flat, HermitianMetric(g, metric0.n_h))
        residuals.append(float(np.max(np.abs(derivative + to_complex(rho)))))
        metrics.append(g)
    return FlowTrace("chern-ricci", metric0.n_h, times, metrics, np.array(residuals))


def _pack_hermitian(g: np.ndarray) -> np.ndarray:
    iu = np.triu_indices(g.shape[0], 1)
    return np.concatenate([np.real(np.diag(g)), g[iu].real, g[iu].imag])


def _unpack_hermitian(y: np.ndarray, n: int) -> np.ndarray:
    iu = np.triu_indices(n, 1)
    m = len(iu[0])
    g = np.diag(y[:n]).astype(complex)
    upper = y[n:n + m] + 1j * y[n + m:]
    g[iu] = upper
    g[(iu[1], iu[0])] = upper.conj()
    return g


def closed_form_residual(params: Union[OTParams, SemidirectParams], metric: HermitianMetric,
                         rho: np.ndarray, tol: Optional[float] = None) -> Optional[float]:
    """max|rho - closed form| for one metric; None when no closed form applies to it."""
    tol = config.settings.tol if tol is None else tol
    rho = to_complex(rho)
    h = metric.n_h
    if isinstance(params, OTParams):
        if not params.admissible:
            return None
        try:
            closed = ot_bismut_ricci_matrix(params, metric, tol)
        except (MetricError, ParameterError):
            return None
        return float(np.max(np.abs(rho - to_complex(closed))))
    g = to_complex(metric.g)
    if np.max(np.abs(g[:h, h:]), initial=0.0) > tol:
        return None
    rates = semidirect_bismut_h_rates(params, metric, tol)
    hh = rho[:h, :h]
    diag = np.diag(hh)
    return float(max(
        np.max(np.abs(diag.real + rates), initial=0.0),
        np.max(np.abs(diag.imag), initial=0.0),
        np.max(np.abs(hh - np.diag(diag)), initial=0.0),
        np.max(np.abs(rho[:, h:]), initial=0.0),
    ))


def _closed_form_ready(metric0: HermitianMetric, flags: Optional[ConditionFlags], tol: float) -> None:
    if flags is None or not flags.closed_form_hypotheses:
        raise ParameterError("closed form needs conditions i-iv of the semidirect data")
    g = to_complex(metric0.g)
    h = metric0.n_h
    if np.max(np.abs(g[:h, h:]), initial=0.0) > tol:
        raise ParameterError("closed form needs h and I orthogonal")
    hh = g[:h, :h]
    if np.max(np.abs(hh - np.diag(np.diag(hh))), initial=0.0) > tol:
        raise ParameterError("closed form needs a diagonal h-block")


def _hypotheses_hold(metric0: HermitianMetric, flags: Optional[ConditionFlags], tol: float) -> bool:
    try:
        _closed_form_ready(metric0, flags, tol)
    except ParameterError:
        return False
    return True


def generalized_flow(sc: StructureConstants, metric0: HermitianMetric, t_max: float,
                     controls: Optional[FlowControls] = None, closed_form: bool = False,
                     flags: Optional[ConditionFlags] = None,
                     params: Optional[Union[OTParams, SemidirectParams]] = None) -> FlowTrace:
    """d/dt g = -rho_B^{1,1}(g), either integrated or via g_t = g_0 - t rho_B^{1,1}(g_0).

    With ``params`` every sample is checked against the closed forms and a
    failed check raises FlowIntegrationError.
    """
    controls = controls or FlowControls()
    tol = config.settings.tol
    flat = _floating(sc)
    n, n_h = metric0.n, metric0.n_h
    g0 = to_complex(metric0.g)
    rho0 = bismut_ricci_matrix(flat, HermitianMetric(g0, n_h))
    times = sample_times(t_max, controls)

    if closed_form:
        _closed_form_ready(metric0, flags, tol)
        metrics = [g0 - t * rho0 for t in times]
    else:
        def fun(t: float, y: np.ndarray) -> np.ndarray:
            g = _unpack_hermitian(y, n)
            return _pack_hermitian(-bismut_ricci_matrix(flat, HermitianMetric(g, n_h)))

        def check(t: float, y: np.ndarray) -> None:
            try:
                HermitianMetric(_unpack_hermitian(y, n), n_h)
            except MetricError as exc:
                raise FlowIntegrationError(f"metric degenerated at t={t:g}: {exc}") from exc

        ys = _segments(fun, _pack_hermitian(g0), times, controls, check)
        metrics = [_unpack_hermitian(y, n) for y in ys]

    rhos = [bismut_ricci_matrix(flat, HermitianMetric(g, n_h)) for g in metrics]
    residuals = [float(np.max(np.abs(rho - rho0))) for rho in rhos]
    trace = FlowTrace("generalized", n_h, times, metrics, np.array(residuals))
    if params is not None:
        trace.closed_form_residuals = _check_closed_forms(trace, rhos, params, metric0, flags, controls, tol)
    logger.info("generalized flow done t_max=%g closed_form=%s samples=%d drift=%.3e",
                t_max, closed_form, len(times), max(residuals))
    return trace


def _check_closed_forms(trace: FlowTrace, rhos: List[np.ndarray], params: Union[OTParams, SemidirectParams],
                        metric0: HermitianMetric, flags: Optional[ConditionFlags], controls: FlowControls,
                        tol: float) -> np.ndarray:
    g0 = trace.metrics[0]
    rho0 = rhos[0]
    linear = isinstance(params, SemidirectParams) and _hypotheses_hold(metric0, flags, tol)
    curvature_tol = 1e3 * tol * (1 + float(np.max(np.abs(rho0))))
    trajectory_tol = max(100 * controls.rtol, 1e3 * tol)
    out = []
    for t, g, rho in zip(trace.times, trace.metrics, rhos):
        gap = closed_form_residual(params, HermitianMetric(g, trace.n_h), rho, tol)
        if gap is not None and gap > curvature_tol:
            raise FlowIntegrationError(
                f"rho_B^(1,1) misses its closed form by {gap:.3e} at t={t:g}")
        if linear:
            moved = float(np.max(np.abs(rho - rho0)))
            if moved > curvature_tol:
                raise FlowIntegrationError(
                    f"rho_B^(1,1) moved by {moved:.3e} at t={t:g} under the closed-form hypotheses")
            drift = float(np.max(np.abs(g - (g0 - t * rho0))) / (1 + np.max(np.abs(g))))
            if drift > trajectory_tol:
                raise FlowIntegrationError(
                    f"trajectory leaves g_0 - t rho_B^(1,1)(g_0) by {drift:.3e} at t={t:g}")
            gap = drift if gap is None else max(gap, drift)
        out.append(math.nan if gap is None else gap)
        logger.debug("closed-form check t=%g residual=%s", t, gap)
    return np.array(out)


def _default_expansion(n: int, n_h: int) -> np.ndarray:
    d = np.zeros((n, n))
    d[n_h:, n_h:] = np.eye(n - n_h)
    return d


def cheeger_gromov_pullback(g_t: np.ndarray, t: float, n_h: int,
                            D: Optional[np.ndarray] = None) -> np.ndarray:
    """Pull g_t / (1 + t) back by exp(s(t) D), s(t) = log sqrt(1 + t).

    The default D = diag(0_h, Id_I) scales the h-block by 1/(1+t), the mixed
    block by 1/sqrt(1+t) and leaves the I-block unchanged.
    """
    if t < 0:
        raise ParameterError(f"t must be non-negative, got {t}")
    g_t = to_complex(np.asarray(g_t))
    n = g_t.shape[0]
    D = _default_expansion(n, n_h) if D is None else np.asarray(D)
    phi = sla.expm(math.log(math.sqrt(1 + t)) * D)
    return phi.T @ (g_t / (1 + t)) @ phi.conj()


def _limit_matrix(metric0: HermitianMetric, limit_scale: float) -> np.ndarray:
    limit = omega_infinity(metric0.n_h, metric0.n_i, limit_scale / 0.25).g.copy()
    h = metric0.n_h
    limit[h:, h:] = to_complex(metric0.g)[h:, h:]
    return limit


def cheeger_gromov_limit(flow: str, metric0: HermitianMetric) -> LimitForm:
    """3 omega_inf + omega_0 on I for the pluriclosed flow, omega_inf + omega_0 on I for Chern-Ricci."""
    if flow not in LIMIT_SCALES:
        raise ParameterError(f"unknown flow {flow!r}; expected one of {FLOWS}")
    return LimitForm(_limit_matrix(metric0, LIMIT_SCALES[flow]), metric0.n_h)


@dataclass
class ConvergenceReport:
    flow: str
    limit_scale: float
    t_final: float
    growth_sup: float
    growth_bounded: bool
    ideal_drift: float
    ideal_invariant: bool
    limit_defects: List[float]
    limit_converged: bool
    normalized_limit: np.ndarray
    pullback_defect: float
    pullback_converged: bool

    @property
    def passed(self) -> bool:
        return self.growth_bounded and self.ideal_invariant and self.limit_converged and self.pullback_converged

    def to_dict(self) -> dict:
        return {
            "flow": self.flow,
            "limit_scale": self.limit_scale,
            "t_final": self.t_final,
            "passed": self.passed,
            "condition_1": {"sup": self.growth_sup, "passed": self.growth_bounded},
            "condition_2": {"max_drift": self.ideal_drift, "passed": self.ideal_invariant},
            "condition_3": {"final": self.limit_defects[-1], "passed": self.limit_converged},
            "normalized_limit": [[{"re": float(v.real), "im": float(v.imag)} for v in row]
                                 for row in self.normalized_limit],
            "pullback": {"defect": self.pullback_defect, "passed": self.pullback_converged},
        }


def convergence_report(trace: FlowTrace, metric0: HermitianMetric,
                       limit_scale: Optional[float] = None) -> ConvergenceReport:
    """Norm-level Gromov-Hausdorff diagnostics on a finished trace."""
    limit_scale = LIMIT_SCALES[trace.flow] if limit_scale is None else limit_scale
    h = trace.n_h
    g0 = to_complex(metric0.g)
    base = g0[:h, :h]
    ratios, defects, drift = [], [], 0.0
    for t, g in zip(trace.times, trace.metrics):
        top = sla.eigh(g[:h, :h], base, eigvals_only=True)
        ratios.append(math.sqrt(max(float(np.max(top)), 0.0) / (1 + t)))
        shifted = g[:h, :h] / (1 + t) - limit_scale * np.eye(h)
        defects.append(float(np.max(np.abs(np.linalg.eigvalsh(shifted)))))
        drift = max(drift, float(np.max(np.abs(g[h:, h:] - g0[h:, h:]), initial=0.0)))

    settings = config.settings
    growth_sup = max(ratios)
    settled = len(ratios) < 2 or abs(ratios[-1] - ratios[-2]) <= settings.gh_tolerance * ratios[-1]
    t_final = float(trace.times[-1])
    normalized = trace.final / (1 + t_final)
    pullback = cheeger_gromov_pullback(trace.final, t_final, h)
    pullback_defect = float(np.max(np.abs(pullback - _limit_matrix(metric0, limit_scale))))
    report = ConvergenceReport(
        flow=trace.flow,
        limit_scale=limit_scale,
        t_final=t_final,
        growth_sup=growth_sup,
        growth_bounded=bool(np.isfinite(growth_sup) and settled),
        ideal_drift=drift,
        ideal_invariant=drift <= settings.tol,
        limit_defects=defects,
        limit_converged=defects[-1] <= settings.gh_tolerance,
        normalized_limit=normalized,
        pullback_defect=pullback_defect,
        pullback_converged=pullback_defect <= settings.asymptotic_window,
    )
    logger.info("convergence report flow=%s t_final=%g passed=%s limit_defect=%.3e pullback=%.3e",
                trace.flow, t_final, report.passed, defects[-1], pullback_defect)
    return report


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trace_rows(trace: FlowTrace) -> Tuple[List[str], List[List[str]]]:
    """Header and rows of the CSV trace; 1-based column names."""
    if trace.states:
        s = trace.states[0].s
        idx = sorted(trace.states[0].C)
        header = ["t"] + [f"A_{i + 1}" for i in range(s)] + [f"B_{i + 1}" for i in range(s)]
        for q in idx:
            header += [f"ReC_{q + 1}", f"ImC_{q + 1}", f"u_{q + 1}"]
        header.append("norm_resid")
        rows = []
        for st, resid in zip(trace.states, trace.residuals):
            row = [_fmt(st.t)] + [_fmt(a) for a in st.A] + [_fmt(b) for b in st.B]
            for q in idx:
                row += [_fmt(st.C[q].real), _fmt(st.C[q].imag), _fmt(st.gap(q))]
            row.append(_fmt(resid))
            rows.append(row)
        return header, rows
    n = trace.metrics[0].shape[0]
    pairs = [(a, b) for a in range(n) for b in range(a, n)]
    header = ["t"] + [f"{part}g_{a + 1}_{b + 1}" for a, b in pairs for part in ("Re", "Im")] + ["norm_resid"]
    rows = []
    for t, g, resid in zip(trace.times, trace.metrics, trace.residuals):
        row = [_fmt(t)]
        for a, b in pairs:
            row += [_fmt(g[a, b].real), _fmt(g[a, b].imag)]
        row.append(_fmt(resid))
        rows.append(row)
    return header, rows


def write_trace_csv(trace: FlowTrace, path: Path) -> None:
    header, rows = trace_rows(trace)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\r\n")
        writer.writerow(header)
        writer.writerows(rows)
    logger.info("wrote trace path=%s rows=%d", path, len(rows))
