"""
Left-invariant Hermitian metrics and their Ricci forms.

A metric is stored through its coefficient matrix g on the (1,0) frame,
omega = i * sum g_ab alpha^a ^ conj(alpha^b), so omega(X_a, Xbar_b) = i g_ab.
Every real (1,1) form is handled the same way through a Hermitian matrix H with
rho(X_a, Xbar_b) = i H_ab.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import sympy

from otflow import config
from otflow.errors import MetricError, ParameterError, StructureError
from otflow.exact import (
    as_array,
    conj,
    conj_array,
    imag_unit,
    is_exact_array,
    is_zero,
    max_norm,
    rational,
    settle,
    settle_array,
    to_complex,
    zeros,
)
from otflow.exterior import GradedForm, del_delbar, hermitian_coefficients, hermitian_form
from otflow.lie_core import StructureConstants
from otflow.ot_model import OTParams, SemidirectParams, admissible_off_diagonal_indices

logger = logging.getLogger(__name__)


def _hermitian_defect(g: np.ndarray) -> float:
    return max_norm(settle_array(g - conj_array(g).T))


@dataclass(frozen=True, eq=False)
class HermitianMetric:
    g: np.ndarray
    n_h: int

    def __post_init__(self):
        g = np.asarray(self.g)
        if not is_exact_array(g):
            g = g.astype(complex)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise MetricError(f"metric matrix must be square, got shape {g.shape}")
        if not 0 <= self.n_h <= g.shape[0]:
            raise MetricError(f"n_h={self.n_h} does not fit a {g.shape[0]}x{g.shape[0]} metric")
        defect = _hermitian_defect(g)
        if defect > config.settings.tol:
            raise MetricError(f"metric is not Hermitian (defect {defect:.3e})")
        try:
            np.linalg.cholesky(to_complex(g))
        except np.linalg.LinAlgError as exc:
            raise MetricError("metric is not positive definite") from exc
        g = g.copy()
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

    @property
    def n(self) -> int:
        return self.g.shape[0]

    @property
    def n_i(self) -> int:
        return self.n - self.n_h

    @property
    def exact(self) -> bool:
        return is_exact_array(self.g)

    def inverse(self) -> np.ndarray:
        if self.exact:
            inv = sympy.Matrix(self.g.tolist()).inv()
            return settle_array(np.array(inv.tolist(), dtype=object))
        return np.linalg.inv(self.g)

    def unitary_weights(self) -> np.ndarray:
        """K[c, d] with sum_a X'_a (x) conj(X'_a) = sum K[c, d] X_c (x) conj(X_d) for a unitary frame X'.

        The unitary frame is the rows of L^{-1}, where g = L L^* is the Cholesky
        factorization with positive diagonal.
        """
        if self.exact:
            return self.inverse().T
        lower = np.linalg.cholesky(self.g)
        frame = np.linalg.inv(lower)
        return frame.T @ frame.conj()

    def scaled(self, factor: float) -> "HermitianMetric":
        return HermitianMetric(self.g * factor, self.n_h)


@dataclass(frozen=True, eq=False)
class LimitForm:
    """A possibly degenerate (1,1) coefficient matrix, such as omega_infinity."""

    g: np.ndarray
    n_h: int

    def __post_init__(self):
        g = np.asarray(self.g)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise MetricError(f"limit form must be square, got shape {g.shape}")
        g = g.copy()
        g.setflags(write=False)
        object.__setattr__(self, "g", g)


def omega_infinity(n_h: int, n_i: int, scale: float = 1.0) -> LimitForm:
    g = np.zeros((n_h + n_i, n_h + n_i), dtype=complex)
    g[:n_h, :n_h] = 0.25 * scale * np.eye(n_h)
    return LimitForm(g, n_h)


def canonical_metric(n_h: int, n_i: int, exact: bool = False) -> HermitianMetric:
    n = n_h + n_i
    return HermitianMetric(as_array(np.eye(n), exact), n_h)


def metric_from_normal_form(A: Sequence[float], B: Sequence[float],
                            C: Optional[Mapping[int, complex]] = None,
                            exact: bool = False) -> HermitianMetric:
    """(gPC) metric: diag(A) on h, diag(B) on I, C[q] at (Z_q, W_q); indices 0-based."""
    s = len(A)
    if len(B) != s:
        raise MetricError(f"A has {s} entries but B has {len(B)}")
    g = zeros((2 * s, 2 * s), exact)
    diagonal = as_array(list(A) + list(B), exact)
    for i in range(2 * s):
        g[i, i] = diagonal[i]
    for q, value in (C or {}).items():
        if not 0 <= q < s:
            raise MetricError(f"C index {q + 1} outside 1..{s}")
        entry = as_array([value], exact)[0]
        g[q, s + q] = entry
        g[s + q, q] = conj(entry)
    return HermitianMetric(settle_array(g), s)


def normal_form_from_metric(metric: HermitianMetric,
                            tol: Optional[float] = None) -> Tuple[List, List, Dict[int, complex]]:
    """Read (A, B, C) off a (gPC)-shaped metric; raises MetricError on any other shape."""
    tol = config.settings.tol if tol is None else tol
    g = metric.g
    s = metric.n_h
    if metric.n_i != s:
        raise MetricError(f"normal form needs r = s, got r={s} s={metric.n_i}")
    allowed = {(i, i) for i in range(2 * s)}
    allowed |= {(q, s + q) for q in range(s)} | {(s + q, q) for q in range(s)}
    for a in range(2 * s):
        for b in range(2 * s):
            if (a, b) not in allowed and not is_zero(settle(g[a, b]), tol):
                raise MetricError(f"metric entry ({a + 1}, {b + 1}) breaks the normal form")
    A = [g[i, i] for i in range(s)]
    B = [g[s + i, s + i] for i in range(s)]
    C = {q: g[q, s + q] for q in range(s) if not is_zero(settle(g[q, s + q]), tol)}
    if not metric.exact:
        A = [float(np.real(x)) for x in A]
        B = [float(np.real(x)) for x in B]
        C = {q: complex(v) for q, v in C.items()}
    return A, B, C


def fundamental_form(metric: HermitianMetric) -> GradedForm:
    return hermitian_form(metric.g)


def _check_shapes(sc: StructureConstants, metric: HermitianMetric) -> None:
    if metric.n != sc.n or metric.n_h != sc.n_h:
        raise StructureError(
            f"metric is {metric.n}x{metric.n} with n_h={metric.n_h}, algebra has n={sc.n} n_h={sc.n_h}"
        )


def _omega_matrix(g: np.ndarray, exact: bool) -> np.ndarray:
    """Omega[u, v] = omega(e_u, e_v) on the full frame."""
    n = g.shape[0]
    i = imag_unit(exact)
    om = zeros((2 * n, 2 * n), exact)
    om[:n, n:] = i * g
    om[n:, :n] = -i * g.T
    return om


def _trace_terms(table: np.ndarray, om: np.ndarray, weights: np.ndarray, n: int):
    """Weighted contractions shared by the Chern and Bismut formulas.

    along_10[m] = sum K[c,d] omega([e_m, X_c], Xbar_d)
    along_01[m] = sum K[d,c] omega([e_m, Xbar_c], X_d)
    """
    co_10 = np.tensordot(table[:, :n, :], om[:, n:], axes=([2], [0]))
    co_01 = np.tensordot(table[:, n:, :], om[:, :n], axes=([2], [0]))
    along_10 = np.tensordot(co_10, weights, axes=([1, 2], [0, 1]))
    along_01 = np.tensordot(co_01, weights.T, axes=([1, 2], [0, 1]))
    return along_10, along_01


def _finish(rho: np.ndarray, exact: bool) -> np.ndarray:
    coeffs = -imag_unit(exact) * rho
    return settle_array(coeffs) if exact else np.asarray(coeffs, dtype=complex)


def chern_ricci_matrix(sc: StructureConstants, metric: HermitianMetric) -> np.ndarray:
    """Coefficient matrix of rho_C, summed over a Cholesky unitary frame."""
    _check_shapes(sc, metric)
    exact = sc.exact or metric.exact
    n = sc.n
    table = sc.brackets
    om = _omega_matrix(metric.g, exact)
    along_10, along_01 = _trace_terms(table, om, metric.unitary_weights(), n)
    pairs = table[:n, n:, :]
    rho = -(np.tensordot(pairs[:, :, n:], along_10[n:], axes=([2], [0]))
            + np.tensordot(pairs[:, :, :n], along_01[:n], axes=([2], [0])))
    return _finish(rho, exact)


def bismut_ricci_matrix(sc: StructureConstants, metric: HermitianMetric) -> np.ndarray:
    """Coefficient matrix of the (1,1) part of the Bismut-Ricci form, in the given frame."""
    _check_shapes(sc, metric)
    exact = sc.exact or metric.exact
    n = sc.n
    table = sc.brackets
    i = imag_unit(exact)
    om = _omega_matrix(metric.g, exact)
    weights = metric.inverse().T
    along_10, along_01 = _trace_terms(table, om, weights, n)
    pairs = table[:n, n:, :]
    twisted = np.tensordot(weights, pairs, axes=([0, 1], [0, 1]))
    twisted = np.concatenate([i * twisted[:n], -i * twisted[n:]])
    rho = -(np.tensordot(pairs[:, :, :n], along_10[:n], axes=([2], [0]))
            + np.tensordot(pairs[:, :, n:], along_01[n:], axes=([2], [0])))
    rho = rho + i * np.tensordot(pairs, om @ twisted, axes=([2], [0]))
    return _finish(rho, exact)


def chern_ricci(sc: StructureConstants, metric: HermitianMetric) -> GradedForm:
    return hermitian_form(chern_ricci_matrix(sc, metric))


def bismut_ricci_11(sc: StructureConstants, metric: HermitianMetric) -> GradedForm:
    return hermitian_form(bismut_ricci_matrix(sc, metric))


def ot_bismut_ricci_matrix(p: OTParams, metric: HermitianMetric,
                           tol: Optional[float] = None) -> np.ndarray:
    if not p.admissible:
        raise ParameterError("closed-form Bismut-Ricci needs pluriclosed-admissible params")
    A, B, C = normal_form_from_metric(metric, tol)
    admissible = set(admissible_off_diagonal_indices(p, tol))
    stray = sorted(set(C) - admissible)
    if stray:
        raise MetricError(f"mixed entries at non-admissible indices {[q + 1 for q in stray]}")
    exact = metric.exact
    s = p.s
    i = imag_unit(exact)
    three_quarters = rational(3, 4, exact)
    out = zeros((2 * s, 2 * s), exact)
    for q in range(s):
        out[q, q] = -three_quarters
    for q, mixed in C.items():
        u = A[q] * B[q] - mixed * conj(mixed)
        cpp = as_array([p.c[q, q]], exact)[0]
        out[q, q] = -three_quarters * (1 + mixed * conj(mixed) / u)
        entry = (rational(3, 16, exact) + cpp * cpp / 4 + i * cpp / 4) * B[q] * mixed / u
        out[q, s + q] = entry
        out[s + q, q] = conj(entry)
    return settle_array(out) if exact else out


def ot_bismut_ricci_closed_form(p: OTParams, metric: HermitianMetric,
                                tol: Optional[float] = None) -> GradedForm:
    return hermitian_form(ot_bismut_ricci_matrix(p, metric, tol))


def ricci_endomorphism(rho: GradedForm, metric: HermitianMetric) -> np.ndarray:
    """Endomorphism P of g^{1,0} with rho(X, Ybar) = omega(P X, Ybar).

    P acts on coefficient columns, so P = (H g^{-1})^T where H is the
    coefficient matrix of rho.
    """
    if rho.n != metric.n:
        raise StructureError(f"form is on n={rho.n}, metric on n={metric.n}")
    coeffs = hermitian_coefficients(rho, exact=metric.exact)
    out = (coeffs @ metric.inverse()).T
    return settle_array(out) if metric.exact else out


def semidirect_chern_ricci_closed_form(p: SemidirectParams) -> GradedForm:
    """rho_C(Z_i, Zbar_i) = -i (1/2 - sum_a Im lambda_a(Z_i)), all other entries zero."""
    n = p.r + p.s
    coeffs = np.zeros((n, n), dtype=complex)
    offsets = p.lam.imag.sum(axis=1)
    for k in range(p.r):
        coeffs[k, k] = -(0.5 - offsets[k])
    return hermitian_form(coeffs)


def semidirect_bismut_h_rates(p: SemidirectParams, metric: HermitianMetric,
                              tol: Optional[float] = None) -> np.ndarray:
    """d/dt g_{i ibar} of the generalized flow for a metric making h and I orthogonal."""
    tol = config.settings.tol if tol is None else tol
    if metric.n_h != p.r or metric.n_i != p.s:
        raise StructureError("metric shape does not match the semidirect data")
    g = to_complex(metric.g)
    if np.max(np.abs(g[:p.r, p.r:]), initial=0.0) > tol:
        raise MetricError("h and I are not orthogonal for this metric")
    inv_diag = np.real(np.diag(np.linalg.inv(g)))[:p.r]
    spread = 0.5 * (np.real(g[:p.r, :p.r]) @ inv_diag)
    return spread + p.w_action().imag.sum(axis=1)


# --- pluriclosed classification --------------------------------------------------------------


def pluriclosed_defect(sc: StructureConstants, metric: HermitianMetric) -> GradedForm:
    _check_shapes(sc, metric)
    return del_delbar(fundamental_form(metric), sc)


def is_pluriclosed(sc: StructureConstants, metric: HermitianMetric,
                   tol: Optional[float] = None) -> bool:
    """Brute-force test: del delbar omega = 0 on the Chevalley-Eilenberg complex."""
    return pluriclosed_defect(sc, metric).is_zero(tol)


def matches_pluriclosed_normal_form(p: OTParams, metric: HermitianMetric,
                                    tol: Optional[float] = None) -> bool:
    if not p.admissible or metric.n_h != p.r or metric.n_i != p.s:
        return False
    try:
        _, _, C = normal_form_from_metric(metric, tol)
    except MetricError:
        return False
    return set(C) <= set(admissible_off_diagonal_indices(p, tol))


def pluriclosed_conditions(p: OTParams, metric: HermitianMetric,
                           tol: Optional[float] = None) -> List[str]:
    """Violated conditions of del delbar omega = 0 for OT data, one message per entry."""
    tol = config.settings.tol if tol is None else tol
    if metric.n_h != p.r or metric.n_i != p.s:
        raise StructureError("metric shape does not match the OT params")
    if not p.admissible:
        return ["params are not pluriclosed-admissible: no pluriclosed metric exists"]
    s = p.s
    g = metric.g
    exact = metric.exact
    lam_bar = conj_array(p.weights(exact))
    violations = []
    for a in range(s):
        for b in range(a + 1, s):
            entry = g[a, b]
            if not is_zero(settle((entry + conj(entry)) / 2), tol):
                violations.append(f"Re g(Z{a + 1}, Zbar{b + 1}) must vanish")
            if not is_zero(settle(g[s + a, s + b]), tol):
                violations.append(f"g(W{a + 1}, Wbar{b + 1}) must vanish")
    for q in range(s):
        column = [g[j, s + q] for j in range(s)]
        for a in range(s):
            for b in range(a + 1, s):
                cross = settle(column[a] * lam_bar[b, q] - column[b] * lam_bar[a, q])
                if not is_zero(cross, tol):
                    violations.append(
                        f"mixed column {q + 1} is not proportional to conj(lambda) column {q + 1} "
                        f"(rows {a + 1}, {b + 1})"
                    )
    return violations


@dataclass
class PluriclosedClassification:
    pluriclosed: bool
    normal_form: bool
    violations: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"pluriclosed": self.pluriclosed, "normal_form": self.normal_form,
                "violations": list(self.violations)}


def classify_pluriclosed(p: OTParams, metric: HermitianMetric,
                         tol: Optional[float] = None) -> PluriclosedClassification:
    violations = pluriclosed_conditions(p, metric, tol)
    result = PluriclosedClassification(
        pluriclosed=not violations,
        normal_form=matches_pluriclosed_normal_form(p, metric, tol),
        violations=violations,
    )
    logger.debug("classified metric pluriclosed=%s normal_form=%s", result.pluriclosed, result.normal_form)
    return result
