"""
Derivations and algebraic solitons.

A soliton certificate solves rho = c * omega + (omega(D., .) + omega(., D.)) / 2
for a real c and a real derivation D commuting with J. On coefficient
matrices, with E the (1,0) block of D (D X_a = sum_c E[c, a] X_c) and M = E^T,
that is H = c g + (M g + g M^*) / 2.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from otflow import config
from otflow.exact import to_complex
from otflow.exterior import GradedForm, hermitian_coefficients
from otflow.errors import MetricError
from otflow.hermitian import HermitianMetric, chern_ricci, normal_form_from_metric, ricci_endomorphism
from otflow.lie_core import (
    StructureConstants,
    derivation_defect,
    is_abelian_ideal,
    is_subalgebra,
    orthonormal_null_space,
    real_span,
    require_valid,
)
from otflow.ot_model import OTParams

logger = logging.getLogger(__name__)


def full_endomorphism(block: np.ndarray, anti: Optional[np.ndarray] = None) -> np.ndarray:
    """Real endomorphism [[E, conj(F)], [F, conj(E)]] on the full frame."""
    block = np.asarray(block, dtype=complex)
    n = block.shape[0]
    anti = np.zeros((n, n), dtype=complex) if anti is None else np.asarray(anti, dtype=complex)
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    out[:n, :n] = block
    out[n:, n:] = block.conj()
    out[n:, :n] = anti
    out[:n, n:] = anti.conj()
    return out


def derivation_space(sc: StructureConstants, commute_with_J: bool = True,
                     tol: Optional[float] = None) -> List[np.ndarray]:
    """Real basis of the derivations of g, as full-frame matrices.

    Unknowns are the real and imaginary parts of E (and of F when J-commutation
    is not imposed); the basis is the null space of the derivation identity on
    every frame pair.
    """
    tol = config.settings.tol if tol is None else tol
    require_valid(sc, tol)
    n = sc.n
    table = to_complex(sc.brackets)
    flat = StructureConstants(sc.n_h, sc.n_i, table, sc.ot_type)
    generators = []
    for half in ((0,) if commute_with_J else (0, 1)):
        for a in range(n):
            for b in range(n):
                for unit in (1.0, 1j):
                    entry = np.zeros((n, n), dtype=complex)
                    entry[a, b] = unit
                    generators.append(full_endomorphism(entry) if half == 0
                                      else full_endomorphism(np.zeros((n, n)), entry))
    columns = []
    for gen in generators:
        defect = derivation_defect(flat, gen).ravel()
        columns.append(np.concatenate([defect.real, defect.imag]))
    system = np.array(columns).T
    null = orthonormal_null_space(system, tol)
    basis = [sum(coeff * gen for coeff, gen in zip(vector, generators)) for vector in null.T]
    logger.debug("derivation space n_h=%d n_i=%d commute_with_J=%s real_dim=%d",
                 sc.n_h, sc.n_i, commute_with_J, len(basis))
    return basis


@dataclass
class SolitonCertificate:
    c: float
    D_block: np.ndarray
    residual: float
    derivation_defect: float = 0.0

    @property
    def expanding(self) -> bool:
        return self.c < 0

    @property
    def D(self) -> np.ndarray:
        return full_endomorphism(self.D_block)

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "D_block": [[{"re": float(v.real), "im": float(v.imag)} for v in row] for row in self.D_block],
            "residual": self.residual,
            "expanding": self.expanding,
        }


def _symmetrized(block: np.ndarray, g: np.ndarray) -> np.ndarray:
    m = block.T
    return 0.5 * (m @ g + g @ m.conj().T)


def detect_algebraic_soliton(sc: StructureConstants, metric: HermitianMetric, rho: GradedForm,
                             tol: Optional[float] = None) -> Optional[SolitonCertificate]:
    """Least-squares solve for (c, D); returns a certificate only when the residual is small."""
    tol = config.settings.soliton_tol if tol is None else tol
    g = to_complex(metric.g)
    target = to_complex(hermitian_coefficients(rho))
    n = sc.n
    blocks = [d[:n, :n] for d in derivation_space(sc, commute_with_J=True)]
    responses = [g] + [_symmetrized(block, g) for block in blocks]
    system = np.array([np.concatenate([r.real.ravel(), r.imag.ravel()]) for r in responses]).T
    rhs = np.concatenate([target.real.ravel(), target.imag.ravel()])
    solution, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    residual = float(np.max(np.abs(system @ solution - rhs), initial=0.0))
    scale = 1.0 + float(np.max(np.abs(target), initial=0.0))
    if residual > tol * scale:
        logger.debug("no soliton residual=%.3e threshold=%.3e", residual, tol * scale)
        return None
    c = float(solution[0])
    block = sum((coeff * b for coeff, b in zip(solution[1:], blocks)), np.zeros((n, n), dtype=complex))
    defect = float(np.max(np.abs(derivation_defect(StructureConstants(
        sc.n_h, sc.n_i, to_complex(sc.brackets), sc.ot_type), full_endomorphism(block))), initial=0.0))
    cert = SolitonCertificate(c=c, D_block=block, residual=residual, derivation_defect=defect)
    logger.info("soliton found c=%.6g residual=%.3e expanding=%s", c, residual, cert.expanding)
    return cert


def classify_chern_ricci_soliton(p: OTParams, metric: HermitianMetric,
                                 tol: Optional[float] = None) -> bool:
    """Shape test: h-block a multiple of Id and h orthogonal to I."""
    tol = config.settings.tol if tol is None else tol
    g = to_complex(metric.g)
    r = p.r
    if metric.n_h != r or metric.n_i != p.s:
        return False
    hh = g[:r, :r]
    scale = hh[0, 0].real
    if np.max(np.abs(hh - scale * np.eye(r))) > tol:
        return False
    return float(np.max(np.abs(g[:r, r:]), initial=0.0)) <= tol


def classify_pluriclosed_soliton(p: OTParams, metric: HermitianMetric,
                                 tol: Optional[float] = None) -> bool:
    """Shape test for pluriclosed solitons: diagonal normal form with every A_i equal."""
    tol = config.settings.tol if tol is None else tol
    try:
        A, _, C = normal_form_from_metric(metric, tol)
    except MetricError:
        return False
    if C:
        return False
    A = [float(np.real(complex(a))) for a in A]
    return max(A) - min(A) <= tol


@dataclass
class LauretReport:
    degenerate: bool
    eigenvalues: List[complex] = field(default_factory=list)
    c: Optional[float] = None
    criterion_1: bool = False
    criterion_2: bool = False
    criterion_3: bool = False

    @property
    def agree(self) -> bool:
        return self.criterion_1 == self.criterion_2 == self.criterion_3

    def to_dict(self) -> dict:
        return {
            "degenerate": self.degenerate,
            "eigenvalues": [{"re": float(np.real(v)), "im": float(np.imag(v))} for v in self.eigenvalues],
            "c": self.c,
            "criterion_1": self.criterion_1,
            "criterion_2": self.criterion_2,
            "criterion_3": self.criterion_3,
            "agree": self.agree,
        }


def _distinct(values: np.ndarray, tol: float) -> List[float]:
    out: List[float] = []
    for v in sorted(values):
        if not out or abs(v - out[-1]) > tol:
            out.append(float(v))
    return out


def theorem_lauret_equivalence_check(sc: StructureConstants, metric: HermitianMetric,
                                     rho: Optional[GradedForm] = None,
                                     tol: Optional[float] = None) -> LauretReport:
    """Evaluate the three equivalent Chern-Ricci soliton criteria independently.

    (1) a soliton certificate exists; (2) P - cI is a derivation for a nonzero
    eigenvalue c of P; (3) the spectrum of P is {0, c}, ker P is an abelian
    ideal and its orthogonal complement is a subalgebra.
    """
    tol = config.settings.tol if tol is None else tol
    rho = chern_ricci(sc, metric) if rho is None else rho
    P = to_complex(ricci_endomorphism(rho, metric))
    eigenvalues = np.linalg.eigvals(P)
    report = LauretReport(degenerate=bool(np.max(np.abs(P), initial=0.0) <= tol),
                          eigenvalues=[complex(v) for v in eigenvalues])
    if report.degenerate:
        logger.info("ricci endomorphism vanishes; criteria do not apply")
        return report

    report.criterion_1 = detect_algebraic_soliton(sc, metric, rho) is not None

    nonzero = _distinct(np.real(eigenvalues[np.abs(eigenvalues) > 1e3 * tol]), 1e3 * tol)
    flat = StructureConstants(sc.n_h, sc.n_i, to_complex(sc.brackets), sc.ot_type)
    n = sc.n
    for c in nonzero:
        shifted = full_endomorphism(P - c * np.eye(n))
        if np.max(np.abs(derivation_defect(flat, shifted))) <= 1e3 * tol:
            report.criterion_2 = True
            report.c = c
            break

    if len(nonzero) == 1:
        report.c = report.c if report.c is not None else nonzero[0]
        kernel = orthonormal_null_space(P, 1e3 * tol)
        g = to_complex(metric.g)
        if kernel.shape[1]:
            complement = orthonormal_null_space((g @ kernel.conj()).T, 1e3 * tol)
        else:
            complement = np.eye(n)
        report.criterion_3 = bool(is_abelian_ideal(flat, real_span(flat, kernel), 1e3 * tol)
                              and is_subalgebra(flat, real_span(flat, complement), 1e3 * tol))
    logger.info("lauret criteria c=%s c1=%s c2=%s c3=%s", report.c, report.criterion_1,
                report.criterion_2, report.criterion_3)
    return report
