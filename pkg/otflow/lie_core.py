"""
Complexified Lie algebras on an adapted frame.

The frame is always ordered (Z_1..Z_r, W_1..W_s, Zbar_1..Zbar_r, Wbar_1..Wbar_s),
so index a < n is a (1,0) vector and a + n is its conjugate, where n = r + s.
The first r vectors span h^{1,0}; the next s span the ideal I^{1,0}.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg as sla

from otflow import config
from otflow.errors import AlgebraValidationError, StructureError
from otflow.exact import conj_array, is_exact_array, max_norm, settle_array, to_complex, zeros

logger = logging.getLogger(__name__)

Triple = Tuple[int, int, int]
# Coefficients on the frame (Z, W, Zbar, Wbar), length 2n.
FrameVector = np.ndarray


@dataclass(frozen=True, eq=False)
class StructureConstants:
    """Bracket table c[a][b][k] with [e_a, e_b] = sum_k c[a][b][k] e_k."""

    n_h: int
    n_i: int
    brackets: np.ndarray
    ot_type: bool = True

    def __post_init__(self):
        if self.n_h < 0 or self.n_i < 0:
            raise StructureError("frame counts must be non-negative")
        dim = 2 * (self.n_h + self.n_i)
        table = np.asarray(self.brackets)
        if table.shape != (dim, dim, dim):
            raise StructureError(
                f"bracket table has shape {table.shape}, expected {(dim, dim, dim)} "
                f"for n_h={self.n_h} n_i={self.n_i}"
            )
        if not is_exact_array(table):
            table = table.astype(complex)
        table = table.copy()
        table.setflags(write=False)
        object.__setattr__(self, "brackets", table)

    @property
    def n(self) -> int:
        return self.n_h + self.n_i

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def exact(self) -> bool:
        return is_exact_array(self.brackets)

    def conjugate_index(self, a: int) -> int:
        return (a + self.n) % self.dim

    def conjugation(self) -> np.ndarray:
        return np.array([self.conjugate_index(a) for a in range(self.dim)])

    def ideal_indices(self) -> List[int]:
        n = self.n
        return list(range(self.n_h, n)) + list(range(n + self.n_h, 2 * n))

    def label(self, a: int) -> str:
        base = a % self.n
        bar = "bar" if a >= self.n else ""
        if base < self.n_h:
            return f"Z{bar}{base + 1}"
        return f"W{bar}{base - self.n_h + 1}"

    def basis_vector(self, a: int) -> FrameVector:
        v = zeros((self.dim,), self.exact)
        v[a] = 1
        return v


def abelian_algebra(n_h: int, n_i: int, exact: bool = False) -> StructureConstants:
    dim = 2 * (n_h + n_i)
    return StructureConstants(n_h, n_i, zeros((dim, dim, dim), exact), ot_type=False)


@dataclass
class ValidationReport:
    tol: float
    antisymmetry: float
    jacobi: float
    conjugation: float
    ideal: Optional[float] = None
    offending: Dict[str, Triple] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        defects = [self.antisymmetry, self.jacobi, self.conjugation]
        if self.ideal is not None:
            defects.append(self.ideal)
        return all(d <= self.tol for d in defects)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tol": self.tol,
            "antisymmetry": self.antisymmetry,
            "jacobi": self.jacobi,
            "conjugation": self.conjugation,
            "abelian_ideal": self.ideal,
            "offending": {k: list(v) for k, v in sorted(self.offending.items())},
        }


def _worst(defect: np.ndarray) -> Tuple[float, Tuple[int, ...]]:
    mags = np.abs(to_complex(defect))
    if mags.size == 0:
        return 0.0, ()
    idx = np.unravel_index(int(np.argmax(mags)), mags.shape)
    return float(mags[idx]), tuple(int(i) for i in idx)


def jacobi_tensor(table: np.ndarray) -> np.ndarray:
    """J[a,b,c,:] = [[a,b],c] + [[b,c],a] + [[c,a],b]."""
    nested = np.tensordot(table, table, axes=([2], [0]))
    return nested + nested.transpose(2, 0, 1, 3) + nested.transpose(1, 2, 0, 3)


def validate_algebra(sc: StructureConstants, tol: Optional[float] = None) -> ValidationReport:
    tol = config.settings.tol if tol is None else tol
    table = sc.brackets
    perm = sc.conjugation()

    anti, anti_at = _worst(table + table.transpose(1, 0, 2))
    conj_defect = table[perm][:, perm][:, :, perm] - conj_array(table)
    conj_value, conj_at = _worst(settle_array(conj_defect))
    jac, jac_at = _worst(settle_array(jacobi_tensor(table)))

    report = ValidationReport(tol=tol, antisymmetry=anti, jacobi=jac, conjugation=conj_value)
    for name, value, where in (("antisymmetry", anti, anti_at), ("jacobi", jac, jac_at),
                               ("conjugation", conj_value, conj_at)):
        if value > tol:
            report.offending[name] = tuple(where[:3])

    if sc.ot_type:
        ideal = sc.ideal_indices()
        outside = [a for a in range(sc.dim) if a not in ideal]
        inner = table[np.ix_(ideal, ideal, range(sc.dim))]
        leak = table[np.ix_(range(sc.dim), ideal, outside)]
        inner_value, inner_at = _worst(inner)
        leak_value, leak_at = _worst(leak)
        report.ideal = max(inner_value, leak_value)
        if inner_value > tol:
            a, b, k = inner_at
            report.offending["abelian_ideal"] = (ideal[a], ideal[b], k)
        elif leak_value > tol:
            a, b, k = leak_at
            report.offending["abelian_ideal"] = (a, ideal[b], outside[k])

    logger.debug("validated algebra n_h=%d n_i=%d passed=%s jacobi=%.3e",
                 sc.n_h, sc.n_i, report.passed, jac)
    return report


def require_valid(sc: StructureConstants, tol: Optional[float] = None) -> ValidationReport:
    report = validate_algebra(sc, tol)
    if not report.passed:
        raise AlgebraValidationError(f"algebra failed validation: offending={report.offending}", report)
    return report


def _check_vector(x: np.ndarray, sc: StructureConstants) -> np.ndarray:
    x = np.asarray(x, dtype=object if sc.exact or is_exact_array(np.asarray(x)) else complex)
    if x.shape != (sc.dim,):
        raise StructureError(f"vector has shape {x.shape}, expected ({sc.dim},)")
    return x


def bracket(x: Sequence, y: Sequence, sc: StructureConstants) -> FrameVector:
    """Bilinear extension of the bracket table to coefficient vectors."""
    x = _check_vector(x, sc)
    y = _check_vector(y, sc)
    partial = np.tensordot(y, sc.brackets, axes=([0], [1]))
    return settle_array(np.tensordot(x, partial, axes=([0], [0])))


def conjugate_vector(v: Sequence, sc: StructureConstants) -> FrameVector:
    v = _check_vector(v, sc)
    return conj_array(v)[sc.conjugation()]


def check_integrability(sc: StructureConstants, tol: Optional[float] = None) -> bool:
    """True iff [g^{1,0}, g^{1,0}] has no (0,1) component."""
    tol = config.settings.tol if tol is None else tol
    n = sc.n
    return max_norm(sc.brackets[:n, :n, n:]) <= tol


def derivation_defect(sc: StructureConstants, endo: np.ndarray) -> np.ndarray:
    """D[e_a,e_b] - [De_a,e_b] - [e_a,De_b] for every frame pair.

    ``endo`` acts on coefficient columns: D e_a = sum_k endo[k, a] e_k.
    """
    endo = np.asarray(endo)
    if endo.shape != (sc.dim, sc.dim):
        raise StructureError(f"endomorphism has shape {endo.shape}, expected ({sc.dim}, {sc.dim})")
    table = sc.brackets
    image = np.tensordot(table, endo, axes=([2], [1]))
    left = np.tensordot(endo, table, axes=([0], [0]))
    right = np.tensordot(table, endo, axes=([1], [0])).transpose(0, 2, 1)
    return image - left - right


def span_defect(basis: np.ndarray, vectors: np.ndarray) -> float:
    """Largest distance from a column of ``vectors`` to the column span of ``basis``."""
    vectors = np.atleast_2d(to_complex(np.asarray(vectors)))
    if vectors.size == 0:
        return 0.0
    basis = to_complex(np.asarray(basis))
    if basis.size == 0 or basis.shape[1] == 0:
        return float(np.max(np.linalg.norm(vectors, axis=0)))
    coeffs, *_ = np.linalg.lstsq(basis, vectors, rcond=None)
    return float(np.max(np.linalg.norm(basis @ coeffs - vectors, axis=0)))


def real_span(sc: StructureConstants, holomorphic: np.ndarray) -> np.ndarray:
    """Full-frame basis of V + conj(V) for V spanned by (1,0) columns of length n."""
    holomorphic = to_complex(np.asarray(holomorphic)).reshape(sc.n, -1)
    n, m = sc.n, holomorphic.shape[1]
    out = np.zeros((sc.dim, 2 * m), dtype=complex)
    out[:n, :m] = holomorphic
    for k in range(m):
        out[:, m + k] = to_complex(conjugate_vector(out[:, k], sc))
    return out


def bracket_closure_defect(sc: StructureConstants, span: np.ndarray, target: np.ndarray) -> float:
    """How far [span, span] falls outside ``target`` (both full-frame column bases)."""
    table = to_complex(sc.brackets)
    images = []
    for i in range(span.shape[1]):
        for j in range(span.shape[1]):
            partial = np.tensordot(span[:, j], table, axes=([0], [1]))
            images.append(np.tensordot(span[:, i], partial, axes=([0], [0])))
    if not images:
        return 0.0
    return span_defect(target, np.array(images).T)


def is_abelian_ideal(sc: StructureConstants, span: np.ndarray, tol: Optional[float] = None) -> bool:
    tol = config.settings.tol if tol is None else tol
    if span.shape[1] == 0:
        return True
    table = to_complex(sc.brackets)
    zero_target = np.zeros((sc.dim, 0), dtype=complex)
    if bracket_closure_defect(sc, span, zero_target) > tol:
        return False
    images = []
    for a in range(sc.dim):
        for j in range(span.shape[1]):
            partial = np.tensordot(span[:, j], table, axes=([0], [1]))
            images.append(partial[a])
    return span_defect(span, np.array(images).T) <= tol


def is_subalgebra(sc: StructureConstants, span: np.ndarray, tol: Optional[float] = None) -> bool:
    tol = config.settings.tol if tol is None else tol
    return bracket_closure_defect(sc, span, span) <= tol


def orthonormal_null_space(matrix: np.ndarray, tol: Optional[float] = None) -> np.ndarray:
    tol = config.settings.tol if tol is None else tol
    matrix = np.atleast_2d(np.asarray(matrix))
    if matrix.size == 0:
        return np.eye(matrix.shape[1])
    rows, cols = matrix.shape
    if rows > cols:
        # R of a QR factorization has the singular values and kernel of the tall system
        matrix = np.linalg.qr(matrix, mode="r")
    return sla.null_space(matrix, rcond=tol)
