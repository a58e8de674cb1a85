"""
Chevalley-Eilenberg exterior calculus on the dual frame.

Forms are sparse maps from strictly increasing multi-indices over the dual
frame (omega^1..omega^r, gamma^1..gamma^s, then their conjugates) to complex
coefficients. Wedge convention: (a ^ b)(x, y) = a(x) b(y) - a(y) b(x), and the
differential of a 1-form is d alpha(x, y) = -alpha([x, y]).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np

from otflow import config
from otflow.errors import StructureError
from otflow.exact import conj, imag_unit, is_exact_array, is_zero, settle, to_complex, zeros
from otflow.lie_core import StructureConstants, require_valid

logger = logging.getLogger(__name__)

MultiIndex = Tuple[int, ...]


def _canonical(indices: Iterable[int]) -> Tuple[Optional[MultiIndex], int]:
    """Sort a multi-index, returning (sorted, sign) or (None, 0) on a repeat."""
    idx = list(indices)
    if len(set(idx)) != len(idx):
        return None, 0
    sign = 1
    for i in range(1, len(idx)):
        j = i
        while j > 0 and idx[j - 1] > idx[j]:
            idx[j - 1], idx[j] = idx[j], idx[j - 1]
            sign = -sign
            j -= 1
    return tuple(idx), sign


def _prune(coeff: Any, tol: float) -> bool:
    return is_zero(coeff, tol)


@dataclass(frozen=True, eq=False)
class GradedForm:
    dim: int
    degree: int
    terms: Mapping[MultiIndex, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim % 2:
            raise StructureError(f"coframe size must be even, got {self.dim}")
        for key in self.terms:
            if len(key) != self.degree:
                raise StructureError(f"term {key} does not have degree {self.degree}")
            if any(i < 0 or i >= self.dim for i in key) or list(key) != sorted(set(key)):
                raise StructureError(f"term {key} is not a strictly increasing multi-index")

    @classmethod
    def build(cls, dim: int, degree: int, raw: Mapping[Iterable[int], Any],
              prune_tol: Optional[float] = None) -> "GradedForm":
        """Canonicalize unsorted multi-indices, merge duplicates and drop zeros."""
        prune_tol = config.settings.prune_tol if prune_tol is None else prune_tol
        acc: Dict[MultiIndex, Any] = {}
        for key, coeff in raw.items():
            canon, sign = _canonical(key)
            if canon is None:
                continue
            acc[canon] = acc.get(canon, 0) + sign * coeff
        terms = {}
        for key, coeff in acc.items():
            coeff = settle(coeff)
            if not _prune(coeff, prune_tol):
                terms[key] = coeff
        return cls(dim, degree, terms)

    @property
    def n(self) -> int:
        return self.dim // 2

    def bidegree_of(self, key: MultiIndex) -> Tuple[int, int]:
        p = sum(1 for i in key if i < self.n)
        return p, len(key) - p

    def bidegrees(self) -> List[Tuple[int, int]]:
        return sorted({self.bidegree_of(k) for k in self.terms})

    def is_pure(self, p: int, q: int) -> bool:
        return all(self.bidegree_of(k) == (p, q) for k in self.terms)

    def coefficient(self, *indices: int) -> Any:
        canon, sign = _canonical(indices)
        if canon is None:
            return 0
        return sign * self.terms.get(canon, 0)

    def _same_space(self, other: "GradedForm") -> None:
        if self.dim != other.dim:
            raise StructureError(f"coframe dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other: "GradedForm") -> "GradedForm":
        self._same_space(other)
        if self.degree != other.degree and self.terms and other.terms:
            raise StructureError(f"cannot add forms of degree {self.degree} and {other.degree}")
        raw: Dict[MultiIndex, Any] = dict(self.terms)
        for key, coeff in other.terms.items():
            raw[key] = raw.get(key, 0) + coeff
        degree = self.degree if self.terms else other.degree
        return GradedForm.build(self.dim, degree, raw)

    def __neg__(self) -> "GradedForm":
        return self.scale(-1)

    def __sub__(self, other: "GradedForm") -> "GradedForm":
        return self + (-other)

    def scale(self, factor: Any) -> "GradedForm":
        return GradedForm.build(self.dim, self.degree, {k: factor * v for k, v in self.terms.items()})

    def conjugate(self) -> "GradedForm":
        n = self.n
        raw = {tuple((i + n) % self.dim for i in key): conj(v) for key, v in self.terms.items()}
        return GradedForm.build(self.dim, self.degree, raw)

    def max_norm(self) -> float:
        if not self.terms:
            return 0.0
        return max(abs(complex(settle(v))) for v in self.terms.values())

    def is_zero(self, tol: Optional[float] = None) -> bool:
        tol = config.settings.tol if tol is None else tol
        return all(is_zero(v, tol) for v in self.terms.values())

    def label(self, i: int, n_h: int) -> str:
        base = i % self.n
        bar = "bar" if i >= self.n else ""
        if base < n_h:
            return f"omega{bar}{base + 1}"
        return f"gamma{bar}{base - n_h + 1}"

    def render(self, n_h: int) -> str:
        if not self.terms:
            return "0"
        parts = []
        for key in sorted(self.terms):
            basis = "^".join(self.label(i, n_h) for i in key) or "1"
            parts.append(f"({self.terms[key]})*{basis}")
        return " + ".join(parts)


def coframe(index: int, dim: int) -> GradedForm:
    return GradedForm(dim, 1, {(index,): 1})


def constant(value: Any, dim: int) -> GradedForm:
    return GradedForm.build(dim, 0, {(): value})


def wedge(a: GradedForm, b: GradedForm) -> GradedForm:
    a._same_space(b)
    raw: Dict[MultiIndex, Any] = {}
    for ka, va in a.terms.items():
        for kb, vb in b.terms.items():
            canon, sign = _canonical(ka + kb)
            if canon is None:
                continue
            raw[canon] = raw.get(canon, 0) + sign * va * vb
    return GradedForm.build(a.dim, a.degree + b.degree, raw)


@lru_cache(maxsize=128)
def _coframe_differentials(sc: StructureConstants) -> Tuple[Tuple[Tuple[int, int, Any], ...], ...]:
    """d theta^k = -sum_{a<b} c[a][b][k] theta^a ^ theta^b, cached per algebra."""
    require_valid(sc)
    table = sc.brackets
    out = []
    for k in range(sc.dim):
        entries = []
        for a in range(sc.dim):
            for b in range(a + 1, sc.dim):
                coeff = settle(table[a, b, k])
                if not is_zero(coeff, 0.0):
                    entries.append((a, b, -coeff))
        out.append(tuple(entries))
    return tuple(out)


def ce_differential(a: GradedForm, sc: StructureConstants) -> GradedForm:
    """Chevalley-Eilenberg differential, extended from the coframe as an antiderivation."""
    if a.dim != sc.dim:
        raise StructureError(f"form lives on a coframe of size {a.dim}, algebra has {sc.dim}")
    dtheta = _coframe_differentials(sc)
    raw: Dict[MultiIndex, Any] = {}
    for key, coeff in a.terms.items():
        for pos, i in enumerate(key):
            sign = -1 if pos % 2 else 1
            for p, q, c in dtheta[i]:
                canon, s = _canonical(key[:pos] + (p, q) + key[pos + 1:])
                if canon is None:
                    continue
                raw[canon] = raw.get(canon, 0) + sign * s * c * coeff
    return GradedForm.build(a.dim, a.degree + 1, raw)


def bidegree_split(a: GradedForm) -> Dict[Tuple[int, int], GradedForm]:
    parts: Dict[Tuple[int, int], Dict[MultiIndex, Any]] = {}
    for key, coeff in a.terms.items():
        parts.setdefault(a.bidegree_of(key), {})[key] = coeff
    if not parts:
        return {}
    return {pq: GradedForm(a.dim, a.degree, terms) for pq, terms in sorted(parts.items())}


def bidegree_part(a: GradedForm, p: int, q: int) -> GradedForm:
    return bidegree_split(a).get((p, q), GradedForm(a.dim, p + q, {}))


def del_delbar(a: GradedForm, sc: StructureConstants) -> GradedForm:
    """del delbar of a pure (1,1) form: the (2,2) part of d applied to delbar a."""
    if a.degree != 2 or not a.is_pure(1, 1):
        raise StructureError(f"del_delbar expects a pure (1,1) form, got bidegrees {a.bidegrees()}")
    delbar = bidegree_part(ce_differential(a, sc), 1, 2)
    return bidegree_part(ce_differential(delbar, sc), 2, 2)


def hermitian_form(coeffs: np.ndarray, n: Optional[int] = None) -> GradedForm:
    """The (1,1) form i * sum H_ab alpha^a ^ conj(alpha^b) of an n x n coefficient matrix."""
    coeffs = np.asarray(coeffs)
    n = coeffs.shape[0] if n is None else n
    if coeffs.shape != (n, n):
        raise StructureError(f"coefficient matrix has shape {coeffs.shape}, expected ({n}, {n})")
    i = imag_unit(is_exact_array(coeffs))
    raw = {(a, n + b): i * coeffs[a, b] for a in range(n) for b in range(n)}
    return GradedForm.build(2 * n, 2, raw)


def hermitian_coefficients(form: GradedForm, exact: bool = False) -> np.ndarray:
    """Inverse of hermitian_form on the (1,1) part of a 2-form."""
    if form.degree != 2:
        raise StructureError(f"expected a 2-form, got degree {form.degree}")
    n = form.n
    out = zeros((n, n), exact)
    i = imag_unit(exact)
    for (p, q), coeff in form.terms.items():
        if p < n <= q:
            out[p, q - n] = settle(-i * coeff) if exact else -1j * complex(coeff)
    return out


def evaluate(form: GradedForm, x: np.ndarray, y: np.ndarray) -> complex:
    """Value of a 2-form on two full-frame coefficient vectors."""
    if form.degree != 2:
        raise StructureError(f"expected a 2-form, got degree {form.degree}")
    x = to_complex(np.asarray(x))
    y = to_complex(np.asarray(y))
    total = 0j
    for (a, b), coeff in form.terms.items():
        total += complex(settle(coeff)) * (x[a] * y[b] - x[b] * y[a])
    return total
