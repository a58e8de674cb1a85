"""
Oeljeklaus-Toma and semidirect-product Lie algebras.

OT data: r copies of the upper half-plane algebra acting on s complex lines
with weights lambda_ki = (i/4) b_ki - c_ki / 2, subject to sum_i b_ki = -1 for
every k. Parameters with r = s and b a (column-permuted) negative identity are
"pluriclosed-admissible"; they are reordered to b = -Id on construction.

Semidirect data: the same 2r-dimensional h acting diagonally on I through
lambda_a(Z_i) on Wbar_a and lambda'_a(Z_i) on W_a.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import sympy

from otflow import config
from otflow.errors import ParameterError
from otflow.exact import conj, imag_unit, rational, to_exact, zeros
from otflow.lie_core import StructureConstants, require_valid

logger = logging.getLogger(__name__)


def _admissible_permutation(b: np.ndarray, tol: float) -> Optional[Tuple[int, ...]]:
    """Column order making b = -Id, or None when b is not an admissible pattern."""
    r, s = b.shape
    if r != s:
        return None
    near_zero = np.abs(b) <= tol
    near_minus_one = np.abs(b + 1) <= tol
    if not np.all(near_zero | near_minus_one):
        return None
    if not (np.all(near_minus_one.sum(axis=1) == 1) and np.all(near_minus_one.sum(axis=0) == 1)):
        return None
    return tuple(int(np.argmax(row)) for row in near_minus_one)


@dataclass(frozen=True, eq=False)
class OTParams:
    r: int
    s: int
    b: np.ndarray
    c: np.ndarray
    permutation: Optional[Tuple[int, ...]] = field(default=None)

    def __post_init__(self):
        if self.r < 1 or self.s < 1:
            raise ParameterError(f"r and s must be positive, got r={self.r} s={self.s}")
        try:
            b = np.array(self.b, dtype=float)
            c = np.array(self.c, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ParameterError(f"b and c must be real matrices: {exc}") from exc
        for name, m in (("b", b), ("c", c)):
            if m.shape != (self.r, self.s):
                raise ParameterError(f"{name} has shape {m.shape}, expected ({self.r}, {self.s})")
            if not np.all(np.isfinite(m)):
                raise ParameterError(f"{name} has non-finite entries")
        tol = config.settings.admissibility_tol
        sums = b.sum(axis=1)
        for k, total in enumerate(sums):
            if abs(total + 1) > tol:
                raise ParameterError(f"row {k + 1} of b sums to {total:g}, expected -1")
        perm = _admissible_permutation(b, tol)
        if perm is not None:
            if perm != tuple(range(self.s)):
                logger.info("reordered admissible columns permutation=%s", [p + 1 for p in perm])
            b = -np.eye(self.s)
            c = c[:, list(perm)]
        for name, m in (("b", b), ("c", c)):
            m.setflags(write=False)
            object.__setattr__(self, name, m)
        object.__setattr__(self, "permutation", perm)

    @property
    def admissible(self) -> bool:
        return self.permutation is not None

    @property
    def n(self) -> int:
        return self.r + self.s

    def weights(self, exact: bool = False) -> np.ndarray:
        """lambda_ki = (i/4) b_ki - c_ki / 2."""
        if not exact:
            return 0.25j * self.b - 0.5 * self.c
        out = zeros((self.r, self.s), True)
        for k in range(self.r):
            for i in range(self.s):
                out[k, i] = sympy.expand(sympy.I / 4 * to_exact(self.b[k, i]) - to_exact(self.c[k, i]) / 2)
        return out

    def to_dict(self) -> dict:
        return {"r": self.r, "s": self.s, "b": self.b.tolist(), "c": self.c.tolist()}


def admits_pluriclosed_metric(p: OTParams) -> bool:
    return p.admissible


def _frame(r: int, s: int):
    n = r + s
    z = list(range(r))
    w = list(range(r, n))
    return n, z, w


def _set_bracket(table: np.ndarray, a: int, b: int, k: int, value) -> None:
    table[a, b, k] = table[a, b, k] + value
    table[b, a, k] = table[b, a, k] - value


def _upper_half_plane_brackets(table: np.ndarray, r: int, n: int, exact: bool) -> None:
    half_i = imag_unit(exact) * rational(1, 2, exact)
    for k in range(r):
        # [Z_k, Zbar_k] = -(i/2)(Z_k + Zbar_k)
        _set_bracket(table, k, n + k, k, -half_i)
        _set_bracket(table, k, n + k, n + k, -half_i)


def build_ot_algebra(p: OTParams, exact: bool = False) -> StructureConstants:
    n, z, w = _frame(p.r, p.s)
    lam = p.weights(exact)
    table = zeros((2 * n, 2 * n, 2 * n), exact)
    _upper_half_plane_brackets(table, p.r, n, exact)
    for k in z:
        for i in range(p.s):
            wi = w[i]
            value = lam[k, i]
            _set_bracket(table, k, wi, wi, -value)                      # [Z_k, W_i] = -lambda W_i
            _set_bracket(table, k, n + wi, n + wi, conj(value))         # [Z_k, Wbar_i] = conj(lambda) Wbar_i
            _set_bracket(table, n + k, n + wi, n + wi, -conj(value))    # [Zbar_k, Wbar_i]
            _set_bracket(table, n + k, wi, wi, value)                   # [Zbar_k, W_i]
    sc = StructureConstants(p.r, p.s, table, ot_type=True)
    logger.info("built ot algebra r=%d s=%d admissible=%s exact=%s", p.r, p.s, p.admissible, exact)
    return sc


def admissible_off_diagonal_indices(p: OTParams, tol: Optional[float] = None) -> Tuple[int, ...]:
    """0-based indices q whose lambda column vanishes off the diagonal."""
    if not p.admissible:
        raise ParameterError("off-diagonal indices are only defined for pluriclosed-admissible params")
    tol = config.settings.tol if tol is None else tol
    lam = p.weights()
    return tuple(
        q for q in range(p.s)
        if all(abs(lam[j, q]) <= tol for j in range(p.r) if j != q)
    )


@dataclass(frozen=True, eq=False)
class SemidirectParams:
    """Diagonal action tables: lam[i, a] = lambda_a(Z_i), lam_prime[i, a] = lambda'_a(Z_i)."""

    lam: np.ndarray
    lam_prime: Optional[np.ndarray] = None

    def __post_init__(self):
        lam = np.atleast_2d(np.array(self.lam, dtype=complex))
        if lam.ndim != 2 or lam.shape[0] < 1 or lam.shape[1] < 1:
            raise ParameterError(f"lambda table must be a non-empty r x s table, got shape {lam.shape}")
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        if self.lam_prime is not None:
            prime = np.atleast_2d(np.array(self.lam_prime, dtype=complex))
            if prime.shape != lam.shape:
                raise ParameterError(
                    f"lambda_prime has shape {prime.shape}, lambda has {lam.shape}"
                )
            prime.setflags(write=False)
            object.__setattr__(self, "lam_prime", prime)

    @property
    def r(self) -> int:
        return self.lam.shape[0]

    @property
    def s(self) -> int:
        return self.lam.shape[1]

    def w_action(self) -> np.ndarray:
        """lambda'_a(Z_i); forced to -conj(lambda_a(Z_i)) when not supplied."""
        return self.lam_prime if self.lam_prime is not None else -self.lam.conj()


@dataclass
class ConditionFlags:
    i: bool = True
    ii: bool = True
    iii: bool = True
    iv: bool = True
    v: bool = False
    vi: bool = False
    v_constant: Optional[float] = None
    vi_constant: Optional[float] = None

    @property
    def closed_form_hypotheses(self) -> bool:
        return self.i and self.ii and self.iii and self.iv

    def to_dict(self) -> dict:
        return {
            "i": self.i, "ii": self.ii, "iii": self.iii, "iv": self.iv, "v": self.v, "vi": self.vi,
            "v_constant": self.v_constant, "vi_constant": self.vi_constant,
        }


def _constant_row_sum(values: np.ndarray, tol: float) -> Tuple[bool, Optional[float]]:
    sums = values.imag.sum(axis=1)
    if bool(np.max(np.abs(sums - sums[0])) <= tol):
        return True, float(sums[0])
    return False, None


def semidirect_flags(p: SemidirectParams, tol: Optional[float] = None) -> ConditionFlags:
    tol = config.settings.tol if tol is None else tol
    flags = ConditionFlags()
    flags.v, flags.v_constant = _constant_row_sum(p.lam, tol)
    if p.lam_prime is not None:
        flags.vi, flags.vi_constant = _constant_row_sum(p.lam_prime, tol)
    return flags


def build_semidirect(p: SemidirectParams, tol: Optional[float] = None,
                     exact: bool = False) -> Tuple[StructureConstants, ConditionFlags]:
    tol = config.settings.tol if tol is None else tol
    prime = p.w_action()
    if np.max(np.abs(prime + p.lam.conj())) > tol:
        raise ParameterError(
            "lambda_prime must equal -conj(lambda) entrywise for the action to be a representation"
        )
    n, z, w = _frame(p.r, p.s)
    table = zeros((2 * n, 2 * n, 2 * n), exact)
    _upper_half_plane_brackets(table, p.r, n, exact)
    cast = to_exact if exact else complex
    for k in z:
        for a in range(p.s):
            wa = w[a]
            on_bar = cast(p.lam[k, a])
            on_hol = cast(prime[k, a])
            _set_bracket(table, k, n + wa, n + wa, on_bar)            # [Z_k, Wbar_a] = lambda_a(Z_k) Wbar_a
            _set_bracket(table, k, wa, wa, on_hol)                    # [Z_k, W_a] = lambda'_a(Z_k) W_a
            _set_bracket(table, n + k, wa, wa, conj(on_bar))
            _set_bracket(table, n + k, n + wa, n + wa, conj(on_hol))
    sc = StructureConstants(p.r, p.s, table, ot_type=True)
    require_valid(sc, tol)
    flags = semidirect_flags(p, tol)
    logger.info("built semidirect algebra r=%d s=%d flags=%s", p.r, p.s, flags.to_dict())
    return sc, flags


def semidirect_from_ot(p: OTParams) -> SemidirectParams:
    """Embed OT data: lambda_a(Z_i) = conj(lambda_ia), lambda'_a(Z_i) = -lambda_ia."""
    lam = p.weights()
    return SemidirectParams(lam=lam.conj(), lam_prime=-lam)


def semidirect_soliton_constant(p: SemidirectParams, scale: float = 1.0) -> float:
    """Cosmological constant of the h-block ``scale * Id`` metric, solver sign convention."""
    constant, offset = _constant_row_sum(p.w_action(), config.settings.tol)
    if not constant:
        raise ParameterError("sum_a Im lambda'_a(Z_i) is not constant in i")
    return -(0.5 + offset) / scale

