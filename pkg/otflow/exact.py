"""
Arithmetic modes.

Floating mode stores coefficients as numpy complex128. Exact mode stores
sympy numbers (Gaussian rationals whenever the inputs are rational) inside
numpy object arrays, so the same tensordot/matmul code runs in both modes.
"""
from __future__ import annotations

import numbers
from typing import Any, Iterable, Tuple

import numpy as np
import sympy


def to_exact(value: Any) -> sympy.Expr:
    """Convert a Python or numpy scalar to a sympy number.

    Floats go through their shortest decimal representation, so 0.1 becomes
    1/10 rather than the nearest binary fraction.
    """
    if isinstance(value, sympy.Basic):
        return value
    if isinstance(value, (bool, np.bool_)):
        return sympy.Integer(int(value))
    if isinstance(value, (numbers.Integral, np.integer)):
        return sympy.Integer(int(value))
    if isinstance(value, (complex, np.complexfloating)):
        value = complex(value)
        return _real_exact(value.real) + sympy.I * _real_exact(value.imag)
    return _real_exact(float(value))


def _real_exact(x: float) -> sympy.Rational:
    if not np.isfinite(x):
        raise ValueError(f"cannot represent {x!r} exactly")
    return sympy.Rational(repr(float(x)))


def imag_unit(exact: bool):
    return sympy.I if exact else 1j


def rational(numerator: int, denominator: int, exact: bool):
    return sympy.Rational(numerator, denominator) if exact else numerator / denominator


def scalar(value: Any, exact: bool):
    return to_exact(value) if exact else complex(value)


def zeros(shape: Tuple[int, ...], exact: bool) -> np.ndarray:
    if exact:
        return np.full(shape, sympy.Integer(0), dtype=object)
    return np.zeros(shape, dtype=complex)


def identity(n: int, exact: bool) -> np.ndarray:
    out = zeros((n, n), exact)
    for k in range(n):
        out[k, k] = sympy.Integer(1) if exact else 1.0
    return out


def is_exact_array(a: np.ndarray) -> bool:
    return a.dtype == object


def as_array(values: Any, exact: bool) -> np.ndarray:
    """Coerce nested sequences into a coefficient array of the requested mode."""
    arr = np.asarray(values, dtype=object if exact else complex)
    if exact:
        return np.vectorize(to_exact, otypes=[object])(arr) if arr.size else arr
    return arr


def settle(x: Any) -> Any:
    """Canonical form of a coefficient: expanded for sympy, untouched otherwise."""
    if isinstance(x, sympy.Basic):
        return sympy.expand(x)
    return x


def settle_array(a: np.ndarray) -> np.ndarray:
    if not is_exact_array(a) or a.size == 0:
        return a
    return np.vectorize(settle, otypes=[object])(a)


def conj(x: Any) -> Any:
    if isinstance(x, sympy.Basic):
        return sympy.conjugate(x)
    return np.conj(x)


def conj_array(a: np.ndarray) -> np.ndarray:
    if is_exact_array(a):
        if a.size == 0:
            return a.copy()
        return np.vectorize(lambda x: sympy.expand(sympy.conjugate(x)), otypes=[object])(a)
    return np.conj(a)


def is_zero(x: Any, tol: float) -> bool:
    if isinstance(x, sympy.Basic):
        return sympy.expand(x) == 0
    return abs(x) <= tol


def magnitude(x: Any) -> float:
    return abs(complex(settle(x)))


def to_complex(a: np.ndarray) -> np.ndarray:
    """Floating copy of a coefficient array of either mode."""
    if is_exact_array(a):
        return settle_array(a).astype(complex)
    return np.asarray(a, dtype=complex)


def max_norm(a: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(to_complex(a))))


def all_zero(values: Iterable[Any], tol: float) -> bool:
    return all(is_zero(v, tol) for v in values)
