import numpy as np
import pytest

from otflow.errors import AlgebraValidationError, StructureError
from otflow.lie_core import (
    StructureConstants,
    abelian_algebra,
    bracket,
    check_integrability,
    conjugate_vector,
    derivation_defect,
    is_abelian_ideal,
    is_subalgebra,
    orthonormal_null_space,
    real_span,
    require_valid,
    validate_algebra,
)
from otflow.ot_model import build_ot_algebra

from conftest import admissible_params


def test_ot_algebra_passes_validation(ot_pair):
    _, sc = ot_pair
    report = validate_algebra(sc)
    assert report.passed
    assert report.jacobi < 1e-12
    assert report.ideal == 0.0
    assert report.to_dict()["offending"] == {}


def test_broken_antisymmetry_names_the_triple():
    sc0 = abelian_algebra(1, 1)
    table = np.array(sc0.brackets)
    table[0, 1, 1] = 1.0
    sc = StructureConstants(1, 1, table, ot_type=False)
    report = validate_algebra(sc)
    assert not report.passed
    assert report.offending["antisymmetry"] == (0, 1, 1)
    with pytest.raises(AlgebraValidationError) as info:
        require_valid(sc)
    assert info.value.report is not None


def test_non_abelian_ideal_is_reported():
    sc0 = abelian_algebra(1, 1)
    table = np.array(sc0.brackets)
    # [W, Wbar] = i(W + Wbar) keeps conjugation and antisymmetry but breaks the ideal
    table[1, 3, 1] = 1j
    table[3, 1, 1] = -1j
    table[1, 3, 3] = 1j
    table[3, 1, 3] = -1j
    sc = StructureConstants(1, 1, table, ot_type=True)
    report = validate_algebra(sc)
    assert report.antisymmetry == 0.0
    assert report.ideal == pytest.approx(1.0)
    assert "abelian_ideal" in report.offending


def test_table_shape_is_checked():
    with pytest.raises(StructureError):
        StructureConstants(1, 1, np.zeros((3, 3, 3)))


def test_bracket_matches_upper_half_plane_relation(ot_pair):
    p, sc = ot_pair
    n = sc.n
    z1 = sc.basis_vector(0)
    z1bar = sc.basis_vector(n)
    expected = np.zeros(sc.dim, dtype=complex)
    expected[0] = expected[n] = -0.5j
    assert np.allclose(bracket(z1, z1bar, sc), expected)


def test_bracket_with_ideal_uses_weights(ot_pair):
    p, sc = ot_pair
    lam = p.weights()
    w2 = sc.basis_vector(p.r + 1)
    out = bracket(sc.basis_vector(0), w2, sc)
    assert out[p.r + 1] == pytest.approx(-lam[0, 1])
    assert np.count_nonzero(np.abs(out) > 1e-14) == 1


def test_conjugation_of_bracket(ot_pair, rng):
    _, sc = ot_pair
    x = rng.normal(size=sc.dim) + 1j * rng.normal(size=sc.dim)
    y = rng.normal(size=sc.dim) + 1j * rng.normal(size=sc.dim)
    lhs = conjugate_vector(bracket(x, y, sc), sc)
    rhs = bracket(conjugate_vector(x, sc), conjugate_vector(y, sc), sc)
    assert np.allclose(lhs, rhs)


def test_real_span_pairs_each_column_with_its_conjugate(ot_pair, rng):
    _, sc = ot_pair
    n = sc.n
    hol = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
    span = real_span(sc, hol)
    assert span.shape == (sc.dim, 4)
    assert np.allclose(span[:n, :2], hol) and np.allclose(span[n:, :2], 0)
    assert np.allclose(span[n:, 2:], hol.conj()) and np.allclose(span[:n, 2:], 0)


def test_null_space_of_tall_system(rng):
    kernel = rng.normal(size=(6, 2))
    projector = np.eye(6) - kernel @ np.linalg.pinv(kernel)
    system = rng.normal(size=(500, 6)) @ projector
    null = orthonormal_null_space(system)
    assert null.shape == (6, 2)
    assert np.allclose(null.T @ null, np.eye(2))
    assert np.allclose(system @ null, 0, atol=1e-9)
    assert np.allclose(projector @ null, 0, atol=1e-9)


def test_ot_structure_is_integrable(ot_pair):
    assert check_integrability(ot_pair[1])


def test_identity_is_not_a_derivation(ot_pair):
    _, sc = ot_pair
    assert np.max(np.abs(derivation_defect(sc, np.eye(sc.dim)))) > 0.1


def test_scaling_the_ideal_is_a_derivation(ot_pair):
    _, sc = ot_pair
    d = np.zeros(sc.dim)
    d[sc.ideal_indices()] = 1.0
    assert np.max(np.abs(derivation_defect(sc, np.diag(d)))) < 1e-14


def test_ideal_and_complement_spans():
    p = admissible_params(2, c_diag=[0.1, -0.4])
    sc = build_ot_algebra(p)
    n = sc.n
    ideal = real_span(sc, np.eye(n)[:, p.r:])
    h = real_span(sc, np.eye(n)[:, :p.r])
    assert is_abelian_ideal(sc, ideal)
    assert is_subalgebra(sc, h)
    assert not is_abelian_ideal(sc, h)
