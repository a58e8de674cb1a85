import numpy as np
import pytest

from otflow.errors import ParameterError
from otflow.lie_core import validate_algebra
from otflow.ot_model import (
    OTParams,
    SemidirectParams,
    admissible_off_diagonal_indices,
    admits_pluriclosed_metric,
    build_ot_algebra,
    build_semidirect,
    semidirect_from_ot,
    semidirect_soliton_constant,
)

from conftest import admissible_params


def test_row_sum_violation_names_the_row():
    b = np.array([[-1.0, 0.0], [-0.5, 0.0]])
    with pytest.raises(ParameterError, match="row 2"):
        OTParams(2, 2, b, np.zeros((2, 2)))


def test_shape_mismatch_rejected():
    with pytest.raises(ParameterError):
        OTParams(2, 1, np.array([[-1.0, 0.0]]), np.zeros((2, 1)))


def test_non_numeric_input_is_a_parameter_error():
    with pytest.raises(ParameterError):
        OTParams(1, 1, [["x"]], [[0.0]])


def test_permuted_admissible_pattern_is_reordered():
    b = np.array([[0.0, -1.0], [-1.0, 0.0]])
    c = np.array([[1.0, 2.0], [3.0, 4.0]])
    p = OTParams(2, 2, b, c)
    assert p.admissible
    assert p.permutation == (1, 0)
    assert np.array_equal(p.b, -np.eye(2))
    assert np.array_equal(p.c, np.array([[2.0, 1.0], [4.0, 3.0]]))


def test_general_params_are_not_admissible():
    p = OTParams(2, 1, np.array([[-1.0], [-1.0]]), np.array([[0.2], [-0.3]]))
    assert not p.admissible
    assert not admits_pluriclosed_metric(p)
    assert validate_algebra(build_ot_algebra(p)).passed
    with pytest.raises(ParameterError):
        admissible_off_diagonal_indices(p)


def test_weights_formula():
    p = admissible_params(2, c_diag=[0.4, -0.6], open_columns=(1,))
    lam = p.weights()
    assert lam[0, 0] == pytest.approx(-0.25j - 0.2)
    assert lam[1, 0] == 0
    assert lam[0, 1] == pytest.approx(-p.c[0, 1] / 2)


def test_admissible_indices(ot_pair):
    p, _ = ot_pair
    assert admissible_off_diagonal_indices(p) == (0,)


def test_exact_algebra_matches_float(ot_pair):
    p, sc = ot_pair
    exact = build_ot_algebra(p, exact=True)
    assert exact.exact
    assert np.allclose(exact.brackets.astype(complex), sc.brackets)
    assert validate_algebra(exact).passed


def test_semidirect_embedding_reproduces_ot_brackets(rng):
    p = admissible_params(2, open_columns=(0,), rng=rng)
    sd, flags = build_semidirect(semidirect_from_ot(p))
    assert np.allclose(sd.brackets, build_ot_algebra(p).brackets)
    assert flags.closed_form_hypotheses
    assert flags.v and flags.vi
    assert flags.v_constant == pytest.approx(0.25)
    assert flags.vi_constant == pytest.approx(0.25)


def test_semidirect_rejects_inconsistent_prime():
    lam = np.array([[0.1 + 0.2j]])
    with pytest.raises(ParameterError):
        build_semidirect(SemidirectParams(lam, lam_prime=lam))


def test_zero_action_is_abelian_extension():
    sc, flags = build_semidirect(SemidirectParams(np.zeros((1, 2))))
    assert validate_algebra(sc).passed
    assert flags.v and flags.v_constant == 0.0
    assert not flags.vi


def test_random_semidirect_is_valid(rng):
    for _ in range(10):
        lam = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))
        sc, flags = build_semidirect(SemidirectParams(lam))
        assert validate_algebra(sc).passed
        assert flags.closed_form_hypotheses


def test_semidirect_soliton_constant_for_ot_data():
    p = admissible_params(2, c_diag=[0.3, 0.1])
    assert semidirect_soliton_constant(semidirect_from_ot(p), 2.0) == pytest.approx(-0.375)


def test_semidirect_soliton_constant_needs_constant_rows():
    lam = np.array([[0.1j, 0.0], [0.5j, 0.0]])
    with pytest.raises(ParameterError):
        semidirect_soliton_constant(SemidirectParams(lam))
