import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from otflow.hermitian import HermitianMetric, metric_from_normal_form
from otflow.ot_model import OTParams, admissible_off_diagonal_indices, build_ot_algebra


def admissible_params(s, c_diag=None, open_columns=(), rng=None):
    """b = -Id; columns listed in open_columns get nonzero off-diagonal c entries."""
    rng = rng or np.random.default_rng(0)
    c = np.zeros((s, s))
    diag = rng.uniform(-1, 1, size=s) if c_diag is None else np.asarray(c_diag, dtype=float)
    c[np.arange(s), np.arange(s)] = diag
    for q in open_columns:
        for j in range(s):
            if j != q:
                c[j, q] = rng.uniform(0.2, 1.0)
    return OTParams(s, s, -np.eye(s), c)


def random_admissible_params(rng, s):
    closed = rng.integers(0, s + 1)
    open_columns = tuple(int(q) for q in rng.permutation(s)[closed:])
    return admissible_params(s, open_columns=open_columns, rng=rng)


def random_normal_form(rng, p, with_c=True):
    A = rng.uniform(0.5, 2.0, size=p.s)
    B = rng.uniform(0.5, 2.0, size=p.s)
    C = {}
    if with_c:
        for q in admissible_off_diagonal_indices(p):
            if rng.random() < 0.7:
                bound = 0.8 * np.sqrt(A[q] * B[q])
                C[q] = bound * rng.uniform(0.1, 1.0) * np.exp(2j * np.pi * rng.random())
    return A, B, C


def random_metric(rng, n, n_h):
    """Hermitian positive definite matrix with condition number kept moderate."""
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    g = x @ x.conj().T / n + np.eye(n)
    return HermitianMetric(g, n_h)


def random_orthogonal_metric(rng, n_h, n_i, diagonal_h=True):
    g = np.zeros((n_h + n_i, n_h + n_i), dtype=complex)
    if diagonal_h:
        g[:n_h, :n_h] = np.diag(rng.uniform(0.5, 2.0, size=n_h))
    else:
        g[:n_h, :n_h] = random_metric(rng, n_h, n_h).g
    g[n_h:, n_h:] = random_metric(rng, n_i, n_i).g
    return HermitianMetric(g, n_h)


@pytest.fixture
def rng():
    return np.random.default_rng(20240617)


@pytest.fixture
def ot_pair():
    """s = 2 with one admissible off-diagonal index (index 0)."""
    p = OTParams(2, 2, -np.eye(2), np.array([[0.3, 0.5], [0.0, -0.2]]))
    return p, build_ot_algebra(p)


@pytest.fixture
def diagonal_metric():
    return metric_from_normal_form([1.0, 1.0], [1.0, 1.0])
