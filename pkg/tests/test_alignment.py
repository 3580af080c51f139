import numpy as np
import pytest
from scipy.stats import ortho_group

from glassinterp.alignment import (
    RigidMotion,
    align_tolerance,
    recover_isometry,
    recover_rotation,
    residual,
    shift_witness,
)
from glassinterp.errors import DimensionMismatch, HypothesisViolated
from glassinterp.gaussian_core import factor_covariance, gram_from_points, shifted_covariance
from tests.helpers import random_covariance, random_factor_rows


def test_quarter_turn():
    V = np.eye(2)
    W = np.array([[0.0, 1.0], [-1.0, 0.0]])
    O = recover_rotation(V, W)
    assert np.allclose(O, [[0.0, -1.0], [1.0, 0.0]], atol=1e-14)


def test_identity_when_equal(rng):
    V = rng.standard_normal((5, 3))
    O = recover_rotation(V, V)
    assert np.allclose(O @ V.T, V.T, atol=1e-12)
    assert np.allclose(O, np.eye(3), atol=1e-12)


def test_random_rotation_recovered(rng):
    for k in (2, 3, 5):
        V = rng.standard_normal((7, k))
        Q = ortho_group.rvs(k, random_state=int(rng.integers(2**31)))
        W = V @ Q.T
        O = recover_rotation(V, W)
        assert residual(V, W, RigidMotion(O, np.zeros(k))) <= 1e-8


def test_gram_mismatch_reported():
    with pytest.raises(HypothesisViolated) as err:
        recover_rotation(np.eye(2), 2 * np.eye(2))
    assert err.value.pair == (0, 0)


def test_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        recover_isometry(np.zeros((3, 2)), np.zeros((3, 3)))


def test_translation_only(rng):
    V = rng.standard_normal((6, 3))
    c = np.array([1.0, -2.0, 0.5])
    m = recover_isometry(V, V + c)
    assert np.allclose(m.O, np.eye(3), atol=1e-10)
    assert np.allclose(m.b, c, atol=1e-10)


def test_rigid_motion_recovered(rng):
    V = rng.standard_normal((8, 4))
    Q = ortho_group.rvs(4, random_state=3)
    c = rng.standard_normal(4)
    W = V @ Q.T + c
    m = recover_isometry(V, W)
    assert residual(V, W, m) <= align_tolerance(W)
    assert m.orthogonality_defect() <= 1e-10


def test_collinear_reflected():
    V = np.outer(np.arange(5.0), [1.0, 2.0, 0.0])
    R = np.diag([1.0, -1.0, 1.0])
    W = V @ R.T + np.array([0.0, 0.0, 3.0])
    m = recover_isometry(V, W)
    assert residual(V, W, m) <= 1e-8 * (1 + np.abs(W).max())
    assert m.orthogonality_defect() <= 1e-10


def test_distance_mismatch():
    with pytest.raises(HypothesisViolated):
        recover_isometry([[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [2.0, 0.0]])


def test_gram_preserved_after_centering(rng):
    V = random_factor_rows(rng, 6, 4, 2)
    Q = ortho_group.rvs(4, random_state=8)
    W = V @ Q.T + 1.0
    m = recover_isometry(V, W)
    moved = m.apply(V)
    a = gram_from_points(moved - moved.mean(axis=0)).entries
    b = gram_from_points(W - W.mean(axis=0)).entries
    assert np.allclose(a, b, atol=1e-10)


def test_shift_witness_from_covariances(rng):
    Cx = random_covariance(rng, 4)
    Cy = shifted_covariance(Cx, rng.standard_normal(4))
    m = shift_witness(Cx, Cy)
    Ax, Ay = factor_covariance(Cx).entries, factor_covariance(Cy).entries
    assert residual(Ax, Ay, m) <= 1e-6
    # Y = X O^T + b has covariance Cx shifted by the common term (b, z)
    recon = m.apply(Ax)
    assert np.allclose(recon @ recon.T, Cy.entries, atol=1e-6)


def test_shift_witness_rejects_different_metrics():
    with pytest.raises(HypothesisViolated):
        shift_witness(np.eye(2), 2 * np.eye(2))
