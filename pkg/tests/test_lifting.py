import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from almostaction.errors import ConditioningWarning, DomainError, LiftingError
from almostaction.instances import (instance_rng, noisy_frame, noisy_orthogonal_sum, noisy_projection,
                                    random_unitary)
from almostaction.lifting import (CanonicalEmbedding, adj, adjust_partial_isometry, complete_partition,
                                  conditional_fd_lift, conjugating_unitary, lift_orthogonal_sum, norm,
                                  orthogonalize, polar_partial_isometry, project_almost_projection,
                                  projection_bound)


def line(theta):
    v = np.array([np.cos(theta), np.sin(theta)])
    return np.outer(v, v)


def test_project_examples():
    pt, rep = project_almost_projection(np.diag([0.9, 0.1]), 0.09)
    assert np.allclose(pt, np.diag([1, 0]))
    assert rep.distance == pytest.approx(0.1)
    pt, _ = project_almost_projection([[0.9]], 0.09)
    assert np.allclose(pt, [[1]])
    pt, rep = project_almost_projection(np.zeros((3, 3)), 0.0)
    assert np.allclose(pt, 0) and rep.distance == 0


def test_project_rejects_bad_input():
    with pytest.raises(DomainError):
        project_almost_projection(np.eye(2), 0.25)
    with pytest.raises(DomainError):
        project_almost_projection(np.ones((2, 3)), 0.1)
    with pytest.raises(LiftingError):
        project_almost_projection([[0, 1], [0, 0]], 0.1)
    with pytest.raises(LiftingError):
        project_almost_projection(np.diag([0.5, 0.0]), 0.2)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 10), st.floats(0.0, 0.1))
def test_projection_moves_at_most_the_bound(seed, n, size):
    inst = noisy_projection(np.random.default_rng(seed), n, size)
    pt, rep = project_almost_projection(inst.noisy, inst.eps)
    assert rep.residuals["idempotent"] < 1e-9 and rep.residuals["hermitian"] < 1e-9
    assert rep.distance <= projection_bound(inst.eps) + 1e-9
    assert round(np.trace(pt).real) == inst.rank


def test_rotation_example():
    theta = 0.3
    u, rep = conjugating_unitary(line(theta), line(0))
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    assert np.allclose(u, rot)
    assert rep.residuals["conjugation"] < 1e-12
    assert rep.distance == pytest.approx(2 * np.sin(theta / 2))


def test_conjugating_unitary_conditioning():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        conjugating_unitary(line(0.5), line(0))
    with pytest.warns(ConditioningWarning):
        conjugating_unitary(line(1.48), line(0))
    with pytest.raises(LiftingError):
        conjugating_unitary(line(np.pi / 2), line(0))


def test_polar_example():
    w = random_unitary(np.random.default_rng(0), 4)
    out, rep = polar_partial_isometry(0.95 * w, 0.1)
    assert np.allclose(out, w)
    assert rep.distance == pytest.approx(0.05)
    with pytest.raises(LiftingError):
        polar_partial_isometry(0.5 * w, 0.4)


def test_adjust_partial_isometry_hits_source_and_range():
    rng = np.random.default_rng(1)
    u = random_unitary(rng, 5)
    v = u[:, :2] @ adj(np.eye(5)[:, :2])
    source = np.diag([1, 1, 0, 0, 0]).astype(complex)
    target = u[:, :2] @ adj(u[:, :2])
    noisy = v + 1e-3 * rng.standard_normal((5, 5))
    vt, rep = adjust_partial_isometry(noisy, source, target, 0.01)
    assert rep.residuals["source"] < 1e-9 and rep.residuals["range"] < 1e-9
    assert norm(vt - v) < 0.01


def test_orthogonalize_and_complete_partition():
    p = np.diag([1, 0, 0]).astype(complex)
    q = np.diag([0.02, 0.97, 0.01]).astype(complex)
    q[0, 1] = q[1, 0] = 0.01
    qt, rep = orthogonalize(p, q, 0.05)
    assert norm(p @ qt) < 1e-12 and rep.residuals["idempotent"] < 1e-12
    last, _ = complete_partition([p, qt])
    assert np.allclose(p + qt + last, np.eye(3))
    with pytest.raises(LiftingError):
        complete_partition([p, p])
    with pytest.raises(DomainError):
        complete_partition([])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 8), st.integers(1, 3), st.floats(1e-4, 0.01))
def test_orthogonal_sum_is_exact(seed, n, k, size):
    inst = noisy_orthogonal_sum(np.random.default_rng(seed), n, k, size)
    out, rep = lift_orthogonal_sum(inst.noisy, inst.target, inst.eps)
    assert norm(sum(out) - inst.target) < 1e-9
    assert rep.residuals["orthogonality"] < 1e-9 and rep.residuals["partial_isometry"] < 1e-9
    assert max(rep.residuals["per_summand_distance"]) <= 10 * inst.eps


def test_canonical_embedding():
    emb = CanonicalEmbedding((1, 2), (3, 2), ((1, 1), (0, 1)))
    assert emb.copies() == [(0, 0, 0), (0, 1, 1), (1, 1, 0)]
    with pytest.raises(DomainError):
        CanonicalEmbedding((2,), (3,), ((2,),))


@pytest.mark.parametrize("seed", range(5))
def test_conditional_fd_lift_agrees_with_fixed_images(seed):
    emb = CanonicalEmbedding((1, 1), (2, 2), ((1, 0), (0, 1)))
    inst = noisy_frame(instance_rng(seed, 0), emb, (2, 2), 8, 0.005)
    out, rep = conditional_fd_lift(inst.frame, emb, inst.fixed, 0.05)
    assert rep.residuals["relations"] < 1e-9 and rep.residuals["agreement"] < 1e-9
    assert rep.distance < 0.1
    assert out.relation_defect() < 1e-9


def test_exact_frame_is_returned_unchanged():
    emb = CanonicalEmbedding((2,), (2,), ((1,),))
    inst = noisy_frame(instance_rng(0, 0), emb, (2,), 4, 0.0)
    out, rep = conditional_fd_lift(inst.exact, emb, inst.fixed, 0.01)
    assert rep.distance < 1e-9


def test_unital_scalars_fix_the_unit():
    emb = CanonicalEmbedding((1,), (2,), ((2,),))
    inst = noisy_frame(instance_rng(1, 0), emb, (2,), 4, 0.005)
    assert np.allclose(inst.fixed[0][0, 0], np.eye(4))
    out, rep = conditional_fd_lift(inst.frame, emb, inst.fixed, 0.05)
    assert norm(out.units[0][0, 0] + out.units[0][1, 1] - np.eye(4)) < 1e-9
    assert out.relation_defect() < 1e-9


def test_diagonal_pair_keeps_both_projections():
    emb = CanonicalEmbedding((1, 1), (2,), ((1, 1),))
    inst = noisy_frame(instance_rng(2, 0), emb, (1,), 2, 0.005)
    out, _ = conditional_fd_lift(inst.frame, emb, inst.fixed, 0.05)
    for i in range(2):
        assert norm(out.units[0][i, i] - inst.fixed[i][0, 0]) < 1e-9
