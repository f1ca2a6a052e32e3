import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from almostaction.actions import CylinderAction
from almostaction.almost import AlmostAction, AlmostStage, StagePlan, perturb_from_action
from almostaction.cantor import FiniteSample
from almostaction.errors import CountMismatch, DomainError, GapViolation
from almostaction.groups import FiniteGroupTable, Hnn, SubgroupEmbedding, leaf, parse_word
from almostaction.solver import (evaluate_solution, invariant_partition, partition_depth,
                                 residual_finiteness_witness, solve_finite, solve_stage,
                                 solve_virtually_free, verify_solution)

from zoo import ZOO, z2, z2_z3, z4_amalgam

D = 12


def swap():
    spec = leaf("Z/2", "a")
    return spec, CylinderAction.from_images(spec, 1, {"a:1": [1, 0]})


def test_partition_depth_examples():
    assert partition_depth(2, 1 / 16, D) == 4
    assert partition_depth(2, 1 / 2, D) == 2
    assert partition_depth(0, 0.3, D) == 2
    assert partition_depth(0, 1.0, D) == 0
    with pytest.raises(DomainError):
        partition_depth(2, 2 ** -13, D)


@pytest.mark.parametrize("name", list(ZOO))
def test_invariant_partition_is_permuted(name):
    spec, act = ZOO[name]()
    part = invariant_partition(act, 1 / 32, D)
    prefixes = {c.prefix for c in part.cells}
    fine = act.refine(len(next(iter(prefixes))))
    for s in spec.generator_symbols():
        p = fine.prefix_perm((s,))
        assert sorted(p.tolist()) == list(range(len(prefixes)))


def test_honest_input_is_returned_unchanged():
    for name, build in ZOO.items():
        spec, act = build()
        alpha = perturb_from_action(act, [StagePlan(0, act.depth + 3, 1, 0)], 0, D)
        sol = solve_stage(spec, act, alpha, 0, 2.0 ** -(act.depth + 2))
        assert all(v == 0 for v in sol.distances.values()), name
        for s, p in sol.perms.items():
            assert np.array_equal(p, alpha.stage(0).perm((s,)))


def test_z2_example():
    spec, act = swap()
    alpha = perturb_from_action(act, [StagePlan(0, 4, 1, 1)], 1, D)
    perms = solve_finite(spec, act, alpha, 0, 1 / 8)
    q = perms[parse_word("a:1")[0]]
    assert np.array_equal(q[q], np.arange(16))
    assert alpha.stage(0).sample.max_distance(q, alpha.stage(0).perm(parse_word("a:1"))) <= 1 / 8


def test_free_product_example():
    spec, act = z2_z3()
    alpha = perturb_from_action(act, [StagePlan(0, 4, 2, 2)], 4, D)
    sol = solve_stage(spec, act, alpha, 0, 1 / 4)
    assert verify_solution(spec, sol) == []
    assert sol.within_bounds()
    assert sol.partition_depth == 2


def test_amalgam_shares_the_subgroup():
    spec, act = z4_amalgam()
    alpha = perturb_from_action(act, [StagePlan(0, 7, 2, 6)], 8, D)
    sol = solve_stage(spec, act, alpha, 0, 1 / 32)
    a2 = evaluate_solution(spec, sol, parse_word("a:1 a:1"))
    b2 = evaluate_solution(spec, sol, parse_word("b:1 b:1"))
    assert np.array_equal(a2, b2)
    assert sol.within_bounds()


def test_hnn_with_identity_embedding():
    k = FiniteGroupTable.cyclic(2)
    emb = SubgroupEmbedding(k, "a", (0, 1))
    spec = Hnn(leaf("Z/2", "a"), emb, emb, (0, 1), "t")
    act = CylinderAction.from_images(spec, 2, {"a:1": [1, 0, 3, 2], "t": [2, 3, 0, 1]})
    alpha = perturb_from_action(act, [StagePlan(0, 7, 2, 8)], 5, D)
    sol = solve_stage(spec, act, alpha, 0, 1 / 32)
    lhs = evaluate_solution(spec, sol, parse_word("t a:1 t^-1"))
    assert np.array_equal(lhs, evaluate_solution(spec, sol, parse_word("a:1")))
    assert sol.distances["t"] <= sol.bounds["t"] == 2 * 2 ** -sol.partition_depth


def test_count_mismatch_and_gap_violation():
    spec, act = swap()
    sample = FiniteSample.from_codes([0, 1, 2, 3 << 6], 8, 0)   # three points in cell 0, one in cell 1
    alpha = AlmostAction(spec, (AlmostStage(0, sample, {parse_word("a:1"): [3, 1, 2, 0]}),))
    with pytest.raises(CountMismatch) as exc:
        solve_stage(spec, act, alpha, 0, 1 / 2)
    assert exc.value.to_dict()["kind"] == "count_mismatch"
    sample = FiniteSample.from_codes([0, 1, 1 << 7, (1 << 7) + 1], 8, 0)
    lazy = AlmostAction(spec, (AlmostStage(0, sample, {parse_word("a:1"): [1, 0, 3, 2]}),))
    with pytest.raises(GapViolation):
        solve_stage(spec, act, lazy, 0, 1 / 2)
    failed = solve_virtually_free(spec, act, alpha, 1 / 2)
    assert failed.first_admissible is None and failed.failures[0]["kind"] == "count_mismatch"


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(list(ZOO)), st.integers(1, 3))
def test_solving_is_idempotent(seed, name, k):
    spec, act = ZOO[name]()
    m = act.depth + k + 2
    eps = 2.0 ** -(m - k)
    alpha = perturb_from_action(act, [StagePlan(0, m, k, 3)], seed, D)
    sol = solve_stage(spec, act, alpha, 0, eps)
    assert verify_solution(spec, sol) == [] and sol.within_bounds()
    table = {(s,): p for s, p in sol.perms.items()}
    again = AlmostAction(spec, (AlmostStage(0, alpha.stage(0).sample, table),))
    sol2 = solve_stage(spec, act, again, 0, eps)
    for s in sol.perms:
        assert np.array_equal(sol.perms[s], sol2.perms[s])


def test_witness_examples():
    spec, act = swap()
    wit = residual_finiteness_witness(spec, act, [()], 1 / 2, seed=0, total_depth=D)
    assert wit.max_defect == 0
    wit = residual_finiteness_witness(spec, act, [(), parse_word("a:1")], 1 / 4, seed=0, total_depth=D)
    assert len(wit.sample) == 8 and wit.max_defect == 0
    spec, act = z2()
    wit = residual_finiteness_witness(spec, act, [parse_word("a:1")], 1 / 8, seed=3, total_depth=D,
                                      radius=2, count=2)
    assert len(wit.sample) == 2 ** 6 and wit.max_defect < 1 / 8
    with pytest.raises(DomainError):
        residual_finiteness_witness(spec, act, [()], 2 ** -12, seed=0, total_depth=D)
