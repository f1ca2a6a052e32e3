import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from almostaction.almost import (AlmostAction, AlmostStage, StagePlan, approximation_defect,
                                 defect_report, is_perturbation_of, multiplicative_defect,
                                 perturb_from_action, pseudo_orbit, trace_orbit, uniformize_by_tree)
from almostaction.cantor import max_distance_codes, tail_aligned_sample
from almostaction.errors import DomainError, OutOfSupport, SampleError
from almostaction.groups import cayley_ball, leaf, parse_word, reduced_word_oracle, word_str

from zoo import ZOO, dihedral, integers

D = 12


def swap():
    from almostaction.actions import CylinderAction
    spec = leaf("Z/2", "a")
    return spec, CylinderAction.from_images(spec, 1, {"a:1": [1, 0]})


def test_single_transposition_defect():
    spec, act = swap()
    alpha = perturb_from_action(act, [StagePlan(0, 4, 1, 1)], seed=3, total_depth=D)
    a = parse_word("a:1")
    assert approximation_defect(alpha, 0, act, a) == 2 ** -3
    assert multiplicative_defect(alpha, 0, a, a) == 2 ** -3
    honest = perturb_from_action(act, [StagePlan(0, 4, 1, 0)], seed=3, total_depth=D)
    assert approximation_defect(honest, 0, act, a) == 0
    assert multiplicative_defect(honest, 0, a, a) == 0


def test_stage_validation():
    E = tail_aligned_sample(1, 4)
    with pytest.raises(SampleError):
        AlmostStage(0, E, {parse_word("a:1"): [0, 0]})
    with pytest.raises(SampleError):
        AlmostStage(0, E, {(): [1, 0]})
    st_ = AlmostStage(0, E, {})
    with pytest.raises(OutOfSupport):
        st_.perm(parse_word("a:1"))
    with pytest.raises(DomainError):
        AlmostAction(leaf("Z/2", "a"), ())


def test_schedule_validation():
    _, act = dihedral()
    for bad in ([], [StagePlan(0, 1, 1, 1)], [StagePlan(0, 4, 0, 1)], [StagePlan(0, 3, 1, 5)],
                [StagePlan(1, 5, 1, 1), StagePlan(0, 6, 1, 1)], [StagePlan(0, 6, 1, 1), StagePlan(1, 5, 1, 1)]):
        with pytest.raises(DomainError):
            perturb_from_action(act, bad, 0, D)


@pytest.mark.parametrize("name", ["Z/2*Z/2", "Z", "F2", "tower"])
def test_perturbation_is_deterministic_and_decays(name):
    spec, act = ZOO[name]()
    plans = [StagePlan(n, m, 2, 2) for n, m in enumerate(range(max(act.depth, 3), 10))]
    a1 = perturb_from_action(act, plans, seed=11, total_depth=D)
    a2 = perturb_from_action(act, plans, seed=11, total_depth=D)
    assert a1.to_config() == a2.to_config()
    assert AlmostAction.from_config(spec, a1.to_config()).to_config() == a1.to_config()
    defects = []
    for p in plans:
        d = max(approximation_defect(a1, p.n, act, (g,)) for g in spec.generator_symbols())
        assert d == 2.0 ** -(p.m - p.k)
        defects.append(d)
    assert defects == sorted(defects, reverse=True)


def test_streams_do_not_depend_on_schedule_shape():
    spec, act = dihedral()
    long = perturb_from_action(act, [StagePlan(0, 5, 1, 2), StagePlan(1, 6, 1, 2)], 7, D)
    short = perturb_from_action(act, [StagePlan(1, 6, 1, 2)], 7, D)
    assert long.restrict([1]).to_config() == short.to_config()


def test_defect_report_rows():
    spec, act = swap()
    alpha = perturb_from_action(act, [StagePlan(0, 4, 1, 1), StagePlan(1, 5, 1, 1)], seed=1, total_depth=D)
    rep = defect_report(alpha, act)
    assert rep.scope == "support"
    assert rep.max("approximation", 0) == 2 ** -3
    assert rep.max("approximation", 1) == 2 ** -4
    assert rep.summary()["sup"]["approximation"] == 2 ** -3


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["Z/2*Z/2", "Z/2*Z/3", "F2", "tower"]),
       st.lists(st.integers(0, 5), min_size=1, max_size=6))
def test_composition_error_is_bounded_by_generator_defects(seed, name, letters):
    # the honest maps are isometries, so errors along a word never exceed the worst letter
    spec, act = ZOO[name]()
    alpha = perturb_from_action(act, [StagePlan(0, 7, 3, 4)], seed, D)
    alphabet = spec.letters()
    word = tuple(alphabet[i % len(alphabet)] for i in letters)
    st_ = alpha.stage(0)
    worst = max(approximation_defect(alpha, 0, act, (s,)) for s in alphabet)
    img = act.act_codes(word, st_.sample.codes, D)
    got = st_.sample.codes[alpha.evaluate(0, word)]
    assert max_distance_codes(img, got, D) <= worst


def test_is_perturbation_of_examples():
    spec, act = dihedral()
    plans = [StagePlan(0, 5, 2, 2), StagePlan(1, 6, 2, 2)]
    honest = perturb_from_action(act, [StagePlan(p.n, p.m, p.k, 0) for p in plans], 0, D)
    noisy = perturb_from_action(act, plans, 5, D)
    same = is_perturbation_of(noisy, noisy, 0)
    assert same.matched and max(same.intertwining.values()) == 0
    tol = {0: 2 ** -3, 1: 2 ** -4}
    assert is_perturbation_of(honest, noisy, tol).matched
    assert not is_perturbation_of(honest, noisy, lambda n: tol[n] / 2).matched
    with pytest.raises(DomainError):
        is_perturbation_of(honest, noisy.restrict([0]), 1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 2 ** 32 - 1), st.sampled_from([0.0, 2 ** -4, 2 ** -3, 2 ** -2]))
def test_is_perturbation_of_is_symmetric(s1, s2, tol):
    spec, act = dihedral()
    plans = [StagePlan(0, 6, 3, 3)]
    a = perturb_from_action(act, plans, s1, D)
    b = perturb_from_action(act, plans, s2, D)
    assert is_perturbation_of(a, b, tol).matched == is_perturbation_of(b, a, tol).matched


def test_uniformize_integers_is_exact():
    spec, act = integers()
    alpha = perturb_from_action(act, [StagePlan(0, 6, 2, 3)], 2, D)
    beta, rep = uniformize_by_tree(alpha, 3, reduced_word_oracle(spec))
    t = alpha.perm(0, parse_word("t"))
    ti = alpha.perm(0, parse_word("t^-1"))
    for k in range(1, 4):
        pk = np.arange(len(t))
        pik = np.arange(len(t))
        for _ in range(k):
            pk, pik = t[pk], ti[pik]
        assert np.array_equal(beta.perm(0, parse_word(" ".join(["t"] * k))), pk)
        assert np.array_equal(beta.perm(0, parse_word(" ".join(["t^-1"] * k))), pik)
    assert rep.scope == "sup over ball 3"
    assert rep.max("left") == 0 and rep.max("right") == 0
    with pytest.raises(OutOfSupport):
        beta.perm(0, parse_word("t t t t"))


@pytest.mark.parametrize("name", ["Z/2*Z/2", "Z/2*Z/3", "F2"])
def test_uniformize_tree_edges_have_zero_defect(name):
    spec, act = ZOO[name]()
    alpha = perturb_from_action(act, [StagePlan(0, 6, 2, 3)], 9, D)
    beta, rep = uniformize_by_tree(alpha, 2, reduced_word_oracle(spec))
    ball = beta.ball
    tree = {(word_str((f,)), word_str(ball.words[pk])) for k, (pk, f) in
            ((k, ball.parent[k]) for k in ball.order[1:])}
    for n, kind, g, d, v in rep.rows:
        if kind == "left" and (g, d) in tree:
            assert v == 0
    assert defect_report(beta).scope == "sup over ball 2"


def test_pseudo_orbit_and_trace_honest():
    spec, act = dihedral()
    alpha = perturb_from_action(act, [StagePlan(0, 6, 2, 0)], 0, D)
    ball = cayley_ball(spec, reduced_word_oracle(spec), 3)
    e0 = alpha.stage(0).sample.points[13]
    orbit = pseudo_orbit(alpha, 0, e0, ball, act)
    assert orbit.eps == 0
    traced = trace_orbit(act, orbit, 0.0)
    assert traced is not None and traced.max_distance == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 63), st.sampled_from(["Z/2*Z/2", "Z", "F2", "Z/2*Z/3"]))
def test_perturbed_orbits_are_shadowed(seed, i0, name):
    spec, act = ZOO[name]()
    alpha = perturb_from_action(act, [StagePlan(0, 6, 2, 4)], seed, D)
    ball = cayley_ball(spec, reduced_word_oracle(spec), 2)
    orbit = pseudo_orbit(alpha, 0, alpha.stage(0).sample.points[i0], ball, act)
    assert orbit.eps <= 2 ** -4
    traced = trace_orbit(act, orbit, 2 ** -4)
    assert traced is not None and traced.max_distance <= 2 ** -4


def test_trace_orbit_under_both_backends(backend):
    spec, act = integers()
    alpha = perturb_from_action(act, [StagePlan(0, 5, 1, 3)], 4, D)
    ball = cayley_ball(spec, reduced_word_oracle(spec), 2)
    orbit = pseudo_orbit(alpha, 0, alpha.stage(0).sample.points[6], ball, act)
    traced = trace_orbit(act, orbit, 2 ** -4)
    assert traced is not None
    assert trace_orbit(act, orbit, 2 ** -4, all_points=True).max_distance <= 2 ** -4
