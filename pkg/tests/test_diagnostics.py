from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from almostaction.almost import approximation_defect
from almostaction.cantor import CirclePoint, FiniteSample
from almostaction.diagnostics import (circle_orbit_almost_action, covariance_defect,
                                      equivariant_embedding_check)
from almostaction.errors import DomainError
from almostaction.groups import parse_word

from zoo import half_rotation, rotation

A = parse_word("a:1")


def to_zero(p):
    x = p.position
    return min(x, 1 - x)


def brute_covariance(points, perms, angle, f):
    """Max over g0 and e of |f(alpha(a g0) e) - f(a . alpha(g0) e)| for Z/2, written out by hand."""
    ident = list(range(len(points)))
    swap = perms
    worst = Fraction(0)
    for p_left, p0 in ((swap, ident), (ident, swap)):
        for i in range(len(points)):
            x = points[p_left[i]]
            y = CirclePoint((points[p0[i]].position + angle) % 1)
            worst = max(worst, abs(f(x) - f(y)))
    return worst


def test_covariance_examples():
    spec, act = half_rotation()
    honest = circle_orbit_almost_action(act, [Fraction(1, 10)], [[]])
    assert covariance_defect(honest, 0, act, to_zero, A) == 0
    moved = circle_orbit_almost_action(act, [Fraction(1, 10)], [[Fraction(1, 100)]])
    assert covariance_defect(moved, 0, act, lambda p: 3.0, A) == 0
    got = covariance_defect(moved, 0, act, to_zero, A)
    st_ = moved.stage(0)
    want = brute_covariance(st_.sample.points, st_.perm(A).tolist(), Fraction(1, 2), to_zero)
    assert got == pytest.approx(float(want)) and want == Fraction(1, 100)
    assert got <= 0.02


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 5))
def test_covariance_is_bounded_by_the_approximation_defect(seed, n):
    spec, act = rotation(n)
    rng = np.random.default_rng(seed)
    base = [Fraction(int(b), 1000) for b in rng.choice(1000 // n, size=2, replace=False)]
    disp = [[Fraction(int(x), 10 ** 5) for x in rng.integers(-99, 100, size=2 * n)]]
    alpha = circle_orbit_almost_action(act, base, disp)
    for k in range(1, n):
        g = parse_word(f"r:{k}")
        cov = covariance_defect(alpha, 0, act, to_zero, g)
        assert cov <= approximation_defect(alpha, 0, act, spec.invert(g)) + 1e-12


def test_circle_orbit_rejects_collisions():
    spec, act = half_rotation()
    with pytest.raises(DomainError):
        circle_orbit_almost_action(act, [Fraction(0)], [[Fraction(1, 2)]])


def test_embedding_examples():
    spec, act = rotation(3)
    closed = FiniteSample(tuple(CirclePoint(Fraction(k, 3)) for k in range(3)))
    assert equivariant_embedding_check(act, closed) == []
    open_ = FiniteSample((CirclePoint(0), CirclePoint(Fraction(1, 3)), CirclePoint(Fraction(7, 10))))
    found = equivariant_embedding_check(act, open_)
    assert ("r:1", CirclePoint(Fraction(7, 10))) in {(w.word, w.point) for w in found}
    assert all(w.image not in open_ for w in found)
    pts = [w.point for w in found]
    assert pts == sorted(pts)
