"""Diagnostics for finite acting groups: covariance defects of almost-actions
and orbit-closure checks of samples."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .actions import Action, RotationAction, action_oracle
from .almost import AlmostAction, AlmostStage
from .cantor import CirclePoint, FiniteSample, Point
from .errors import DomainError
from .groups import Word, cayley_ball, word_str


def covariance_defect(alpha: AlmostAction, n: int, action: Action,
                      f: Callable[[Point], float], gamma: Word) -> float:
    """Norm of the difference of the two diagonal operators
    ``max_{g0, e} |f(alpha_n(gamma^-1 g0) e) - f(gamma^-1 . alpha_n(g0) e)|``.

    ``g0`` ranges over the support of stage ``n``, which for a finite group
    should list every element.
    """
    st = alpha.stage(n)
    ginv = alpha.spec.invert(gamma)
    pts = st.sample.points
    worst = 0.0
    for g0 in st.support:
        p_left = alpha.perm(n, tuple(ginv) + tuple(g0))
        p0 = st.perm(g0)
        for i in range(len(pts)):
            a = f(pts[p_left[i]])
            b = f(action.act(ginv, pts[p0[i]]))
            worst = max(worst, abs(float(a) - float(b)))
    return worst


@dataclass(frozen=True)
class EmbeddingWitness:
    word: str
    point: Point
    image: Point


def equivariant_embedding_check(action: Action, sample: FiniteSample,
                                words: Sequence[Word] | None = None) -> list[EmbeddingWitness]:
    """Every ``(gamma, e)`` with ``gamma . e`` outside the sample.

    ``words`` defaults to the generators.  The list is ordered by sample
    point, then by word; an empty list means the sample is closed.
    """
    words = list(words) if words is not None else action.spec.generators()
    out = []
    for e in sample.points:
        for w in words:
            y = action.act(w, e)
            if y not in sample:
                out.append(EmbeddingWitness(word_str(w), e, y))
    return out


def circle_orbit_almost_action(action: RotationAction, base: Sequence[Fraction],
                               displacements: Sequence[Sequence[Fraction]]) -> AlmostAction:
    """Almost-action of a finite rotation group on perturbed orbit samples.

    Stage ``n`` takes the orbits of the ``base`` points, moves the ``j``-th
    orbit point (in orbit order) by ``displacements[n][j]`` and lets each
    element send a moved point to the moved version of its honest image.
    """
    spec = action.spec
    elems = _elements(action)
    stages = []
    for n, disp in enumerate(displacements):
        honest, moved = [], []
        for b in base:
            for w in elems:
                honest.append(CirclePoint(Fraction(b)).rotate(action.angle(w)))
        disp = list(disp) + [Fraction(0)] * (len(honest) - len(disp))
        moved = [h.rotate(d) for h, d in zip(honest, disp)]
        if len(set(moved)) != len(moved):
            raise DomainError("displacements collapse two sample points")
        sample = FiniteSample(tuple(moved), n)
        where = {h: sample.index_of(m) for h, m in zip(honest, moved)}
        table = {}
        for w in elems:
            if not w:
                continue
            p = np.empty(len(sample), dtype=np.int64)
            for h, m in zip(honest, moved):
                p[where[h]] = where[h.rotate(action.angle(w))]
            table[spec.reduce(w)] = p
        stages.append(AlmostStage(n, sample, table))
    return AlmostAction(spec, tuple(stages))


def _elements(action: RotationAction) -> list[Word]:
    """One word per group element, by BFS over the generators (finite groups only)."""
    spec = action.spec
    if spec.stable_letters():
        raise DomainError("element enumeration needs a finite group")
    size = 1
    for leaf in spec.leaves().values():
        size *= leaf.table.order
    ball = cayley_ball(spec, action_oracle(action), max(1, size))
    return [spec.reduce(ball.words[k]) for k in ball.order]
