"""Almost-actions: per-index permutation assignments on finite samples.

Stage ``n`` of an almost-action holds a sample ``E_n`` and, for each word in
a finite support, a permutation of ``E_n`` stored as an index array
(``perm[i]`` is the position of the image of ``E_n[i]``).  Defects are
maxima of the metric over the sample, so on the Cantor model they are exact
powers of two.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from . import kernels
from .actions import Action, CylinderAction, inverse, is_permutation
from .cantor import (CantorPoint, FiniteSample, circle_arc, decode_point, distance,
                     max_distance_codes, tail_aligned_sample)
from .errors import DomainError, OutOfSupport, SampleError
from .groups import CayleyBall, GroupSpec, Oracle, Symbol, Word, cayley_ball, parse_word, word_str


@dataclass(frozen=True, eq=False)
class AlmostStage:
    index: int
    sample: FiniteSample
    assignment: Mapping[Word, np.ndarray]

    def __post_init__(self):
        n = len(self.sample)
        table = {}
        for w, p in self.assignment.items():
            p = np.array(p, dtype=np.int64)
            if not is_permutation(p, n):
                raise SampleError(f"assignment of {word_str(w)} at n={self.index} is not a bijection")
            p.setflags(write=False)
            table[tuple(w)] = p
        ident = np.arange(n, dtype=np.int64)
        if () in table and not np.array_equal(table[()], ident):
            raise SampleError("the identity word must act as the identity permutation")
        ident.setflags(write=False)
        table[()] = ident
        object.__setattr__(self, "assignment", table)

    @property
    def support(self) -> list[Word]:
        return sorted(self.assignment, key=lambda w: (len(w), w))

    def perm(self, w: Word) -> np.ndarray:
        try:
            return self.assignment[tuple(w)]
        except KeyError:
            raise OutOfSupport(f"{word_str(w)} is not in the support at n={self.index}",
                               word=word_str(w), n=self.index) from None

    def points(self, idx: np.ndarray) -> list:
        return [self.sample.points[i] for i in idx]


@dataclass(frozen=True, eq=False)
class AlmostAction:
    """A finite schedule of stages sharing one group spec.

    ``canon`` maps a word to the support key that represents it.  By default
    that is the reduced word; uniformized actions key their support by
    Cayley-ball tree words instead.
    """

    spec: GroupSpec
    stages: tuple
    canon: Callable[[Word], Word | None] | None = None
    ball: CayleyBall | None = field(default=None, repr=False)

    def __post_init__(self):
        stages = tuple(sorted(self.stages, key=lambda s: s.index))
        if not stages:
            raise DomainError("an almost-action needs at least one stage")
        if len({s.index for s in stages}) != len(stages):
            raise DomainError("stage indices must be distinct")
        object.__setattr__(self, "stages", stages)

    @property
    def schedule(self) -> list[int]:
        return [s.index for s in self.stages]

    def stage(self, n: int) -> AlmostStage:
        for s in self.stages:
            if s.index == n:
                return s
        raise DomainError(f"no stage with index {n}")

    def key(self, w: Sequence[Symbol]) -> Word:
        if self.canon is None:
            return self.spec.reduce(w)
        k = self.canon(tuple(w))
        if k is None:
            raise OutOfSupport(f"{word_str(tuple(w))} is outside the support", word=word_str(tuple(w)))
        return k

    def perm(self, n: int, w: Sequence[Symbol]) -> np.ndarray:
        return self.stage(n).perm(self.key(w))

    def evaluate(self, n: int, w: Sequence[Symbol]) -> np.ndarray:
        """``alpha_n(f_m) o ... o alpha_n(f_1)`` letter by letter."""
        st = self.stage(n)
        out = np.arange(len(st.sample), dtype=np.int64)
        for s in reversed(tuple(w)):
            out = self.perm(n, (s,))[out]
        return out

    def restrict(self, indices: Sequence[int]) -> "AlmostAction":
        keep = set(indices)
        return AlmostAction(self.spec, tuple(s for s in self.stages if s.index in keep),
                            self.canon, self.ball)

    def to_config(self) -> dict:
        return {"stages": [{
            "n": s.index,
            "sample": [str(p) for p in s.sample.points],
            "assignment": {word_str(w): p.tolist() for w, p in sorted(s.assignment.items(),
                                                                        key=lambda kv: (len(kv[0]), kv[0]))},
        } for s in self.stages]}

    @classmethod
    def from_config(cls, spec: GroupSpec, doc: Mapping) -> "AlmostAction":
        stages = []
        for st in doc["stages"]:
            pts = tuple(decode_point(t) for t in st["sample"])
            sample = FiniteSample(pts, int(st["n"]))
            if list(sample.points) != list(pts):
                raise SampleError("serialized sample is not in canonical order")
            stages.append(AlmostStage(int(st["n"]), sample,
                                      {spec.reduce(parse_word(k)): v for k, v in st["assignment"].items()}))
        return cls(spec, tuple(stages))


# --------------------------------------------------------------------------- defects


def _honest_distance(action: Action, w: Word, sample: FiniteSample, idx: np.ndarray) -> float:
    """``max_k d(w . E[k], E[idx[k]])``."""
    if sample.is_cantor:
        if not isinstance(action, CylinderAction):
            raise DomainError("Cantor sample needs a cylinder action")
        img = action.act_codes(w, sample.codes, sample.depth)
        return max_distance_codes(img, sample.codes[idx], sample.depth)
    img = action.act_sample(w, sample)
    pts = sample.points
    return float(max(circle_arc(a.position, pts[k].position) for a, k in zip(img, idx)))


def multiplicative_defect(alpha: AlmostAction, n: int, gamma: Word, delta: Word) -> float:
    """``max_e d(alpha_n(gamma) alpha_n(delta) e, alpha_n(gamma delta) e)``."""
    st = alpha.stage(n)
    pg = st.perm(alpha.key(gamma))
    pd = st.perm(alpha.key(delta))
    pgd = st.perm(alpha.key(tuple(gamma) + tuple(delta)))
    return st.sample.max_distance(pg[pd], pgd)


def approximation_defect(alpha: AlmostAction, n: int, action: Action, gamma: Word) -> float:
    """``max_e d(gamma . e, alpha_n(gamma) e)``."""
    st = alpha.stage(n)
    k = alpha.key(gamma)
    return _honest_distance(action, k, st.sample, st.perm(k))


@dataclass
class DefectReport:
    """Flat table of defect values with per-kind summaries.

    Summaries are maxima over the stored support, labelled ``sup over ball R``
    when the support is a Cayley ball.
    """

    rows: list = field(default_factory=list)   # (n, kind, gamma, delta, value)
    scope: str = "support"

    def add(self, n: int, kind: str, gamma: Word, delta: Word | None, value: float) -> None:
        self.rows.append((n, kind, word_str(gamma), "" if delta is None else word_str(delta), value))

    def max(self, kind: str, n: int | None = None) -> float:
        vals = [r[4] for r in self.rows if r[1] == kind and (n is None or r[0] == n)]
        return max(vals, default=0.0)

    def summary(self) -> dict:
        kinds = sorted({r[1] for r in self.rows})
        ns = sorted({r[0] for r in self.rows})
        return {"scope": self.scope,
                "per_stage": {str(n): {k: self.max(k, n) for k in kinds} for n in ns},
                "sup": {k: self.max(k) for k in kinds}}

    def to_rows(self) -> list[dict]:
        return [{"n": n, "kind": k, "gamma": g, "delta": d, "value": v} for n, k, g, d, v in self.rows]


def defect_report(alpha: AlmostAction, action: Action | None = None,
                  pairs: str = "support") -> DefectReport:
    """Multiplicative defects over all support pairs whose product is in the support,
    plus approximation defects when ``action`` is given."""
    scope = f"sup over ball {alpha.ball.radius}" if alpha.ball is not None else "support"
    rep = DefectReport(scope=scope)
    for st in alpha.stages:
        sup = st.support
        for g in sup:
            for d in sup:
                try:
                    v = multiplicative_defect(alpha, st.index, g, d)
                except OutOfSupport:
                    continue
                rep.add(st.index, "multiplicative", g, d, v)
        if action is not None:
            for g in sup:
                rep.add(st.index, "approximation", g, None,
                        _honest_distance(action, g, st.sample, st.perm(g)))
    return rep


# --------------------------------------------------------------------------- generation


@dataclass(frozen=True)
class StagePlan:
    """One schedule entry: index ``n``, sample depth ``m``, radius ``k``, count ``c``."""

    n: int
    m: int
    k: int
    c: int


def generator_rng(seed: int, n: int, generator_index: int) -> np.random.Generator:
    """Independent stream per (stage, generator); draw order elsewhere cannot affect it."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(n, generator_index)))


def _transposition_partners(m: int, k: int, depth: int) -> np.ndarray:
    """Pairs of tail-aligned sample positions in a common depth-(m-k) cell at
    distance exactly ``2^-(m-k)``: positions differing in sample bit ``m-k``."""
    bit = 1 << (k - 1)   # sample position i encodes the depth-m prefix
    lo = np.array([i for i in range(1 << m) if not i & bit], dtype=np.int64)
    return np.stack([lo, lo | bit], axis=1)


def perturb_from_action(action: CylinderAction, schedule: Sequence[StagePlan], seed: int,
                        total_depth: int) -> AlmostAction:
    """Restrict ``action`` to tail-aligned samples and compose each generator with
    ``c`` transpositions inside common depth-``(m-k)`` cells.

    The transpositions are applied after the honest map, so every image moves
    by at most ``2^-(m-k)`` and by exactly that when ``c >= 1``.
    """
    _check_schedule(schedule, action.depth, total_depth)
    spec = action.spec
    gens = spec.generator_symbols()
    stages = []
    for plan in schedule:
        sample = tail_aligned_sample(plan.m, total_depth, plan.n)
        partners = _transposition_partners(plan.m, plan.k, total_depth) if plan.c else None
        table: dict[Word, np.ndarray] = {}
        for gi, g in enumerate(gens):
            p = action.restrict_to_sample((g,), sample)
            if plan.c:
                rng = generator_rng(seed, plan.n, gi)
                chosen = partners[rng.choice(len(partners), size=plan.c, replace=False)]
                tau = np.arange(len(sample), dtype=np.int64)
                tau[chosen[:, 0]], tau[chosen[:, 1]] = chosen[:, 1], chosen[:, 0]
                p = tau[p]
            table[(g,)] = p
            if g.stable:
                table[(Symbol(g.name, -1, True),)] = inverse(p)
        stages.append(AlmostStage(plan.n, sample, table))
    return AlmostAction(spec, tuple(stages))


def _check_schedule(schedule: Sequence[StagePlan], action_depth: int, total_depth: int) -> None:
    if not schedule:
        raise DomainError("empty schedule")
    prev_n, prev_m = None, None
    for p in schedule:
        if p.m < action_depth or p.m > total_depth:
            raise DomainError(f"stage {p.n}: sample depth {p.m} outside [{action_depth}, {total_depth}]")
        if not 0 <= p.k <= p.m:
            raise DomainError(f"stage {p.n}: radius {p.k} outside [0, {p.m}]")
        if p.c < 0:
            raise DomainError(f"stage {p.n}: negative transposition count")
        if p.c and p.k == 0:
            raise DomainError(f"stage {p.n}: radius 0 leaves no room for transpositions")
        if p.c > 1 << (p.m - 1):
            raise DomainError(f"stage {p.n}: at most {1 << (p.m - 1)} disjoint transpositions fit")
        if prev_n is not None and (p.n <= prev_n or p.m < prev_m):
            raise DomainError("schedule needs increasing n and nondecreasing m")
        prev_n, prev_m = p.n, p.m


# --------------------------------------------------------------------------- perturbation equivalence


@dataclass
class PerturbationMatch:
    matched: bool
    bijections: dict          # n -> index array phi_n (E_n -> E'_n)
    displacement: dict        # n -> max_e d(phi(e), e)
    intertwining: dict        # n -> max over support of the intertwining defect


def _greedy(src: FiniteSample, dst: FiniteSample) -> np.ndarray:
    if src.is_cantor:
        return kernels.greedy_match(src.codes, dst.codes)
    used = np.zeros(len(dst), dtype=bool)
    out = np.empty(len(src), dtype=np.int64)
    for i, p in enumerate(src.points):
        best, bj = None, -1
        for j, q in enumerate(dst.points):
            if not used[j]:
                d = circle_arc(p.position, q.position)
                if best is None or d < best:
                    best, bj = d, j
        used[bj] = True
        out[i] = bj
    return out


def _cross_distance(a: FiniteSample, ia: np.ndarray, b: FiniteSample, ib: np.ndarray) -> float:
    if a.is_cantor:
        return max_distance_codes(a.codes[ia], b.codes[ib], a.depth)
    return float(max((circle_arc(a.points[i].position, b.points[j].position) for i, j in zip(ia, ib)),
                     default=Fraction(0)))


def _tolerance(tol, n: int) -> float:
    if callable(tol):
        return float(tol(n))
    if isinstance(tol, Mapping):
        return float(tol[n])
    return float(tol)


def is_perturbation_of(alpha: AlmostAction, beta: AlmostAction, tolerance) -> PerturbationMatch:
    """Match samples greedily and test displacement and intertwining against ``tolerance``.

    Two candidate bijections are tried per stage: greedy matching from
    ``E_n`` into ``E'_n`` and the inverse of greedy matching the other way.
    Trying both keeps the verdict symmetric under swapping the arguments.
    """
    if alpha.schedule != beta.schedule:
        raise DomainError("almost-actions have different schedules")
    phis, disp, inter, ok = {}, {}, {}, True
    for sa, sb in zip(alpha.stages, beta.stages):
        if len(sa.sample) != len(sb.sample):
            raise SampleError(f"sample sizes differ at n={sa.index}",
                              n=sa.index, sizes=[len(sa.sample), len(sb.sample)])
        tol = _tolerance(tolerance, sa.index)
        candidates = [_greedy(sa.sample, sb.sample), inverse(_greedy(sb.sample, sa.sample))]
        best = None
        for phi in candidates:
            d0 = _cross_distance(sa.sample, np.arange(len(sa.sample)), sb.sample, phi)
            d1 = 0.0
            for w in sa.support:
                pa = sa.perm(w)
                pb = sb.perm(beta.key(w))
                d1 = max(d1, sb.sample.max_distance(phi[pa], pb[phi]))
            score = max(d0, d1)
            if best is None or score < best[0]:
                best = (score, phi, d0, d1)
        _, phi, d0, d1 = best
        phis[sa.index], disp[sa.index], inter[sa.index] = phi, d0, d1
        ok = ok and d0 <= tol and d1 <= tol
    return PerturbationMatch(ok, phis, disp, inter)


# --------------------------------------------------------------------------- uniformization


def uniformize_by_tree(alpha: AlmostAction, radius: int, oracle: Oracle) -> tuple[AlmostAction, DefectReport]:
    """Re-define ``beta_n(gamma)`` as the product of ``alpha_n`` along the tree geodesic of ``gamma``.

    Returns the uniformized almost-action, supported on the Cayley ball, and
    a report of left (``beta(f) beta(gamma)`` vs ``beta(f gamma)``) and right
    (``beta(gamma) beta(f)`` vs ``beta(gamma f)``) generator-sided defects.
    """
    spec = alpha.spec
    ball = cayley_ball(spec, oracle, radius)
    letters = spec.letters()

    def canon(w):
        k = oracle(tuple(w))
        return ball.words.get(k)

    stages = []
    for st in alpha.stages:
        beta: dict = {(): np.arange(len(st.sample), dtype=np.int64)}
        for key in ball.order[1:]:
            pk, f = ball.parent[key]
            beta[ball.words[key]] = alpha.perm(st.index, (f,))[beta[ball.words[pk]]]
        stages.append(AlmostStage(st.index, st.sample, beta))
    out = AlmostAction(spec, tuple(stages), canon=canon, ball=ball)

    rep = DefectReport(scope=f"sup over ball {radius}")
    for st in out.stages:
        for key in ball.order:
            g = ball.words[key]
            pg = st.perm(g)
            for f in letters:
                pf = st.perm(out.key((f,)))
                left = canon((f,) + g)
                if left is not None:
                    rep.add(st.index, "left", (f,), g, st.sample.max_distance(pf[pg], st.perm(left)))
                right = canon(g + (f,))
                if right is not None:
                    rep.add(st.index, "right", g, (f,), st.sample.max_distance(pg[pf], st.perm(right)))
    return out, rep


# --------------------------------------------------------------------------- shadowing


@dataclass
class PseudoOrbit:
    ball: CayleyBall
    points: dict        # ball key -> point
    eps: float
    index: int


def pseudo_orbit(alpha: AlmostAction, n: int, e0, ball: CayleyBall, action: Action) -> PseudoOrbit:
    """``x_gamma = alpha_n(w_gamma)(e0)`` over the ball, with the smallest ``eps``
    such that ``d(f . x_gamma, x_{f gamma}) <= eps`` on every edge inside the ball."""
    st = alpha.stage(n)
    i0 = st.sample.index_of(e0)
    xs = {}
    for key in ball.order:
        xs[key] = st.sample.points[int(alpha.evaluate(n, ball.words[key])[i0])]
    eps = 0.0
    for k, f, k2 in ball.edges:
        if k2 in xs:
            eps = max(eps, distance(action.act((f,), xs[k]), xs[k2]))
    return PseudoOrbit(ball, xs, eps, n)


@dataclass
class TracedOrbit:
    anchor: CantorPoint
    points: dict        # ball key -> honest orbit point
    max_distance: float


def _bitlen_threshold(delta: float, depth: int) -> int:
    """Largest xor bit length whose distance is ``<= delta``."""
    if delta <= 0:
        return 0
    if delta >= 1:
        return depth
    _, e = math.frexp(delta)
    return max(0, depth - (1 - e))


def trace_orbit(action: CylinderAction, orbit: PseudoOrbit, delta: float,
                anchor_depth: int | None = None, all_points: bool = False) -> TracedOrbit | None:
    """First anchor ``y`` in canonical order with ``d(x_gamma, gamma . y) <= delta`` for all ``gamma``.

    Anchors are the zero-tailed points at ``anchor_depth`` (by default the
    shallowest depth at which every orbit point has a zero tail), or every
    depth-``D`` point when ``all_points`` is set.
    """
    keys = orbit.ball.order
    pts = [orbit.points[k] for k in keys]
    D = pts[0].depth
    xs = np.array([p.code for p in pts], dtype=np.int64)
    if all_points:
        anchors = np.arange(1 << D, dtype=np.int64)
    else:
        if anchor_depth is None:
            low = min(((int(c) & -int(c)).bit_length() - 1 if c else D) for c in xs)
            anchor_depth = max(action.depth, D - low)
        shift = D - anchor_depth
        anchors = np.arange(1 << anchor_depth, dtype=np.int64) << shift
    perms = np.stack([action.prefix_perm(orbit.ball.words[k]) for k in keys]).astype(np.int64)
    shift = D - action.depth
    hit = kernels.trace_search(anchors, perms, xs, shift, _bitlen_threshold(delta, D))
    if hit < 0:
        return None
    y = CantorPoint(int(anchors[hit]), D)
    ys = {k: action.act(orbit.ball.words[k], y) for k in keys}
    md = max(distance(ys[k], orbit.points[k]) for k in keys)
    return TracedOrbit(y, ys, md)
