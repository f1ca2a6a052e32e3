"""Honest actions: depth-d prefix substitutions on the Cantor model and
rotations on the circle.

A prefix substitution replaces the first ``d`` bits of a point by their image
under a permutation of the ``2^d`` prefixes and keeps the tail.  Such maps
are homeomorphisms, preserve the uniform measure, and map every
tail-aligned sample of depth ``m >= d`` onto itself.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .cantor import CantorPoint, CirclePoint, FiniteSample, MAX_DEPTH, tail_aligned_sample
from .errors import DomainError, GroupSpecError, ModelMismatchError, RelationViolation
from .groups import GroupSpec, Symbol, Word, parse_word, word_str


def compose(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """``p o q``: apply ``q`` first."""
    return p[q]


def inverse(p: np.ndarray) -> np.ndarray:
    return np.argsort(p).astype(np.int64)


def is_permutation(p: np.ndarray, n: int) -> bool:
    p = np.asarray(p)
    return p.shape == (n,) and np.array_equal(np.sort(p), np.arange(n))


def _frozen(p) -> np.ndarray:
    a = np.array(p, dtype=np.int64)
    a.setflags(write=False)
    return a


class _Evaluator:
    """Word evaluation shared by the Cantor and circle actions."""

    spec: GroupSpec

    def _symbol_value(self, s: Symbol):
        raise NotImplementedError

    def _identity(self):
        raise NotImplementedError

    def _compose(self, a, b):
        raise NotImplementedError

    def _equal(self, a, b) -> bool:
        raise NotImplementedError

    def evaluate(self, w: Sequence[Symbol]):
        out = self._identity()
        for s in reversed(tuple(w)):
            self.spec.check_symbol(s)
            out = self._compose(self._symbol_value(s), out)
        return out

    def violations(self) -> list[tuple[Word, Word]]:
        return [(lhs, rhs) for lhs, rhs in self.spec.relations()
                if not self._equal(self.evaluate(lhs), self.evaluate(rhs))]


@dataclass(frozen=True, eq=False)
class CylinderAction(_Evaluator):
    """Action by permutations of the depth-``depth`` prefixes.

    ``assignment`` maps every generator symbol of ``spec`` to a permutation
    of ``range(2**depth)``.  Relations are checked on construction unless
    ``verify=False`` (used to build counterexamples).
    """

    spec: GroupSpec
    depth: int
    assignment: Mapping[Symbol, np.ndarray]
    verify: bool = field(default=True, repr=False)

    def __post_init__(self):
        if not 1 <= self.depth <= MAX_DEPTH:
            raise DomainError(f"action depth must be in [1, {MAX_DEPTH}]")
        n = 1 << self.depth
        table = {}
        for s in self.spec.generator_symbols():
            if s not in self.assignment:
                raise GroupSpecError(f"no permutation assigned to generator {s}", generator=str(s))
            p = _frozen(self.assignment[s])
            if not is_permutation(p, n):
                raise DomainError(f"image of {s} is not a permutation of {n} prefixes")
            table[s] = p
        extra = set(self.assignment) - set(table)
        if extra:
            raise GroupSpecError(f"assignment names non-generators {sorted(map(str, extra))}")
        object.__setattr__(self, "assignment", table)
        if self.verify:
            bad = self.violations()
            if bad:
                raise RelationViolation(
                    f"{len(bad)} relation(s) fail, first {word_str(bad[0][0])} ~ {word_str(bad[0][1])}",
                    relations=[f"{word_str(a)} ~ {word_str(b)}" for a, b in bad])

    # ---- construction helpers

    @classmethod
    def from_images(cls, spec: GroupSpec, depth: int, images: Mapping, verify: bool = True):
        """Build from images of a generating set.

        Keys are symbols or their text (``"a:1"``, ``"t"``).  Images of the
        remaining leaf elements are generated through the leaf table; an
        inconsistent partial assignment raises :class:`RelationViolation`.
        """
        given: dict[Symbol, np.ndarray] = {}
        for k, v in images.items():
            s = parse_word(k)[0] if isinstance(k, str) else k
            spec.check_symbol(s)
            given[s] = np.asarray(v, dtype=np.int64)
        n = 1 << depth
        out: dict[Symbol, np.ndarray] = {}
        for label, lf in spec.leaves().items():
            t = lf.table
            gens = {s.value: p for s, p in given.items() if not s.stable and s.name == label}
            known = {t.identity: np.arange(n, dtype=np.int64)}
            frontier = [t.identity]
            while frontier:
                a = frontier.pop()
                for g, pg in gens.items():
                    if not is_permutation(pg, n):
                        raise DomainError(f"image of {label}:{g} is not a permutation")
                    b = t.product(g, a)
                    pb = pg[known[a]]
                    if b in known:
                        if not np.array_equal(known[b], pb):
                            raise RelationViolation(f"images for leaf {label!r} violate its table")
                    else:
                        known[b] = pb
                        frontier.append(b)
            if len(known) != t.order:
                raise GroupSpecError(f"given images do not generate leaf {label!r}")
            for e, p in known.items():
                if e != t.identity:
                    out[Symbol(label, e)] = p
        for s, p in given.items():
            if s.stable:
                out[Symbol(s.name, 1, True)] = p if s.value == 1 else inverse(p)
        return cls(spec, depth, out, verify)

    @classmethod
    def identity(cls, spec: GroupSpec, depth: int) -> "CylinderAction":
        n = 1 << depth
        return cls(spec, depth, {s: np.arange(n) for s in spec.generator_symbols()})

    # ---- evaluation

    def _symbol_value(self, s):
        if s.stable:
            p = self.assignment[Symbol(s.name, 1, True)]
            return p if s.value == 1 else inverse(p)
        if s.value == self.spec.leaves()[s.name].table.identity:
            return np.arange(1 << self.depth, dtype=np.int64)
        return self.assignment[s]

    def _identity(self):
        return np.arange(1 << self.depth, dtype=np.int64)

    def _compose(self, a, b):
        return a[b]

    def _equal(self, a, b):
        return bool(np.array_equal(a, b))

    def prefix_perm(self, w: Sequence[Symbol]) -> np.ndarray:
        """Permutation of depth-``depth`` prefixes induced by ``w`` (right to left)."""
        return self.evaluate(w)

    def act_codes(self, w: Sequence[Symbol], codes: np.ndarray, total_depth: int) -> np.ndarray:
        if total_depth < self.depth:
            raise DomainError(f"working depth {total_depth} below action depth {self.depth}")
        shift = total_depth - self.depth
        codes = np.asarray(codes, dtype=np.int64)
        p = self.prefix_perm(w)
        return (p[codes >> shift] << shift) | (codes & ((1 << shift) - 1))

    def act(self, w: Sequence[Symbol], x: CantorPoint) -> CantorPoint:
        if not isinstance(x, CantorPoint):
            raise ModelMismatchError("cylinder actions act on Cantor points")
        code = int(self.act_codes(w, np.array([x.code]), x.depth)[0])
        return CantorPoint(code, x.depth)

    def act_sample(self, w: Sequence[Symbol], sample: FiniteSample) -> list:
        codes = self.act_codes(w, sample.codes, sample.depth)
        return [CantorPoint(int(c), sample.depth) for c in codes]

    def restrict_to_sample(self, w: Sequence[Symbol], sample: FiniteSample) -> np.ndarray:
        """Index permutation of ``sample`` induced by ``w``; the image must stay in the sample."""
        return sample.indices_of_codes(self.act_codes(w, sample.codes, sample.depth))

    def equivariant_sample(self, m: int, total_depth: int) -> FiniteSample:
        if m < self.depth:
            raise DomainError(f"sample depth {m} below action depth {self.depth}")
        return tail_aligned_sample(m, total_depth)

    def refine(self, depth: int) -> "CylinderAction":
        """The same homeomorphisms described at a deeper prefix depth."""
        if depth < self.depth:
            raise DomainError("can only refine to a deeper depth")
        k = depth - self.depth
        pre = np.arange(1 << depth, dtype=np.int64)
        table = {s: (p[pre >> k] << k) | (pre & ((1 << k) - 1)) for s, p in self.assignment.items()}
        return CylinderAction(self.spec, depth, table, verify=False)

    def cylinder_image_size(self, w: Sequence[Symbol], prefix: str, total_depth: int) -> int:
        """Number of depth-``total_depth`` points in the image of a cylinder (brute force)."""
        k = len(prefix)
        base = (int(prefix, 2) if prefix else 0) << (total_depth - k)
        pts = np.arange(base, base + (1 << (total_depth - k)), dtype=np.int64)
        return int(np.unique(self.act_codes(w, pts, total_depth)).size)

    def to_config(self) -> dict:
        return {"depth": self.depth,
                "generators": {str(s): p.tolist() for s, p in self.assignment.items()}}

    @classmethod
    def from_config(cls, spec: GroupSpec, doc: Mapping, verify: bool = True) -> "CylinderAction":
        return cls.from_images(spec, int(doc["depth"]), doc["generators"], verify)


def verify_action(spec: GroupSpec, action: CylinderAction) -> list[tuple[Word, Word]]:
    """Relations of ``spec`` that ``action`` violates; empty means the action is honest."""
    if action.spec is not spec:
        action = CylinderAction(spec, action.depth, action.assignment, verify=False)
    return action.violations()


@dataclass(frozen=True, eq=False)
class RotationAction(_Evaluator):
    """Action on the circle: each generator rotates by an exact rational angle."""

    spec: GroupSpec
    angles: Mapping[Symbol, Fraction]
    verify: bool = field(default=True, repr=False)

    def __post_init__(self):
        table = {}
        for s in self.spec.generator_symbols():
            if s not in self.angles:
                raise GroupSpecError(f"no angle assigned to generator {s}", generator=str(s))
            table[s] = Fraction(self.angles[s]) % 1
        object.__setattr__(self, "angles", table)
        if self.verify:
            bad = self.violations()
            if bad:
                raise RelationViolation(f"{len(bad)} relation(s) fail",
                                        relations=[f"{word_str(a)} ~ {word_str(b)}" for a, b in bad])

    @classmethod
    def from_images(cls, spec: GroupSpec, images: Mapping, verify: bool = True) -> "RotationAction":
        """Angles for a generating set; other leaf elements follow from the table."""
        given = {}
        for k, v in images.items():
            s = parse_word(k)[0] if isinstance(k, str) else k
            spec.check_symbol(s)
            given[s] = Fraction(v) if s.value != -1 else -Fraction(v)
        out = {}
        for label, lf in spec.leaves().items():
            t = lf.table
            gens = {s.value: a for s, a in given.items() if not s.stable and s.name == label}
            known = {t.identity: Fraction(0)}
            frontier = [t.identity]
            while frontier:
                a = frontier.pop()
                for g, ang in gens.items():
                    b = t.product(g, a)
                    val = (ang + known[a]) % 1
                    if b in known and known[b] != val:
                        raise RelationViolation(f"angles for leaf {label!r} violate its table")
                    if b not in known:
                        known[b] = val
                        frontier.append(b)
            if len(known) != t.order:
                raise GroupSpecError(f"given angles do not generate leaf {label!r}")
            out.update({Symbol(label, e): a for e, a in known.items() if e != t.identity})
        for s, a in given.items():
            if s.stable:
                out[Symbol(s.name, 1, True)] = a
        return cls(spec, out, verify)

    def _symbol_value(self, s):
        if s.stable:
            a = self.angles[Symbol(s.name, 1, True)]
            return a if s.value == 1 else (-a) % 1
        if s.value == self.spec.leaves()[s.name].table.identity:
            return Fraction(0)
        return self.angles[s]

    def _identity(self):
        return Fraction(0)

    def _compose(self, a, b):
        return (a + b) % 1

    def _equal(self, a, b):
        return a == b

    def angle(self, w: Sequence[Symbol]) -> Fraction:
        return self.evaluate(w)

    def act(self, w: Sequence[Symbol], x: CirclePoint) -> CirclePoint:
        if not isinstance(x, CirclePoint):
            raise ModelMismatchError("rotations act on circle points")
        return x.rotate(self.angle(w))

    def act_sample(self, w: Sequence[Symbol], sample: FiniteSample) -> list:
        a = self.angle(w)
        return [p.rotate(a) for p in sample.points]

    def restrict_to_sample(self, w: Sequence[Symbol], sample: FiniteSample) -> np.ndarray:
        return np.array([sample.index_of(p) for p in self.act_sample(w, sample)], dtype=np.int64)

    def to_config(self) -> dict:
        return {"rotations": {str(s): str(a) for s, a in self.angles.items()}}


Action = CylinderAction | RotationAction


def action_oracle(action: Action):
    """Word equality oracle: two words are identified when they act identically."""
    if isinstance(action, CylinderAction):
        return lambda w: action.prefix_perm(w).tobytes()
    return action.angle
