"""Finite-resolution models of the Cantor set and the circle.

Cantor points live in ``{0,1}^D`` for a working depth ``D`` fixed per
scenario.  A point is stored as an integer whose most significant of the
``D`` low bits is the first coordinate; lexicographic order on bit strings
is then numeric order on codes, and the metric ``2^-lcp`` is computed from
the bit length of ``x ^ y``.

Circle points are exact rationals in ``[0, 1)`` with the arc-length metric of
a circle of unit circumference.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np

from . import kernels
from .errors import DomainError, ModelMismatchError, SampleError

MAX_DEPTH = 52


def _check_depth(depth: int) -> None:
    if not 1 <= depth <= MAX_DEPTH:
        raise DomainError(f"working depth must be in [1, {MAX_DEPTH}], got {depth}")


@dataclass(frozen=True, order=True)
class CantorPoint:
    code: int
    depth: int

    def __post_init__(self):
        _check_depth(self.depth)
        if not 0 <= self.code < (1 << self.depth):
            raise DomainError(f"code {self.code} out of range for depth {self.depth}")

    @classmethod
    def from_bits(cls, bits: str) -> "CantorPoint":
        if not bits or set(bits) - {"0", "1"}:
            raise DomainError(f"not a bit string: {bits!r}")
        return cls(int(bits, 2), len(bits))

    @property
    def bits(self) -> str:
        return format(self.code, f"0{self.depth}b")

    def prefix(self, d: int) -> int:
        """Code of the depth-``d`` prefix."""
        return self.code >> (self.depth - d)

    def __str__(self):
        return self.bits


@dataclass(frozen=True, order=True)
class CirclePoint:
    position: Fraction

    def __post_init__(self):
        pos = Fraction(self.position)
        if not 0 <= pos < 1:
            raise DomainError(f"circle position must lie in [0, 1), got {pos}")
        object.__setattr__(self, "position", pos)

    @classmethod
    def from_str(cls, text: str) -> "CirclePoint":
        return cls(Fraction(text))

    def rotate(self, angle) -> "CirclePoint":
        return CirclePoint((self.position + Fraction(angle)) % 1)

    def __str__(self):
        return f"{self.position.numerator}/{self.position.denominator}"


Point = Union[CantorPoint, CirclePoint]


@dataclass(frozen=True)
class Cylinder:
    prefix: str

    def __post_init__(self):
        if set(self.prefix) - {"0", "1"}:
            raise DomainError(f"not a bit prefix: {self.prefix!r}")

    @property
    def depth(self) -> int:
        return len(self.prefix)

    @property
    def code(self) -> int:
        return int(self.prefix, 2) if self.prefix else 0

    def contains(self, x: CantorPoint) -> bool:
        return x.bits.startswith(self.prefix)

    def points(self, depth: int) -> list[CantorPoint]:
        tail = depth - self.depth
        base = self.code << tail
        return [CantorPoint(base + t, depth) for t in range(1 << tail)]

    def __str__(self):
        return f"[{self.prefix}]"


@dataclass(frozen=True)
class ClopenPartition:
    cells: tuple[Cylinder, ...]
    depth: int

    def __post_init__(self):
        _check_depth(self.depth)
        prefixes = sorted(c.prefix for c in self.cells)
        if any(len(p) > self.depth for p in prefixes):
            raise DomainError("cell deeper than the working depth")
        for a, b in zip(prefixes, prefixes[1:]):
            if b.startswith(a):
                raise DomainError(f"cells {a!r} and {b!r} overlap")
        if sum(Fraction(1, 2 ** len(p)) for p in prefixes) != 1:
            raise DomainError("cells do not cover the Cantor set")

    def cell_of(self, x: CantorPoint) -> Cylinder:
        for c in self.cells:
            if c.contains(x):
                return c
        raise AssertionError("partition does not cover point")  # unreachable after validation

    def __len__(self):
        return len(self.cells)


def distance_from_bitlen(bitlen: int, depth: int) -> float:
    """Metric value for two codes whose xor has the given bit length."""
    return 0.0 if bitlen == 0 else 2.0 ** -(depth - bitlen)


def circle_arc(a: Fraction, b: Fraction) -> Fraction:
    d = abs(a - b) % 1
    return min(d, 1 - d)


def distance(x: Point, y: Point) -> float:
    """``2^-lcp`` on the Cantor model, arc length on the circle."""
    if isinstance(x, CantorPoint) and isinstance(y, CantorPoint):
        if x.depth != y.depth:
            raise ModelMismatchError(f"depth {x.depth} vs {y.depth}")
        return distance_from_bitlen((x.code ^ y.code).bit_length(), x.depth)
    if isinstance(x, CirclePoint) and isinstance(y, CirclePoint):
        return float(circle_arc(x.position, y.position))
    raise ModelMismatchError(f"cannot compare {type(x).__name__} with {type(y).__name__}")


def max_distance_codes(a: np.ndarray, b: np.ndarray, depth: int) -> float:
    """``max_i d(a[i], b[i])`` for code arrays, exact."""
    return distance_from_bitlen(kernels.max_xor_bitlen(a, b), depth)


@dataclass(frozen=True)
class FiniteSample:
    """Finite subset of one model, stored in canonical (sorted) order."""

    points: tuple
    index: int = 0

    def __post_init__(self):
        if not self.points:
            raise SampleError("empty sample")
        if len({type(p) for p in self.points}) != 1:
            raise ModelMismatchError("sample mixes point models")
        pts = tuple(sorted(self.points))
        if isinstance(pts[0], CantorPoint) and len({p.depth for p in pts}) != 1:
            raise ModelMismatchError("sample mixes working depths")
        if any(a == b for a, b in zip(pts, pts[1:])):
            raise SampleError("sample points must be distinct")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_codes(cls, codes: Iterable[int], depth: int, index: int = 0) -> "FiniteSample":
        return cls(tuple(CantorPoint(int(c), depth) for c in codes), index)

    @property
    def is_cantor(self) -> bool:
        return isinstance(self.points[0], CantorPoint)

    @property
    def depth(self) -> int:
        if not self.is_cantor:
            raise ModelMismatchError("circle samples have no working depth")
        return self.points[0].depth

    @cached_property
    def codes(self) -> np.ndarray:
        if not self.is_cantor:
            raise ModelMismatchError("circle samples have no integer codes")
        out = np.array([p.code for p in self.points], dtype=np.int64)
        out.setflags(write=False)
        return out

    @cached_property
    def _position(self) -> dict:
        return {p: i for i, p in enumerate(self.points)}

    def index_of(self, x: Point) -> int:
        try:
            return self._position[x]
        except KeyError:
            raise SampleError(f"{x} is not in the sample") from None

    def indices_of_codes(self, codes: np.ndarray) -> np.ndarray:
        """Positions of the given codes in the sample; raises if any is missing."""
        pos = np.searchsorted(self.codes, codes)
        pos = np.minimum(pos, len(self) - 1)
        if not np.array_equal(self.codes[pos], codes):
            raise SampleError("image leaves the sample")
        return pos

    def max_distance(self, i: Sequence[int] | np.ndarray, j: Sequence[int] | np.ndarray) -> float:
        """``max_k d(E[i[k]], E[j[k]])``."""
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        if self.is_cantor:
            return max_distance_codes(self.codes[i], self.codes[j], self.depth)
        pts = self.points
        return float(max((circle_arc(pts[a].position, pts[b].position) for a, b in zip(i, j)),
                         default=Fraction(0)))

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __contains__(self, x):
        return x in self._position


def depth_partition(d: int, depth: int) -> ClopenPartition:
    """All ``2^d`` cylinders of depth ``d``."""
    _check_depth(depth)
    if not 1 <= d <= depth:
        raise DomainError(f"partition depth {d} outside [1, {depth}]")
    cells = tuple(Cylinder(format(c, f"0{d}b")) for c in range(1 << d))
    return ClopenPartition(cells, depth)


def tail_aligned_sample(m: int, depth: int, index: int = 0) -> FiniteSample:
    """One point per depth-``m`` cylinder: the prefix followed by zeros."""
    _check_depth(depth)
    if not 0 <= m <= depth:
        raise DomainError(f"sample depth {m} outside [0, {depth}]")
    shift = depth - m
    return FiniteSample.from_codes((c << shift for c in range(1 << m)), depth, index)


def nearest_point_projection(x: Point, sample: FiniteSample) -> Point:
    """Closest sample point; ties go to the earliest point in canonical order."""
    if isinstance(x, CantorPoint):
        if not sample.is_cantor:
            raise ModelMismatchError("Cantor point against circle sample")
        if x.depth != sample.depth:
            raise ModelMismatchError(f"depth {x.depth} vs {sample.depth}")
        # compare bit lengths, not raw xors: equal distances must tie
        bl = np.frexp(np.bitwise_xor(sample.codes, x.code).astype(np.float64))[1]
        return sample.points[int(np.argmin(bl))]
    if sample.is_cantor:
        raise ModelMismatchError("circle point against Cantor sample")
    arcs = [circle_arc(x.position, p.position) for p in sample.points]
    return sample.points[arcs.index(min(arcs))]


def encode_point(x: Point) -> str:
    return str(x)


def decode_point(text: str) -> Point:
    text = text.strip()
    if "/" in text:
        return CirclePoint.from_str(text)
    return CantorPoint.from_bits(text)
