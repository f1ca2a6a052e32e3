"""Limit actions of equicontinuous almost-actions at a finite resolution.

Arzela-Ascoli at depth ``c``: a map that sends every depth-``c'`` cylinder
into a single depth-``c`` cylinder is determined, up to ``2^-c``, by a map
between finitely many cells.  Pigeonholing those cell maps along the
schedule, depth by depth, gives a diagonal subsequence on which the
almost-action converges to an honest prefix-substitution action.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .actions import CylinderAction, is_permutation
from .almost import AlmostAction
from .cantor import max_distance_codes
from .errors import InsufficientData, NotEquicontinuous, RelationViolation
from .groups import GroupSpec, Word, word_str
from .solver import SolvedAction, solve_virtually_free

INF = float("inf")


def separation_depth(codes: np.ndarray, depth: int) -> int:
    """``1 + max lcp`` over distinct sample points: cylinders this deep are singletons."""
    if len(codes) < 2:
        return 0
    x = np.bitwise_xor(codes[1:], codes[:-1])   # sorted codes: neighbours realise the max lcp
    bl = np.frexp(x.astype(np.float64))[1]
    return int(depth - bl.min() + 1)


def _induced(codes: np.ndarray, img: np.ndarray, depth: int, c_src: int, c_dst: int):
    cells = codes >> (depth - c_src)
    image_cells = img >> (depth - c_dst)
    return kernels.cell_map(cells, image_cells, 1 << c_src)


def _least_modulus(codes: np.ndarray, img: np.ndarray, depth: int, c: int, limit: int) -> int:
    for cp in range(0, limit + 1):
        _, ok = _induced(codes, img, depth, cp, c)
        if ok:
            return cp
    return limit


@dataclass
class ModulusRow:
    word: str
    moduli: list            # c' for c = 1..len(moduli); INF where not witnessed

    @property
    def ok(self) -> bool:
        return all(v != INF for v in self.moduli)

    def first_failure(self) -> int | None:
        for c, v in enumerate(self.moduli, start=1):
            if v == INF:
                return c
        return None


def equicontinuity_modulus(alpha: AlmostAction, gamma: Word, c_max: int | None = None) -> ModulusRow:
    """Least ``c'`` per ``c`` such that every ``alpha_n(gamma)`` sends each sampled
    depth-``c'`` cylinder into one depth-``c`` cylinder.

    A stage only witnesses ``c'`` below its separation depth (deeper cylinders
    hold one point and say nothing), so a needed ``c'`` at that depth is ``inf``.
    ``c_max`` defaults to one less than the smallest separation depth.
    """
    seps = {st.index: separation_depth(st.sample.codes, st.sample.depth) for st in alpha.stages}
    if c_max is None:
        c_max = min(seps.values()) - 1
    row = []
    for c in range(1, c_max + 1):
        worst = 0
        for st in alpha.stages:
            codes = st.sample.codes
            img = codes[alpha.perm(st.index, gamma)]
            cp = _least_modulus(codes, img, st.sample.depth, c, seps[st.index])
            if cp >= seps[st.index]:
                worst = INF
                break
            worst = max(worst, cp)
        row.append(worst)
    return ModulusRow(word_str(gamma), row)


@dataclass
class LimitResult:
    subsequence: list           # stage indices
    action: CylinderAction      # at depth c*
    convergence: list = field(default_factory=list)   # (n, word, value)
    stabilization: list = field(default_factory=list)  # (c, indices kept)

    def max_convergence(self) -> float:
        return max((v for _, _, v in self.convergence), default=0.0)

    def to_dict(self) -> dict:
        return {"subsequence": list(self.subsequence), "limit": self.action.to_config(),
                "convergence": [{"n": n, "gamma": w, "value": v} for n, w, v in self.convergence],
                "stabilization": [{"c": c, "kept": list(k)} for c, k in self.stabilization]}


def extract_limit_action(spec: GroupSpec, alpha: AlmostAction, resolution: int) -> LimitResult:
    """Diagonal subsequence on which the generator maps stabilize at every depth ``c <= resolution``.

    At depth ``c`` the stages kept so far are grouped by their cell-level
    maps (depth-``c'`` cells to depth-``c`` cells, ``c'`` from the modulus);
    the largest class occurring at least twice is kept, ties going to the
    class that appears first.  At the final depth only classes whose cell
    maps are permutations satisfying every relation qualify.
    """
    gens = spec.generator_symbols()
    rows = {g: equicontinuity_modulus(alpha, (g,), resolution) for g in gens}
    for g, row in rows.items():
        if not row.ok:
            raise NotEquicontinuous(f"{g} has no modulus at depth {row.first_failure()}",
                                    word=str(g), depth=row.first_failure())
    if rows and any(row.moduli[-1] > resolution for row in rows.values()):
        raise InsufficientData(f"cell maps at depth {resolution} need finer source cells; "
                               f"raise the resolution", resolution=resolution)
    kept = list(alpha.schedule)
    history = []
    limit = None
    for c in range(1, resolution + 1):
        classes: dict[bytes, list[int]] = {}
        maps: dict[bytes, dict] = {}
        for n in kept:
            st = alpha.stage(n)
            codes, D = st.sample.codes, st.sample.depth
            key_parts, cm = [], {}
            for g in gens:
                cp = rows[g].moduli[c - 1]
                m, _ = _induced(codes, codes[alpha.perm(n, (g,))], D, cp, c)
                cm[g] = m
                key_parts.append(m.tobytes())
            key = b"|".join(key_parts)
            classes.setdefault(key, []).append(n)
            maps.setdefault(key, cm)
        ranked = sorted(classes.items(), key=lambda kv: (-len(kv[1]), kv[1][0]))
        chosen = None
        for key, members in ranked:
            if len(members) < 2:
                break
            if c == resolution:
                limit = _as_action(spec, maps[key], resolution)
                if limit is None:
                    continue
            chosen = members
            break
        if chosen is None:
            raise InsufficientData(f"no cell map at depth {c} repeats along the schedule",
                                   depth=c, stages=kept)
        kept = chosen
        history.append((c, list(kept)))
    res = LimitResult(kept, limit, stabilization=history)
    for n in kept:
        st = alpha.stage(n)
        codes, D = st.sample.codes, st.sample.depth
        for g in gens:
            img = limit.act_codes((g,), codes, D)
            res.convergence.append((n, str(g), max_distance_codes(codes[alpha.perm(n, (g,))], img, D)))
    return res


def _as_action(spec: GroupSpec, maps: dict, depth: int) -> CylinderAction | None:
    n = 1 << depth
    if not all(is_permutation(m, n) for m in maps.values()):
        return None
    try:
        return CylinderAction(spec, depth, {g: m for g, m in maps.items()})
    except RelationViolation:
        return None


@dataclass
class AbstractSolution:
    limit: LimitResult
    solved: SolvedAction


def solve_abstract(spec: GroupSpec, alpha: AlmostAction, eps: float, resolution: int) -> AbstractSolution:
    """Extract a limit action and solve against it on the extracted subsequence."""
    lim = extract_limit_action(spec, alpha, resolution)
    sub = alpha.restrict(lim.subsequence)
    return AbstractSolution(lim, solve_virtually_free(spec, lim.action, sub, eps))
