"""Turning approximating almost-actions into exact finite actions.

Everything works on one depth partition of the Cantor model.  A
prefix-substitution action of depth ``d`` permutes the depth-``d'`` cells for
every ``d' >= d``, so that one partition is invariant under the whole group.
When the input moves each point less than the gap between cells, it maps
every cell into the same cell as the honest action does, and the exact
solution only has to match points inside cells: by labels for finite groups,
by a stabilizer-intertwining bijection for stable letters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .actions import CylinderAction, _Evaluator, inverse, is_permutation
from .almost import AlmostAction, StagePlan, perturb_from_action
from .cantor import ClopenPartition, FiniteSample, depth_partition, max_distance_codes
from .errors import (AlmostActionError, CertificateFailure, CountMismatch, DomainError,
                     GapViolation, IntertwiningObstruction, LabellingObstruction, RelationViolation)
from .groups import Amalgam, GroupSpec, Hnn, Leaf, Symbol, Word, word_str


def partition_depth(action_depth: int, eps: float, total_depth: int) -> int:
    """``max(d, ceil(log2(1/eps)))``; cells then have diameter at most ``eps``."""
    if eps < 2.0 ** -total_depth:
        raise DomainError(f"eps={eps} is below the resolution 2^-{total_depth}")
    k = 0 if eps >= 1 else math.ceil(-math.log2(eps))
    if 2.0 ** -k > eps:   # guard against log rounding
        k += 1
    return max(action_depth, k)


def invariant_partition(action: CylinderAction, eps: float, total_depth: int) -> ClopenPartition:
    return depth_partition(partition_depth(action.depth, eps, total_depth), total_depth)


def cell_prefix(cell: int, depth: int) -> str:
    return format(cell, f"0{depth}b")


class _Cells:
    """Sample points grouped by depth-``dp`` cell; the sample is sorted so cells are contiguous."""

    def __init__(self, sample: FiniteSample, dp: int, beta: CylinderAction):
        if dp < beta.depth:
            raise DomainError("partition must be at least as deep as the action")
        self.sample = sample
        self.dp = dp
        self.D = sample.depth
        self.cell = sample.codes >> (self.D - dp)
        self.ncells = 1 << dp
        self.counts = np.bincount(self.cell, minlength=self.ncells)
        self.start = np.concatenate([[0], np.cumsum(self.counts)])
        self.beta = beta.refine(dp) if dp > beta.depth else beta
        self._cache: dict = {}

    def members(self, c: int) -> np.ndarray:
        return np.arange(self.start[c], self.start[c + 1], dtype=np.int64)

    def bperm(self, s: Symbol) -> np.ndarray:
        if s not in self._cache:
            self._cache[s] = self.beta.prefix_perm((s,))
        return self._cache[s]

    def check_counts(self, s: Symbol) -> None:
        b = self.bperm(s)
        bad = np.flatnonzero(self.counts[b] != self.counts)
        if bad.size:
            c = int(bad[0])
            raise CountMismatch(
                f"cell {cell_prefix(c, self.dp)} holds {self.counts[c]} points but its image "
                f"under {s} holds {self.counts[b[c]]}",
                cell=cell_prefix(c, self.dp), element=str(s), index=self.sample.index)

    def check_gap(self, s: Symbol, p: np.ndarray, what: str = "input") -> None:
        bad = np.flatnonzero(self.cell[p] != self.bperm(s)[self.cell])
        if bad.size:
            i = int(bad[0])
            raise GapViolation(
                f"{what} permutation of {s} moves {self.sample.points[i]} outside the cell "
                f"the honest action sends it to",
                cell=cell_prefix(int(self.cell[i]), self.dp), element=str(s),
                point=str(self.sample.points[i]), index=self.sample.index)


class _Perms(_Evaluator):
    """Generator permutations of one sample, evaluated on words."""

    def __init__(self, spec: GroupSpec, perms: Mapping[Symbol, np.ndarray], size: int):
        self.spec = spec
        self.perms = dict(perms)
        self.size = size

    def _symbol_value(self, s):
        if s.stable:
            p = self.perms[Symbol(s.name, 1, True)]
            return p if s.value == 1 else inverse(p)
        if s.value == self.spec.leaves()[s.name].table.identity:
            return np.arange(self.size, dtype=np.int64)
        return self.perms[s]

    def _identity(self):
        return np.arange(self.size, dtype=np.int64)

    def _compose(self, a, b):
        return a[b]

    def _equal(self, a, b):
        return bool(np.array_equal(a, b))


# --------------------------------------------------------------------------- finite groups


def _leaf_perm(perms: Mapping[Symbol, np.ndarray], label: str, elem: int, identity: int, size: int):
    if elem == identity:
        return np.arange(size, dtype=np.int64)
    return perms[Symbol(label, elem)]


def _is_exact_leaf(leaf: Leaf, perms: Mapping[Symbol, np.ndarray], size: int) -> bool:
    t = leaf.table
    get = lambda e: _leaf_perm(perms, leaf.label, e, t.identity, size)
    return all(np.array_equal(get(a)[get(b)], get(t.product(a, b)))
               for a in range(t.order) for b in range(t.order))


def _solve_leaf(cells: _Cells, leaf: Leaf, alpha: Mapping[Symbol, np.ndarray],
                frozen: Mapping[int, np.ndarray] | None) -> dict:
    t, label = leaf.table, leaf.label
    size = len(cells.sample)
    elems = [e for e in range(t.order) if e != t.identity]
    for e in elems:
        cells.check_counts(Symbol(label, e))
    for e in elems:
        cells.check_gap(Symbol(label, e), alpha[Symbol(label, e)])
    frozen = dict(frozen or {})
    frozen.pop(t.identity, None)
    for e, p in frozen.items():
        cells.check_gap(Symbol(label, e), p, what="frozen")

    # an input that is already an exact action extending the frozen part is kept as is
    if _is_exact_leaf(leaf, alpha, size) and all(
            np.array_equal(alpha[Symbol(label, e)], p) for e, p in frozen.items()):
        return {Symbol(label, e): alpha[Symbol(label, e)] for e in elems}

    ident = np.arange(size, dtype=np.int64)
    delta = [(t.identity, ident)] + sorted(frozen.items())
    lab: dict[int, np.ndarray] = {}
    for r in range(cells.ncells):
        if r in lab or cells.counts[r] == 0:
            continue
        base = cells.members(r)
        for e, p in delta:
            c = int(cells.bperm(Symbol(label, e))[r]) if e != t.identity else r
            img = p[base]
            if c in lab:
                if not np.array_equal(lab[c], img):
                    raise LabellingObstruction(
                        f"element {label}:{e} stabilizes cell {cell_prefix(r, cells.dp)} "
                        f"but moves its sample points",
                        cell=cell_prefix(r, cells.dp), element=f"{label}:{e}",
                        index=cells.sample.index)
            else:
                lab[c] = img
    out = {}
    for e in elems:
        b = cells.bperm(Symbol(label, e))
        q = np.empty(size, dtype=np.int64)
        for c, pts in lab.items():
            q[pts] = lab[int(b[c])]
        out[Symbol(label, e)] = q
    return out


# --------------------------------------------------------------------------- stable letters


def _solve_stable(cells: _Cells, node: Hnn, base: Mapping[Symbol, np.ndarray],
                  at: np.ndarray) -> np.ndarray:
    size = len(cells.sample)
    t = Symbol(node.stable, 1, True)
    cells.check_counts(t)
    cells.check_gap(t, at)
    leaves = node.leaves()
    fl, gl = node.phi_source.target, node.phi_target.target
    f_id, g_id = leaves[fl].table.identity, leaves[gl].table.identity
    phi = node.phi()
    F = sorted(phi)
    fperm = {f: _leaf_perm(base, fl, f, f_id, size) for f in F}
    gperm = {f: _leaf_perm(base, gl, phi[f], g_id, size) for f in F}
    fcell = {f: (cells.bperm(Symbol(fl, f)) if f != f_id else np.arange(cells.ncells)) for f in F}
    bt = cells.bperm(t)

    out = np.full(size, -1, dtype=np.int64)
    done = np.zeros(cells.ncells, dtype=bool)
    for r in range(cells.ncells):
        if done[r] or cells.counts[r] == 0:
            continue
        stab = [f for f in F if fcell[f][r] == r]
        b = _intertwine(cells, r, int(bt[r]), stab, fperm, gperm, at)
        for f in F:
            c = int(fcell[f][r])
            if done[c]:
                continue
            pts = cells.members(c)
            out[pts] = gperm[f][b[inverse(fperm[f])[pts]]]
            done[c] = True
    return out


def _intertwine(cells: _Cells, r: int, target: int, stab: Sequence[int],
                fperm: Mapping, gperm: Mapping, at: np.ndarray) -> np.ndarray:
    """Bijection ``b`` from the sample of cell ``r`` onto that of ``target`` with
    ``b o alpha(f) = alpha(phi f) o b`` for ``f`` in the stabilizer.

    Backtracking over stabilizer orbits in canonical order; for each orbit
    representative the input image is tried first, then the target points in order.
    """
    src = [int(i) for i in cells.members(r)]
    dst = [int(i) for i in cells.members(target)]
    b = np.full(len(cells.sample), -1, dtype=np.int64)
    used: set[int] = set()

    def assign(e: int, y: int) -> list[int] | None:
        placed = []
        for f in stab:
            x, z = int(fperm[f][e]), int(gperm[f][y])
            if b[x] >= 0:
                if b[x] != z:
                    break
                continue
            if z in used:
                break
            b[x] = z
            used.add(z)
            placed.append(x)
        else:
            return placed
        for x in placed:
            used.discard(int(b[x]))
            b[x] = -1
        return None

    def search(k: int) -> bool:
        while k < len(src) and b[src[k]] >= 0:
            k += 1
        if k == len(src):
            return True
        e = src[k]
        first = int(at[e])
        order = ([first] if first in dst else []) + [y for y in dst if y != first]
        for y in order:
            if y in used:
                continue
            placed = assign(e, y)
            if placed is None:
                continue
            if search(k + 1):
                return True
            for x in placed:
                used.discard(int(b[x]))
                b[x] = -1
        return False

    if not search(0):
        raise IntertwiningObstruction(
            f"no bijection from cell {cell_prefix(r, cells.dp)} intertwines the stabilizer actions",
            cell=cell_prefix(r, cells.dp), index=cells.sample.index)
    return b


# --------------------------------------------------------------------------- tree fold


def _solve_node(cells: _Cells, node: GroupSpec, alpha: Mapping[Symbol, np.ndarray],
                frozen: Mapping[int, np.ndarray] | None = None) -> dict:
    if isinstance(node, Leaf):
        return _solve_leaf(cells, node, alpha, frozen)
    if isinstance(node, Amalgam):
        left = _solve_node(cells, node.left, alpha)
        size = len(cells.sample)
        dl, dr = node.delta_left, node.delta_right
        lt = node.left.leaves()[dl.target].table
        fz = {dr.image[k]: _leaf_perm(left, dl.target, dl.image[k], lt.identity, size)
              for k in range(node.delta.order)}
        right = _solve_leaf(cells, node.right, alpha, fz)
        return {**left, **right}
    if isinstance(node, Hnn):
        base = _solve_node(cells, node.base, alpha)
        t = Symbol(node.stable, 1, True)
        return {**base, t: _solve_stable(cells, node, base, alpha[t])}
    raise TypeError(type(node))


def solve_finite(leaf: Leaf, beta: CylinderAction, alpha: AlmostAction, n: int, eps: float,
                 frozen: Mapping[int, np.ndarray] | None = None) -> dict:
    """Exact action of one finite leaf on ``E_n`` within the cell diameter of ``alpha_n``.

    ``frozen`` maps leaf elements (a subgroup) to exact permutations that the
    result must reproduce.
    """
    st = alpha.stage(n)
    cells = _Cells(st.sample, partition_depth(beta.depth, eps, st.sample.depth), beta)
    perms = {s: st.perm((s,)) for s in leaf.generator_symbols()}
    return _solve_leaf(cells, leaf, perms, frozen)


@dataclass
class StageSolution:
    index: int
    sample: FiniteSample
    perms: dict                    # generator symbol -> permutation of the sample
    partition_depth: int
    distances: dict                # generator text -> max_e d(solved, input)
    bounds: dict                   # generator text -> advertised bound

    def within_bounds(self) -> bool:
        return all(self.distances[g] <= self.bounds[g] for g in self.distances)

    def to_dict(self) -> dict:
        return {"n": self.index, "partition_depth": self.partition_depth,
                "perms": {str(s): p.tolist() for s, p in self.perms.items()},
                "distances": dict(self.distances), "bounds": dict(self.bounds)}


@dataclass
class SolvedAction:
    spec: GroupSpec
    stages: list = field(default_factory=list)      # StageSolution, by n
    failures: dict = field(default_factory=dict)    # n -> error dict

    @property
    def first_admissible(self) -> int | None:
        return self.stages[0].index if self.stages else None

    def stage(self, n: int) -> StageSolution:
        for s in self.stages:
            if s.index == n:
                return s
        raise DomainError(f"no solution at n={n}")


def verify_solution(spec: GroupSpec, sol: StageSolution) -> list[tuple[Word, Word]]:
    return _Perms(spec, sol.perms, len(sol.sample)).violations()


def solve_stage(spec: GroupSpec, beta: CylinderAction, alpha: AlmostAction, n: int,
                eps: float, max_depth: int | None = None) -> StageSolution:
    """Solve one stage; labelling/intertwining obstructions retry at finer partitions."""
    st = alpha.stage(n)
    D = st.sample.depth
    dp0 = partition_depth(beta.depth, eps, D)
    alpha_perms = {s: st.perm((s,)) for s in spec.generator_symbols()}
    first_error: AlmostActionError | None = None
    for dp in range(dp0, (max_depth or D) + 1):
        cells = _Cells(st.sample, dp, beta)
        try:
            perms = _solve_node(cells, spec, alpha_perms)
        except (LabellingObstruction, IntertwiningObstruction) as exc:
            first_error = first_error or exc
            continue
        except CountMismatch:
            if first_error is not None:
                raise first_error from None
            raise
        sol = _finish(spec, st.sample, perms, alpha_perms, dp, n)
        return sol
    raise first_error


def _finish(spec, sample, perms, alpha_perms, dp, n) -> StageSolution:
    for s, p in perms.items():
        if not is_permutation(p, len(sample)):
            raise RelationViolation(f"solution for {s} is not a bijection", index=n)
    sol = StageSolution(n, sample, perms, dp, {}, {})
    bad = verify_solution(spec, sol)
    if bad:
        raise RelationViolation(f"solution violates {word_str(bad[0][0])} ~ {word_str(bad[0][1])}",
                                index=n)
    for s, p in perms.items():
        sol.distances[str(s)] = sample.max_distance(p, alpha_perms[s])
        sol.bounds[str(s)] = 2.0 ** -dp * (2 if s.stable else 1)
    return sol


def solve_virtually_free(spec: GroupSpec, beta: CylinderAction, alpha: AlmostAction,
                         eps: float, stop_at_first: bool = False) -> SolvedAction:
    """Fold the structure tree at every stage of ``alpha``.

    Stages that fail (typically count mismatches at small ``n``) are recorded
    in ``failures``; ``first_admissible`` is the first solved index.
    """
    out = SolvedAction(spec)
    for st in alpha.stages:
        try:
            out.stages.append(solve_stage(spec, beta, alpha, st.index, eps))
        except (CountMismatch, LabellingObstruction, IntertwiningObstruction) as exc:
            out.failures[st.index] = exc.to_dict()
            continue
        if stop_at_first:
            break
    return out


# --------------------------------------------------------------------------- witnesses


@dataclass
class Witness:
    sample: FiniteSample
    solution: StageSolution
    certificate: dict              # word text -> max_e d(beta(gamma) e, solved(gamma) e)
    eps: float

    @property
    def max_defect(self) -> float:
        return max(self.certificate.values(), default=0.0)

    def to_dict(self) -> dict:
        return {"size": len(self.sample), "eps": self.eps, "max_defect": self.max_defect,
                "certificate": dict(self.certificate), "solution": self.solution.to_dict()}


def residual_finiteness_witness(spec: GroupSpec, beta: CylinderAction, words: Sequence[Word],
                                eps: float, seed: int, total_depth: int,
                                radius: int = 0, count: int = 0) -> Witness:
    """Finite exact action on a sample, ``eps``-close to ``beta`` on ``words``.

    The sample is tail-aligned at depth ``m = max(d, d') + radius`` where ``d'``
    is the first depth with ``2^-d' < eps``; ``count`` transpositions of radius
    ``radius`` perturb it before solving (zero by default).
    """
    if eps <= 2.0 ** -total_depth:
        raise DomainError(f"eps={eps} is at or below the resolution 2^-{total_depth}")
    dp = max(beta.depth, math.floor(-math.log2(eps)) + 1)
    m = dp + radius
    if m > total_depth:
        raise DomainError(f"witness needs depth {m} > working depth {total_depth}")
    alpha = perturb_from_action(beta, [StagePlan(0, m, radius, count)], seed, total_depth)
    sol = solve_stage(spec, beta, alpha, 0, 2.0 ** -dp)
    ev = _Perms(spec, sol.perms, len(alpha.stages[0].sample))
    sample = alpha.stages[0].sample
    cert = {}
    for w in words:
        img = beta.act_codes(w, sample.codes, total_depth)
        cert[word_str(w)] = max_distance_codes(img, sample.codes[ev.evaluate(w)], total_depth)
    wit = Witness(sample, sol, cert, eps)
    if not wit.max_defect < eps:
        raise CertificateFailure(f"certificate {wit.max_defect} is not below eps={eps}",
                                 max_defect=wit.max_defect, eps=eps)
    return wit


def evaluate_solution(spec: GroupSpec, sol: StageSolution, w: Word) -> np.ndarray:
    return _Perms(spec, sol.perms, len(sol.sample)).evaluate(w)
