"""Matrix-level lifting: replace almost projections, almost partial isometries
and almost matrix units by exact ones nearby.

Every routine returns a :class:`Lifted` pair ``(value, report)``.  The report
records the input defect, residuals of the exact identities the output
satisfies, the distance moved and, where one exists, the analytic bound.

Convention: the source of a partial isometry ``v`` is ``v* v`` and its range
is ``v v*``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConditioningWarning, DomainError, LiftingError

TAU = 1e-10


def norm(a: np.ndarray) -> float:
    """Operator norm."""
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def adj(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def _eye_like(a: np.ndarray) -> np.ndarray:
    return np.eye(a.shape[0], dtype=complex)


@dataclass
class LiftReport:
    op: str
    input_defect: float = 0.0
    residuals: dict = field(default_factory=dict)
    distance: float = 0.0
    bound: float | None = None
    constant: float | None = None     # distance / input defect when both are nonzero

    def to_dict(self) -> dict:
        return {"op": self.op, "input_defect": self.input_defect, "residuals": dict(self.residuals),
                "distance": self.distance, "bound": self.bound, "constant": self.constant}


@dataclass
class Lifted:
    value: object
    report: LiftReport

    def __iter__(self):
        return iter((self.value, self.report))


def _ratio(a: float, b: float) -> float | None:
    return a / b if b > 0 else None


def _as_square(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"{name} must be a square matrix")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} has non-finite entries")
    return a


def projection_bound(eps: float) -> float:
    """Largest distance from an eigenvalue ``l`` with ``|l^2 - l| <= eps`` to ``{0, 1}``."""
    return (1 - np.sqrt(1 - 4 * eps)) / 2


def _spectral_projection(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(h)
    keep = v[:, w > 0.5]
    return keep @ adj(keep), w


def project_almost_projection(p, eps: float, tau: float = TAU) -> Lifted:
    """Spectral projection of the hermitian part onto eigenvalues above 1/2."""
    p = _as_square(p, "p")
    if not 0 <= eps < 0.25:
        raise DomainError("projection lifting needs 0 <= eps < 1/4")
    herm = norm(p - adj(p))
    if herm > tau:
        raise LiftingError(f"p is not hermitian: |p - p*| = {herm:.3g}", residual=herm)
    defect = norm(p @ p - p)
    if defect > eps + tau:
        raise LiftingError(f"|p^2 - p| = {defect:.3g} exceeds eps = {eps}", defect=defect, eps=eps)
    h = (p + adj(p)) / 2
    pt, spec = _spectral_projection(h)
    inside = spec[(spec > 2 * eps + tau) & (spec < 1 - 2 * eps - tau)]
    if inside.size:
        raise LiftingError(f"eigenvalue {inside[0]:.6g} inside the spectral gap",
                           eigenvalue=float(inside[0]), eps=eps)
    dist = norm(pt - p)
    rep = LiftReport("project_almost_projection", defect,
                     {"idempotent": norm(pt @ pt - pt), "hermitian": norm(pt - adj(pt))},
                     dist, float(projection_bound(eps)) + tau, _ratio(dist, defect))
    return Lifted(pt, rep)


def orthogonalize(pt, q, eps: float, tau: float = TAU) -> Lifted:
    """Lift the compression of ``q`` to the complement of the projection ``pt``."""
    pt = _as_square(pt, "pt")
    q = _as_square(q, "q")
    comp = _eye_like(pt) - pt
    c = comp @ q @ comp
    c = (c + adj(c)) / 2
    cdef = norm(c @ c - c)
    if cdef >= 0.25:
        raise LiftingError(f"compression is too far from a projection ({cdef:.3g})", defect=cdef)
    qt, _ = project_almost_projection(c, cdef, tau=max(tau, norm(c - adj(c))))
    dist = norm(qt - q)
    rep = LiftReport("orthogonalize", max(eps, norm(pt @ q)),
                     {"orthogonality": norm(pt @ qt), "idempotent": norm(qt @ qt - qt)},
                     dist, None, _ratio(dist, eps))
    return Lifted(qt, rep)


def complete_partition(ps: Sequence[np.ndarray], size: int | None = None, tau: float = 1e-9) -> Lifted:
    """``1 - (p_1 + ... + p_{k-1})`` for pairwise orthogonal projections."""
    ps = [_as_square(p, "p") for p in ps]
    if not ps and size is None:
        raise DomainError("need the matrix size when no projections are given")
    n = ps[0].shape[0] if ps else size
    worst = max((norm(a @ b) for i, a in enumerate(ps) for b in ps[i + 1:]), default=0.0)
    if worst > tau:
        raise LiftingError(f"projections are not orthogonal (|p_i p_j| = {worst:.3g})", residual=worst)
    last = np.eye(n, dtype=complex) - sum(ps, np.zeros((n, n), dtype=complex))
    rep = LiftReport("complete_partition", worst,
                     {"idempotent": norm(last @ last - last)}, 0.0)
    return Lifted(last, rep)


def polar_partial_isometry(v, eps: float, tau: float = TAU) -> Lifted:
    """``w = v f(v* v)`` with ``f = 0`` on the lower cluster and ``l^-1/2`` on the upper."""
    v = _as_square(v, "v")
    defect = norm(v @ adj(v) @ v - v)
    if defect > eps + tau:
        raise LiftingError(f"|v v* v - v| = {defect:.3g} exceeds eps = {eps}", defect=defect, eps=eps)
    h = adj(v) @ v
    h = (h + adj(h)) / 2
    w_, vecs = np.linalg.eigh(h)
    low = np.abs(w_) <= 2 * eps + tau
    high = np.abs(w_ - 1) <= 2 * eps + tau
    if not np.all(low | high) or np.any(low & high):
        bad = w_[~(low ^ high)]
        raise LiftingError(f"spectrum of v*v is not split near 0 and 1 (eigenvalue {bad[0]:.6g})",
                           eigenvalue=float(bad[0]), eps=eps)
    f = np.where(high, 1 / np.sqrt(np.where(high, w_, 1.0)), 0.0)
    w = v @ (vecs * f) @ adj(vecs)
    dist = norm(w - v)
    rep = LiftReport("polar_partial_isometry", defect,
                     {"partial_isometry": norm(w @ adj(w) @ w - w)}, dist, None, _ratio(dist, defect))
    return Lifted(w, rep)


def _inv_sqrt_psd(h: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((h + adj(h)) / 2)
    return (v / np.sqrt(w)) @ adj(v)


def conjugating_unitary(p_target, p_start, warn_at: float = 0.99, tau: float = TAU) -> Lifted:
    """Unitary ``u`` with ``u p_start u* = p_target``, close to 1 when the projections are close.

    ``z = (2 p_target - 1)(2 p_start - 1) + 1`` intertwines the two
    projections and ``u = z (z* z)^-1/2`` is its unitary part.
    """
    a = _as_square(p_target, "p_target")
    b = _as_square(p_start, "p_start")
    gap = norm(a - b)
    if gap >= 1:
        raise LiftingError(f"projections are at distance {gap:.6g} >= 1", distance=gap)
    if gap > warn_at:
        warnings.warn(f"projections at distance {gap:.6g}; conjugating unitary is ill-conditioned",
                      ConditioningWarning, stacklevel=2)
    one = _eye_like(a)
    z = (2 * a - one) @ (2 * b - one) + one
    smin = float(np.linalg.svd(z, compute_uv=False).min()) if z.size else 1.0
    if smin < 1e-12:
        raise LiftingError("z is numerically singular", smallest_singular_value=smin)
    u = z @ _inv_sqrt_psd(adj(z) @ z)
    dist = norm(u - one)
    rep = LiftReport("conjugating_unitary", gap,
                     {"unitary": norm(u @ adj(u) - one), "conjugation": norm(u @ b @ adj(u) - a)},
                     dist, None, _ratio(dist, gap))
    return Lifted(u, rep)


def adjust_partial_isometry(v_raw, source, target_range, eps: float, tau: float = TAU) -> Lifted:
    """Exact partial isometry with source ``source`` and range ``target_range`` near ``v_raw``."""
    v_raw = _as_square(v_raw, "v_raw")
    w, wrep = polar_partial_isometry(v_raw, eps, tau)
    s, r = adj(w) @ w, w @ adj(w)
    u1, _ = conjugating_unitary(s, source)          # u1 source u1* = s
    u2, _ = conjugating_unitary(target_range, r)    # u2 r u2* = target_range
    vt = u2 @ w @ u1
    dist = norm(vt - v_raw)
    rep = LiftReport("adjust_partial_isometry", wrep.input_defect,
                     {"partial_isometry": norm(vt @ adj(vt) @ vt - vt),
                      "source": norm(adj(vt) @ vt - source),
                      "range": norm(vt @ adj(vt) - target_range)},
                     dist, None, _ratio(dist, wrep.input_defect))
    return Lifted(vt, rep)


def lift_orthogonal_sum(vs: Sequence[np.ndarray], v, eps: float, tau: float = TAU) -> Lifted:
    """Orthogonal exact partial isometries near ``vs`` whose sum is exactly ``v``.

    Each ``v_i`` is first replaced by an exact partial isometry whose source
    and range are orthogonal to those of its predecessors.  Unitaries near 1
    then move the sum onto ``v``: ``u1``, ``u2`` match its source and range,
    and ``u3 = v s'* + (1 - vv*)`` fixes the remaining unitary freedom on
    the range.
    """
    vs = [_as_square(x, "v_i") for x in vs]
    v = _as_square(v, "v")
    if not vs:
        raise DomainError("need at least one summand")
    vdef = norm(v @ adj(v) @ v - v)
    if vdef > 1e-8:
        raise LiftingError(f"target v is not a partial isometry ({vdef:.3g})", residual=vdef)
    n = v.shape[0]
    zero = np.zeros((n, n), dtype=complex)
    src_sum, rng_sum = zero.copy(), zero.copy()
    bars = []
    for x in vs:
        w, _ = polar_partial_isometry(x, eps, tau)
        s, r = adj(w) @ w, w @ adj(w)
        s2 = orthogonalize(src_sum, s, eps, tau).value if bars else s
        r2 = orthogonalize(rng_sum, r, eps, tau).value if bars else r
        bar = adjust_partial_isometry(x, s2, r2, eps, tau).value
        bars.append(bar)
        src_sum = src_sum + adj(bar) @ bar
        rng_sum = rng_sum + bar @ adj(bar)
    s = sum(bars, zero)
    pv, qv = adj(v) @ v, v @ adj(v)
    u1, _ = conjugating_unitary(src_sum, pv)        # u1 pv u1* = src_sum
    u2, _ = conjugating_unitary(qv, rng_sum)        # u2 rng_sum u2* = qv
    sp = u2 @ s @ u1
    u3 = v @ adj(sp) + (np.eye(n) - qv)
    out = [u3 @ u2 @ b @ u1 for b in bars]
    total = sum(out, zero)
    dists = [norm(o - x) for o, x in zip(out, vs)]
    orth = max((max(norm(adj(a) @ b), norm(a @ adj(b))) for i, a in enumerate(out) for b in out[i + 1:]),
               default=0.0)
    rep = LiftReport("lift_orthogonal_sum", max(eps, norm(sum(vs, zero) - v)),
                     {"sum": norm(total - v), "orthogonality": orth,
                      "partial_isometry": max(norm(o @ adj(o) @ o - o) for o in out),
                      "u3_unitary": norm(u3 @ adj(u3) - np.eye(n))},
                     max(dists), None, _ratio(max(dists), eps))
    rep.residuals["per_summand_distance"] = dists
    return Lifted(out, rep)


# --------------------------------------------------------------------------- matrix units


@dataclass(frozen=True)
class CanonicalEmbedding:
    """Unital-or-not canonical inclusion ``F_1 = sum M_l(m) -> F_2 = sum M_k(n)``.

    ``multiplicity[n][m]`` copies of block ``m`` of ``F_1`` sit consecutively
    on the diagonal of block ``n`` of ``F_2``, in order of ``m``.
    """

    source_sizes: tuple
    target_sizes: tuple
    multiplicity: tuple

    def __post_init__(self):
        for n, k in enumerate(self.target_sizes):
            used = sum(self.multiplicity[n][m] * l for m, l in enumerate(self.source_sizes))
            if used > k:
                raise DomainError(f"block {n} of size {k} cannot hold {used} diagonal positions")

    def copies(self) -> list[tuple[int, int, int]]:
        """``(n, m, offset)`` for every copy of a source block inside a target block."""
        out = []
        for n in range(len(self.target_sizes)):
            off = 0
            for m, l in enumerate(self.source_sizes):
                for _ in range(self.multiplicity[n][m]):
                    out.append((n, m, off))
                    off += l
        return out

    def image(self, units: Sequence[np.ndarray], m: int, a: int, b: int) -> np.ndarray:
        """Image of the source unit ``f^(m)_ab`` given target units ``units[n][i, j]``."""
        size = units[0].shape[-1]
        out = np.zeros((size, size), dtype=complex)
        for n, mm, off in self.copies():
            if mm == m:
                out = out + units[n][off + a, off + b]
        return out


@dataclass
class MatrixUnitFrame:
    """Images of the matrix units of ``sum M_k(n)``: ``units[n][i, j]`` is an ``N x N`` matrix."""

    sizes: tuple
    units: list

    def __post_init__(self):
        self.units = [np.asarray(u, dtype=complex) for u in self.units]
        for k, u in zip(self.sizes, self.units):
            if u.shape[:2] != (k, k) or u.ndim != 4 or u.shape[2] != u.shape[3]:
                raise DomainError("matrix unit array has the wrong shape")

    @property
    def order(self) -> int:
        return self.units[0].shape[-1]

    def relation_defect(self) -> float:
        """Largest violation of ``e_ij e_kl = [j = k] e_il``, ``e_ij* = e_ji`` and block orthogonality."""
        worst = 0.0
        flat = [(n, i, j, u[i, j]) for n, u in enumerate(self.units)
                for i in range(u.shape[0]) for j in range(u.shape[1])]
        for n, i, j, a in flat:
            worst = max(worst, norm(adj(a) - self.units[n][j, i]))
            for n2, k, l, b in flat:
                want = self.units[n][i, l] if (n == n2 and j == k) else 0
                worst = max(worst, norm(a @ b - want))
        return worst


def conditional_fd_lift(frame: MatrixUnitFrame, embedding: CanonicalEmbedding,
                        fixed: Sequence[np.ndarray], eps: float, tol: float = 1e-9,
                        tau: float = TAU) -> Lifted:
    """Exact matrix units near ``frame`` whose canonical image of ``F_1`` equals ``fixed``.

    ``fixed[m][a, b]`` is the exact image of ``f^(m)_ab``.  For each source
    block the ``(0, 0)`` unit is split into orthogonal projections near the
    frame's corresponding diagonal units (sum preserved exactly), then moved
    along the fixed off-diagonal units.  Diagonal positions outside every
    copy are orthogonalized against everything placed so far.  Each copy and
    each uncovered position is linked to position 0 of its block by an
    adjusted partial isometry, and ``e_ij = L_i L_j*``.
    """
    if tuple(frame.sizes) != tuple(embedding.target_sizes):
        raise DomainError("frame sizes do not match the embedding")
    fixed = [np.asarray(f, dtype=complex) for f in fixed]
    N = frame.order
    zero = np.zeros((N, N), dtype=complex)
    copies = embedding.copies()
    diag: dict[tuple[int, int], np.ndarray] = {}
    where: dict[tuple[int, int], tuple[int, int, int]] = {}   # (n, i) -> (m, a, copy offset)
    for n, m, off in copies:
        for a in range(embedding.source_sizes[m]):
            where[(n, off + a)] = (m, a, off)

    fixed_defect = max(norm(f[a, b] @ f[c, d] - (f[a, d] if b == c else 0))
                       for f in fixed for a in range(f.shape[0]) for b in range(f.shape[0])
                       for c in range(f.shape[0]) for d in range(f.shape[0]))
    if fixed_defect > tol:
        raise LiftingError(f"fixed images are not exact matrix units ({fixed_defect:.3g})",
                           residual=fixed_defect)

    # split each source (0, 0) unit across its copies
    for m, l in enumerate(embedding.source_sizes):
        mine = [(n, off) for n, mm, off in copies if mm == m]
        if not mine:
            continue
        pieces = lift_orthogonal_sum([frame.units[n][off, off] for n, off in mine],
                                     fixed[m][0, 0], eps, tau).value
        for (n, off), piece in zip(mine, pieces):
            q = adj(piece) @ piece
            for a in range(l):
                diag[(n, off + a)] = fixed[m][a, 0] @ q @ fixed[m][0, a]

    # uncovered diagonal positions
    placed = sum(diag.values(), zero)
    for n, k in enumerate(frame.sizes):
        for i in range(k):
            if (n, i) in diag:
                continue
            e = frame.units[n][i, i]
            q = orthogonalize(placed, (e + adj(e)) / 2, eps, tau).value
            diag[(n, i)] = q
            placed = placed + q

    units = []
    for n, k in enumerate(frame.sizes):
        links: list[np.ndarray] = []
        roots: dict[int, np.ndarray] = {}
        q0 = diag[(n, 0)]
        for i in range(k):
            if (n, i) in where:
                m, a, off = where[(n, i)]
                root = off
            else:
                m, a, root = None, 0, i
            if root not in roots:
                roots[root] = q0 if root == 0 else adjust_partial_isometry(
                    frame.units[n][root, 0], q0, diag[(n, root)], eps, tau).value
            link = roots[root] if m is None else fixed[m][a, 0] @ roots[root]
            links.append(link)
        u = np.empty((k, k, N, N), dtype=complex)
        for i in range(k):
            for j in range(k):
                u[i, j] = links[i] @ adj(links[j])
        units.append(u)
    out = MatrixUnitFrame(tuple(frame.sizes), units)

    rel = out.relation_defect()
    agree = max((norm(embedding.image(out.units, m, a, b) - fixed[m][a, b])
                 for m, l in enumerate(embedding.source_sizes) for a in range(l) for b in range(l)),
                default=0.0)
    if rel > tol or agree > tol:
        raise LiftingError(f"lifted units fail verification (relations {rel:.3g}, agreement {agree:.3g})",
                           relations=rel, agreement=agree)
    dist = max(norm(out.units[n][i, j] - frame.units[n][i, j])
               for n, k in enumerate(frame.sizes) for i in range(k) for j in range(k))
    rep = LiftReport("conditional_fd_lift", frame.relation_defect(),
                     {"relations": rel, "agreement": agree}, dist, None, _ratio(dist, eps))
    return Lifted(out, rep)
