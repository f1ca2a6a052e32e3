"""Seeded random inputs for the lifting routines."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lifting import CanonicalEmbedding, MatrixUnitFrame, adj, norm


def instance_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def hermitian_noise(rng: np.random.Generator, n: int, size: float) -> np.ndarray:
    """Hermitian matrix of operator norm exactly ``size``."""
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = (x + adj(x)) / 2
    return h * (size / norm(h))


def noise(rng: np.random.Generator, n: int, size: float) -> np.ndarray:
    """General complex matrix of operator norm exactly ``size``."""
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return x * (size / norm(x))


@dataclass
class ProjectionInstance:
    exact: np.ndarray
    noisy: np.ndarray
    rank: int
    eps: float


def noisy_projection(rng: np.random.Generator, n: int, noise_size: float) -> ProjectionInstance:
    r = int(rng.integers(0, n + 1))
    u = random_unitary(rng, n)
    p = u[:, :r] @ adj(u[:, :r])
    q = p + hermitian_noise(rng, n, noise_size)
    return ProjectionInstance(p, q, r, norm(q @ q - q))


@dataclass
class SumInstance:
    target: np.ndarray          # exact partial isometry v
    exact: list                 # exact orthogonal summands
    noisy: list
    eps: float


def noisy_orthogonal_sum(rng: np.random.Generator, n: int, k: int, noise_size: float) -> SumInstance:
    """``k`` orthogonal partial isometries of random ranks with summed target, plus noise."""
    u, w = random_unitary(rng, n), random_unitary(rng, n)
    cuts = np.sort(rng.choice(np.arange(1, n + 1), size=k, replace=True))
    starts = np.concatenate([[0], cuts[:-1]])
    exact = [u[:, a:b] @ adj(w[:, a:b]) for a, b in zip(starts, cuts)]
    noisy = [e + noise(rng, n, noise_size) for e in exact]
    return SumInstance(sum(exact), exact, noisy, sum_defect(noisy, sum(exact)))


def sum_defect(vs, v) -> float:
    """Largest of the partial-isometry defects, the pairwise overlaps and the sum error."""
    out = max(norm(x @ adj(x) @ x - x) for x in vs)
    for i, a in enumerate(vs):
        for b in vs[i + 1:]:
            out = max(out, norm(adj(a) @ b), norm(a @ adj(b)))
    return max(out, norm(sum(vs) - v))


def exact_units(basis: np.ndarray, sizes, multiplicities) -> list:
    """Matrix units of ``sum M_k(n)`` acting with the given multiplicities on columns of ``basis``."""
    units, col = [], 0
    for k, mult in zip(sizes, multiplicities):
        u = np.zeros((k, k) + (basis.shape[0],) * 2, dtype=complex)
        for r in range(mult):
            vecs = basis[:, col:col + k]
            col += k
            for i in range(k):
                for j in range(k):
                    u[i, j] += np.outer(vecs[:, i], vecs[:, j].conj())
        units.append(u)
    return units


@dataclass
class FrameInstance:
    frame: MatrixUnitFrame
    exact: MatrixUnitFrame
    embedding: CanonicalEmbedding
    fixed: list


def noisy_frame(rng: np.random.Generator, embedding: CanonicalEmbedding, multiplicities,
                n: int, noise_size: float) -> FrameInstance:
    """Exact representation of ``F_2``, its canonical ``F_1`` images, and a noisy copy of the units."""
    sizes = embedding.target_sizes
    basis = random_unitary(rng, n)
    units = exact_units(basis, sizes, multiplicities)
    exact = MatrixUnitFrame(tuple(sizes), units)
    fixed = []
    for m, l in enumerate(embedding.source_sizes):
        f = np.zeros((l, l, n, n), dtype=complex)
        for a in range(l):
            for b in range(l):
                f[a, b] = embedding.image(units, m, a, b)
        fixed.append(f)
    noisy = []
    for k, u in zip(sizes, units):
        v = u.copy()
        for i in range(k):
            for j in range(i, k):
                e = noise(rng, n, noise_size)
                v[i, j] = u[i, j] + e
                if i != j:
                    v[j, i] = u[j, i] + adj(e)
                else:
                    v[i, i] = u[i, i] + (e + adj(e)) / 2
        noisy.append(v)
    return FrameInstance(MatrixUnitFrame(tuple(sizes), noisy), exact, embedding, fixed)
