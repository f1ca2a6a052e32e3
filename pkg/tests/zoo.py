"""Groups and honest actions shared by the tests."""
import itertools

import numpy as np

from almostaction.actions import CylinderAction, RotationAction
from almostaction.groups import (Amalgam, FiniteGroupTable, Hnn, SubgroupEmbedding, free_product,
                                 leaf, trivial_hnn)


def z2():
    spec = leaf("Z/2", "a")
    return spec, CylinderAction.from_images(spec, 2, {"a:1": [1, 0, 3, 2]})


def z3():
    spec = leaf("Z/3", "a")
    return spec, CylinderAction.from_images(spec, 2, {"a:1": [1, 2, 0, 3]})


def s3():
    """Natural action of Sym(3) on the first three depth-2 prefixes."""
    spec = leaf("Sym(3)", "s")
    perms = list(itertools.permutations(range(3)))
    images = {f"s:{i}": list(p) + [3] for i, p in enumerate(perms) if i}
    return spec, CylinderAction.from_images(spec, 2, images)


def dihedral():
    spec = free_product(leaf("Z/2", "a"), leaf("Z/2", "b"))
    return spec, CylinderAction.from_images(spec, 2, {"a:1": [1, 0, 3, 2], "b:1": [0, 2, 1, 3]})


def z2_z3():
    spec = free_product(leaf("Z/2", "a"), leaf("Z/3", "b"))
    return spec, CylinderAction.from_images(spec, 2, {"a:1": [1, 0, 2, 3], "b:1": [0, 2, 3, 1]})


def z4_amalgam():
    """``Z/4 *_{Z/2} Z/4`` with the squares identified."""
    k = FiniteGroupTable.cyclic(2)
    spec = Amalgam(leaf("Z/4", "a"), leaf("Z/4", "b"),
                   SubgroupEmbedding(k, "a", (0, 2)), SubgroupEmbedding(k, "b", (0, 2)))
    return spec, CylinderAction.from_images(spec, 3, {"a:1": [1, 2, 3, 0, 5, 6, 7, 4],
                                                      "b:1": [5, 4, 7, 6, 3, 2, 1, 0]})


def integers():
    spec = trivial_hnn(leaf("Z/1", "o"), "t")
    return spec, CylinderAction.from_images(spec, 2, {"t": [1, 2, 3, 0]})


def free2():
    spec = trivial_hnn(trivial_hnn(leaf("Z/1", "o"), "s"), "t")
    return spec, CylinderAction.from_images(spec, 2, {"s": [1, 2, 3, 0], "t": [1, 0, 3, 2]})


def tower():
    """HNN extension of the infinite dihedral group conjugating ``a`` to ``b``."""
    base, _ = dihedral()
    k = FiniteGroupTable.cyclic(2)
    spec = Hnn(base, SubgroupEmbedding(k, "a", (0, 1)), SubgroupEmbedding(k, "b", (0, 1)), (0, 1), "t")
    act = CylinderAction.from_images(spec, 2, {"a:1": [1, 0, 3, 2], "b:1": [2, 3, 0, 1], "t": [0, 2, 1, 3]})
    return spec, act


ZOO = {"Z/2": z2, "Z/3": z3, "Z/2*Z/2": dihedral, "Z/2*Z/3": z2_z3, "Z/4*Z/4": z4_amalgam,
       "Z": integers, "F2": free2, "tower": tower}


def half_rotation():
    spec = leaf("Z/2", "a")
    return spec, RotationAction.from_images(spec, {"a:1": "1/2"})


def rotation(n: int):
    spec = leaf(f"Z/{n}", "r")
    return spec, RotationAction.from_images(spec, {"r:1": f"1/{n}"})


def apply_word(perms, word):
    """Evaluate a word on sample permutations, right to left, without library helpers."""
    size = len(next(iter(perms.values())))
    out = np.arange(size)
    for s in reversed(word):
        if s.stable and s.value == -1:
            p = perms[type(s)(s.name, 1, True)]
            out = np.argsort(p)[out]
        elif s.stable:
            out = perms[s][out]
        else:
            out = perms[s][out] if s in perms else out
    return out


def structural_violations(spec, perms):
    """Count failed defining identities, read straight off the structure tree."""
    from almostaction.groups import Amalgam, Hnn, Leaf, Symbol

    size = len(next(iter(perms.values())))
    ident = np.arange(size)

    def el(label, e):
        t = spec.leaves()[label].table
        return ident if e == t.identity else perms[Symbol(label, e)]

    bad = 0
    for label, lf in spec.leaves().items():
        t = lf.table
        for x in range(t.order):
            for y in range(t.order):
                bad += not np.array_equal(el(label, x)[el(label, y)], el(label, t.product(x, y)))
    stack = [spec]
    while stack:
        node = stack.pop()
        if isinstance(node, Amalgam):
            for k in range(node.delta_left.source.order):
                bad += not np.array_equal(el(node.delta_left.target, node.delta_left.image[k]),
                                          el(node.delta_right.target, node.delta_right.image[k]))
            stack.append(node.left)
        elif isinstance(node, Hnn):
            t = perms[Symbol(node.stable, 1, True)]
            tinv = np.argsort(t)
            for f, g in node.phi().items():
                lhs = t[el(node.phi_source.target, f)[tinv]]
                bad += not np.array_equal(lhs, el(node.phi_target.target, g))
            stack.append(node.base)
        elif not isinstance(node, Leaf):
            raise TypeError(node)
    return bad
