"""Virtually free groups given by structure trees.

A :class:`GroupSpec` is a tree whose leaves are finite groups with explicit
multiplication tables, whose internal nodes are amalgamated free products
over a finite subgroup (:class:`Amalgam`) or HNN extensions over a finite
subgroup (:class:`Hnn`).  Words are tuples of :class:`Symbol`; a leaf symbol
names one element of one leaf, a stable symbol is ``t`` or ``t^-1``.

Word equality is not decided abstractly.  :func:`cayley_ball` identifies
elements through an oracle, usually the evaluation of words in an honest
action (:func:`action_oracle`) or, for free products with trivial edge
groups, free reduction (:func:`reduced_word_oracle`).
"""
from __future__ import annotations

import itertools
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterator, Mapping, Sequence, Union

import numpy as np

from .errors import ConfigError, ForeignSymbolError, GroupSpecError, OracleInconsistency

# --------------------------------------------------------------------------- finite groups


class FiniteGroupTable:
    """A finite group given by its full multiplication table.

    ``mult[i, j]`` is the index of ``elements[i] * elements[j]``.  The group
    axioms are checked on construction.
    """

    def __init__(self, elements: Sequence[str], mult, name: str = ""):
        self.elements = tuple(str(e) for e in elements)
        n = len(self.elements)
        table = np.array(mult, dtype=np.int64)
        if n == 0:
            raise GroupSpecError("a group needs at least one element")
        if len(set(self.elements)) != n:
            raise GroupSpecError(f"duplicate element names in {name or 'table'}")
        if table.shape != (n, n):
            raise GroupSpecError(f"table shape {table.shape} does not match {n} elements")
        if table.min() < 0 or table.max() >= n:
            raise GroupSpecError("table entries out of range")
        # (ab)c == a(bc) for all triples
        if not self._assoc(table):
            raise GroupSpecError(f"table of {name or 'group'} is not associative")
        ident = [i for i in range(n) if np.array_equal(table[i], np.arange(n))
                 and np.array_equal(table[:, i], np.arange(n))]
        if not ident:
            raise GroupSpecError(f"{name or 'table'} has no identity")
        self.identity = ident[0]
        inv = np.full(n, -1, dtype=np.int64)
        for i in range(n):
            hits = np.flatnonzero((table[i] == self.identity) & (table[:, i] == self.identity))
            if hits.size == 0:
                raise GroupSpecError(f"element {self.elements[i]} has no inverse")
            inv[i] = hits[0]
        table.setflags(write=False)
        inv.setflags(write=False)
        self.mult = table
        self.inv = inv
        self.name = name

    @staticmethod
    def _assoc(t: np.ndarray) -> bool:
        n = t.shape[0]
        left = t[t[:, :, None], np.arange(n)[None, None, :]]   # (ab)c
        right = t[np.arange(n)[:, None, None], t[None, :, :]]  # a(bc)
        return bool(np.array_equal(left, right))

    @property
    def order(self) -> int:
        return len(self.elements)

    def product(self, a: int, b: int) -> int:
        return int(self.mult[a, b])

    def index(self, name: str) -> int:
        try:
            return self.elements.index(name)
        except ValueError:
            raise GroupSpecError(f"no element named {name!r} in {self.name or 'group'}") from None

    def __eq__(self, other):
        return (isinstance(other, FiniteGroupTable) and self.elements == other.elements
                and np.array_equal(self.mult, other.mult))

    def __hash__(self):
        return hash((self.elements, self.mult.tobytes()))

    def __repr__(self):
        return f"FiniteGroupTable({self.name or self.order})"

    @classmethod
    def cyclic(cls, n: int) -> "FiniteGroupTable":
        if n < 1:
            raise GroupSpecError("cyclic group order must be positive")
        idx = np.arange(n)
        return cls([str(i) for i in range(n)], (idx[:, None] + idx[None, :]) % n, name=f"Z/{n}")

    @classmethod
    def symmetric(cls, k: int) -> "FiniteGroupTable":
        """``Sym(k)``; element ``i`` is the i-th permutation in lexicographic order.

        Products compose right to left: ``(p*q)(x) = p(q(x))``.
        """
        if not 1 <= k <= 5:
            raise GroupSpecError("Sym(k) builtin supports 1 <= k <= 5")
        perms = list(itertools.permutations(range(k)))
        pos = {p: i for i, p in enumerate(perms)}
        table = [[pos[tuple(p[q[x]] for x in range(k))] for q in perms] for p in perms]
        return cls(["".join(map(str, p)) for p in perms], table, name=f"Sym({k})")

    @classmethod
    def builtin(cls, name: str) -> "FiniteGroupTable":
        m = re.fullmatch(r"\s*Z/(\d+)\s*", name)
        if m:
            return cls.cyclic(int(m.group(1)))
        m = re.fullmatch(r"\s*Sym\((\d+)\)\s*", name)
        if m:
            return cls.symmetric(int(m.group(1)))
        raise GroupSpecError(f"unknown builtin group {name!r}")


TRIVIAL = FiniteGroupTable.cyclic(1)

# --------------------------------------------------------------------------- symbols and words


@dataclass(frozen=True, order=True)
class Symbol:
    """One letter of a word.

    For a leaf symbol ``value`` is the element index in that leaf's table;
    for a stable letter it is ``+1`` or ``-1``.
    """

    name: str
    value: int
    stable: bool = False

    def __str__(self):
        if self.stable:
            return self.name if self.value == 1 else f"{self.name}^-1"
        return f"{self.name}:{self.value}"


Word = tuple  # tuple[Symbol, ...]
IDENTITY: Word = ()


def stable(name: str, sign: int = 1) -> Symbol:
    return Symbol(name, sign, True)


def word_str(w: Word) -> str:
    return " ".join(str(s) for s in w) if w else "e"


def parse_word(text: str) -> Word:
    """Parse ``"a:1 t b:2 t^-1"``; ``"e"`` or ``""`` is the empty word."""
    out = []
    for tok in text.replace("*", " ").split():
        if tok == "e":
            continue
        m = re.fullmatch(r"([A-Za-z_]\w*):(\d+)", tok)
        if m:
            out.append(Symbol(m.group(1), int(m.group(2))))
            continue
        m = re.fullmatch(r"([A-Za-z_]\w*)(\^-1)?", tok)
        if m:
            out.append(stable(m.group(1), -1 if m.group(2) else 1))
            continue
        raise GroupSpecError(f"cannot parse word token {tok!r}")
    return tuple(out)


# --------------------------------------------------------------------------- structure tree


@dataclass(frozen=True)
class SubgroupEmbedding:
    """Injective homomorphism of ``source`` into the leaf labelled ``target``."""

    source: FiniteGroupTable
    target: str
    image: tuple

    def __post_init__(self):
        object.__setattr__(self, "image", tuple(int(i) for i in self.image))
        if len(self.image) != self.source.order:
            raise GroupSpecError("embedding image must list one element per source element")
        if len(set(self.image)) != len(self.image):
            raise GroupSpecError(f"embedding into {self.target!r} is not injective")

    def check_against(self, leaf: "Leaf") -> None:
        t = leaf.table
        if any(not 0 <= i < t.order for i in self.image):
            raise GroupSpecError(f"embedding image out of range for leaf {leaf.label!r}")
        s = self.source
        for a in range(s.order):
            for b in range(s.order):
                if self.image[s.product(a, b)] != t.product(self.image[a], self.image[b]):
                    raise GroupSpecError(f"embedding into {leaf.label!r} is not a homomorphism")

    def preimage(self) -> dict[int, int]:
        return {img: src for src, img in enumerate(self.image)}


class GroupSpec:
    """Base class of structure-tree nodes."""

    def leaves(self) -> dict[str, "Leaf"]:
        raise NotImplementedError

    def stable_letters(self) -> list[str]:
        raise NotImplementedError

    def _generators(self) -> list[Symbol]:
        raise NotImplementedError

    def _relations(self) -> list[tuple[Word, Word]]:
        raise NotImplementedError

    def _check_labels(self) -> None:
        names = [leaf.label for leaf in self._leaf_list()] + self.stable_letters()
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise GroupSpecError(f"labels must be globally unique, repeated: {sorted(dup)}")

    def _leaf_list(self) -> list["Leaf"]:
        raise NotImplementedError

    # ---- words

    def generators(self) -> list[Word]:
        """One single-letter word per non-identity leaf element and per stable letter."""
        return [(s,) for s in self._generators()]

    def generator_symbols(self) -> list[Symbol]:
        return self._generators()

    def letters(self) -> list[Symbol]:
        """Generators closed under inversion, in BFS order (``t`` then ``t^-1``)."""
        out = []
        for s in self._generators():
            out.append(s)
            if s.stable:
                out.append(stable(s.name, -1))
        return out

    def relations(self) -> "RelationSet":
        return RelationSet(tuple(self._relations()))

    def check_symbol(self, s: Symbol) -> None:
        if s.stable:
            if s.name not in self.stable_letters() or s.value not in (1, -1):
                raise ForeignSymbolError(f"unknown stable letter {s}")
            return
        leaf = self.leaves().get(s.name)
        if leaf is None or not 0 <= s.value < leaf.table.order:
            raise ForeignSymbolError(f"unknown symbol {s}")

    def inverse_symbol(self, s: Symbol) -> Symbol:
        self.check_symbol(s)
        if s.stable:
            return stable(s.name, -s.value)
        return Symbol(s.name, int(self.leaves()[s.name].table.inv[s.value]))

    def reduce(self, w: Sequence[Symbol]) -> Word:
        """Free reduction plus contraction of adjacent symbols from one leaf."""
        leaves = self.leaves()
        out: list[Symbol] = []
        for s in w:
            self.check_symbol(s)
            if not s.stable and s.value == leaves[s.name].table.identity:
                continue
            if out:
                top = out[-1]
                if s.stable and top.stable and top.name == s.name and top.value == -s.value:
                    out.pop()
                    continue
                if not s.stable and not top.stable and top.name == s.name:
                    t = leaves[s.name].table
                    p = t.product(top.value, s.value)
                    out.pop()
                    if p != t.identity:
                        out.append(Symbol(s.name, p))
                    continue
            out.append(s)
        return tuple(out)

    def multiply(self, u: Sequence[Symbol], v: Sequence[Symbol]) -> Word:
        return self.reduce(tuple(u) + tuple(v))

    def invert(self, u: Sequence[Symbol]) -> Word:
        return tuple(self.inverse_symbol(s) for s in reversed(tuple(u)))

    def has_trivial_edges(self) -> bool:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Leaf(GroupSpec):
    table: FiniteGroupTable
    label: str

    def __post_init__(self):
        if not re.fullmatch(r"[A-Za-z_]\w*", self.label):
            raise GroupSpecError(f"invalid leaf label {self.label!r}")

    def leaves(self):
        return {self.label: self}

    def _leaf_list(self):
        return [self]

    def stable_letters(self):
        return []

    def _generators(self):
        return [Symbol(self.label, i) for i in range(self.table.order) if i != self.table.identity]

    def _relations(self):
        t, e = self.table, self.table.identity
        rels = []
        for a in range(t.order):
            for b in range(t.order):
                if a == e or b == e:
                    continue
                p = t.product(a, b)
                rhs = () if p == e else (Symbol(self.label, p),)
                rels.append(((Symbol(self.label, a), Symbol(self.label, b)), rhs))
        return rels

    def has_trivial_edges(self):
        return True


@dataclass(frozen=True, eq=False)
class Amalgam(GroupSpec):
    """``left *_Delta right`` with ``Delta`` embedded in a leaf on each side."""

    left: GroupSpec
    right: Leaf
    delta_left: SubgroupEmbedding
    delta_right: SubgroupEmbedding

    def __post_init__(self):
        if self.delta_left.source != self.delta_right.source:
            raise GroupSpecError("amalgam embeddings must share their source group")
        left_leaves = self.left.leaves()
        if self.delta_left.target not in left_leaves:
            raise GroupSpecError(f"left embedding targets unknown leaf {self.delta_left.target!r}")
        if self.delta_right.target != self.right.label:
            raise GroupSpecError("right embedding must target the right factor")
        self.delta_left.check_against(left_leaves[self.delta_left.target])
        self.delta_right.check_against(self.right)
        self._check_labels()

    @property
    def delta(self) -> FiniteGroupTable:
        return self.delta_left.source

    def leaves(self):
        out = dict(self.left.leaves())
        out[self.right.label] = self.right
        return out

    def _leaf_list(self):
        return self.left._leaf_list() + [self.right]

    def stable_letters(self):
        return self.left.stable_letters()

    def _generators(self):
        return self.left._generators() + self.right._generators()

    def _relations(self):
        rels = self.left._relations() + self.right._relations()
        src = self.delta
        for d in range(src.order):
            if d == src.identity:
                continue
            rels.append(((Symbol(self.delta_left.target, self.delta_left.image[d]),),
                         (Symbol(self.right.label, self.delta_right.image[d]),)))
        return rels

    def has_trivial_edges(self):
        return self.delta.order == 1 and self.left.has_trivial_edges()


@dataclass(frozen=True, eq=False)
class Hnn(GroupSpec):
    """HNN extension of ``base`` with ``t f t^-1 = phi(f)``.

    ``phi_source`` embeds an abstract group ``K`` as ``F``, ``phi_target``
    embeds ``K'`` as ``G``, and ``iso[k]`` is the element of ``K'``
    corresponding to ``k``; then ``phi(phi_source(k)) = phi_target(iso[k])``.
    """

    base: GroupSpec
    phi_source: SubgroupEmbedding
    phi_target: SubgroupEmbedding
    iso: tuple
    stable: str

    def __post_init__(self):
        object.__setattr__(self, "iso", tuple(int(i) for i in self.iso))
        if not re.fullmatch(r"[A-Za-z_]\w*", self.stable):
            raise GroupSpecError(f"invalid stable letter {self.stable!r}")
        leaves = self.base.leaves()
        for emb in (self.phi_source, self.phi_target):
            if emb.target not in leaves:
                raise GroupSpecError(f"HNN embedding targets unknown leaf {emb.target!r}")
            emb.check_against(leaves[emb.target])
        k, k2 = self.phi_source.source, self.phi_target.source
        if k.order != k2.order or sorted(self.iso) != list(range(k2.order)):
            raise GroupSpecError("iso must be a bijection between the two subgroups")
        for a in range(k.order):
            for b in range(k.order):
                if self.iso[k.product(a, b)] != k2.product(self.iso[a], self.iso[b]):
                    raise GroupSpecError("iso is not a homomorphism")
        self._check_labels()

    def phi(self) -> dict[int, int]:
        """``phi`` on leaf element indices: ``F`` (in source leaf) to ``G``."""
        return {self.phi_source.image[k]: self.phi_target.image[self.iso[k]]
                for k in range(self.phi_source.source.order)}

    def leaves(self):
        return self.base.leaves()

    def _leaf_list(self):
        return self.base._leaf_list()

    def stable_letters(self):
        return self.base.stable_letters() + [self.stable]

    def _generators(self):
        return self.base._generators() + [stable(self.stable)]

    def _relations(self):
        rels = self.base._relations()
        e_src = self.phi_source.source.identity
        t, tinv = stable(self.stable), stable(self.stable, -1)
        fl, gl = self.phi_source.target, self.phi_target.target
        for k in range(self.phi_source.source.order):
            if k == e_src:
                continue
            f = Symbol(fl, self.phi_source.image[k])
            g = Symbol(gl, self.phi_target.image[self.iso[k]])
            rels.append(((t, f, tinv), (g,)))
        return rels

    def has_trivial_edges(self):
        return self.phi_source.source.order == 1 and self.base.has_trivial_edges()


@dataclass(frozen=True)
class RelationSet:
    pairs: tuple

    def __iter__(self) -> Iterator[tuple[Word, Word]]:
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)


# --------------------------------------------------------------------------- convenience builders


def leaf(group: str | FiniteGroupTable, label: str) -> Leaf:
    table = FiniteGroupTable.builtin(group) if isinstance(group, str) else group
    return Leaf(table, label)


def free_product(left: GroupSpec, right: Leaf) -> Amalgam:
    """Amalgam over the trivial group."""
    lt = next(iter(left.leaves().values()))
    return Amalgam(left, right,
                   SubgroupEmbedding(TRIVIAL, lt.label, (lt.table.identity,)),
                   SubgroupEmbedding(TRIVIAL, right.label, (right.table.identity,)))


def trivial_hnn(base: GroupSpec, letter: str) -> Hnn:
    """HNN extension over the trivial subgroup (free product with ``Z``)."""
    lt = next(iter(base.leaves().values()))
    emb = SubgroupEmbedding(TRIVIAL, lt.label, (lt.table.identity,))
    return Hnn(base, emb, emb, (0,), letter)


# --------------------------------------------------------------------------- Cayley balls

Oracle = Callable[[Word], Hashable]


@dataclass
class CayleyBall:
    """BFS ball in the Cayley graph with its BFS spanning tree.

    ``words[k]`` is the tree geodesic ``f_m ... f_1`` of the vertex with key
    ``k``; extending by a letter multiplies on the left.
    """

    spec: GroupSpec
    radius: int
    order: list                       # keys in BFS order
    words: dict                       # key -> Word
    dist: dict                        # key -> int
    parent: dict                      # key -> (parent key, letter) ; root absent
    edges: list = field(default_factory=list)  # (key, letter, key) for all edges inside the ball
    oracle: Oracle | None = None

    def __len__(self):
        return len(self.order)

    def key(self, w: Word) -> Hashable:
        return self.oracle(tuple(w))

    def tree_word(self, w: Word) -> Word:
        return self.words[self.key(w)]


def cayley_ball(spec: GroupSpec, oracle: Oracle, radius: int) -> CayleyBall:
    if radius < 1:
        raise GroupSpecError("radius must be at least 1")
    letters = spec.letters()
    root = oracle(())
    words = {root: ()}
    dist = {root: 0}
    parent: dict = {}
    order = [root]
    edges = []
    queue = deque([root])
    while queue:
        k = queue.popleft()
        w = words[k]
        for f in letters:
            nw = (f,) + w
            nk = oracle(nw)
            back = oracle((spec.inverse_symbol(f),) + nw)
            if back != k:
                raise OracleInconsistency(
                    f"oracle disagrees on {word_str(w)} and its image under {f}, {f}^-1",
                    word=word_str(w), letter=str(f))
            if nk not in words:
                if dist[k] == radius:
                    continue
                words[nk] = nw
                dist[nk] = dist[k] + 1
                parent[nk] = (k, f)
                order.append(nk)
                queue.append(nk)
            edges.append((k, f, nk))
    return CayleyBall(spec, radius, order, words, dist, parent, edges, oracle)


def reduced_word_oracle(spec: GroupSpec) -> Oracle:
    """Free reduction as an equality test.

    Reduced words are normal forms only when every amalgamated and HNN
    subgroup is trivial, so other specs are rejected.
    """
    if not spec.has_trivial_edges():
        raise GroupSpecError("reduced-word oracle needs trivial amalgamated/HNN subgroups")
    return spec.reduce


# --------------------------------------------------------------------------- config documents


def table_to_config(t: FiniteGroupTable):
    if t.name:
        try:
            if FiniteGroupTable.builtin(t.name) == t:
                return t.name
        except GroupSpecError:
            pass
    return {"name": t.name, "elements": list(t.elements), "table": t.mult.tolist()}


def table_from_config(doc, path: str) -> FiniteGroupTable:
    try:
        if isinstance(doc, str):
            return FiniteGroupTable.builtin(doc)
        if isinstance(doc, Mapping):
            return FiniteGroupTable(doc["elements"], doc["table"], name=doc.get("name", ""))
    except KeyError as exc:
        raise ConfigError(path, f"missing key {exc.args[0]!r}") from None
    except GroupSpecError as exc:
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(path, "expected a builtin name or {elements, table}")


def _embedding_to_config(e: SubgroupEmbedding) -> dict:
    return {"group": table_to_config(e.source), "leaf": e.target, "image": list(e.image)}


def spec_to_config(spec: GroupSpec) -> dict:
    """Lossless config document for ``spec`` (inverse of :func:`spec_from_config`)."""
    if isinstance(spec, Leaf):
        return {"leaf": table_to_config(spec.table), "label": spec.label}
    if isinstance(spec, Amalgam):
        return {"amalgam": {
            "left": spec_to_config(spec.left),
            "right": spec_to_config(spec.right),
            "delta": {"group": table_to_config(spec.delta),
                      "left": {"leaf": spec.delta_left.target, "image": list(spec.delta_left.image)},
                      "right": {"leaf": spec.delta_right.target,
                                "image": list(spec.delta_right.image)}},
        }}
    if isinstance(spec, Hnn):
        return {"hnn": {
            "base": spec_to_config(spec.base),
            "stable": spec.stable,
            "source": _embedding_to_config(spec.phi_source),
            "target": _embedding_to_config(spec.phi_target),
            "iso": list(spec.iso),
        }}
    raise TypeError(type(spec))


def spec_from_config(doc, path: str = "group", refs: Mapping | None = None,
                     _seen: tuple = ()) -> GroupSpec:
    """Build a spec from a config node.

    A string node is a reference into ``refs`` (the ``groups`` block of a
    scenario config).  Errors name the offending path.
    """
    refs = refs or {}
    if isinstance(doc, str):
        if doc not in refs:
            raise ConfigError(path, f"unknown group reference {doc!r}")
        if doc in _seen:
            raise ConfigError(path, f"cyclic group reference {doc!r}")
        return spec_from_config(refs[doc], f"groups.{doc}", refs, _seen + (doc,))
    if not isinstance(doc, Mapping):
        raise ConfigError(path, "expected a mapping or a reference name")
    try:
        if "leaf" in doc:
            if "label" not in doc:
                raise ConfigError(path, "leaf needs a 'label'")
            return Leaf(table_from_config(doc["leaf"], f"{path}.leaf"), str(doc["label"]))
        if "amalgam" in doc:
            node = doc["amalgam"]
            p = f"{path}.amalgam"
            left = spec_from_config(_need(node, "left", p), f"{p}.left", refs, _seen)
            right = spec_from_config(_need(node, "right", p), f"{p}.right", refs, _seen)
            if not isinstance(right, Leaf):
                raise ConfigError(f"{p}.right", "right factor must be a leaf")
            delta = _need(node, "delta", p)
            src = table_from_config(_need(delta, "group", f"{p}.delta"), f"{p}.delta.group")
            dl, dr = _need(delta, "left", f"{p}.delta"), _need(delta, "right", f"{p}.delta")
            return Amalgam(
                left, right,
                SubgroupEmbedding(src, str(_need(dl, "leaf", f"{p}.delta.left")),
                                  tuple(_need(dl, "image", f"{p}.delta.left"))),
                SubgroupEmbedding(src, str(dr.get("leaf", right.label)),
                                  tuple(_need(dr, "image", f"{p}.delta.right"))))
        if "hnn" in doc:
            node = doc["hnn"]
            p = f"{path}.hnn"
            base = spec_from_config(_need(node, "base", p), f"{p}.base", refs, _seen)
            embs = []
            for side in ("source", "target"):
                e = _need(node, side, p)
                embs.append(SubgroupEmbedding(
                    table_from_config(_need(e, "group", f"{p}.{side}"), f"{p}.{side}.group"),
                    str(_need(e, "leaf", f"{p}.{side}")), tuple(_need(e, "image", f"{p}.{side}"))))
            iso = node.get("iso", list(range(embs[0].source.order)))
            return Hnn(base, embs[0], embs[1], tuple(iso), str(_need(node, "stable", p)))
    except GroupSpecError as exc:
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(path, "expected one of 'leaf', 'amalgam', 'hnn'")


def _need(node, key: str, path: str):
    if not isinstance(node, Mapping) or key not in node:
        raise ConfigError(path, f"missing key {key!r}")
    return node[key]


GroupNode = Union[Leaf, Amalgam, Hnn]
