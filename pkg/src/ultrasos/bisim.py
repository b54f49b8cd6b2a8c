"""Bisimulation checking and minimisation for ULTraSs.

Relations are sets of ``(x, y)`` pairs between two systems.  The lifting of a
relation to weight functions compares class weights on the connected
components of the relation's bipartite graph; agreement on components gives
agreement on every union of them by additivity, which is all the subset
closure ever asks for.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Hashable, Iterable

from .monoid import Monoid
from .ultras import Ultras, UltrasError, Wlts, check_segala
from .weightfn import WeightFunction, state_key

__all__ = [
    "Block",
    "Partition",
    "MFunction",
    "closed_pairs",
    "in_closure",
    "lift_relation",
    "is_bisimulation",
    "coarsest_partition",
    "disjoint_union",
    "largest_bisimulation",
    "quotient",
    "minimize",
    "weighted_bisim_check",
    "segala_bisim_check",
    "termination_kinds",
    "m_function_from_bisim",
    "validate_m_function",
    "is_m_bisimulation",
]


class Block(tuple):
    """A quotient state: the sorted members of one equivalence class."""

    def __str__(self):
        return "{" + ",".join(map(_side_str, self)) + "}"

    def __repr__(self):
        return f"Block{tuple(self)!r}"


def _side_str(x) -> str:
    if isinstance(x, tuple) and len(x) == 2 and x[0] in (0, 1) and not isinstance(x, Block):
        return f"{x[0] + 1}:{x[1]}"
    return str(x)


# ---------------------------------------------------------------- closures

def _components(relation) -> list[tuple[frozenset, frozenset]]:
    parent: dict = {}

    def find(n):
        while parent[n] != n:
            parent[n] = parent[parent[n]]
            n = parent[n]
        return n

    for x, y in relation:
        for n in (("L", x), ("R", y)):
            parent.setdefault(n, n)
        rx, ry = find(("L", x)), find(("R", y))
        if rx != ry:
            parent[rx] = ry
    groups: dict = {}
    for n in parent:
        groups.setdefault(find(n), []).append(n)
    comps = []
    for members in groups.values():
        left = frozenset(v for side, v in members if side == "L")
        right = frozenset(v for side, v in members if side == "R")
        comps.append((left, right))
    comps.sort(key=lambda cd: (sorted(map(state_key, cd[0])), sorted(map(state_key, cd[1]))))
    return comps


def closed_pairs(relation: Iterable) -> list[tuple[frozenset, frozenset]]:
    """Minimal non-trivial members of the subset closure of ``relation``.

    These are the connected components of the relation seen as a bipartite
    graph, each as ``(left states, right states)``.
    """
    return _components(set(relation))


def in_closure(relation: Iterable, C, D) -> bool:
    """Decide ``(C, D)`` membership in the subset closure of ``relation``.

    ``C`` must be a union of components plus left points outside the
    relation's domain, and likewise for ``D``.
    """
    C, D = frozenset(C), frozenset(D)
    for left, right in _components(set(relation)):
        if (left & C or right & D) and not (left <= C and right <= D):
            return False
    return True


class _Lifter:
    """Projects weight functions onto the components of a relation."""

    def __init__(self, relation):
        self.left: dict = {}
        self.right: dict = {}
        for i, (lft, rgt) in enumerate(_components(relation)):
            for x in lft:
                self.left[x] = i
            for y in rgt:
                self.right[y] = i

    @staticmethod
    def _project(rho: WeightFunction, index: dict):
        if not rho.support() <= index.keys():
            # a support point outside the relation pairs with the empty set
            return None
        return rho.pushforward(index)

    def project_left(self, rho):
        return self._project(rho, self.left)

    def project_right(self, rho):
        return self._project(rho, self.right)

    def related(self, phi, psi) -> bool:
        p = self.project_left(phi)
        return p is not None and p == self.project_right(psi)


def lift_relation(relation: Iterable, phi: WeightFunction, psi: WeightFunction) -> bool:
    """``(phi, psi)`` agree on every pair of the relation's subset closure."""
    return _Lifter(set(relation)).related(phi, psi)


def _check_states(u1: Ultras, u2: Ultras, relation):
    if u1.monoid != u2.monoid:
        raise UltrasError("systems are weighted over different monoids")
    if u1.labels != u2.labels:
        raise UltrasError("systems have different label sets")
    for x, y in relation:
        for u, s in ((u1, x), (u2, y)):
            if s in u.boundary:
                raise UltrasError(f"state {s!r} is on the exploration boundary")
            if s not in u.states:
                raise UltrasError(f"{s!r} is not a state of the system")


def is_bisimulation(u1: Ultras, u2: Ultras, relation: Iterable) -> bool:
    """Check the forth and back transfer conditions for every related pair."""
    relation = set(relation)
    _check_states(u1, u2, relation)
    lifter = _Lifter(relation)
    for x, y in relation:
        for a in u1.labels:
            left = {lifter.project_left(phi) for phi in u1.successors(x, a)}
            right = {lifter.project_right(psi) for psi in u2.successors(y, a)}
            # a function with unmatched support cannot be related to anything
            if None in left or None in right or left != right:
                return False
    return True


# ------------------------------------------------------------- partitions

@dataclass(frozen=True)
class Partition:
    """Sorted blocks of sorted states; ``block_of`` maps a state to its block index."""

    blocks: tuple

    @classmethod
    def from_classes(cls, classes: Iterable[Iterable]) -> "Partition":
        blocks = [Block(sorted(c, key=state_key)) for c in classes]
        blocks = [b for b in blocks if b]
        blocks.sort(key=lambda b: state_key(b[0]))
        seen = set()
        for b in blocks:
            if seen & set(b):
                raise ValueError("classes overlap")
            seen.update(b)
        return cls(tuple(blocks))

    @classmethod
    def from_map(cls, mapping: dict) -> "Partition":
        groups: dict = {}
        for x, k in mapping.items():
            groups.setdefault(k, []).append(x)
        return cls.from_classes(groups.values())

    @property
    def block_of(self) -> dict:
        return {x: i for i, b in enumerate(self.blocks) for x in b}

    @property
    def elements(self) -> frozenset:
        return frozenset(x for b in self.blocks for x in b)

    def __len__(self):
        return len(self.blocks)

    def same_block(self, x, y) -> bool:
        idx = self.block_of
        return x in idx and idx.get(x) == idx.get(y)

    def relation(self) -> frozenset:
        """The equivalence as a set of pairs."""
        return frozenset((x, y) for b in self.blocks for x in b for y in b)

    def cross_relation(self) -> frozenset:
        """Pairs ``(x, y)`` linking side-0 and side-1 states of a union partition."""
        return frozenset((x[1], y[1]) for b in self.blocks for x in b for y in b
                         if x[0] == 0 and y[0] == 1)

    def side(self, k: int) -> "Partition":
        return Partition.from_classes([[x[1] for x in b if x[0] == k] for b in self.blocks])

    def format(self) -> str:
        return "\n".join(str(b) for b in self.blocks)


def disjoint_union(u1: Ultras, u2: Ultras) -> Ultras:
    """States tagged ``(0, x)`` and ``(1, y)``."""
    if u1.monoid != u2.monoid or u1.labels != u2.labels:
        raise UltrasError("systems need a shared monoid and label set")
    trans = {}
    for k, u in enumerate((u1, u2)):
        tag = lambda s, k=k: (k, s)
        for (x, a), fns in u.trans.items():
            trans[(k, x), a] = {rho.pushforward(tag) for rho in fns}
    states = [(0, x) for x in u1.states] + [(1, y) for y in u2.states]
    boundary = [(0, x) for x in u1.boundary] + [(1, y) for y in u2.boundary]
    return Ultras(u1.monoid, u1.labels, states, trans, boundary)


def _signature(u: Ultras, x, block_of: dict) -> frozenset:
    return frozenset((a, rho.pushforward(block_of))
                     for a in u.labels for rho in u.successors(x, a))


def coarsest_partition(u: Ultras) -> Partition:
    """Largest bisimulation on one system, by signature refinement.

    A state's signature is the set of ``(label, class-weight function)`` it
    can reach; blocks split until no signature distinguishes members.
    """
    if u.boundary:
        raise UltrasError("bisimulation needs a fully explored system")
    states = u.sorted_states()
    block_of = {x: 0 for x in states}
    count = 1
    while True:
        keys: dict = {}
        new = {}
        for x in states:
            key = (block_of[x], _signature(u, x, block_of))
            new[x] = keys.setdefault(key, len(keys))
        if len(keys) == count:
            return Partition.from_map(block_of)
        block_of, count = new, len(keys)


def largest_bisimulation(u1: Ultras, u2: Ultras) -> Partition:
    """Coarsest stable partition of the disjoint union, states tagged by side."""
    return coarsest_partition(disjoint_union(u1, u2))


def _is_stable(u: Ultras, p: Partition) -> bool:
    block_of = p.block_of
    for b in p.blocks:
        sig = _signature(u, b[0], block_of)
        if any(_signature(u, x, block_of) != sig for x in b[1:]):
            return False
    return True


def quotient(u: Ultras, p: Partition) -> tuple[Ultras, dict]:
    """Quotient system and the class projection ``state -> Block``."""
    if p.elements != u.states:
        raise UltrasError("partition must cover exactly the system's states")
    if not _is_stable(u, p):
        raise UltrasError("partition is not stable under the transition relation")
    kappa = {x: b for b in p.blocks for x in b}
    trans = {}
    for b in p.blocks:
        for a in u.labels:
            if (b[0], a) in u.trans:
                trans[b, a] = {rho.pushforward(kappa) for rho in u.successors(b[0], a)}
    return Ultras(u.monoid, u.labels, p.blocks, trans), kappa


def minimize(u: Ultras) -> tuple[Ultras, dict]:
    return quotient(u, coarsest_partition(u))


# ------------------------------------------------- classic characterisations

def _closure_pairs_with_points(relation, left_points, right_points):
    """Components plus singleton pairs for points outside the relation."""
    pairs = list(_components(relation))
    dom = {x for x, _ in relation}
    cod = {y for _, y in relation}
    pairs += [(frozenset([x]), frozenset()) for x in left_points if x not in dom]
    pairs += [(frozenset(), frozenset([y])) for y in right_points if y not in cod]
    return pairs


def weighted_bisim_check(w1: Wlts, w2: Wlts, relation: Iterable) -> bool:
    """Weighted-LTS bisimulation: equal row sums on every closed pair."""
    relation = set(relation)
    if w1.monoid != w2.monoid or w1.labels != w2.labels:
        raise UltrasError("weighted systems need a shared monoid and label set")
    m = w1.monoid
    for x, y in relation:
        for a in w1.labels:
            phi, psi = w1.row(x, a), w2.row(y, a)
            for C, D in _closure_pairs_with_points(relation, phi.support(), psi.support()):
                if m.sum(phi[c] for c in C) != m.sum(psi[d] for d in D):
                    return False
    return True


def segala_bisim_check(u1: Ultras, u2: Ultras, relation: Iterable) -> bool:
    """Strong bisimulation of probabilistic automata over distributions."""
    relation = set(relation)
    if not (check_segala(u1) and check_segala(u2)):
        raise UltrasError("segala_bisim_check needs probability distributions everywhere")
    _check_states(u1, u2, relation)

    def matches(phi, psi):
        pts_l, pts_r = phi.support(), psi.support()
        return all(sum(phi[c] for c in C) == sum(psi[d] for d in D)
                   for C, D in _closure_pairs_with_points(relation, pts_l, pts_r))

    for x, y in relation:
        for a in u1.labels:
            phis, psis = u1.successors(x, a), u2.successors(y, a)
            if not all(any(matches(phi, psi) for psi in psis) for phi in phis):
                return False
            if not all(any(matches(phi, psi) for phi in phis) for psi in psis):
                return False
    return True


# -------------------------------------------------------------- M-functions

@dataclass
class MFunction:
    """A measure ``(state, label, class-set) -> M`` with a distinguished bottom.

    Class-sets are represented as frozensets of indices into ``classes``;
    ``fn`` is evaluated lazily.
    """

    classes: tuple
    labels: tuple
    bottom: Hashable
    fn: Callable

    def __call__(self, x, a, class_set) -> Hashable:
        return self.fn(x, a, frozenset(class_set))

    def class_sets(self):
        idx = range(len(self.classes))
        for r in range(len(self.classes) + 1):
            yield from (frozenset(c) for c in combinations(idx, r))


def termination_kinds(u: Ultras) -> dict:
    """Per label, which of ``"stuck"``/``"terminal"`` occur."""
    kinds = {}
    for a in u.labels:
        seen = set()
        for x in u.states:
            fns = u.successors(x, a)
            if not fns:
                seen.add("stuck")
            elif WeightFunction(u.monoid) in fns:
                seen.add("terminal")
        kinds[a] = seen
    return kinds


def _as_partition(u: Ultras, relation) -> Partition:
    if isinstance(relation, Partition):
        return relation
    relation = set(relation)
    classes: dict = {}
    for x in u.states:
        cls = frozenset(y for y in u.states if (x, y) in relation)
        classes[x] = cls
    for x, cls in classes.items():
        if x not in cls or any(classes[y] != cls for y in cls):
            raise UltrasError("relation is not an equivalence on the system's states")
    return Partition.from_classes(set(classes.values()))


def m_function_from_bisim(u: Ultras, relation) -> MFunction:
    """Measure whose values are the class-weight functions with weight on ``C``.

    The bottom element is the singleton holding the zero class function.
    """
    mixed = [a for a, k in termination_kinds(u).items() if len(k) > 1]
    if mixed:
        raise UltrasError(f"label {mixed[0]!r} has both stuck and terminal states")
    part = _as_partition(u, relation)
    if not is_bisimulation(u, u, part.relation()):
        raise UltrasError("relation is not a bisimulation")
    block_of = part.block_of
    zero_cls = WeightFunction(u.monoid)
    bottom = frozenset([zero_cls])
    m: Monoid = u.monoid
    projected = {(x, a): [rho.pushforward(block_of) for rho in u.successors(x, a)]
                 for x in u.states for a in u.labels}

    def fn(x, a, class_set):
        return frozenset(v for v in projected[x, a]
                         if m.sum(v[i] for i in class_set) != m.zero) | bottom

    return MFunction(part.blocks, u.labels, bottom, fn)


def validate_m_function(mf: MFunction, u: Ultras) -> bool:
    """Check the termination and class-union conditions on all class-sets."""
    sets = list(mf.class_sets())
    members = [frozenset(c) for c in mf.classes]
    m = u.monoid
    for a in mf.labels:
        rows = {}
        for x in u.states:
            row = tuple(mf(x, a, cs) for cs in sets)
            for cs, val in zip(sets, row):
                C = frozenset().union(*(members[i] for i in cs))
                silent = all(rho.restrict(C) == m.zero for rho in u.successors(x, a))
                if silent and val != mf.bottom:
                    return False
            rows.setdefault(row, x)
        distinct = list(rows)
        for r1, r2 in combinations(distinct, 2):
            agree = {cs for cs, v1, v2 in zip(sets, r1, r2) if v1 == v2}
            for c1, c2 in combinations(agree, 2):
                if (c1 | c2) not in agree:
                    return False
    return True


def is_m_bisimulation(mf: MFunction, u: Ultras, partition: Partition) -> bool:
    """Related states agree on every single class of ``partition``."""
    index = {frozenset(c): i for i, c in enumerate(mf.classes)}
    cls_sets = []
    for b in partition.blocks:
        key = frozenset(b)
        if key not in index:
            raise UltrasError("partition classes differ from the M-function's classes")
        cls_sets.append(frozenset([index[key]]))
    for b in partition.blocks:
        for a in mf.labels:
            for cs in cls_sets:
                v = mf(b[0], a, cs)
                if any(mf(x, a, cs) != v for x in b[1:]):
                    return False
    return True
