"""Uniform labelled transition systems over a weight monoid.

A system maps each ``(state, label)`` pair to a finite set of weight
functions.  A missing pair means the state is *stuck* on that label; a set
containing the zero function means it is *terminal*.  The two are kept
apart everywhere because bisimulation tells them apart.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping

from .monoid import Monoid, RationalPlus
from .weightfn import WeightFunction, state_key

__all__ = [
    "Ultras",
    "Wlts",
    "UltrasError",
    "is_functional",
    "check_homomorphism",
    "check_segala",
    "check_generative",
    "check_reactive",
    "to_wlts",
    "from_wlts",
]


class UltrasError(ValueError):
    """Ill-formed system, or an operation applied outside its domain."""


def _freeze_trans(trans: Mapping) -> dict:
    return {key: frozenset(fns) for key, fns in trans.items()}


class Ultras:
    """A finite explored fragment of an ULTraS.

    ``boundary`` holds states that occur in some support but whose own
    transitions were never computed; they are not members of ``states``.
    """

    def __init__(self, monoid: Monoid, labels: Iterable, states: Iterable,
                 trans: Mapping, boundary: Iterable = ()):
        self.monoid = monoid
        self.labels = tuple(sorted(set(labels), key=state_key))
        self.states = frozenset(states)
        self.boundary = frozenset(boundary)
        self.trans = _freeze_trans(trans)
        if self.states & self.boundary:
            raise UltrasError("a state cannot be both explored and on the boundary")
        label_set = set(self.labels)
        known = self.states | self.boundary
        for (x, a), fns in self.trans.items():
            if x not in self.states:
                raise UltrasError(f"transition from unknown state {x!r}")
            if a not in label_set:
                raise UltrasError(f"unknown label {a!r}")
            for rho in fns:
                if rho.monoid != monoid:
                    raise UltrasError("weight function over a different monoid")
                stray = rho.support() - known
                if stray:
                    raise UltrasError(f"support element {next(iter(stray))!r} is not a state")

    @property
    def explored(self) -> bool:
        return not self.boundary

    def successors(self, x, a) -> frozenset:
        return self.trans.get((x, a), frozenset())

    def is_stuck(self, x, a) -> bool:
        return not self.trans.get((x, a))

    def enabled(self, x) -> frozenset:
        return frozenset(a for a in self.labels if self.trans.get((x, a)))

    def sorted_states(self) -> list:
        return sorted(self.states, key=state_key)

    def sorted_successors(self, x, a) -> list:
        return sorted(self.successors(x, a), key=lambda r: r.sort_key())

    def __eq__(self, other):
        if not isinstance(other, Ultras):
            return NotImplemented
        mine = {k: v for k, v in self.trans.items() if v}
        theirs = {k: v for k, v in other.trans.items() if v}
        return (self.monoid == other.monoid and self.labels == other.labels
                and self.states == other.states and self.boundary == other.boundary
                and mine == theirs)

    __hash__ = None

    def __repr__(self):
        return (f"Ultras(monoid={self.monoid.name}, labels={list(self.labels)}, "
                f"states={len(self.states)}, boundary={len(self.boundary)})")

    def restrict_to(self, keep: Iterable) -> "Ultras":
        """Sub-system on ``keep``; everything else reachable becomes boundary."""
        keep = frozenset(keep) & self.states
        trans = {k: v for k, v in self.trans.items() if k[0] in keep}
        reached = {y for fns in trans.values() for rho in fns for y in rho.support()}
        return Ultras(self.monoid, self.labels, keep, trans, reached - keep)


@dataclass
class Wlts:
    """Weighted LTS: ``weight[(x, a)]`` is the row ``y -> w`` as a weight function.

    Missing rows are all-zero.
    """

    monoid: Monoid
    labels: tuple
    states: frozenset
    weight: dict = field(default_factory=dict)

    def __post_init__(self):
        self.labels = tuple(sorted(set(self.labels), key=state_key))
        self.states = frozenset(self.states)
        self.weight = {k: v for k, v in self.weight.items() if v}

    def row(self, x, a) -> WeightFunction:
        return self.weight.get((x, a)) or WeightFunction(self.monoid)

    def __call__(self, x, a, y):
        return self.row(x, a)[y]


def _require_explored(u: Ultras, what: str):
    if u.boundary:
        raise UltrasError(f"{what} needs a fully explored system "
                           f"({len(u.boundary)} boundary states)")


def _require_rational(u: Ultras, what: str):
    if not (isinstance(u.monoid, RationalPlus) and not u.monoid.infinity):
        raise UltrasError(f"{what} is defined over non-negative rationals, not {u.monoid.name}")


def is_functional(u: Ultras) -> bool:
    """Exactly one weight function per ``(state, label)``."""
    _require_explored(u, "is_functional")
    return all(len(u.successors(x, a)) == 1 for x in u.states for a in u.labels)


def check_homomorphism(u1: Ultras, u2: Ultras, f: Mapping | Callable) -> bool:
    """``x -a-> rho`` in ``u1`` iff ``f(x) -a-> rho[f]`` in ``u2``."""
    if u1.monoid != u2.monoid or u1.labels != u2.labels:
        raise UltrasError("homomorphisms need a shared monoid and label set")
    get = f.__getitem__ if isinstance(f, Mapping) else f
    for x in u1.states:
        try:
            fx = get(x)
        except KeyError:
            raise UltrasError(f"map undefined on state {x!r}") from None
        if fx not in u2.states:
            return False
        for a in u1.labels:
            try:
                image = {rho.pushforward(get) for rho in u1.successors(x, a)}
            except KeyError as e:
                raise UltrasError(str(e)) from None
            if image != u2.successors(fx, a):
                return False
    return True


def check_segala(u: Ultras) -> bool:
    """Every weight function is a probability distribution."""
    _require_rational(u, "check_segala")
    return all(rho.total() == 1 for fns in u.trans.values() for rho in fns)


def check_generative(u: Ultras) -> bool:
    _require_rational(u, "check_generative")
    return is_functional(u) and all(
        rho.total() in (0, 1) for fns in u.trans.values() for rho in fns)


def check_reactive(u: Ultras) -> bool:
    _require_rational(u, "check_reactive")
    return all(sum((rho.total() for rho in fns), Fraction(0)) in (0, 1)
               for fns in u.trans.values())


def to_wlts(u: Ultras, partial: bool = False) -> Wlts:
    """Weighted LTS of a functional system.

    With ``partial`` a truncated fragment is accepted; rows then cover the
    explored states only.
    """
    if not partial:
        _require_explored(u, "to_wlts")
    if not all(len(u.successors(x, a)) == 1 for x in u.states for a in u.labels):
        raise UltrasError("only functional systems correspond to weighted LTSs")
    weight = {(x, a): next(iter(u.successors(x, a))) for x in u.states for a in u.labels}
    return Wlts(u.monoid, u.labels, u.states, weight)


def from_wlts(w: Wlts) -> Ultras:
    """Functional system with one function per pair; all-zero rows become terminal."""
    trans = {(x, a): {w.row(x, a)} for x in w.states for a in w.labels}
    reached = {y for rho in w.weight.values() for y in rho.support()}
    return Ultras(w.monoid, w.labels, w.states, trans, reached - w.states)
