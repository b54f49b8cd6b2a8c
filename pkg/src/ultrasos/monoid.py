"""Commutative monoids of weights and their structural predicates.

Weights are plain Python values: ``bool`` for the boolean monoid, ``int`` for
the natural-number monoids, :class:`fractions.Fraction` for the rational ones
(plus the :data:`INF` sentinel where infinity is admitted) and ``str`` element
names for finite tables.  Nothing here ever touches floating point.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable

__all__ = [
    "INF",
    "Club",
    "Monoid",
    "MonoidError",
    "BoolOr",
    "NatPlus",
    "NatMax",
    "RationalPlus",
    "FiniteMonoid",
    "builtin",
    "BUILTIN_NAMES",
    "add",
    "is_club",
    "enumerate_clubs",
    "is_positive",
    "is_refinement",
    "m4",
    "z2",
]

MAX_TABLE_SIZE = 64


class MonoidError(ValueError):
    """Raised for elements outside a carrier or unsupported monoid queries."""


class _Infinity:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __str__(self):
        return "inf"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()


@dataclass(frozen=True)
class Club:
    """A club: either an explicit finite member set or a symbolic tag.

    Symbolic tags are ``"empty"`` and ``"nonzero"`` (every non-unit element).
    """

    members: frozenset | None = None
    tag: str | None = None

    def __post_init__(self):
        if (self.members is None) == (self.tag is None):
            raise ValueError("a club is either explicit or symbolic")
        if self.tag is not None and self.tag not in ("empty", "nonzero"):
            raise ValueError(f"unknown club tag {self.tag!r}")

    @classmethod
    def empty(cls) -> "Club":
        return cls(tag="empty")

    @classmethod
    def nonzero(cls) -> "Club":
        return cls(tag="nonzero")

    @classmethod
    def of(cls, elements: Iterable) -> "Club":
        return cls(members=frozenset(elements))

    def contains(self, m: "Monoid", v) -> bool:
        if self.tag == "empty":
            return False
        if self.tag == "nonzero":
            return v != m.zero
        return v in self.members

    def resolve(self, m: "Monoid") -> frozenset:
        """Explicit member set of this club inside a finite monoid."""
        if self.members is not None:
            return self.members
        if self.tag == "empty":
            return frozenset()
        return frozenset(e for e in m.elements() if e != m.zero)

    def describe(self, m: "Monoid | None" = None) -> str:
        if self.tag is not None and (m is None or not m.is_finite):
            return "{}" if self.tag == "empty" else "nonzero"
        members = self.resolve(m) if self.members is None else self.members
        if m is not None and m.is_finite:
            order = {e: i for i, e in enumerate(m.elements())}
            items = sorted(members, key=lambda e: order.get(e, len(order)))
            return "{" + ",".join(m.format(e) for e in items) + "}"
        return "{" + ",".join(sorted(map(str, members))) + "}"


class Monoid:
    """Base class.  Subclasses provide ``zero``, ``add`` and parsing/printing.

    ``mul``/``one`` are present on monoids that carry a natural semiring
    multiplication; combinators needing scalars (rate laws, convex sums,
    polynomial weight functions) require them.
    """

    name: str = "monoid"
    zero: Any = None
    one: Any = None
    is_finite = False

    def add(self, a, b):
        raise NotImplementedError

    def mul(self, a, b):
        raise MonoidError(f"monoid {self.name} has no multiplication")

    @property
    def has_mul(self) -> bool:
        return self.one is not None

    def contains(self, v) -> bool:
        raise NotImplementedError

    def check(self, v):
        if not self.contains(v):
            raise MonoidError(f"{v!r} is not an element of {self.name}")
        return v

    def elements(self) -> tuple:
        raise MonoidError(f"monoid {self.name} has an infinite carrier")

    def sum(self, values: Iterable):
        total = self.zero
        for v in values:
            total = self.add(total, v)
        return total

    def parse(self, text: str):
        raise NotImplementedError

    def format(self, v) -> str:
        return str(v)

    def sort_key(self, v):
        return (0, v)

    def declaration(self) -> str:
        return self.name

    # symbolic answers for infinite built-ins; finite tables override
    def _positive(self) -> bool:
        return True

    def _refinement(self) -> bool:
        return True

    def __eq__(self, other):
        return isinstance(other, Monoid) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def _key(self):
        return (type(self).__name__, self.name)

    def __repr__(self):
        return f"<Monoid {self.name}>"


class BoolOr(Monoid):
    """``({tt, ff}, or, ff)``; multiplication is conjunction."""

    name = "bool"
    zero = False
    one = True
    is_finite = True

    def add(self, a, b):
        return self.check(a) or self.check(b)

    def mul(self, a, b):
        return self.check(a) and self.check(b)

    def contains(self, v):
        return isinstance(v, bool)

    def elements(self):
        return (False, True)

    def parse(self, text):
        text = text.strip()
        if text in ("tt", "true", "1"):
            return True
        if text in ("ff", "false", "0"):
            return False
        raise MonoidError(f"not a boolean weight: {text!r}")

    def format(self, v):
        return "tt" if v else "ff"


class NatPlus(Monoid):
    name = "nat"
    zero = 0
    one = 1

    def add(self, a, b):
        return self.check(a) + self.check(b)

    def mul(self, a, b):
        return self.check(a) * self.check(b)

    def contains(self, v):
        return isinstance(v, int) and not isinstance(v, bool) and v >= 0

    def parse(self, text):
        try:
            v = int(text.strip())
        except ValueError:
            raise MonoidError(f"not a natural number: {text!r}") from None
        return self.check(v)


class NatMax(NatPlus):
    """``(N, max, 0)``; multiplication distributes over max."""

    name = "natmax"

    def add(self, a, b):
        return max(self.check(a), self.check(b))


class RationalPlus(Monoid):
    """Non-negative rationals under addition, optionally with ``+inf``."""

    zero = Fraction(0)
    one = Fraction(1)

    def __init__(self, infinity: bool = False):
        self.infinity = infinity
        self.name = "ratinf" if infinity else "rat"

    def add(self, a, b):
        self.check(a)
        self.check(b)
        if a is INF or b is INF:
            return INF
        return a + b

    def mul(self, a, b):
        self.check(a)
        self.check(b)
        if a is INF or b is INF:
            # 0 * inf = 0, the usual measure-theoretic convention
            return self.zero if (a == 0 or b == 0) else INF
        return a * b

    def contains(self, v):
        if v is INF:
            return self.infinity
        return isinstance(v, (Fraction, int)) and not isinstance(v, bool) and v >= 0

    def parse(self, text):
        text = text.strip()
        if text == "inf":
            return self.check(INF)
        try:
            v = Fraction(text)
        except (ValueError, ZeroDivisionError):
            raise MonoidError(f"not a rational weight: {text!r}") from None
        return self.check(v)

    def format(self, v):
        if v is INF:
            return "inf"
        v = Fraction(v)
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"

    def sort_key(self, v):
        return (1, 0) if v is INF else (0, v)


class FiniteMonoid(Monoid):
    """Explicit addition table over opaque element names.

    The commutative-monoid laws are verified exhaustively at construction.
    """

    is_finite = True

    def __init__(self, name: str, elems: Iterable[str], unit: str, table: dict):
        elems = tuple(elems)
        if len(set(elems)) != len(elems):
            raise MonoidError("duplicate carrier elements")
        if not 0 < len(elems) <= MAX_TABLE_SIZE:
            raise MonoidError(f"carrier size must be in 1..{MAX_TABLE_SIZE}")
        if unit not in elems:
            raise MonoidError(f"unit {unit!r} not in carrier")
        self.name = name
        self._elems = elems
        self._set = frozenset(elems)
        self.zero = unit
        full = {}
        for (x, y), z in table.items():
            for e in (x, y, z):
                if e not in self._set:
                    raise MonoidError(f"{e!r} is not an element of {name}")
            for key in ((x, y), (y, x)):
                if key in full and full[key] != z:
                    raise MonoidError(f"conflicting entries for {x}+{y}")
                full[key] = z
        for x in elems:
            for key in ((unit, x), (x, unit)):
                if key in full and full[key] != x:
                    raise MonoidError(f"unit law fails: {unit}+{x} = {full[key]}")
                full[key] = x
        missing = [(x, y) for x in elems for y in elems if (x, y) not in full]
        if missing:
            x, y = missing[0]
            raise MonoidError(f"addition table is not total: missing {x}+{y}")
        self._table = full
        for x, y, z in itertools.product(elems, repeat=3):
            if full[full[x, y], z] != full[x, full[y, z]]:
                raise MonoidError(f"associativity fails on ({x},{y},{z})")

    def add(self, a, b):
        return self._table[self.check(a), self.check(b)]

    def contains(self, v):
        return isinstance(v, str) and v in self._set

    def elements(self):
        return self._elems

    def parse(self, text):
        return self.check(text.strip())

    def sort_key(self, v):
        return (0, self._elems.index(v))

    def _key(self):
        return ("FiniteMonoid", self.name, self._elems, self.zero,
                tuple(sorted(self._table.items())))

    def _positive(self):
        return _positive_brute(self)

    def _refinement(self):
        return _refinement_brute(self)

    def declaration(self) -> str:
        pairs = []
        for i, x in enumerate(self._elems):
            for y in self._elems[i:]:
                if x != self.zero and y != self.zero:
                    pairs.append(f"({x} {y} -> {self._table[x, y]})")
        return (f"{self.name} {{ elems: {' '.join(self._elems)}; unit: {self.zero}; "
                f"add: {' '.join(pairs)} }}")


BUILTIN_NAMES = ("bool", "nat", "natmax", "rat", "ratinf")


def builtin(name: str) -> Monoid:
    """Look up a built-in monoid by name."""
    table = {
        "bool": BoolOr,
        "nat": NatPlus,
        "natmax": NatMax,
        "rat": lambda: RationalPlus(False),
        "ratinf": lambda: RationalPlus(True),
    }
    try:
        return table[name]()
    except KeyError:
        raise MonoidError(f"unknown monoid {name!r}; built-ins are {', '.join(BUILTIN_NAMES)}") from None


def m4() -> FiniteMonoid:
    """The four-element monoid where any two non-zero elements sum to ``1``."""
    elems = ("0", "a", "b", "1")
    table = {(x, y): "1" for x in elems[1:] for y in elems[1:]}
    return FiniteMonoid("m4", elems, "0", table)


def z2() -> FiniteMonoid:
    return FiniteMonoid("z2", ("0", "1"), "0", {("1", "1"): "0"})


def add(m: Monoid, a, b):
    return m.add(a, b)


def _positive_brute(m: Monoid) -> bool:
    nz = [e for e in m.elements() if e != m.zero]
    return all(m.add(x, y) != m.zero for x in nz for y in nz)


def _refinement_brute(m: Monoid) -> bool:
    elems = m.elements()
    by_sum: dict = {}
    for x in elems:
        for y in elems:
            by_sum.setdefault(m.add(x, y), []).append((x, y))
    for pairs in by_sum.values():
        for (r1, r2), (c1, c2) in itertools.product(pairs, repeat=2):
            if not any(
                m.add(m21, m22) == r2 and m.add(m11, m21) == c1 and m.add(m12, m22) == c2
                for m11, m12 in by_sum[r1]
                for m21, m22 in by_sum[r2]
            ):
                return False
    return True


def is_positive(m: Monoid) -> bool:
    """No two non-zero elements sum to zero."""
    return m._positive()


def is_refinement(m: Monoid) -> bool:
    """Every ``r1+r2 = c1+c2`` admits a 2x2 refinement matrix."""
    return m._refinement()


def is_club(m: Monoid, c: Club) -> bool:
    """Decide whether ``c`` is an ideal of ``m`` whose complement is a submonoid."""
    if c.tag == "empty":
        return True
    if not m.is_finite:
        if c.tag == "nonzero":
            return is_positive(m)
        for v in c.members:
            m.check(v)
        # a non-empty ideal of an infinite built-in is infinite
        return not c.members
    members = c.resolve(m)
    for v in members:
        m.check(v)
    if m.zero in members:
        return False
    elems = m.elements()
    if any(m.add(v, w) not in members for v in members for w in elems):
        return False
    rest = [e for e in elems if e not in members]
    return all(m.add(v, w) not in members for v in rest for w in rest)


def _face_closure(m: Monoid, seed: Iterable) -> frozenset:
    face = set(seed) | {m.zero}
    elems = m.elements()
    while True:
        grown = set(face)
        grown.update(m.add(x, y) for x in face for y in face)
        grown.update(x for x in elems for y in elems if m.add(x, y) in face)
        if grown == face:
            return frozenset(face)
        face = grown


def enumerate_clubs(m: Monoid) -> list[Club]:
    """All clubs of ``m``, smallest first.

    A club's complement is a submonoid closed under summands, so clubs are
    found as complements of those faces, generated by closure rather than by
    scanning every subset.
    """
    if not m.is_finite:
        return [Club.empty(), Club.nonzero()] if is_positive(m) else [Club.empty()]
    elems = m.elements()
    faces = {_face_closure(m, ())}
    frontier = list(faces)
    while frontier:
        nxt = []
        for face in frontier:
            for e in elems:
                if e not in face:
                    bigger = _face_closure(m, face | {e})
                    if bigger not in faces:
                        faces.add(bigger)
                        nxt.append(bigger)
        frontier = nxt
    order = {e: i for i, e in enumerate(elems)}
    clubs = [frozenset(e for e in elems if e not in face) for face in faces]
    clubs.sort(key=lambda c: (len(c), sorted(order[e] for e in c)))
    return [Club.of(c) for c in clubs]
