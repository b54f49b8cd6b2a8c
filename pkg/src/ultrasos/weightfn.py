"""Finitely supported weight functions and their algebra."""
from __future__ import annotations

from functools import lru_cache
from typing import Callable, Iterable, Mapping

from .monoid import Club, Monoid, MonoidError, is_club

__all__ = [
    "WeightFunction",
    "state_key",
    "support",
    "total_weight",
    "restrict_weight",
    "pushforward",
    "select_by_club",
]


def state_key(x):
    """Total order on state ids: tuples lexicographically, everything else by text."""
    if isinstance(x, tuple):
        return (1, tuple(state_key(e) for e in x))
    return (0, type(x).__name__ != "str", str(x))


class WeightFunction:
    """A map from states to non-zero weights, kept in canonical form.

    Entries mapping to the monoid unit are dropped on construction and keys
    are sorted by :func:`state_key`, so ``==`` is extensional equality.
    """

    __slots__ = ("monoid", "_entries", "_map", "_hash")

    def __init__(self, monoid: Monoid, entries: Mapping | Iterable = ()):
        acc: dict = {}
        items = entries.items() if isinstance(entries, Mapping) else entries
        for k, v in items:
            monoid.check(v)
            acc[k] = monoid.add(acc[k], v) if k in acc else v
        self.monoid = monoid
        self._entries = tuple(sorted(((k, v) for k, v in acc.items() if v != monoid.zero),
                                     key=lambda kv: state_key(kv[0])))
        self._map = dict(self._entries)
        self._hash = None

    @classmethod
    def zero(cls, monoid: Monoid) -> "WeightFunction":
        return cls(monoid)

    @classmethod
    def point(cls, monoid: Monoid, x, w) -> "WeightFunction":
        return cls(monoid, {x: w})

    def __getitem__(self, x):
        return self._map.get(x, self.monoid.zero)

    def __contains__(self, x):
        return x in self._map

    def __iter__(self):
        return iter(self._map)

    def __len__(self):
        return len(self._entries)

    def __bool__(self):
        return bool(self._entries)

    def items(self):
        return self._entries

    def support(self) -> frozenset:
        return frozenset(self._map)

    def total(self):
        return self.monoid.sum(v for _, v in self._entries)

    def restrict(self, states) -> object:
        return self.monoid.sum(v for k, v in self._entries if k in states)

    def pushforward(self, f: Callable | Mapping) -> "WeightFunction":
        get = f.__getitem__ if isinstance(f, Mapping) else f
        out: dict = {}
        m = self.monoid
        for k, v in self._entries:
            try:
                y = get(k)
            except KeyError:
                raise KeyError(f"map undefined on support element {k!r}") from None
            out[y] = m.add(out[y], v) if y in out else v
        return WeightFunction(m, out)

    def select(self, club: Club) -> frozenset:
        return frozenset(k for k, v in self._entries if club.contains(self.monoid, v))

    def __add__(self, other: "WeightFunction") -> "WeightFunction":
        if other.monoid != self.monoid:
            raise MonoidError("cannot add weight functions over different monoids")
        return WeightFunction(self.monoid, list(self._entries) + list(other._entries))

    def __eq__(self, other):
        return (isinstance(other, WeightFunction) and self.monoid == other.monoid
                and self._entries == other._entries)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._entries)
        return self._hash

    def sort_key(self):
        return tuple((state_key(k), self.monoid.sort_key(v)) for k, v in self._entries)

    def format(self, name: Callable = str) -> str:
        body = ", ".join(f"{name(k)}: {self.monoid.format(v)}" for k, v in self._entries)
        return "{" + body + "}"

    def __repr__(self):
        return f"WeightFunction({self.format()})"

    __str__ = format


def support(rho: WeightFunction) -> frozenset:
    return rho.support()


def total_weight(rho: WeightFunction):
    return rho.total()


def restrict_weight(rho: WeightFunction, states) -> object:
    """Total weight that ``rho`` assigns to ``states``."""
    return rho.restrict(states)


def pushforward(rho: WeightFunction, f: Callable | Mapping) -> WeightFunction:
    """Image of ``rho`` along ``f``: each target receives the sum over its preimage."""
    return rho.pushforward(f)


@lru_cache(maxsize=256)
def _valid_club(m: Monoid, c: Club) -> bool:
    return is_club(m, c)


def select_by_club(rho: WeightFunction, club: Club) -> frozenset:
    """Support elements whose weight lies in ``club``."""
    if not _valid_club(rho.monoid, club):
        raise MonoidError(f"{club.describe(rho.monoid)} is not a club of {rho.monoid.name}")
    return rho.select(club)
