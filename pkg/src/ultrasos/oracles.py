"""Brute-force reference answers for small instances.

These enumerate candidate relations outright and share no code with the
refinement algorithm beyond :func:`~ultrasos.bisim.is_bisimulation`.
"""
from __future__ import annotations

from .bisim import is_bisimulation
from .ultras import Ultras

__all__ = ["MAX_PAIRS", "MAX_STATES", "union_of_bisimulations", "union_of_bisimilar_partitions",
           "set_partitions"]

MAX_PAIRS = 16
MAX_STATES = 8


def union_of_bisimulations(u1: Ultras, u2: Ultras) -> frozenset:
    """Union of every relation ``R`` between the two state sets that is a bisimulation."""
    xs, ys = u1.sorted_states(), u2.sorted_states()
    pairs = [(x, y) for x in xs for y in ys]
    if len(pairs) > MAX_PAIRS:
        raise ValueError(f"{len(pairs)} candidate pairs exceed the oracle limit of {MAX_PAIRS}")
    out = set()
    for mask in range(1 << len(pairs)):
        rel = [p for k, p in enumerate(pairs) if mask >> k & 1]
        if not set(rel) <= out and is_bisimulation(u1, u2, rel):
            out.update(rel)
    return frozenset(out)


def set_partitions(items: list):
    """Every partition of ``items`` as a list of blocks."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1:]


def union_of_bisimilar_partitions(u: Ultras) -> frozenset:
    """Union of the equivalences on ``u`` that are bisimulations."""
    xs = u.sorted_states()
    if len(xs) > MAX_STATES:
        raise ValueError(f"{len(xs)} states exceed the oracle limit of {MAX_STATES}")
    out = set()
    for part in set_partitions(xs):
        rel = {(x, y) for b in part for x in b for y in b}
        if not rel <= out and is_bisimulation(u, u, rel):
            out |= rel
    return frozenset(out)
