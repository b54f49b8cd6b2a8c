import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from gen import (all_relations, inflate, random_pair, random_segala_pair, random_system,
                 random_ultras, random_wlts_pair)
from ultrasos.bisim import (MFunction, Partition, closed_pairs, coarsest_partition, in_closure,
                            is_bisimulation, is_m_bisimulation, largest_bisimulation, lift_relation,
                            m_function_from_bisim, minimize, quotient, segala_bisim_check,
                            termination_kinds, validate_m_function, weighted_bisim_check)
from ultrasos.monoid import builtin
from ultrasos.oracles import (set_partitions, union_of_bisimilar_partitions,
                              union_of_bisimulations)
from ultrasos.ultras import Ultras, UltrasError, check_homomorphism, from_wlts
from ultrasos.weightfn import WeightFunction

NAT, RAT, BOOL = builtin("nat"), builtin("rat"), builtin("bool")


def W(m, **kw):
    return WeightFunction(m, kw)


# -- subset closure ------------------------------------------------------------------

def test_components():
    assert closed_pairs({("x1", "y1"), ("x2", "y1")}) == [(frozenset({"x1", "x2"}), frozenset({"y1"}))]
    assert closed_pairs(set()) == []
    assert closed_pairs({("x", "y")}) == [(frozenset({"x"}), frozenset({"y"}))]


def brute_closure(relation, xs, ys):
    """Smallest pairs (C, D) closed under R: every R-partner stays inside."""
    out = set()
    xs, ys = sorted(xs), sorted(ys)
    for cm in range(1, 1 << len(xs)):
        C = frozenset(x for k, x in enumerate(xs) if cm >> k & 1)
        D = frozenset(y for x, y in relation if x in C)
        if {x for x, y in relation if y in D} == C and all(any((x, y) in relation for y in D) for x in C):
            out.add((C, D))
    return out


@given(st.sets(st.tuples(st.sampled_from("pqr"), st.sampled_from("uvw")), max_size=9))
def test_closure_matches_brute_force(rel):
    for C, D in brute_closure(rel, "pqr", "uvw"):
        assert in_closure(rel, C, D)
    for C, D in closed_pairs(rel):
        assert (C, D) in brute_closure(rel, "pqr", "uvw")


def test_lifting():
    R = {("x1", "y1"), ("x2", "y1")}
    phi = W(NAT, x1=1, x2=2)
    assert lift_relation(R, phi, W(NAT, y1=3))
    assert not lift_relation(R, phi, W(NAT, y1=4))
    assert lift_relation(R, W(NAT), W(NAT))


# -- bisimulation ------------------------------------------------------------------

def test_identity_and_termination():
    u = Ultras(NAT, ["a"], ["s", "t"], {("t", "a"): {W(NAT)}})
    assert is_bisimulation(u, u, {("s", "s"), ("t", "t")})
    # stuck and terminal are told apart
    assert not is_bisimulation(u, u, {("s", "t")})
    assert not coarsest_partition(u).same_block("s", "t")


def test_probabilistic_classes():
    u = Ultras(RAT, ["a"], ["x", "p", "q"], {("x", "a"): {W(RAT, p=F(1, 2), q=F(1, 2))}})
    v = Ultras(RAT, ["a"], ["y", "r"], {("y", "a"): {W(RAT, r=1)}})
    assert is_bisimulation(u, v, {("x", "y"), ("p", "r"), ("q", "r")})


def test_isomorphic_systems_pair_up():
    u = Ultras(NAT, ["a"], ["x0", "x1"], {("x0", "a"): {W(NAT, x1=2)}})
    v = Ultras(NAT, ["a"], ["y0", "y1"], {("y0", "a"): {W(NAT, y1=2)}})
    assert largest_bisimulation(u, v).cross_relation() == {("x0", "y0"), ("x1", "y1")}


def test_chain_against_lumped_quotient():
    u = Ultras(RAT, ["a"], ["s0", "s1", "s2"],
               {("s0", "a"): {W(RAT, s1=1, s2=2)}, ("s1", "a"): {W(RAT)}, ("s2", "a"): {W(RAT)}})
    v = Ultras(RAT, ["a"], ["t0", "t1"], {("t0", "a"): {W(RAT, t1=3)}, ("t1", "a"): {W(RAT)}})
    cross = largest_bisimulation(u, v).cross_relation()
    assert cross == {("s0", "t0"), ("s1", "t1"), ("s2", "t1")}
    assert is_bisimulation(u, v, cross)


def test_minimize_is_a_homomorphism():
    rng = random.Random(3)
    for _ in range(30):
        u = random_system(rng, 6, rng.choice(["nat", "bool", "rat"]), 2)
        q, kappa = minimize(u)
        assert check_homomorphism(u, q, kappa)
        # the quotient is already minimal
        assert len(coarsest_partition(q).blocks) == len(q.states)


def test_discrete_partition_quotient_is_isomorphic():
    rng = random.Random(4)
    u = random_ultras(rng, 4, 2, "nat")
    q, kappa = quotient(u, Partition.from_classes([[x] for x in u.states]))
    assert len(q.states) == len(u.states)
    assert check_homomorphism(u, q, kappa)


def test_quotient_rejects_unstable_partition():
    u = Ultras(NAT, ["a"], ["s", "t"], {("t", "a"): {W(NAT)}})
    with pytest.raises(UltrasError):
        quotient(u, Partition.from_classes([["s", "t"]]))


@pytest.mark.parametrize("seed", range(60))
def test_refinement_matches_oracles(seed):
    rng = random.Random(seed)
    m = rng.choice(["nat", "bool", "rat"])
    u1, u2 = random_pair(rng, 6, m, rng.randint(1, 2))
    assert largest_bisimulation(u1, u2).cross_relation() == union_of_bisimulations(u1, u2)
    u = random_system(rng, 6, m, 2)
    assert coarsest_partition(u).relation() == union_of_bisimilar_partitions(u)


def test_inflate_gives_bisimilar_copy():
    rng = random.Random(5)
    for _ in range(50):
        u = random_ultras(rng, 3, 2, rng.choice(["nat", "bool", "rat"]), "x")
        v = inflate(rng, u, 6, "y")
        cross = largest_bisimulation(u, v).cross_relation()
        assert {x for x, _ in cross} == u.states


def test_set_partitions_counts():
    assert [sum(1 for _ in set_partitions(list(range(n)))) for n in range(6)] == [1, 1, 2, 5, 15, 52]


# -- classic characterisations ---------------------------------------------------------

def test_weighted_check_trivia():
    rng = random.Random(6)
    w1, w2 = random_wlts_pair(rng, 5, "nat")
    assert weighted_bisim_check(w1, w2, set())
    assert weighted_bisim_check(w1, w1, {(x, x) for x in w1.states})


@pytest.mark.parametrize("seed", range(30))
def test_weighted_coincidence(seed):
    rng = random.Random(seed)
    w1, w2 = random_wlts_pair(rng, 5, rng.choice(["nat", "rat", "bool"]))
    u1, u2 = from_wlts(w1), from_wlts(w2)
    for R in all_relations(sorted(w1.states), sorted(w2.states)):
        assert is_bisimulation(u1, u2, R) == weighted_bisim_check(w1, w2, R)


@pytest.mark.parametrize("seed", range(30))
def test_segala_coincidence(seed):
    rng = random.Random(seed)
    u1, u2 = random_segala_pair(rng, 5)
    assert segala_bisim_check(u1, u2, set())
    for R in all_relations(u1.sorted_states(), u2.sorted_states()):
        assert is_bisimulation(u1, u2, R) == segala_bisim_check(u1, u2, R)


def lts_partition(states, edges, labels):
    """Naive fixpoint for strong bisimilarity on a plain LTS."""
    rel = {(x, y) for x in states for y in states}
    while True:
        keep = {(x, y) for x, y in rel
                if all(any((x2, y2) in rel for y2 in edges.get((y, a), ())) for a in labels
                       for x2 in edges.get((x, a), ()))
                and all(any((x2, y2) in rel for x2 in edges.get((x, a), ())) for a in labels
                        for y2 in edges.get((y, a), ()))}
        if keep == rel:
            return rel
        rel = keep


@pytest.mark.parametrize("seed", range(20))
def test_dirac_segala_is_plain_lts(seed):
    rng = random.Random(seed)
    states = [f"s{i}" for i in range(rng.randint(1, 5))]
    edges = {(x, a): set(rng.sample(states, rng.randint(0, min(2, len(states))))) for x in states for a in "ab"}
    u = Ultras(RAT, ["a", "b"], states,
               {k: {W(RAT, **{y: 1}) for y in v} for k, v in edges.items()})
    expected = lts_partition(states, edges, "ab")
    assert coarsest_partition(u).relation() == expected
    assert segala_bisim_check(u, u, expected)


# -- M-functions --------------------------------------------------------------------

def test_m_function_bottom_clauses():
    u = Ultras(NAT, ["a", "b"], ["x", "y"],
               {("x", "a"): {W(NAT, y=2)}, ("y", "a"): {W(NAT)}, ("y", "b"): {W(NAT)},
                ("x", "b"): {W(NAT)}})
    part = coarsest_partition(u)
    mf = m_function_from_bisim(u, part)
    assert validate_m_function(mf, u)
    assert is_m_bisimulation(mf, u, part)
    idx_y = next(i for i, b in enumerate(mf.classes) if "y" in b)
    idx_x = next(i for i, b in enumerate(mf.classes) if "x" in b)
    assert mf("y", "a", {idx_y}) == mf.bottom
    assert mf("x", "a", {idx_x}) == mf.bottom
    assert mf("x", "a", {idx_y}) != mf.bottom


def test_stuck_measure_is_bottom():
    u = Ultras(NAT, ["a"], ["x"], {})
    mf = m_function_from_bisim(u, coarsest_partition(u))
    assert mf("x", "a", {0}) == mf.bottom


def test_validate_rejects_bottom_violation():
    u = Ultras(NAT, ["a"], ["x"], {("x", "a"): {W(NAT)}})
    mf = MFunction((("x",),), ("a",), "bot", lambda x, a, cs: "top")
    assert not validate_m_function(mf, u)


def test_validate_rejects_union_inconsistency():
    # x and y agree on {c1} and on {c2} separately but not on {c1, c2}
    u = Ultras(NAT, ["a"], ["x", "y", "c1", "c2"],
               {("x", "a"): {W(NAT, c1=1, c2=1)}, ("y", "a"): {W(NAT, c1=1, c2=1)},
                ("c1", "a"): {W(NAT)}, ("c2", "a"): {W(NAT)}})
    classes = (("c1",), ("c2",), ("x",), ("y",))
    table = {("x", frozenset({0, 1})): 2, ("y", frozenset({0, 1})): 3}

    def fn(x, a, cs):
        if x in ("c1", "c2") or not cs & {0, 1}:
            return 0
        return table.get((x, cs & {0, 1}), 1)

    mf = MFunction(classes, ("a",), 0, fn)
    assert not validate_m_function(mf, u)


@pytest.mark.parametrize("seed", range(25))
def test_m_function_from_random_bisimulations(seed):
    rng = random.Random(seed)
    u = random_system(rng, 5, rng.choice(["nat", "bool", "rat"]), 2, single_kind=True)
    assert all(len(k) <= 1 for k in termination_kinds(u).values())
    part = coarsest_partition(u)
    mf = m_function_from_bisim(u, part)
    assert validate_m_function(mf, u)
    assert is_m_bisimulation(mf, u, part)


def test_mixed_termination_is_rejected():
    u = Ultras(NAT, ["a"], ["s", "t"], {("t", "a"): {W(NAT)}})
    with pytest.raises(UltrasError):
        m_function_from_bisim(u, coarsest_partition(u))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_bisimilarity_is_an_equivalence(seed):
    rng = random.Random(seed)
    u = random_system(rng, 6, rng.choice(["nat", "bool", "rat"]), 2)
    rel = coarsest_partition(u).relation()
    assert is_bisimulation(u, u, rel)
    assert all((y, x) in rel for x, y in rel)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_union_partition_restricts_to_each_side(seed):
    rng = random.Random(seed)
    u1, u2 = random_pair(rng, 6, rng.choice(["nat", "rat"]), 2)
    p = largest_bisimulation(u1, u2)
    assert p.side(0).relation() == coarsest_partition(u1).relation()
    assert p.side(1).relation() == coarsest_partition(u2).relation()
