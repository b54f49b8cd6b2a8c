import itertools
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from gen import FINITE
from ultrasos.monoid import (INF, Club, FiniteMonoid, MonoidError, builtin, enumerate_clubs,
                             is_club, is_positive, is_refinement, m4, z2)


# -- brute-force references written from the definitions --------------------------

def brute_clubs(m):
    elems = m.elements()
    out = []
    for k in range(len(elems) + 1):
        for sub in itertools.combinations(elems, k):
            c = set(sub)
            ideal = all(m.add(v, w) in c for v in c for w in elems)
            rest = [e for e in elems if e not in c]
            submonoid = m.zero in rest and all(m.add(v, w) in rest for v in rest for w in rest)
            if ideal and submonoid:
                out.append(frozenset(c))
    return set(out)


def brute_positive(m):
    return not any(m.add(x, y) == m.zero for x in m.elements() for y in m.elements()
                   if x != m.zero and y != m.zero)


def brute_refinement(m):
    es = m.elements()
    for r1, r2, c1, c2 in itertools.product(es, repeat=4):
        if m.add(r1, r2) != m.add(c1, c2):
            continue
        if not any(m.add(a, b) == r1 and m.add(c, d) == r2 and m.add(a, c) == c1 and m.add(b, d) == c2
                   for a, b, c, d in itertools.product(es, repeat=4)):
            return False
    return True


# -- examples -------------------------------------------------------------------------

def test_builtin_sums():
    assert builtin("bool").add(True, False) is True
    assert builtin("nat").add(2, 3) == 5
    assert builtin("ratinf").add(INF, F(3)) is INF


def test_unknown_builtin():
    with pytest.raises(MonoidError):
        builtin("complex")


def test_bool_clubs():
    m = builtin("bool")
    assert is_club(m, Club.of([True]))
    assert {frozenset(c.resolve(m)) for c in enumerate_clubs(m)} == {frozenset(), frozenset([True])}


def test_nat_clubs_are_empty_and_nonzero():
    m = builtin("nat")
    assert enumerate_clubs(m) == [Club.empty(), Club.nonzero()]
    assert is_club(m, Club.nonzero()) and is_club(m, Club.empty())


def test_m4_clubs_and_predicates():
    m = m4()
    assert {c.describe(m) for c in enumerate_clubs(m)} == {"{}", "{a,b,1}"}
    assert is_positive(m) and not is_refinement(m)


def test_group_has_only_empty_club():
    assert [c.describe(z2()) for c in enumerate_clubs(z2())] == ["{}"]
    assert not is_positive(z2())


def test_symbolic_predicates():
    assert is_positive(builtin("nat")) and is_refinement(builtin("nat"))
    assert is_refinement(builtin("bool"))


def test_finite_table_rejects_non_associative():
    with pytest.raises(MonoidError):
        FiniteMonoid("bad", ("0", "a", "b"), "0",
                     {("a", "a"): "b", ("a", "b"): "a", ("b", "a"): "a", ("b", "b"): "a"})


@pytest.mark.parametrize("make", FINITE)
def test_predicates_match_brute_force(make):
    m = make()
    assert is_positive(m) == brute_positive(m)
    assert is_refinement(m) == brute_refinement(m)
    assert {frozenset(c.resolve(m)) for c in enumerate_clubs(m)} == brute_clubs(m)


@pytest.mark.parametrize("make", FINITE)
def test_club_biconditional(make):
    m = make()
    for c in enumerate_clubs(m):
        for v, w in itertools.product(m.elements(), repeat=2):
            assert c.contains(m, m.add(v, w)) == (c.contains(m, v) or c.contains(m, w))


@pytest.mark.parametrize("make", FINITE)
def test_declaration_round_trip(make):
    from ultrasos.specfile import parse_monoid
    m = make()
    assert parse_monoid(m.declaration()) == m


# -- properties of the infinite built-ins ------------------------------------------

rat = st.fractions(min_value=0, max_value=10, max_denominator=8)


@given(rat, rat, rat)
def test_rational_monoid_laws(a, b, c):
    m = builtin("rat")
    assert m.add(a, m.add(b, c)) == m.add(m.add(a, b), c)
    assert m.add(a, b) == m.add(b, a)
    assert m.add(a, m.zero) == a


@given(st.integers(0, 50), st.integers(0, 50))
def test_nonzero_club_biconditional_on_naturals(v, w):
    m, c = builtin("nat"), Club.nonzero()
    assert c.contains(m, m.add(v, w)) == (c.contains(m, v) or c.contains(m, w))


@given(st.integers(0, 20), st.integers(0, 20))
def test_natmax_is_join(v, w):
    assert builtin("natmax").add(v, w) == max(v, w)


@given(st.sampled_from(["bool", "nat", "natmax", "rat", "ratinf"]), st.integers(0, 9))
def test_parse_format_round_trip(name, n):
    m = builtin(name)
    v = bool(n % 2) if name == "bool" else (F(n, 4) if name.startswith("rat") else n)
    assert m.parse(m.format(v)) == v
