import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from gen import random_pepa
from ultrasos import pepa
from ultrasos.bisim import minimize
from ultrasos.pepa import (PepaSyntaxError, aggregate, apparent_rate, choice, classic_sos, coop,
                           derive_ctmc, hide, nil, parse_pepa, parse_pepa_file, prefix,
                           strong_equivalence)
from ultrasos.ultras import is_functional, to_wlts
from ultrasos.weightfn import WeightFunction


def rates(d):
    return WeightFunction(pepa.RATES, d)


def test_parse_shapes():
    assert parse_pepa("(a,2).nil + (a,3).nil") == choice(prefix("a", 2, nil()), prefix("a", 3, nil()))
    assert parse_pepa("(a,1).nil <a> (a,2).nil") == coop(prefix("a", 1, nil()), {"a"}, prefix("a", 2, nil()))
    assert parse_pepa("(a,1).nil \\ {a}") == hide(prefix("a", 1, nil()), {"a"})


def test_precedence_and_printing():
    t = parse_pepa("(a,1).nil + (b,1/2).nil <a> nil \\ {a}")
    assert t.op == "choice" and t.args[1].op == "coop" and t.args[1].args[1].op == "hide"
    for s in ["(a,1).nil + (b,1/2).nil <a> nil \\ {a}", "((a,1).nil + nil) <a,b> (b,2).nil",
              "((a,1).nil <> nil) \\ {a}", "(a,3).((b,1).nil + nil)"]:
        assert parse_pepa(str(parse_pepa(s))) == parse_pepa(s)


@pytest.mark.parametrize("bad", ["(a,0).nil", "(a,-1).nil", "(a,1).", "(a 1).nil", "nil <a nil",
                                 "Q", "(tau,1).nil \\ {tau}", "nil \\ {tau}"])
def test_syntax_errors(bad):
    with pytest.raises((PepaSyntaxError, ValueError)):
        parse_pepa(bad)


def test_file_format():
    defs, main = parse_pepa_file("A = (a,1).nil\nB = A + A  # twice\nmain B\n")
    assert main == "B" and defs["B"] == choice(defs["A"], defs["A"])
    with pytest.raises(PepaSyntaxError, match="line 1"):
        parse_pepa_file("A = (a,1).B\nB = nil\n")
    with pytest.raises(PepaSyntaxError):
        parse_pepa_file("A = nil\nA = nil\n")


def test_apparent_rate():
    assert apparent_rate(parse_pepa("(a,2).nil + (a,3).nil"), "a") == 5
    assert apparent_rate(parse_pepa("(a,2).nil <a> (a,3).nil"), "a") == 2
    assert apparent_rate(parse_pepa("(a,2).nil"), "b") == 0
    assert apparent_rate(parse_pepa("(a,2).nil \\ {a}"), "a") == 0


def test_classic_sos():
    n = nil()
    assert classic_sos(parse_pepa("(a,2).nil")) == Counter({("a", 2, n): 1})
    assert classic_sos(parse_pepa("(a,2).nil + (a,3).nil")) == Counter({("a", 2, n): 1, ("a", 3, n): 1})
    q1, q2 = parse_pepa("(b,1).nil"), parse_pepa("(c,1).nil")
    t = coop(prefix("a", 2, q1), {"a"}, prefix("a", 3, q2))
    assert classic_sos(t) == Counter({("a", 2, coop(q1, {"a"}, q2)): 1})


def test_race_and_hiding():
    p = parse_pepa("(a,2).nil + (a,3).nil")
    u = derive_ctmc(p)
    assert u.successors(p, "a") == {rates({nil(): 5})}
    h = parse_pepa("(a,1).nil \\ {a}")
    uh = derive_ctmc(h)
    assert uh.successors(h, "tau") == {rates({nil(): 1})}
    assert uh.successors(h, "a") == {rates({})}


def test_nil_is_terminal_everywhere():
    u = derive_ctmc(nil(), labels={"a", "b"})
    assert all(u.successors(nil(), a) == {rates({})} for a in u.labels)


def test_strong_equivalence_examples():
    assert strong_equivalence(parse_pepa("(a,2).nil + (a,3).nil"), parse_pepa("(a,5).nil"))
    assert not strong_equivalence(parse_pepa("(a,2).nil"), parse_pepa("(a,3).nil"))
    p = parse_pepa("(a,1).nil <a> (b,2).nil")
    assert strong_equivalence(p, p)


def test_lumping_three_states():
    p = parse_pepa("(a,1).(b,2).nil + (a,2).((b,1).nil + (b,1).nil)")
    u = derive_ctmc(p)
    q, kappa = minimize(u)
    assert len(u.states) == 4 and len(q.states) == 3
    row = next(iter(q.successors(kappa[p], "a")))
    assert row.total() == 3 and len(row) == 1


def test_undeclared_labels_rejected():
    with pytest.raises(ValueError):
        derive_ctmc(parse_pepa("(c,1).nil"), labels={"a"})


def oracle_matches(p, budget=500):
    u = derive_ctmc(p, budget)
    assert not u.boundary
    w = to_wlts(u)
    for x in u.states:
        agg = aggregate(x)
        for a in u.labels:
            if w.row(x, a) != rates(agg.get(a, {})):
                return False
    return True


@pytest.mark.parametrize("seed", range(25))
def test_derivation_matches_classic_sos(seed):
    rng = random.Random(seed)
    p = random_pepa(rng, 4)
    assert oracle_matches(p)
    assert is_functional(derive_ctmc(p))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 1_000_000))
def test_derivation_matches_classic_sos_property(seed):
    assert oracle_matches(random_pepa(random.Random(seed), 3))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 1_000_000))
def test_choice_commutes(seed):
    rng = random.Random(seed)
    p, q = random_pepa(rng, 2), random_pepa(rng, 2)
    assert strong_equivalence(choice(p, q), choice(q, p))
    assert strong_equivalence(choice(p, nil()), p)
