import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from gen import (bisimilar_pepa_pair, random_pepa, random_rate_fn, random_renaming,
                 random_weight_term)
from ultrasos import pepa
from ultrasos.monoid import Club, builtin
from ultrasos.specfile import parse_spec, parse_term
from ultrasos.terms import PhiVar, Term, Var, WTerm, hole
from ultrasos.weightfn import WeightFunction
from ultrasos.wfgsos import (Inconclusive, Rule, Trigger, bisimilar, congruence_probe, induce,
                             interpret, naturality_probe, one_step, rule_triggered, validate_rule,
                             validate_spec)

NAT = builtin("nat")

TOY = """
monoid nat
labels a b
sig c/0 d/0 e/0 k/0 f/1 g/2
wsig bot/0 oplus/2
interp bot = zero
interp oplus = sum
rule c -[a]-> oplus(d, e)
rule d -[a]-> bot
rule e -[a]-> bot
rule k -[a]-> k
rule f(x1) -[a]-> y1 when x1 -[a]-> phi1, club(phi1, nonzero) ni y1
rule g(x1, x2) -[b]-> oplus(phi1, phi2) when x1 -[a]-> phi1, x2 -[a]-> phi2, x2 -/[b]
"""


@pytest.fixture(scope="module")
def toy():
    spec = parse_spec(TOY)
    assert validate_spec(spec) == []
    return spec


def T(spec, text):
    return parse_term(text, spec.sigma)


def W(**kw):
    return WeightFunction(NAT, {Term(k): v for k, v in kw.items()})


# -- validation ---------------------------------------------------------------------

def test_pepa_rules_are_well_formed():
    spec = pepa.pepa_wfgsos_spec(frozenset("ab"))
    p = pepa.parse_pepa("((a,1).nil + (b,2).nil) <a> ((a,2).nil \\ {b})")
    for t in [p, *p.args, *p.args[0].args, *p.args[1].args]:
        for r in spec.rules_for(t):
            assert validate_rule(spec, r) == []


def test_overlap_and_unbound_diagnostics(toy):
    bad = Rule("f", ("x1",), "a", WTerm("bot"), positives=((0, "a", "phi1"),), negatives=((0, "a"),))
    assert any(d.startswith("overlapping positive/negative premises") for d in validate_rule(toy, bad))
    loose = Rule("f", ("x1",), "a", Var("z"))
    assert any(d.startswith("unbound target variable") for d in validate_rule(toy, loose))


def test_invalid_club_diagnostic(toy):
    r = Rule("f", ("x1",), "a", Var("y1"), positives=((0, "a", "phi1"),),
             clubs=(("phi1", Club.of([0]), "y1"),))
    assert any(d.startswith("invalid club") for d in validate_rule(toy, r))


def test_rule_triggered_examples():
    r = Rule("f", ("x1",), "a", WTerm("bot"), positives=((0, "a", "phi"),), negatives=((0, "c"),),
             totals=(("phi", 2),))
    assert rule_triggered(r, Trigger((frozenset("ab"),), (2,)))
    assert not rule_triggered(r, Trigger((frozenset("abc"),), (2,)))
    assert not rule_triggered(r, Trigger((frozenset("ab"),), (3,)))


# -- interpretation ---------------------------------------------------------------

def test_pepa_interpretation_examples():
    spec = pepa.pepa_wfgsos_spec(frozenset("a"))
    P = pepa.nil()
    assert interpret(spec, WTerm("bot")) == {WeightFunction(pepa.RATES)}
    assert interpret(spec, WTerm("dia", (P,), (F(3),))) == {WeightFunction(pepa.RATES, {P: F(3)})}
    phi, psi = WeightFunction(pepa.RATES, {P: F(2)}), WeightFunction(pepa.RATES, {P: F(3)})
    got = interpret(spec, WTerm("oplus", (PhiVar("f"), PhiVar("g"))), {"f": phi, "g": psi})
    assert got == {WeightFunction(pepa.RATES, {P: F(5)})}


def test_unbound_variable(toy):
    with pytest.raises(KeyError, match="unbound variable"):
        interpret(toy, PhiVar("nope"))
    with pytest.raises(KeyError, match="unbound variable"):
        interpret(toy, Var("x9"))


# -- derivation -------------------------------------------------------------------

def test_prefix_step():
    spec = pepa.pepa_wfgsos_spec(frozenset("ab"))
    out = one_step(spec, pepa.parse_pepa("(a,2).nil"))
    assert out["a"] == {WeightFunction(pepa.RATES, {pepa.nil(): F(2)})}
    assert out["b"] == {WeightFunction(pepa.RATES)}


def test_club_premise_fires_once_per_selected_state(toy):
    out = one_step(toy, T(toy, "f(c)"))
    assert out["a"] == {W(d=1), W(e=1)}


def test_negative_premise(toy):
    # k has no b-transition and c has no b-transition, so g fires
    assert one_step(toy, T(toy, "g(c, k)"))["b"] == {W(d=1, e=1, k=1)}


def test_induce_nil_and_loop(toy):
    spec = pepa.pepa_wfgsos_spec(frozenset("a"))
    u = induce(spec, [pepa.nil()])
    assert len(u.states) == 1 and not u.boundary
    assert all(u.successors(pepa.nil(), a) == {WeightFunction(pepa.RATES)} for a in u.labels)
    loop = induce(toy, [T(toy, "k")])
    assert len(loop.states) == 1
    assert sum(len(v) for v in loop.trans.values()) == 1


def test_race_and_constant_axiom(toy):
    spec = pepa.pepa_wfgsos_spec(frozenset("a"))
    p = pepa.parse_pepa("(a,2).nil + (a,3).nil")
    assert induce(spec, [p]).successors(p, "a") == {WeightFunction(pepa.RATES, {pepa.nil(): F(5)})}
    assert one_step(toy, T(toy, "c"))["a"] == {W(d=1, e=1)}


def test_budget_boundary():
    spec = pepa.pepa_wfgsos_spec(frozenset("a"))
    p = pepa.parse_pepa("(a,1).(a,1).(a,1).nil")
    u = induce(spec, [p], budget=2)
    assert len(u.states) == 2 and len(u.boundary) == 1
    with pytest.raises(Inconclusive):
        bisimilar(spec, p, pepa.parse_pepa("(a,1).(a,1).(a,1).(a,1).nil"), budget=2)
    with pytest.raises(ValueError):
        induce(spec, [p, pepa.nil()], budget=1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_audit_records_are_triggered(seed):
    rng = random.Random(seed)
    p = random_pepa(rng, 3, ("a", "b"))
    spec = pepa.pepa_wfgsos_spec(frozenset("ab"))
    out = one_step(spec, p)
    for r, trig, label, rho in spec.audit(p):
        assert rule_triggered(r, trig)
        assert rho in out[label]


# -- naturality --------------------------------------------------------------------

def test_naturality_examples():
    spec = pepa.pepa_wfgsos_spec(frozenset("ab"))
    x, y = Var("x1"), Var("x2")
    assert naturality_probe(spec, WTerm("bot"), {}, {"x1": "z"})
    par = WTerm("par", (PhiVar("phi1"), x), (frozenset("a"),))
    env = {"phi1": WeightFunction(pepa.RATES, {y: F(2)})}
    assert naturality_probe(spec, par, env, {"x1": "y1", "x2": "y2"})
    assert naturality_probe(spec, par, env, {})


def test_normalize_is_not_natural_under_merging():
    # three point masses at weight infinity; identifying two of them changes
    # how the normalised rate is spread
    spec = pepa.pepa_wfgsos_spec(frozenset("a"))
    psi = WTerm("dia", (WTerm("oplus", (WTerm("oplus", (Var("x1"), Var("x2"))), pepa.nil())),),
                (F(1),))
    assert not naturality_probe(spec, psi, {}, {"x1": "x3", "x2": "x3"})
    assert naturality_probe(spec, psi, {}, {"x1": "x3", "x2": "x4"})


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 1_000_000))
def test_naturality_under_injective_renaming(seed):
    rng = random.Random(seed)
    spec = pepa.pepa_wfgsos_spec(frozenset("ab"))
    psi = random_weight_term(rng, 3)
    env = {"phi1": random_rate_fn(rng), "phi2": random_rate_fn(rng)}
    assert naturality_probe(spec, psi, env, random_renaming(rng))


# -- congruence ------------------------------------------------------------------

def pepa_contexts():
    r = pepa.parse_pepa("(a,1).nil")
    return [pepa.prefix("b", 1, hole()), pepa.choice(hole(), r), pepa.choice(r, hole()),
            pepa.coop(hole(), {"a"}, r), pepa.hide(hole(), {"a"})]


def test_congruence_examples():
    spec = pepa.pepa_wfgsos_spec(frozenset("ab"))
    p = pepa.parse_pepa("(a,2).nil + (a,3).nil")
    q = pepa.parse_pepa("(a,3).nil + (a,2).nil")
    assert congruence_probe(spec, p, q, [pepa.prefix("b", 1, hole())])
    assert congruence_probe(spec, p, pepa.parse_pepa("(a,5).nil"),
                            [pepa.coop(hole(), {"a"}, pepa.parse_pepa("(a,1).nil"))])
    assert congruence_probe(spec, p, p, pepa_contexts())


def test_congruence_rejects_non_bisimilar_pair():
    spec = pepa.pepa_wfgsos_spec(frozenset("a"))
    with pytest.raises(ValueError):
        congruence_probe(spec, pepa.parse_pepa("(a,2).nil"), pepa.parse_pepa("(a,3).nil"), [])


@pytest.mark.parametrize("seed", range(10))
def test_congruence_random(seed):
    rng = random.Random(seed)
    p, q = bisimilar_pepa_pair(rng)
    spec = pepa.pepa_wfgsos_spec(frozenset("ab"))
    assert congruence_probe(spec, p, q, pepa_contexts())
