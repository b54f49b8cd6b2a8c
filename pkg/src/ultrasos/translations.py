"""Compiling probabilistic and weighted GSOS rules into weight-term rules.

Both source formats select support points and combine their weights.  The
compiled rules do that selection inside the interpretation: a ``subst``
operator instantiates the target template at every choice of support
points and weighs it by the rule's multiadditive combiner.  Copies of one
weight-function variable are wrapped in distinct colouring operators.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .monoid import Club, Monoid, MonoidError, RationalPlus
from .terms import PhiVar, Term, Var, WTerm
from .ultras import Wlts
from .weightfn import WeightFunction, state_key
from .wfgsos import (Convex, Guard, Identity, Interpretation, Otherwise, Poly, Rule,
                     Signature, Specification, Substitute, Sum, Zero)

__all__ = [
    "SegalaRule", "WgsosRule", "SegalaSpec", "WgsosSpec", "TranslationError",
    "validate_segala_rule", "validate_wgsos_rule", "translate_segala",
    "translate_wgsos", "wgsos_semantics", "wgsos_fires",
]

MAX_CELLS = 512


class TranslationError(ValueError):
    pass


@dataclass(frozen=True)
class SegalaRule:
    """Probabilistic GSOS rule.

    ``targets`` is a convex combination ``((w1, t1), ...)``.  Inside a target
    template, a variable named after a distribution variable stands for a
    sample of that distribution; each occurrence is an independent copy.
    """

    source: str
    xs: tuple
    label: object
    targets: tuple
    positives: tuple = ()   # (i, a, phi)
    negatives: tuple = ()   # (i, b)
    samples: tuple = ()     # (phi, y): y drawn from the support of phi
    name: str = ""


@dataclass(frozen=True)
class WgsosRule:
    """Weighted GSOS rule.

    ``weights`` are premises ``x_i -a-> w`` on total weights, ``transitions``
    are ``x_i -(b, u)-> y``, and ``beta`` is a polynomial over the ``u``'s in
    transition order.
    """

    source: str
    xs: tuple
    label: object
    beta: Poly
    target: Term | Var
    weights: tuple = ()       # (i, a, w)
    transitions: tuple = ()   # (i, b, u, y)
    name: str = ""

    @property
    def arity(self) -> int:
        return len(self.xs)


@dataclass
class SegalaSpec:
    labels: tuple
    sigma: Signature
    rules: list


@dataclass
class WgsosSpec:
    monoid: Monoid
    labels: tuple
    sigma: Signature
    rules: list


def _tvars(t) -> frozenset:
    return t.variables()


def _occurrences(t, names: set) -> list[str]:
    """Variables from ``names`` in left-to-right order, with repeats."""
    if isinstance(t, Var):
        return [t.name] if t.name in names else []
    return [n for a in t.args for n in _occurrences(a, names)]


def _rename_occurrences(t, names: set, fresh: Iterable[str]):
    it = iter(fresh)

    def go(s):
        if isinstance(s, Var):
            return Var(next(it)) if s.name in names else s
        return Term(s.op, [go(a) for a in s.args], s.params)

    return go(t)


def validate_segala_rule(r: SegalaRule, labels: Sequence, sigma: Signature) -> list[str]:
    diags = []
    if r.source not in sigma:
        diags.append(f"unknown operator: {r.source!r}")
    elif sigma.arity(r.source) != len(r.xs):
        diags.append(f"arity: {r.source} takes {sigma.arity(r.source)} arguments")
    phis = [p for _, _, p in r.positives]
    ys = [y for _, y in r.samples]
    names = list(r.xs) + ys + phis
    dup = sorted({n for n in names if names.count(n) > 1})
    if dup:
        diags.append("distinct variables: " + ", ".join(dup) + " bound more than once")
    for i in range(len(r.xs)):
        both = ({a for j, a, _ in r.positives if j == i} & {b for j, b in r.negatives if j == i})
        if both:
            diags.append(f"overlapping positive/negative premises: {r.xs[i]}")
    for phi, _ in r.samples:
        if phi not in phis:
            diags.append(f"sample premise: {phi} is not bound by a positive premise")
    for lab in [r.label] + [a for _, a, _ in r.positives] + [b for _, b in r.negatives]:
        if lab not in labels:
            diags.append(f"unknown label: {lab!r}")
    if not r.targets:
        diags.append("weights: empty convex combination")
    ws = [w for w, _ in r.targets]
    if any(not 0 < Fraction(w) <= 1 for w in ws):
        diags.append("weights: every weight must lie in (0,1]")
    if sum(map(Fraction, ws)) != 1:
        diags.append(f"weights: {' + '.join(map(str, ws))} does not sum to 1")
    allowed = set(r.xs) | set(ys) | set(phis)
    for _, t in r.targets:
        stray = _tvars(t) - allowed
        if stray:
            diags.append("unbound target variable: " + ", ".join(sorted(stray)))
    return diags


def translate_segala(spec: SegalaSpec) -> Specification:
    """Weight-term specification over the rationals inducing the same system."""
    m = RationalPlus()
    problems = [f"{r.name or f'rule {j}'}: {d}" for j, r in enumerate(spec.rules, 1)
                for d in validate_segala_rule(r, spec.labels, spec.sigma)]
    if problems:
        raise TranslationError("; ".join(problems))
    theta: dict = {}
    combs: dict = {}
    out_rules = []
    for j, r in enumerate(spec.rules, 1):
        phis = {p for _, _, p in r.positives}
        ys = [y for _, y in r.samples]
        colour = 0
        pieces = []
        for i, (w, t) in enumerate(r.targets, 1):
            occ = _occurrences(t, phis)
            holes = [f"_h{k}" for k in range(1, len(occ) + 1)]
            template = _rename_occurrences(t, phis, holes)
            term_holes = [v for v in list(r.xs) + ys if v in _tvars(t)]
            if holes:
                beta = Poly(((None, tuple(range(len(holes)))),), tuple(holes))
            else:
                beta = Poly(((Fraction(1), ()),), ())
            args = [Var(v) for v in term_holes]
            for phi in occ:
                colour += 1
                cname = f"col_{j}_{colour}"
                theta[cname], combs[cname] = 1, Identity()
                args.append(WTerm(cname, (PhiVar(phi),)))
            sname = f"subst_{j}_{i}"
            theta[sname] = len(args)
            combs[sname] = Substitute(template, term_holes, holes, beta)
            pieces.append(WTerm(sname, args))
        cname = f"convex_{j}"
        theta[cname] = len(pieces)
        combs[cname] = Convex([Fraction(w) for w, _ in r.targets])
        out_rules.append(Rule(
            r.source, tuple(r.xs), r.label, WTerm(cname, pieces),
            positives=tuple(r.positives), negatives=tuple(r.negatives),
            clubs=tuple((phi, Club.nonzero(), y) for phi, y in r.samples),
            name=r.name or f"r{j}"))
    return Specification(m, spec.labels, spec.sigma, Signature(theta), out_rules,
                         Interpretation(combs, leaf_weight=Fraction(1)))


# -- weighted GSOS -----------------------------------------------------------------

def validate_wgsos_rule(r: WgsosRule, m: Monoid, labels: Sequence, sigma: Signature) -> list[str]:
    diags = []
    if r.source not in sigma:
        diags.append(f"unknown operator: {r.source!r}")
    elif sigma.arity(r.source) != r.arity:
        diags.append(f"arity: {r.source} takes {sigma.arity(r.source)} arguments")
    us = [u for _, _, u, _ in r.transitions]
    ys = [y for _, _, _, y in r.transitions]
    names = list(r.xs) + ys + us
    dup = sorted({n for n in names if names.count(n) > 1})
    if dup:
        diags.append("distinct variables: " + ", ".join(dup) + " bound more than once")
    for i, a, w in r.weights:
        if not 0 <= i < r.arity:
            diags.append(f"premise index: argument {i + 1} out of range")
        try:
            m.check(w)
        except MonoidError as e:
            diags.append(f"weight premise: {e}")
        if a not in labels:
            diags.append(f"unknown label: {a!r}")
    for i, b, _, _ in r.transitions:
        if not 0 <= i < r.arity:
            diags.append(f"premise index: argument {i + 1} out of range")
        if b not in labels:
            diags.append(f"unknown label: {b!r}")
    if r.label not in labels:
        diags.append(f"unknown label: {r.label!r}")
    tv = r.target.variables()
    if not set(ys) <= tv:
        diags.append("target variables: " + ", ".join(sorted(set(ys) - tv)) + " unused in target")
    if not tv <= set(r.xs) | set(ys):
        diags.append("unbound target variable: " + ", ".join(sorted(tv - set(r.xs) - set(ys))))
    if tuple(r.beta.names) != tuple(us):
        diags.append("combiner: variables must be the transition weights in order")
    diags.extend(f"combiner: {p}" for p in r.beta.check(m))
    return diags


def wgsos_fires(r: WgsosRule, rows: Sequence[dict]) -> bool:
    """Is ``r`` triggered by the argument rows (``label -> WeightFunction`` per argument)?"""
    return all(rows[i][a].total() == w for i, a, w in r.weights)


def translate_wgsos(spec: WgsosSpec) -> Specification:
    """Functional weight-term specification with the same weighted transitions.

    Rules sharing source and label are merged.  One merged rule is emitted
    per combination of constants in the group's weight premises (the
    constants become total-weight premises), plus a catch-all rule for
    every other combination whose target re-checks each source rule's
    premises with ``guard`` operators.
    """
    m = spec.monoid
    problems = [f"{r.name or f'rule {j}'}: {d}" for j, r in enumerate(spec.rules, 1)
                for d in validate_wgsos_rule(r, m, spec.labels, spec.sigma)]
    if problems:
        raise TranslationError("; ".join(problems))

    theta: dict = {"zero": 0, "oplus": 2}
    combs: dict = {"zero": Zero(), "oplus": Sum()}

    def phi(i, a) -> str:
        return f"phi_{i + 1}_{a}"

    def bigsum(parts: list):
        if not parts:
            return WTerm("zero")
        acc = parts[0]
        for p in parts[1:]:
            acc = WTerm("oplus", (acc, p))
        return acc

    bodies = {}
    for j, r in enumerate(spec.rules, 1):
        term_holes = [x for x in r.xs if x in r.target.variables()]
        ys = [y for _, _, _, y in r.transitions]
        args = [Var(x) for x in term_holes]
        for k, (i, b, _, _) in enumerate(r.transitions, 1):
            cname = f"col_{j}_{k}"
            theta[cname], combs[cname] = 1, Identity()
            args.append(WTerm(cname, (PhiVar(phi(i, b)),)))
        sname = f"subst_{j}"
        theta[sname] = len(args)
        combs[sname] = Substitute(r.target, term_holes, ys,
                                  Poly(r.beta.monomials, tuple(ys)))
        bodies[j] = WTerm(sname, args)

    groups: dict = {}
    for j, r in enumerate(spec.rules, 1):
        groups.setdefault((r.source, r.label), []).append((j, r))

    out_rules = []
    for f in spec.sigma:
        n = spec.sigma.arity(f)
        xs = tuple(f"x{i}" for i in range(1, n + 1))
        for c in spec.labels:
            members = groups.get((f, c), [])
            if not members:
                out_rules.append(Rule(f, xs, c, WTerm("zero"), name=f"{f}_{c}_zero"))
                continue
            keys = sorted({(i, a) for _, r in members for i, a, _ in r.weights},
                          key=lambda k: (k[0], state_key(k[1])))
            pairs = sorted(set(keys) | {(i, b) for _, r in members for i, b, _, _ in r.transitions},
                           key=lambda k: (k[0], state_key(k[1])))
            positives = tuple((i, a, phi(i, a)) for i, a in pairs)
            if not keys:
                out_rules.append(Rule(f, xs, c, bigsum([bodies[j] for j, _ in members]),
                                      positives=positives, name=f"{f}_{c}"))
                continue
            values = [sorted({w for _, r in members for i, a, w in r.weights if (i, a) == k},
                             key=m.sort_key) for k in keys]
            n_cells = 1
            for v in values:
                n_cells *= len(v)
            cells = list(itertools.product(*values)) if n_cells <= MAX_CELLS else []
            for k, cell in enumerate(cells, 1):
                assign = dict(zip(keys, cell))
                fire = [j for j, r in members
                        if all(assign[(i, a)] == w for i, a, w in r.weights)]
                out_rules.append(Rule(
                    f, xs, c, bigsum([bodies[j] for j in fire]), positives=positives,
                    totals=tuple((phi(i, a), w) for (i, a), w in zip(keys, cell)),
                    name=f"{f}_{c}_cell{k}"))
            guarded = []
            for j, r in members:
                if r.weights:
                    gname = f"guard_{j}"
                    theta[gname] = len(r.weights) + 1
                    combs[gname] = Guard([w for _, _, w in r.weights])
                    guarded.append(WTerm(gname, [PhiVar(phi(i, a)) for i, a, _ in r.weights]
                                         + [bodies[j]]))
                else:
                    guarded.append(bodies[j])
            oname = f"otherwise_{f}_{c}"
            theta[oname] = len(keys) + 1
            combs[oname] = Otherwise(cells, width=len(keys))
            out_rules.append(Rule(
                f, xs, c, WTerm(oname, [PhiVar(phi(i, a)) for i, a in keys] + [bigsum(guarded)]),
                positives=positives, name=f"{f}_{c}_other"))
    return Specification(m, spec.labels, spec.sigma, Signature(theta), out_rules,
                         Interpretation(combs))


def wgsos_semantics(spec: WgsosSpec, roots: Iterable[Term], budget: int = 1000) -> Wlts:
    """Weighted LTS computed directly from the weighted rules.

    The weight of ``p -c-> t`` is the sum, over triggered rules and choices
    of premise successors, of ``beta`` at the premise weights.
    """
    m = spec.monoid
    memo: dict = {}
    by_source: dict = {}
    for r in spec.rules:
        by_source.setdefault((r.source, r.arity), []).append(r)

    def rows(p: Term) -> dict:
        if p in memo:
            return memo[p]
        sub = [rows(a) for a in p.args]
        acc = {c: {} for c in spec.labels}
        for r in by_source.get((p.op, p.arity), ()):
            if not wgsos_fires(r, sub):
                continue
            env = dict(zip(r.xs, p.args))
            pools = [list(sub[i][b].items()) for i, b, _, _ in r.transitions]
            for choice in itertools.product(*pools):
                sigma = dict(env)
                sigma.update((y, q) for (_, _, _, y), (q, _) in zip(r.transitions, choice))
                w = r.beta.evaluate(m, [v for _, v in choice])
                t = r.target.substitute(sigma)
                row = acc[r.label]
                row[t] = m.add(row[t], w) if t in row else w
        memo[p] = {c: WeightFunction(m, row) for c, row in acc.items()}
        return memo[p]

    roots = sorted(set(roots), key=state_key)
    seen, queue, explored, weight = set(roots), deque(roots), [], {}
    while queue and len(explored) < budget:
        p = queue.popleft()
        explored.append(p)
        fresh = set()
        for c, rho in rows(p).items():
            weight[(p, c)] = rho
            fresh |= rho.support()
        for y in sorted(fresh - seen, key=state_key):
            seen.add(y)
            queue.append(y)
    return Wlts(m, spec.labels, explored, weight)
