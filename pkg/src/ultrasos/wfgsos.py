"""Rule specifications over weight terms and the systems they induce.

A specification pairs a process signature with a weight signature.  Rules
conclude ``f(x1..xn) -c-> psi`` where ``psi`` is a weight term; each weight
operator is given meaning by a combinator that maps weight functions over
process terms to finite sets of weight functions over process terms.
Ground terms then get their transitions by structural recursion.
"""
from __future__ import annotations

import itertools
import threading
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .bisim import coarsest_partition
from .monoid import INF, Monoid, MonoidError, RationalPlus, is_club
from .terms import PhiVar, Term, Var, WTerm, plug, weight_leaves
from .ultras import Ultras
from .weightfn import WeightFunction, state_key

__all__ = [
    "Signature", "Poly", "Combinator", "Zero", "PointMass", "Normalize", "Sum",
    "RateLaw", "Context", "Union", "Singleton", "Identity", "Substitute",
    "Convex", "Guard", "Otherwise", "Interpretation", "Rule", "Trigger",
    "Specification", "Inconclusive", "validate_rule", "validate_spec",
    "rule_triggered", "interpret", "one_step", "induce", "naturality_probe",
    "congruence_probe", "bisimilar",
]


class Inconclusive(Exception):
    """A comparison needed states beyond the exploration budget."""


class Signature:
    """Operator names with arities."""

    def __init__(self, ops: Mapping[str, int] | Iterable[tuple[str, int]] = ()):
        items = ops.items() if isinstance(ops, Mapping) else ops
        self.ops: dict[str, int] = {}
        for name, n in items:
            if name in self.ops:
                raise ValueError(f"operator {name!r} declared twice")
            if n < 0:
                raise ValueError(f"negative arity for {name!r}")
            self.ops[name] = n

    def __contains__(self, name):
        return name in self.ops

    def arity(self, name) -> int:
        return self.ops[name]

    def __iter__(self):
        return iter(self.ops)

    def __len__(self):
        return len(self.ops)

    def __eq__(self, other):
        return isinstance(other, Signature) and self.ops == other.ops

    def __repr__(self):
        return "Signature(" + ", ".join(f"{k}/{v}" for k, v in self.ops.items()) + ")"


# -- multiadditive weight polynomials ---------------------------------------

@dataclass(frozen=True)
class Poly:
    """Sum of monomials ``coeff * u_i * u_j ...`` over weight variables.

    ``coeff`` of ``None`` means no scalar factor, which keeps polynomials
    usable over monoids without multiplication as long as every monomial
    is a single variable or a bare constant.
    """

    monomials: tuple  # ((coeff | None, (var index, ...)), ...)
    names: tuple = ()

    def arity(self) -> int:
        return len(self.names)

    def check(self, m: Monoid) -> list[str]:
        problems = []
        for coeff, vs in self.monomials:
            if len(set(vs)) != len(vs):
                problems.append("a variable repeats inside a monomial, so the map is not multiadditive")
            if not m.has_mul and (len(vs) > 1 or (coeff is not None and vs)):
                problems.append(f"monoid {m.name} has no multiplication for {self.format(m)}")
            if coeff is None and not vs:
                problems.append("empty monomial")
            if coeff is not None:
                try:
                    m.check(coeff)
                except MonoidError as e:
                    problems.append(str(e))
        return problems

    def evaluate(self, m: Monoid, values: Sequence):
        total = m.zero
        for coeff, vs in self.monomials:
            term = coeff
            for i in vs:
                term = values[i] if term is None else m.mul(term, values[i])
            total = m.add(total, term)
        return total

    def format(self, m: Monoid | None = None) -> str:
        fmt = m.format if m is not None else str
        parts = []
        for coeff, vs in self.monomials:
            factors = ([] if coeff is None else [fmt(coeff)]) + [self.names[i] for i in vs]
            parts.append("*".join(factors))
        return " + ".join(parts) if parts else "0"


# -- combinators --------------------------------------------------------------

class Combinator:
    """Meaning of one weight operator.

    Subclasses usually implement :meth:`point`, which acts on one weight
    function per argument; :meth:`apply` lifts it over argument sets.
    ``arity`` of ``None`` accepts any number of arguments.
    """

    arity: int | None = None
    #: True when the combinator commutes with every substitution, including
    #: non-injective ones.  Renamings are always safe.
    natural: bool = True

    def apply(self, m: Monoid, params: tuple, args: list[frozenset]) -> frozenset:
        return frozenset(self.point(m, params, fns) for fns in itertools.product(*args))

    def point(self, m: Monoid, params: tuple, fns: tuple) -> WeightFunction:
        raise NotImplementedError

    def source(self, m: Monoid) -> str:
        raise NotImplementedError

    def check(self, m: Monoid) -> list[str]:
        return []

    def __eq__(self, other):
        return type(self) is type(other) and self.__dict__ == other.__dict__

    def __hash__(self):
        return hash(type(self).__name__)

    def __repr__(self):
        return f"<{type(self).__name__}>"


class Zero(Combinator):
    arity = 0

    def point(self, m, params, fns):
        return WeightFunction(m)

    def source(self, m):
        return "zero"


class PointMass(Combinator):
    """Reweights every support element of the argument to ``w``.

    Applied to a process leaf this is the point mass at that term.
    """

    arity = 1
    natural = False

    def __init__(self, w):
        self.w = w

    def point(self, m, params, fns):
        return WeightFunction(m, {t: self.w for t in fns[0].support()})

    def source(self, m):
        return f"pointmass({m.format(self.w)})"

    def check(self, m):
        try:
            m.check(self.w)
        except MonoidError as e:
            return [str(e)]
        return []


def _require_rational(m: Monoid, what: str):
    if not isinstance(m, RationalPlus):
        raise MonoidError(f"{what} needs rational weights, not {m.name}")


def _div(m: Monoid, v, n):
    if v is INF:
        return INF
    return Fraction(v) / n


class Normalize(Combinator):
    """Spreads total ``rate`` uniformly over the argument's support.

    With ``rate=None`` the rate is read from the operator's first parameter.
    An empty support yields the zero function.
    """

    arity = 1
    natural = False

    def __init__(self, rate=None):
        self.rate = rate

    def point(self, m, params, fns):
        r = self.rate if self.rate is not None else params[0]
        supp = fns[0].support()
        if not supp:
            return WeightFunction(m)
        share = _div(m, r, len(supp))
        return WeightFunction(m, {t: share for t in supp})

    def source(self, m):
        return "normalize" if self.rate is None else f"normalize({m.format(self.rate)})"

    def check(self, m):
        if not isinstance(m, RationalPlus):
            return [f"normalize needs rational weights, not {m.name}"]
        return []


class Sum(Combinator):
    """Pointwise sum of all arguments."""

    def point(self, m, params, fns):
        out = WeightFunction(m)
        for f in fns:
            out = out + f
        return out

    def source(self, m):
        return "sum"


def _ratio(v, total):
    """``v / total`` where an infinite total is dominated by its infinite entries."""
    if total is INF:
        return Fraction(1) if v is INF else Fraction(0)
    return Fraction(v) / Fraction(total)


def _combine(how: str, m: Monoid, a, b):
    if how == "min":
        if a is INF:
            return b
        if b is INF:
            return a
        return min(a, b)
    if how == "product":
        return m.mul(a, b)
    return m.add(a, b)


class RateLaw(Combinator):
    """Synchronisation of two weight functions.

    ``t1, t2`` receive ``phi(t1)/<phi> * psi(t2)/<psi> * comb(<phi>, <psi>)``
    on the term ``ctor[params](t1, t2)``.
    """

    arity = 2
    COMBINERS = ("min", "product", "sum")

    def __init__(self, ctor: str, combine: str = "min"):
        if combine not in self.COMBINERS:
            raise ValueError(f"unknown total combiner {combine!r}")
        self.ctor = ctor
        self.combine = combine

    def point(self, m, params, fns):
        _require_rational(m, "ratelaw")
        phi, psi = fns
        if not phi or not psi:
            return WeightFunction(m)
        tp, tq = phi.total(), psi.total()
        scale = _combine(self.combine, m, tp, tq)
        out = {}
        for t1, v1 in phi.items():
            r1 = _ratio(v1, tp)
            for t2, v2 in psi.items():
                w = m.mul(m.mul(r1, _ratio(v2, tq)), scale)
                out[Term(self.ctor, (t1, t2), params)] = w
        return WeightFunction(m, out)

    def source(self, m):
        return f"ratelaw({self.ctor}, {self.combine})"

    def check(self, m):
        if not isinstance(m, RationalPlus):
            return [f"ratelaw needs rational weights, not {m.name}"]
        return []


class Context(Combinator):
    """Pushes the argument forward along ``t -> K[t]``."""

    arity = 1

    def __init__(self, context: Term):
        self.context = context

    def point(self, m, params, fns):
        return fns[0].pushforward(lambda t: plug(self.context, t))

    def source(self, m):
        return f"context({self.context})"


class Union(Combinator):
    """Set union of the argument outcomes."""

    def apply(self, m, params, args):
        return frozenset().union(*args)

    def source(self, m):
        return "union"


class Singleton(Combinator):
    """Passes a one-argument outcome through unchanged."""

    arity = 1

    def point(self, m, params, fns):
        return fns[0]

    def source(self, m):
        return "singleton"


class Identity(Singleton):
    """Colouring operator: semantically the identity."""

    def source(self, m):
        return "id"


class Substitute(Combinator):
    """Instantiates a process-term template from weighted arguments.

    The first ``len(term_holes)`` arguments supply terms (their weights are
    ignored; in rules they are process leaves).  The remaining arguments
    supply a term and a weight for each weighted hole; the weights of one
    choice of support points are combined by ``beta``.  Because ``beta`` is
    multiadditive, the result commutes with pushforward.
    """

    def __init__(self, template: Term | Var, term_holes: Sequence[str],
                 weighted_holes: Sequence[str], beta: Poly):
        self.template = template
        self.term_holes = tuple(term_holes)
        self.weighted_holes = tuple(weighted_holes)
        if beta.arity() != len(self.weighted_holes):
            raise ValueError("beta arity must match the weighted holes")
        self.beta = beta

    @property
    def arity(self):
        return len(self.term_holes) + len(self.weighted_holes)

    def point(self, m, params, fns):
        holes = self.term_holes + self.weighted_holes
        k = len(self.term_holes)
        out = {}
        for choice in itertools.product(*(f.items() for f in fns)):
            sigma = {h: t for h, (t, _) in zip(holes, choice)}
            w = self.beta.evaluate(m, [v for _, v in choice[k:]])
            t = self.template.substitute(sigma)
            out[t] = m.add(out[t], w) if t in out else w
        return WeightFunction(m, out)

    def source(self, m):
        return (f"subst({self.template}; terms={' '.join(self.term_holes)}; "
                f"weights={' '.join(self.weighted_holes)}; beta={self.beta.format(m)})")

    def check(self, m):
        return self.beta.check(m)


class Convex(Combinator):
    """``w1 * f1 + ... + wk * fk``."""

    def __init__(self, weights: Sequence):
        self.weights = tuple(weights)

    @property
    def arity(self):
        return len(self.weights)

    def point(self, m, params, fns):
        out = WeightFunction(m)
        for w, f in zip(self.weights, fns):
            out = out + WeightFunction(m, {t: m.mul(w, v) for t, v in f.items()})
        return out

    def source(self, m):
        return "convex(" + " ".join(m.format(w) for w in self.weights) + ")"

    def check(self, m):
        return [] if m.has_mul else [f"convex needs multiplication, absent in {m.name}"]


class Guard(Combinator):
    """Body (last argument) when the leading arguments have the given totals, else zero."""

    def __init__(self, totals: Sequence):
        self.totals = tuple(totals)

    @property
    def arity(self):
        return len(self.totals) + 1

    def point(self, m, params, fns):
        if all(f.total() == w for f, w in zip(fns, self.totals)):
            return fns[-1]
        return WeightFunction(m)

    def source(self, m):
        return "guard(" + " ".join(m.format(w) for w in self.totals) + ")"


class Otherwise(Combinator):
    """Body (last argument) unless the leading totals form one of ``cells``.

    Inside a cell the result is the empty set, not the zero function, so a
    catch-all rule adds no transition where a more specific rule fires.
    """

    def __init__(self, cells: Iterable[Sequence], width: int | None = None):
        self.cells = frozenset(tuple(c) for c in cells)
        widths = {len(c) for c in self.cells} | ({width} if width is not None else set())
        if len(widths) > 1:
            raise ValueError("cells must have equal width")
        self.width = widths.pop() if widths else 0

    @property
    def arity(self):
        return self.width + 1

    def apply(self, m, params, args):
        return frozenset(fns[-1] for fns in itertools.product(*args)
                         if tuple(f.total() for f in fns[:-1]) not in self.cells)

    def source(self, m):
        cells = sorted(self.cells, key=lambda c: tuple(m.sort_key(v) for v in c))
        return "otherwise(" + " | ".join(" ".join(m.format(v) for v in c) for c in cells) + ")"


@dataclass
class Interpretation:
    """Combinator per weight operator, plus the weight given to process leaves."""

    combinators: dict
    leaf_weight: object = None

    def leaf(self, m: Monoid):
        if self.leaf_weight is not None:
            return self.leaf_weight
        if m.one is not None:
            return m.one
        return next(e for e in m.elements() if e != m.zero)


# -- rules ----------------------------------------------------------------------

@dataclass(frozen=True)
class Rule:
    """``source(xs) -label-> target`` under four premise families.

    Premise indices are 0-based argument positions.
    ``params`` restricts the rule to operator instances carrying exactly
    those parameters; ``None`` matches any.
    """

    source: str
    xs: tuple
    label: object
    target: object
    positives: tuple = ()   # (i, a, phi)
    negatives: tuple = ()   # (i, b)
    totals: tuple = ()      # (phi, w)
    clubs: tuple = ()       # (phi, Club, y)
    params: tuple | None = None
    name: str = ""

    @property
    def arity(self) -> int:
        return len(self.xs)

    def positive_labels(self, i) -> frozenset:
        return frozenset(a for j, a, _ in self.positives if j == i)

    def negative_labels(self, i) -> frozenset:
        return frozenset(b for j, b in self.negatives if j == i)

    def multiplicity(self, i, a) -> int:
        return sum(1 for j, b, _ in self.positives if (j, b) == (i, a))


@dataclass(frozen=True)
class Trigger:
    """Enabled labels per argument and the observed totals of the weight premises."""

    enabled: tuple
    weights: tuple = ()


def rule_triggered(r: Rule, t: Trigger) -> bool:
    if len(t.enabled) != r.arity:
        raise ValueError(f"trigger for {len(t.enabled)} arguments, rule has {r.arity}")
    if len(t.weights) != len(r.totals):
        raise ValueError("trigger weight vector does not match the rule's weight premises")
    for i, c in enumerate(t.enabled):
        if not r.positive_labels(i) <= c or r.negative_labels(i) & c:
            return False
    return all(v == w for (_, w), v in zip(r.totals, t.weights))


@dataclass
class Specification:
    """Monoid, labels, both signatures, rules and interpretation.

    ``providers`` generate rules on demand for parametric operators: each is
    called with a term and returns the rules whose source matches it.
    """

    monoid: Monoid
    labels: tuple
    sigma: Signature
    theta: Signature
    rules: list
    interpretation: Interpretation
    providers: tuple = ()
    _memo: dict = field(default_factory=dict, repr=False, compare=False)
    _audit: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self):
        self.labels = tuple(sorted(set(self.labels), key=state_key))
        self.rules = list(self.rules)
        self._index: dict = {}
        for r in self.rules:
            self._index.setdefault((r.source, r.arity), []).append(r)

    def __deepcopy__(self, memo):
        # immutable apart from caches; sharing keeps memoised derivations
        return self

    def rules_for(self, p: Term) -> list:
        found = [r for r in self._index.get((p.op, p.arity), ())
                 if r.params is None or r.params == p.params]
        for provide in self.providers:
            found.extend(provide(p))
        return found

    def audit(self, p: Term) -> list:
        """Derivation records ``(rule, trigger, label, rho)`` for a computed term."""
        one_step(self, p)
        return list(self._audit.get(p, ()))


# -- validation ---------------------------------------------------------------

def _theta_problems(spec: Specification, psi, where: str) -> list[str]:
    out = []
    if isinstance(psi, WTerm):
        if psi.op not in spec.theta:
            out.append(f"unknown weight operator: {psi.op!r} in {where}")
        else:
            n = spec.theta.arity(psi.op)
            if n != len(psi.args):
                out.append(f"arity: weight operator {psi.op} takes {n} arguments, got {len(psi.args)}")
            if psi.op not in spec.interpretation.combinators:
                out.append(f"uninterpreted weight operator: {psi.op}")
        for a in psi.args:
            out.extend(_theta_problems(spec, a, where))
    elif isinstance(psi, Term):
        out.extend(_sigma_problems(spec, psi))
    elif isinstance(psi, WeightFunction) and psi.monoid != spec.monoid:
        out.append("weight function constant over a different monoid")
    return out


def _sigma_problems(spec: Specification, t) -> list[str]:
    if not isinstance(t, Term):
        return []
    out = []
    if t.op in spec.sigma and spec.sigma.arity(t.op) != t.arity:
        out.append(f"arity: operator {t.op} takes {spec.sigma.arity(t.op)} arguments, got {t.arity}")
    elif t.op not in spec.sigma and not spec.providers:
        out.append(f"unknown operator: {t.op!r}")
    for a in t.args:
        out.extend(_sigma_problems(spec, a))
    return out


def validate_rule(spec: Specification, r: Rule) -> list[str]:
    """Clause-named diagnostics; empty when the rule is well formed."""
    diags: list[str] = []
    m = spec.monoid
    labels = set(spec.labels)
    if r.source in spec.sigma:
        if spec.sigma.arity(r.source) != r.arity:
            diags.append(f"arity: {r.source} takes {spec.sigma.arity(r.source)} arguments, "
                         f"rule has {r.arity}")
    elif not spec.providers:
        diags.append(f"unknown operator: {r.source!r}")
    if r.label not in labels:
        diags.append(f"unknown label: conclusion label {r.label!r}")

    phis = [phi for _, _, phi in r.positives]
    ys = [y for _, _, y in r.clubs]
    names = list(r.xs) + ys + phis
    dup = sorted({n for n in names if names.count(n) > 1})
    if dup:
        diags.append("distinct variables: " + ", ".join(dup) + " bound more than once")

    for i, a, _ in r.positives:
        if not 0 <= i < r.arity:
            diags.append(f"premise index: argument {i + 1} out of range")
        if a not in labels:
            diags.append(f"unknown label: premise label {a!r}")
    for i, b in r.negatives:
        if not 0 <= i < r.arity:
            diags.append(f"premise index: argument {i + 1} out of range")
        if b not in labels:
            diags.append(f"unknown label: premise label {b!r}")
    for i in range(r.arity):
        both = r.positive_labels(i) & r.negative_labels(i)
        if both:
            diags.append(f"overlapping positive/negative premises: {r.xs[i]} on "
                         + ", ".join(sorted(map(str, both))))

    phi_set = set(phis)
    for phi, w in r.totals:
        if phi not in phi_set:
            diags.append(f"total-weight premise: {phi} is not bound by a positive premise")
        try:
            m.check(w)
        except MonoidError as e:
            diags.append(f"total-weight premise: {e}")
    for phi, club, _ in r.clubs:
        if phi not in phi_set:
            diags.append(f"club premise: {phi} is not bound by a positive premise")
        if not is_club(m, club):
            diags.append(f"invalid club: {club.describe(m)} is not a club of {m.name}")

    proc_ok = set(r.xs) | set(ys)
    bad = set()
    for leaf in weight_leaves(r.target):
        if isinstance(leaf, PhiVar):
            if leaf.name not in phi_set:
                bad.add(leaf.name)
        elif isinstance(leaf, (Term, Var)):
            bad |= leaf.variables() - proc_ok
        elif isinstance(leaf, WeightFunction):
            for t in leaf.support():
                if isinstance(t, (Term, Var)):
                    bad |= t.variables() - proc_ok
    if bad:
        diags.append("unbound target variable: " + ", ".join(sorted(bad)))
    diags.extend(_theta_problems(spec, r.target, "target"))
    return diags


def validate_spec(spec: Specification) -> list[str]:
    diags = []
    for op in spec.theta:
        comb = spec.interpretation.combinators.get(op)
        if comb is None:
            diags.append(f"uninterpreted weight operator: {op}")
            continue
        n = spec.theta.arity(op)
        if comb.arity is not None and comb.arity != n:
            diags.append(f"arity: combinator for {op} takes {comb.arity} arguments, declared {n}")
        diags.extend(f"combinator {op}: {p}" for p in comb.check(spec.monoid))
    for op in spec.interpretation.combinators:
        if op not in spec.theta:
            diags.append(f"interpretation for undeclared weight operator: {op}")
    clash = set(spec.sigma) & set(spec.theta)
    if clash:
        diags.append("distinct signatures: " + ", ".join(sorted(clash)) + " in both")
    for k, r in enumerate(spec.rules):
        tag = r.name or f"rule {k + 1}"
        diags.extend(f"{tag}: {d}" for d in validate_rule(spec, r))
    return diags


# -- interpretation -------------------------------------------------------------

def _subst_leaf(leaf, sub: Mapping):
    if isinstance(leaf, (Term, Var)):
        return leaf.substitute(sub)
    if isinstance(leaf, WeightFunction):
        return leaf.pushforward(lambda t: t.substitute(sub) if isinstance(t, (Term, Var)) else t)
    return leaf


def _map_leaves(psi, fn):
    if isinstance(psi, WTerm):
        return WTerm(psi.op, (_map_leaves(a, fn) for a in psi.args), psi.params)
    return fn(psi)


def interpret(spec: Specification, psi, env: Mapping | None = None, *,
              allow_open: bool = False) -> frozenset:
    """Evaluate a weight term.

    ``env`` binds weight-function variables to weight functions and process
    variables to process terms.  Free process variables are an error unless
    ``allow_open`` is set, in which case they stay symbolic.
    """
    env = env or {}
    procs = {k: v for k, v in env.items() if isinstance(v, (Term, Var))}
    m = spec.monoid
    leaf_w = spec.interpretation.leaf(m)

    def ev(node) -> frozenset:
        if isinstance(node, WTerm):
            comb = spec.interpretation.combinators.get(node.op)
            if comb is None:
                raise KeyError(f"uninterpreted weight operator {node.op!r}")
            return comb.apply(m, node.params, [ev(a) for a in node.args])
        if isinstance(node, PhiVar):
            val = env.get(node.name)
            if not isinstance(val, WeightFunction):
                raise KeyError(f"unbound variable {node.name!r}")
            return frozenset([val])
        if isinstance(node, WeightFunction):
            return frozenset([_subst_leaf(node, procs)])
        if isinstance(node, (Term, Var)):
            t = node.substitute(procs)
            if not allow_open and not t.is_ground:
                raise KeyError(f"unbound variable {sorted(t.variables())[0]!r}")
            return frozenset([WeightFunction(m, {t: leaf_w})])
        raise TypeError(f"not a weight term: {node!r}")

    return ev(psi)


# -- derivation -------------------------------------------------------------------

def _fire(spec: Specification, r: Rule, p: Term, sub: list, records: list):
    enabled = tuple(frozenset(a for a, fns in s.items() if fns) for s in sub)
    if not all(r.positive_labels(i) <= enabled[i] and not (r.negative_labels(i) & enabled[i])
               for i in range(r.arity)):
        return
    wanted: dict = {}
    for phi, w in r.totals:
        wanted.setdefault(phi, []).append(w)
    pools = []
    for i, a, phi in r.positives:
        cands = [f for f in sub[i][a] if all(f.total() == w for w in wanted.get(phi, ()))]
        if not cands:
            return
        pools.append(sorted(cands, key=lambda f: f.sort_key()))
    phi_names = [phi for _, _, phi in r.positives]
    for choice in itertools.product(*pools):
        theta = dict(zip(phi_names, choice))
        trig = Trigger(enabled, tuple(theta[phi].total() for phi, _ in r.totals))
        ysets = [sorted(theta[phi].select(club), key=state_key) for phi, club, _ in r.clubs]
        for ychoice in itertools.product(*ysets):
            env = dict(theta)
            env.update(zip(r.xs, p.args))
            env.update(zip((y for _, _, y in r.clubs), ychoice))
            for rho in interpret(spec, r.target, env):
                records.append((r, trig, r.label, rho))


def one_step(spec: Specification, p: Term) -> dict:
    """Outcome of a ground term: label -> frozenset of weight functions.

    Absent labels are stuck.  Results are memoised per specification.
    """
    hit = spec._memo.get(p)
    if hit is not None:
        return hit
    if not isinstance(p, Term) or not p.is_ground:
        raise ValueError(f"one_step needs a ground term, got {p}")
    # explicit stack instead of recursion so deep terms do not hit the limit
    stack = [(p, False)]
    while stack:
        t, ready = stack.pop()
        if t in spec._memo:
            continue
        if not ready:
            stack.append((t, True))
            stack.extend((a, False) for a in t.args if a not in spec._memo)
            continue
        sub = [spec._memo[a] for a in t.args]
        records: list = []
        for r in spec.rules_for(t):
            _fire(spec, r, t, sub, records)
        out: dict = {}
        for _, _, label, rho in records:
            out.setdefault(label, set()).add(rho)
        result = {a: frozenset(fns) for a, fns in out.items()}
        with spec._lock:
            spec._memo.setdefault(t, result)
            spec._audit.setdefault(t, records)
    return spec._memo[p]


def induce(spec: Specification, roots: Iterable[Term], budget: int = 1000) -> Ultras:
    """Breadth-first closure of :func:`one_step`; unexplored states form the boundary."""
    roots = sorted(set(roots), key=state_key)
    if budget < max(1, len(roots)):
        raise ValueError(f"budget {budget} is smaller than the {len(roots)} roots")
    seen = set(roots)
    queue = deque(roots)
    explored, trans = [], {}
    while queue and len(explored) < budget:
        p = queue.popleft()
        explored.append(p)
        out = one_step(spec, p)
        fresh = set()
        for a, fns in out.items():
            trans[(p, a)] = fns
            for rho in fns:
                fresh |= rho.support()
        for y in sorted(fresh - seen, key=state_key):
            seen.add(y)
            queue.append(y)
    return Ultras(spec.monoid, spec.labels, explored, trans, queue)


# -- probes -------------------------------------------------------------------------

def _as_sub(sigma: Mapping) -> dict:
    return {k: (Var(v) if isinstance(v, str) else v) for k, v in sigma.items()}


def naturality_probe(spec: Specification, psi, env: Mapping, sigma: Mapping) -> bool:
    """Does interpreting then substituting agree with substituting then interpreting?"""
    env = dict(env or {})
    procs = {k: v for k, v in env.items() if isinstance(v, (Term, Var))}
    phis = {k: v for k, v in env.items() if isinstance(v, WeightFunction)}
    sub = _as_sub(sigma)
    base = _map_leaves(psi, lambda leaf: _subst_leaf(leaf, procs))

    def act(t):
        return t.substitute(sub) if isinstance(t, (Term, Var)) else t

    left = {rho.pushforward(act) for rho in interpret(spec, base, phis, allow_open=True)}
    moved = _map_leaves(base, lambda leaf: _subst_leaf(leaf, sub))
    moved_env = {k: v.pushforward(act) for k, v in phis.items()}
    right = set(interpret(spec, moved, moved_env, allow_open=True))
    return left == right


def bisimilar(spec: Specification, p: Term, q: Term, budget: int = 1000) -> bool:
    """Are two ground terms bisimilar in the induced system?

    Raises :class:`Inconclusive` when exploration hits the budget.
    """
    u = induce(spec, {p, q}, budget)
    if u.boundary:
        raise Inconclusive(f"budget {budget} exhausted with {len(u.boundary)} states unexplored")
    return coarsest_partition(u).same_block(p, q)


def congruence_probe(spec: Specification, p: Term, q: Term, contexts: Iterable[Term],
                     budget: int = 1000) -> bool:
    """Do bisimilar ``p`` and ``q`` stay bisimilar under every context?"""
    if not bisimilar(spec, p, q, budget):
        raise ValueError(f"{p} and {q} are not bisimilar")
    return all(bisimilar(spec, plug(k, p), plug(k, q), budget) for k in contexts)
