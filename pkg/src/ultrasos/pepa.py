"""PEPA: parser, textbook multi-transition semantics, and the rule encoding.

Terms are ordinary :class:`~ultrasos.terms.Term` values with operators
``nil``, ``prefix[a,r]``, ``choice``, ``coop[L]`` and ``hide[L]``; they print
in PEPA concrete syntax.
"""
from __future__ import annotations

import re
from collections import Counter
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

from .monoid import INF, RationalPlus
from .terms import PhiVar, Term, Var, WTerm, register_printer
from .ultras import Ultras
from .wfgsos import (Interpretation, Normalize, RateLaw, Rule, Signature, Specification,
                     Sum, Zero, bisimilar, induce)

__all__ = [
    "TAU", "PepaSyntaxError", "nil", "prefix", "choice", "coop", "hide", "parse_pepa",
    "parse_pepa_file", "labels_of", "apparent_rate", "classic_sos", "aggregate",
    "pepa_wfgsos_spec", "derive_ctmc", "strong_equivalence", "RATES",
]

TAU = "tau"
RATES = RationalPlus(infinity=True)


class PepaSyntaxError(ValueError):
    def __init__(self, msg: str, pos: int | None = None, line: int | None = None):
        where = ""
        if line is not None:
            where = f"line {line}"
        if pos is not None:
            where += (", " if where else "") + f"column {pos + 1}"
        super().__init__(f"{where}: {msg}" if where else msg)
        self.pos, self.line = pos, line


# -- constructors and printing ---------------------------------------------------

NIL = Term("nil")


def nil() -> Term:
    return NIL


def _rate(r) -> Fraction:
    r = Fraction(r)
    if r <= 0:
        raise ValueError(f"rates must be positive, got {r}")
    return r


def _labelset(labels: Iterable) -> frozenset:
    ls = frozenset(labels)
    if TAU in ls:
        raise ValueError("tau cannot be cooperated on or hidden")
    return ls


def prefix(a: str, r, p: Term) -> Term:
    return Term("prefix", (p,), (a, _rate(r)))


def choice(p: Term, q: Term) -> Term:
    return Term("choice", (p, q))


def coop(p: Term, labels: Iterable, q: Term) -> Term:
    return Term("coop", (p, q), (_labelset(labels),))


def hide(p: Term, labels: Iterable) -> Term:
    return Term("hide", (p,), (_labelset(labels),))


_LEVEL = {"choice": 1, "coop": 2, "hide": 3, "prefix": 4}


def _wrap(t, level: int) -> str:
    s = str(t)
    return f"({s})" if isinstance(t, Term) and _LEVEL.get(t.op, 5) < level else s


def _fmt_rate(r) -> str:
    return RATES.format(r)


def _fmt_set(ls) -> str:
    return ",".join(sorted(ls))


register_printer("nil", lambda t: "nil")
register_printer("prefix", lambda t: f"({t.params[0]},{_fmt_rate(t.params[1])}).{_wrap(t.args[0], 4)}")
register_printer("choice", lambda t: f"{_wrap(t.args[0], 1)} + {_wrap(t.args[1], 2)}")
register_printer("coop", lambda t: f"{_wrap(t.args[0], 2)} <{_fmt_set(t.params[0])}> {_wrap(t.args[1], 3)}")
register_printer("hide", lambda t: f"{_wrap(t.args[0], 3)} \\ {{{_fmt_set(t.params[0])}}}")


# -- parsing ----------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:\.\d+)?(?:/\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_']*)"
                    r"|(?P<sym>\|\||[().,+<>\\{}=]))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks, pos = [], 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise PepaSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        toks.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, defs: dict | None = None):
        self.toks = _tokenize(text)
        self.i = 0
        self.defs = defs or {}

    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def take(self, value=None, kind=None):
        tok = self.peek()
        if (value is not None and tok[1] != value) or (kind is not None and tok[0] != kind):
            want = value or kind
            got = tok[1] or "end of input"
            raise PepaSyntaxError(f"expected {want!r}, found {got!r}", tok[2])
        self.i += 1
        return tok

    def parse(self) -> Term:
        t = self.choice()
        if self.peek()[0] != "eof":
            tok = self.peek()
            raise PepaSyntaxError(f"unexpected {tok[1]!r}", tok[2])
        return t

    def choice(self):
        t = self.coop()
        while self.peek()[1] == "+":
            self.take("+")
            t = choice(t, self.coop())
        return t

    def coop(self):
        t = self.hide()
        while self.peek()[1] in ("<", "||"):
            pos = self.peek()[2]
            if self.take()[1] == "||":
                labels = []
            else:
                labels = self.labels(">")
            try:
                t = coop(t, labels, self.hide())
            except ValueError as e:
                raise PepaSyntaxError(str(e), pos) from None
        return t

    def hide(self):
        t = self.prefix()
        while self.peek()[1] == "\\":
            pos = self.take("\\")[2]
            self.take("{")
            labels = self.labels("}")
            try:
                t = hide(t, labels)
            except ValueError as e:
                raise PepaSyntaxError(str(e), pos) from None
        return t

    def labels(self, close: str) -> list:
        out = []
        if self.peek()[1] != close:
            out.append(self.take(kind="name")[1])
            while self.peek()[1] == ",":
                self.take(",")
                out.append(self.take(kind="name")[1])
        self.take(close)
        return out

    def prefix(self):
        if self.peek()[1] == "(" and self.peek(1)[0] == "name" and self.peek(2)[1] == ",":
            self.take("(")
            a = self.take(kind="name")[1]
            self.take(",")
            tok = self.take(kind="num")
            self.take(")")
            self.take(".")
            r = Fraction(tok[1])
            if r <= 0:
                raise PepaSyntaxError(f"rate must be positive, got {tok[1]}", tok[2])
            return prefix(a, r, self.prefix())
        return self.atom()

    def atom(self):
        kind, val, pos = self.peek()
        if val == "(":
            self.take("(")
            t = self.choice()
            self.take(")")
            return t
        if kind == "name":
            self.take()
            if val == "nil":
                return NIL
            if val in self.defs:
                return self.defs[val]
            raise PepaSyntaxError(f"undefined process {val!r}", pos)
        raise PepaSyntaxError(f"unexpected {val or 'end of input'!r}", pos)


def parse_pepa(text: str, definitions: dict | None = None) -> Term:
    """Parse one PEPA term.  Precedence: prefix > hide > cooperation > choice."""
    return _Parser(text, definitions).parse()


def parse_pepa_file(text: str) -> tuple[dict, str | None]:
    """``name = term`` lines plus an optional ``main name`` line.

    Definitions may refer to earlier names; recursion is not supported.
    Returns the definitions and the main name.
    """
    defs: dict = {}
    main = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("main ") or line == "main":
            parts = line.split()
            if len(parts) != 2:
                raise PepaSyntaxError("expected 'main <name>'", line=n)
            main = parts[1]
            continue
        name, eq, body = line.partition("=")
        name = name.strip()
        if not eq or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_']*", name):
            raise PepaSyntaxError("expected '<name> = <term>'", line=n)
        if name in defs:
            raise PepaSyntaxError(f"process {name!r} defined twice", line=n)
        offset = raw.index("=") + 1
        try:
            defs[name] = parse_pepa(body, defs)
        except PepaSyntaxError as e:
            raise PepaSyntaxError(str(e).split(": ", 1)[-1],
                                  None if e.pos is None else e.pos + offset, n) from None
    if main is not None and main not in defs:
        raise PepaSyntaxError(f"main process {main!r} is not defined")
    return defs, main


def labels_of(p: Term) -> frozenset:
    """Every action name occurring in prefixes or label sets."""
    out = set()
    stack = [p]
    while stack:
        t = stack.pop()
        if t.op == "prefix":
            out.add(t.params[0])
        elif t.op in ("coop", "hide"):
            out |= t.params[0]
        stack.extend(t.args)
    return frozenset(out)


# -- the textbook semantics ------------------------------------------------------------

@lru_cache(maxsize=None)
def apparent_rate(p: Term, a: str):
    if a == TAU:
        raise ValueError("apparent rate is not defined for tau")
    op = p.op
    if op == "nil":
        return Fraction(0)
    if op == "prefix":
        return p.params[1] if p.params[0] == a else Fraction(0)
    if op == "choice":
        return apparent_rate(p.args[0], a) + apparent_rate(p.args[1], a)
    if op == "coop":
        l, r = apparent_rate(p.args[0], a), apparent_rate(p.args[1], a)
        return min(l, r) if a in p.params[0] else l + r
    if op == "hide":
        return Fraction(0) if a in p.params[0] else apparent_rate(p.args[0], a)
    raise ValueError(f"not a PEPA term: {p}")


@lru_cache(maxsize=None)
def _sos(p: Term) -> tuple:
    op = p.op
    if op == "nil":
        return ()
    if op == "prefix":
        return ((p.params[0], p.params[1], p.args[0]),)
    if op == "choice":
        return _sos(p.args[0]) + _sos(p.args[1])
    if op == "hide":
        hidden = p.params[0]
        return tuple((TAU if a in hidden else a, r, q) for a, r, q in _sos(p.args[0]))
    if op == "coop":
        ls = p.params[0]
        p1, p2 = p.args
        out = []
        left, right = _sos(p1), _sos(p2)
        for a, r, q in left:
            if a not in ls:
                out.append((a, r, coop(q, ls, p2)))
        for a, r, q in right:
            if a not in ls:
                out.append((a, r, coop(p1, ls, q)))
        for a, r1, q1 in left:
            if a not in ls:
                continue
            for b, r2, q2 in right:
                if b != a:
                    continue
                ra1, ra2 = apparent_rate(p1, a), apparent_rate(p2, a)
                rate = r1 / ra1 * (r2 / ra2) * min(ra1, ra2)
                out.append((a, rate, coop(q1, ls, q2)))
        return tuple(out)
    raise ValueError(f"not a PEPA term: {p}")


def classic_sos(p: Term) -> Counter:
    """Multiset of ``(label, rate, target)`` derivations."""
    return Counter(_sos(p))


def aggregate(p: Term) -> dict:
    """Per-(label, target) sum of classic derivation rates: ``label -> {target: rate}``."""
    out: dict = {}
    for (a, r, q), k in classic_sos(p).items():
        row = out.setdefault(a, {})
        row[q] = row.get(q, Fraction(0)) + r * k
    return out


# -- the rule encoding -----------------------------------------------------------------

_SIGMA = Signature({"nil": 0, "prefix": 1, "choice": 2, "coop": 2, "hide": 1})
_THETA = Signature({"bot": 0, "dia": 1, "oplus": 2, "par": 2})
_INTERP = Interpretation(
    {"bot": Zero(), "dia": Normalize(), "oplus": Sum(), "par": RateLaw("coop", "min")},
    leaf_weight=INF,
)


def _x(i: int) -> Var:
    return Var(f"x{i}")


def _rules_for(labels: tuple, p: Term) -> list[Rule]:
    op = p.op
    bot = WTerm("bot")
    out = []
    if op == "nil":
        for c in labels:
            out.append(Rule("nil", (), c, bot, params=p.params, name=f"nil-{c}"))
    elif op == "prefix":
        a, r = p.params
        for c in labels:
            target = WTerm("dia", (_x(1),), (r,)) if c == a else bot
            out.append(Rule("prefix", ("x1",), c, target, params=p.params,
                            name="act" if c == a else f"act-bot-{c}"))
    elif op == "choice":
        for c in labels:
            out.append(Rule("choice", ("x1", "x2"), c,
                            WTerm("oplus", (PhiVar("phi1"), PhiVar("phi2"))),
                            positives=((0, c, "phi1"), (1, c, "phi2")), params=p.params,
                            name=f"choice-{c}"))
    elif op == "coop":
        ls = p.params[0]
        for c in labels:
            if c in ls:
                target = WTerm("par", (PhiVar("phi1"), PhiVar("phi2")), (ls,))
                name = f"coop-sync-{c}"
            else:
                target = WTerm("oplus", (WTerm("par", (PhiVar("phi1"), _x(2)), (ls,)),
                                         WTerm("par", (_x(1), PhiVar("phi2")), (ls,))))
                name = f"coop-free-{c}"
            out.append(Rule("coop", ("x1", "x2"), c, target,
                            positives=((0, c, "phi1"), (1, c, "phi2")), params=p.params,
                            name=name))
    elif op == "hide":
        ls = p.params[0]
        for c in labels:
            if c in ls:
                out.append(Rule("hide", ("x1",), c, bot, params=p.params, name=f"hide-bot-{c}"))
            elif c == TAU:
                hidden = [a for a in labels if a in ls]
                positives = ((0, TAU, "phi0"),) + tuple(
                    (0, a, f"phi{k}") for k, a in enumerate(hidden, 1))
                target = PhiVar("phi0")
                for k in range(1, len(hidden) + 1):
                    target = WTerm("oplus", (target, PhiVar(f"phi{k}")))
                out.append(Rule("hide", ("x1",), c, target, positives=positives,
                                params=p.params, name="hide-tau"))
            else:
                out.append(Rule("hide", ("x1",), c, PhiVar("phi1"),
                                positives=((0, c, "phi1"),), params=p.params,
                                name=f"hide-{c}"))
    return out


@lru_cache(maxsize=64)
def pepa_wfgsos_spec(labels: frozenset = frozenset()) -> Specification:
    """Rule encoding of PEPA over ``labels`` (``tau`` is always added).

    Operators carry parameters, so rules are generated per operator instance
    by a provider rather than listed up front.
    """
    labels = tuple(sorted(set(labels) | {TAU}))
    cache: dict = {}

    def provide(p: Term):
        key = (p.op, p.params)
        if key not in cache:
            cache[key] = _rules_for(labels, p)
        return cache[key]

    return Specification(RATES, labels, _SIGMA, _THETA, [], _INTERP, (provide,))


def _check_labels(p: Term, labels: Iterable | None) -> frozenset:
    found = labels_of(p)
    if labels is None:
        return found
    labels = frozenset(labels) - {TAU}
    if not found <= labels | {TAU}:
        raise ValueError("term uses undeclared labels: " + ", ".join(sorted(found - labels)))
    return labels


def derive_ctmc(p: Term, budget: int = 1000, labels: Iterable | None = None) -> Ultras:
    """Induced functional system of ``p`` (rates are finite rationals)."""
    spec = pepa_wfgsos_spec(_check_labels(p, labels))
    u = induce(spec, {p}, budget)
    for fns in u.trans.values():
        for rho in fns:
            assert all(v is not INF for _, v in rho.items()), "infinite rate in a derived CTMC"
    return u


def strong_equivalence(p: Term, q: Term, budget: int = 1000) -> bool:
    """Markovian bisimilarity; raises ``Inconclusive`` when the budget is hit."""
    spec = pepa_wfgsos_spec(labels_of(p) | labels_of(q))
    return bisimilar(spec, p, q, budget)
