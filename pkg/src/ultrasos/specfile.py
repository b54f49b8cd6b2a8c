"""Line-oriented text formats for specifications and monoid tables.

Grammar (one declaration per line, ``#`` starts a comment)::

    monoid NAME | monoid NAME { elems: e1 e2 ..; unit: e; add: (x y -> z) .. }
    labels a b c
    sig f/2 g/0
    wsig oplus/2 bot/0
    interp OP = COMBINATOR
    rule [NAME:] f(x1, x2) -[c]-> PSI [when PREMISE, PREMISE, ...]

Premises are ``x -[a]-> phi``, ``x -/[b]``, ``total(phi) = w`` and
``club(phi, CLUB) ni y`` (``∋`` is accepted for ``ni``); a CLUB is
``nonzero``, ``empty`` or ``{e1, e2}``.  Combinators::

    zero | sum | union | singleton | id | normalize | normalize(r)
    pointmass(w) | ratelaw(ctor, min|product|sum) | context(TERM with _)
    convex(w1 w2 ..) | guard(w1 ..) | otherwise(w w | w w ..)
    subst(TERM; terms=x ..; weights=y ..; beta=POLY)

Weighted GSOS files (``.wgsos``) use ``monoid``/``labels``/``sig`` plus::

    rule f(x1) -[c, BETA]-> TERM when x1 -[a]-> W, x1 -[b, u1]-> y1

and probabilistic files (``.sgsos``) use ``labels``/``sig`` plus::

    rule f(x1, x2) -[c]-> 1/2 * TERM + 1/2 * TERM when x1 -[a]-> phi1, x2 -/[b], phi1 => y1
"""
from __future__ import annotations

import re
from fractions import Fraction

from .monoid import (BUILTIN_NAMES, Club, FiniteMonoid, Monoid, MonoidError, builtin)
from .terms import PhiVar, Term, Var, WTerm
from .translations import SegalaRule, SegalaSpec, WgsosRule, WgsosSpec
from .wfgsos import (Context, Convex, Guard, Identity, Interpretation, Normalize, Otherwise,
                     PointMass, Poly, RateLaw, Rule, Signature, Singleton, Specification,
                     Substitute, Sum, Union, Zero)

__all__ = ["SpecSyntaxError", "parse_monoid", "parse_spec", "format_spec", "parse_wgsos",
           "parse_sgsos", "parse_term", "format_rule"]


class SpecSyntaxError(ValueError):
    def __init__(self, msg: str, line: int | None = None, col: int | None = None):
        where = ", ".join(p for p in (f"line {line}" if line else "",
                                      f"column {col}" if col else "") if p)
        super().__init__(f"{where}: {msg}" if where else msg)
        self.line, self.col = line, col


_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<arrow>-\[)
  | (?P<neg>-/\[)
  | (?P<close>\]->)
  | (?P<implies>=>)
  | (?P<to>->)
  | (?P<ni>∋)
  | (?P<num>\d+(?:/\d+|\.\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>[(){},;=*+|\]:])
""", re.VERBOSE)


class _Lexer:
    def __init__(self, text: str, line: int, offset: int = 0):
        self.toks = []
        self.line = line
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m:
                raise SpecSyntaxError(f"unexpected character {text[pos]!r}", line, offset + pos + 1)
            if m.lastgroup != "ws":
                self.toks.append((m.lastgroup, m.group(), offset + pos + 1))
            pos = m.end()
        self.end = offset + len(text) + 1
        self.i = 0

    def peek(self, k=0):
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else ("eof", "", self.end)

    def at(self, value) -> bool:
        return self.peek()[1] == value

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        return SpecSyntaxError(msg, self.line, tok[2])

    def take(self, value=None, kind=None):
        tok = self.peek()
        if (value is not None and tok[1] != value) or (kind is not None and tok[0] != kind):
            raise self.error(f"expected {value or kind!r}, found {tok[1] or 'end of line'!r}")
        self.i += 1
        return tok

    def accept(self, value) -> bool:
        if self.at(value):
            self.i += 1
            return True
        return False

    def done(self):
        if self.peek()[0] != "eof":
            raise self.error(f"unexpected {self.peek()[1]!r}")

    def word(self) -> str:
        """A weight constant or identifier."""
        tok = self.peek()
        if tok[0] not in ("num", "name"):
            raise self.error(f"expected a weight, found {tok[1] or 'end of line'!r}")
        self.i += 1
        return tok[1]


def _lines(text: str):
    for n, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0]
        if body.strip():
            yield n, body


# -- monoids -------------------------------------------------------------------------

def _parse_table(lx: _Lexer, name: str) -> FiniteMonoid:
    lx.take("{")
    elems, unit, table = None, None, {}
    while not lx.at("}"):
        key = lx.take(kind="name")[1]
        lx.take(":")
        if key == "elems":
            elems = []
            while not lx.at(";") and not lx.at("}"):
                elems.append(lx.word())
        elif key == "unit":
            unit = lx.word()
        elif key == "add":
            while lx.at("("):
                lx.take("(")
                x, y = lx.word(), lx.word()
                lx.take(kind="to")
                table[(x, y)] = lx.word()
                lx.take(")")
        else:
            raise lx.error(f"unknown table field {key!r}")
        if not lx.accept(";"):
            break
    lx.take("}")
    if elems is None or unit is None:
        raise lx.error("a table needs 'elems' and 'unit'")
    try:
        return FiniteMonoid(name, elems, unit, table)
    except MonoidError as e:
        raise SpecSyntaxError(str(e), lx.line) from None


def _monoid_from(lx: _Lexer) -> Monoid:
    name = lx.take(kind="name")[1]
    if lx.at("{"):
        return _parse_table(lx, name)
    if name not in BUILTIN_NAMES:
        raise lx.error(f"unknown monoid {name!r}")
    return builtin(name)


def parse_monoid(text: str) -> Monoid:
    """A built-in name or a table declaration, optionally prefixed by ``monoid``.

    Tables may span several lines.
    """
    flat = " ".join(body for _, body in _lines(text))
    lx = _Lexer(flat, 1)
    if lx.at("monoid"):
        lx.take()
    m = _monoid_from(lx)
    lx.done()
    return m


# -- terms -------------------------------------------------------------------------------

def _args(lx: _Lexer, item):
    out = []
    lx.take("(")
    if not lx.at(")"):
        out.append(item())
        while lx.accept(","):
            out.append(item())
    lx.take(")")
    return out


def _sigma_term(lx: _Lexer, sigma: Signature | None):
    name = lx.take(kind="name")[1]
    if lx.at("("):
        return Term(name, _args(lx, lambda: _sigma_term(lx, sigma)))
    if sigma is not None and name in sigma and sigma.arity(name) == 0:
        return Term(name)
    return Var(name)


def parse_term(text: str, sigma: Signature | None = None):
    """A process term; bare names are constants when declared nullary, else variables."""
    lx = _Lexer(text, 1)
    t = _sigma_term(lx, sigma)
    lx.done()
    return t


def _theta_term(lx: _Lexer, sigma: Signature, theta: Signature, phis: set):
    tok = lx.take(kind="name")
    name = tok[1]
    if name in phis and not lx.at("("):
        return PhiVar(name)
    if name in theta:
        args = _args(lx, lambda: _theta_term(lx, sigma, theta, phis)) if lx.at("(") else []
        return WTerm(name, args)
    if lx.at("("):
        return Term(name, _args(lx, lambda: _sigma_term(lx, sigma)))
    if name in sigma and sigma.arity(name) == 0:
        return Term(name)
    return Var(name)


def _weight(lx: _Lexer, m: Monoid):
    tok = lx.peek()
    text = lx.word()
    try:
        return m.parse(text)
    except (MonoidError, ValueError) as e:
        raise lx.error(str(e), tok) from None


def _poly(lx: _Lexer, m: Monoid, names: list, stop=(";", ")", "]->", "eof")) -> Poly:
    monos = []
    while True:
        coeff, vs = None, []
        while True:
            tok = lx.peek()
            if tok[0] == "name" and tok[1] in names:
                lx.take()
                vs.append(names.index(tok[1]))
            else:
                w = _weight(lx, m)
                coeff = w if coeff is None else m.mul(coeff, w)
            if not lx.accept("*"):
                break
        monos.append((coeff, tuple(vs)))
        if not lx.accept("+"):
            break
    return Poly(tuple(monos), tuple(names))


def _names_until(lx: _Lexer, stops) -> list:
    out = []
    while lx.peek()[1] not in stops and lx.peek()[0] != "eof":
        out.append(lx.take(kind="name")[1])
    return out


def _combinator(lx: _Lexer, m: Monoid, sigma: Signature):
    tok = lx.take(kind="name")
    name = tok[1]
    simple = {"zero": Zero, "sum": Sum, "union": Union, "singleton": Singleton, "id": Identity}
    if name in simple:
        return simple[name]()
    if name == "normalize":
        if lx.accept("("):
            r = _weight(lx, m)
            lx.take(")")
            return Normalize(r)
        return Normalize()
    lx.take("(")
    if name == "pointmass":
        out = PointMass(_weight(lx, m))
    elif name == "ratelaw":
        ctor = lx.take(kind="name")[1]
        lx.take(",")
        how = lx.take(kind="name")
        if how[1] not in RateLaw.COMBINERS:
            raise lx.error(f"unknown total combiner {how[1]!r}", how)
        out = RateLaw(ctor, how[1])
    elif name == "context":
        out = Context(_sigma_term(lx, sigma))
    elif name in ("convex", "guard"):
        ws = []
        while not lx.at(")"):
            ws.append(_weight(lx, m))
        out = Convex(ws) if name == "convex" else Guard(ws)
    elif name == "otherwise":
        cells, cur = [], []
        while not lx.at(")"):
            if lx.accept("|"):
                cells.append(tuple(cur))
                cur = []
            else:
                cur.append(_weight(lx, m))
        if cur or cells:
            cells.append(tuple(cur))
        try:
            out = Otherwise(cells)
        except ValueError as e:
            raise lx.error(str(e), tok) from None
    elif name == "subst":
        template = _sigma_term(lx, sigma)
        fields = {}
        while lx.accept(";"):
            key = lx.take(kind="name")[1]
            lx.take("=")
            if key == "beta":
                fields[key] = _poly(lx, m, fields.get("weights", []))
            else:
                fields[key] = _names_until(lx, (";", ")"))
        try:
            out = Substitute(template, fields.get("terms", []), fields.get("weights", []),
                             fields.get("beta", Poly(((m.one, ()),), ())))
        except ValueError as e:
            raise lx.error(str(e), tok) from None
    else:
        raise lx.error(f"unknown combinator {name!r}", tok)
    lx.take(")")
    return out


def _club(lx: _Lexer, m: Monoid) -> Club:
    if lx.accept("{"):
        elems = []
        if not lx.at("}"):
            elems.append(_weight(lx, m))
            while lx.accept(","):
                elems.append(_weight(lx, m))
        lx.take("}")
        return Club.of(elems)
    tok = lx.take(kind="name")
    if tok[1] == "nonzero":
        return Club.nonzero()
    if tok[1] == "empty":
        return Club.empty()
    raise lx.error(f"unknown club {tok[1]!r}", tok)


def _head(lx: _Lexer):
    """``[name:] f(x1, ..)`` -> (name, op, xs)."""
    name = ""
    if lx.peek(1)[1] == ":":
        name = lx.take(kind="name")[1]
        lx.take(":")
    op = lx.take(kind="name")[1]
    xs = _args(lx, lambda: lx.take(kind="name")[1]) if lx.at("(") else []
    return name, op, tuple(xs)


def _index(lx: _Lexer, xs: tuple, tok) -> int:
    if tok[1] not in xs:
        raise lx.error(f"{tok[1]!r} is not an argument of the source", tok)
    return xs.index(tok[1])


def _scan_premises(lx: _Lexer, premise):
    if lx.accept("when"):
        premise()
        while lx.accept(","):
            premise()
    lx.done()


# -- weight-term specifications -----------------------------------------------------------

def _split_arity(text: str, line: int, offset: int):
    """``f/2 g/0`` -> [(name, arity, col)]."""
    out = []
    for m in re.finditer(r"\S+", text):
        mm = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_']*)/(\d+)", m.group())
        if not mm:
            raise SpecSyntaxError(f"expected name/arity, found {m.group()!r}", line, offset + m.start() + 1)
        out.append((mm.group(1), int(mm.group(2)), offset + m.start() + 1))
    return out


_HEAD = re.compile(r"\s*([A-Za-z]+)\b")


def _declaration(state: dict, n: int, body: str) -> str | None:
    """Handle header lines shared by all formats; returns the keyword or None."""
    m = _HEAD.match(body)
    if not m:
        raise SpecSyntaxError("expected a declaration keyword", n, 1)
    kw, rest, off = m.group(1), body[m.end():], m.end()
    if kw == "monoid":
        if state.get("monoid") is not None:
            raise SpecSyntaxError("monoid declared twice", n, m.start(1) + 1)
        lx = _Lexer(rest, n, off)
        state["monoid"] = _monoid_from(lx)
        lx.done()
    elif kw == "labels":
        lx = _Lexer(rest, n, off)
        state.setdefault("labels", []).extend(_names_until(lx, ()))
    elif kw in ("sig", "wsig"):
        table = state.setdefault(kw, {})
        for name, arity, col in _split_arity(rest, n, off):
            if name in table:
                raise SpecSyntaxError(f"operator {name!r} declared twice", n, col)
            table[name] = arity
    else:
        return None
    return kw


def _require(state: dict, key: str, n: int, what: str):
    if state.get(key) is None:
        raise SpecSyntaxError(f"{what} must be declared before line {n}", n, 1)
    return state[key]


def parse_spec(text: str) -> Specification:
    state: dict = {}
    interp: dict = {}
    rules: list = []
    leaf = None
    for n, body in _lines(text):
        kw = _declaration(state, n, body)
        if kw is not None:
            continue
        m = _HEAD.match(body)
        kw, rest, off = m.group(1), body[m.end():], m.end()
        lx = _Lexer(rest, n, off)
        monoid = _require(state, "monoid", n, "the monoid")
        sigma = Signature(state.get("sig", {}))
        theta = Signature(state.get("wsig", {}))
        if kw == "interp":
            op = lx.take(kind="name")
            lx.take("=")
            if op[1] in interp:
                raise lx.error(f"weight operator {op[1]!r} interpreted twice", op)
            interp[op[1]] = _combinator(lx, monoid, sigma)
            lx.done()
        elif kw == "leaf":
            leaf = _weight(lx, monoid)
            lx.done()
        elif kw == "rule":
            rules.append(_spec_rule(lx, monoid, sigma, theta, len(rules) + 1))
        else:
            raise SpecSyntaxError(f"unknown declaration {kw!r}", n, m.start(1) + 1)
    monoid = _require(state, "monoid", 1, "the monoid")
    return Specification(monoid, tuple(state.get("labels", ())), Signature(state.get("sig", {})),
                         Signature(state.get("wsig", {})), rules, Interpretation(interp, leaf))


def _spec_rule(lx: _Lexer, m: Monoid, sigma: Signature, theta: Signature, k: int) -> Rule:
    name, op, xs = _head(lx)
    lx.take(kind="arrow")
    label = lx.take(kind="name")[1]
    lx.take(kind="close")
    target_start = lx.i
    # premises bind the phi names used by the target, so scan them first
    depth = 0
    while lx.peek()[0] != "eof" and not (depth == 0 and lx.at("when")):
        depth += lx.at("(") - lx.at(")")
        lx.i += 1
    target_end = lx.i
    pos, neg, tot, clubs = [], [], [], []

    def premise():
        tok = lx.take(kind="name")
        if tok[1] == "total" and lx.at("("):
            lx.take("(")
            phi = lx.take(kind="name")[1]
            lx.take(")")
            lx.take("=")
            tot.append((phi, _weight(lx, m)))
        elif tok[1] == "club" and lx.at("("):
            lx.take("(")
            phi = lx.take(kind="name")[1]
            lx.take(",")
            club = _club(lx, m)
            lx.take(")")
            if not (lx.accept("ni") or lx.accept("∋")):
                raise lx.error("expected 'ni' or '∋'")
            clubs.append((phi, club, lx.take(kind="name")[1]))
        else:
            i = _index(lx, xs, tok)
            if lx.accept("-/["):
                neg.append((i, lx.take(kind="name")[1]))
                if not lx.accept("]->"):
                    lx.take("]")
            else:
                lx.take(kind="arrow")
                a = lx.take(kind="name")[1]
                lx.take(kind="close")
                pos.append((i, a, lx.take(kind="name")[1]))

    _scan_premises(lx, premise)
    end = lx.i
    lx.i = target_start
    phis = {p for _, _, p in pos}
    target = _theta_term(lx, sigma, theta, phis)
    if lx.i != target_end:
        raise lx.error("unexpected text after the target")
    lx.i = end
    return Rule(op, xs, label, target, tuple(pos), tuple(neg), tuple(tot), tuple(clubs),
                name=name or f"r{k}")


# -- formatting -------------------------------------------------------------------------------

def format_rule(spec: Specification, r: Rule) -> str:
    m = spec.monoid
    head = f"{r.source}({', '.join(r.xs)})" if r.xs else r.source
    prem = []
    for i, a, phi in r.positives:
        prem.append(f"{r.xs[i]} -[{a}]-> {phi}")
    for i, b in r.negatives:
        prem.append(f"{r.xs[i]} -/[{b}]")
    for phi, w in r.totals:
        prem.append(f"total({phi}) = {m.format(w)}")
    for phi, club, y in r.clubs:
        desc = club.tag if club.tag else "{" + ", ".join(m.format(e) for e in sorted(
            club.members, key=m.sort_key)) + "}"
        prem.append(f"club({phi}, {desc}) ni {y}")
    line = f"rule {r.name}: {head} -[{r.label}]-> {_fmt_theta(r.target)}"
    return line + (" when " + ", ".join(prem) if prem else "")


def _fmt_theta(psi) -> str:
    if isinstance(psi, WTerm):
        return psi.op + ("(" + ", ".join(_fmt_theta(a) for a in psi.args) + ")" if psi.args else "")
    return str(psi)


def format_spec(spec: Specification) -> str:
    """Spec-file text; parsing it back yields an equivalent specification."""
    m = spec.monoid
    lines = [f"monoid {m.declaration()}",
             "labels " + " ".join(map(str, spec.labels))]
    if len(spec.sigma):
        lines.append("sig " + " ".join(f"{k}/{v}" for k, v in spec.sigma.ops.items()))
    if len(spec.theta):
        lines.append("wsig " + " ".join(f"{k}/{v}" for k, v in spec.theta.ops.items()))
    if spec.interpretation.leaf_weight is not None:
        lines.append(f"leaf {m.format(spec.interpretation.leaf_weight)}")
    for op in spec.theta:
        comb = spec.interpretation.combinators.get(op)
        if comb is not None:
            lines.append(f"interp {op} = {comb.source(m)}")
    lines.extend(format_rule(spec, r) for r in spec.rules)
    return "\n".join(lines) + "\n"


# -- weighted and probabilistic GSOS files ----------------------------------------------

def parse_wgsos(text: str) -> WgsosSpec:
    state: dict = {}
    rules = []
    for n, body in _lines(text):
        if _declaration(state, n, body) is not None:
            continue
        m = _HEAD.match(body)
        if m.group(1) != "rule":
            raise SpecSyntaxError(f"unknown declaration {m.group(1)!r}", n, m.start(1) + 1)
        lx = _Lexer(body[m.end():], n, m.end())
        monoid = _require(state, "monoid", n, "the monoid")
        rules.append(_wgsos_rule(lx, monoid, Signature(state.get("sig", {})), len(rules) + 1))
    monoid = _require(state, "monoid", 1, "the monoid")
    return WgsosSpec(monoid, tuple(state.get("labels", ())), Signature(state.get("sig", {})), rules)


def _wgsos_rule(lx: _Lexer, m: Monoid, sigma: Signature, k: int) -> WgsosRule:
    name, op, xs = _head(lx)
    lx.take(kind="arrow")
    label = lx.take(kind="name")[1]
    lx.take(",")
    beta_start = lx.i
    while lx.peek()[0] not in ("close", "eof"):
        lx.i += 1
    lx.take(kind="close")
    target = _sigma_term(lx, sigma)
    weights, trans = [], []

    def premise():
        i = _index(lx, xs, lx.take(kind="name"))
        lx.take(kind="arrow")
        a = lx.take(kind="name")[1]
        if lx.accept(","):
            u = lx.take(kind="name")[1]
            lx.take(kind="close")
            trans.append((i, a, u, lx.take(kind="name")[1]))
        else:
            lx.take(kind="close")
            weights.append((i, a, _weight(lx, m)))

    _scan_premises(lx, premise)
    end = lx.i
    lx.i = beta_start
    beta = _poly(lx, m, [u for _, _, u, _ in trans])
    if lx.peek()[0] != "close":
        raise lx.error("unexpected text in the combiner")
    lx.i = end
    return WgsosRule(op, xs, label, beta, target, tuple(weights), tuple(trans), name or f"r{k}")


def parse_sgsos(text: str) -> SegalaSpec:
    state: dict = {}
    rules = []
    for n, body in _lines(text):
        if _declaration(state, n, body) is not None:
            continue
        m = _HEAD.match(body)
        if m.group(1) != "rule":
            raise SpecSyntaxError(f"unknown declaration {m.group(1)!r}", n, m.start(1) + 1)
        lx = _Lexer(body[m.end():], n, m.end())
        rules.append(_sgsos_rule(lx, Signature(state.get("sig", {})), len(rules) + 1))
    return SegalaSpec(tuple(state.get("labels", ())), Signature(state.get("sig", {})), rules)


def _sgsos_rule(lx: _Lexer, sigma: Signature, k: int) -> SegalaRule:
    name, op, xs = _head(lx)
    lx.take(kind="arrow")
    label = lx.take(kind="name")[1]
    lx.take(kind="close")
    targets = []
    while True:
        tok = lx.take(kind="num")
        lx.take("*")
        targets.append((Fraction(tok[1]), _sigma_term(lx, sigma)))
        if not lx.accept("+"):
            break
    pos, neg, samples = [], [], []

    def premise():
        tok = lx.take(kind="name")
        if lx.accept("=>"):
            samples.append((tok[1], lx.take(kind="name")[1]))
            return
        i = _index(lx, xs, tok)
        if lx.accept("-/["):
            neg.append((i, lx.take(kind="name")[1]))
            if not lx.accept("]->"):
                lx.take("]")
        else:
            lx.take(kind="arrow")
            a = lx.take(kind="name")[1]
            lx.take(kind="close")
            pos.append((i, a, lx.take(kind="name")[1]))

    _scan_premises(lx, premise)
    return SegalaRule(op, xs, label, tuple(targets), tuple(pos), tuple(neg), tuple(samples),
                      name or f"r{k}")
