"""Process terms, weight terms and their variables.

``Term`` is a node of the process signature; operators may carry hashable
parameters (a PEPA prefix carries its action and rate, a cooperation its
label set).  ``WTerm`` is a node of the weight signature whose leaves are
process terms, weight-function variables or concrete weight functions.
"""
from __future__ import annotations

from typing import Callable, Iterable, Mapping

from .weightfn import WeightFunction

__all__ = ["Var", "Term", "PhiVar", "WTerm", "register_printer", "hole", "plug"]

_PRINTERS: dict[str, Callable[["Term"], str]] = {}


def register_printer(op: str, printer: Callable[["Term"], str]) -> None:
    """Install a custom concrete syntax for terms headed by ``op``."""
    _PRINTERS[op] = printer


def _fmt_param(p) -> str:
    if isinstance(p, frozenset):
        return "{" + ",".join(sorted(map(str, p))) + "}"
    return str(p)


class Var:
    """A process variable."""

    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def __eq__(self, other):
        return isinstance(other, Var) and other.name == self.name

    def __hash__(self):
        return hash(("Var", self.name))

    def __repr__(self):
        return f"Var({self.name!r})"

    def __str__(self):
        return self.name

    def substitute(self, sigma: Mapping):
        return sigma.get(self.name, self)

    def variables(self) -> frozenset:
        return frozenset([self.name])

    @property
    def is_ground(self) -> bool:
        return False

    def depth(self) -> int:
        return 0


class Term:
    """Operator application ``op[params](args)``; immutable, hash and text cached."""

    __slots__ = ("op", "args", "params", "_hash", "_str", "_ground")

    def __init__(self, op: str, args: Iterable = (), params: tuple = ()):
        self.op = op
        self.args = tuple(args)
        self.params = tuple(params)
        self._hash = hash((op, self.args, self.params))
        self._str = None
        self._ground = all(a.is_ground for a in self.args)

    def __eq__(self, other):
        # explicit stack: derived states can be deeper than the recursion limit
        stack = [(self, other)]
        while stack:
            s, o = stack.pop()
            if s is o:
                continue
            if not isinstance(s, Term) or not isinstance(o, Term):
                if s != o:
                    return False
                continue
            if (s._hash != o._hash or s.op != o.op or s.params != o.params
                    or len(s.args) != len(o.args)):
                return False
            stack.extend(zip(s.args, o.args))
        return True

    def __hash__(self):
        return self._hash

    def __str__(self):
        if self._str is None:
            self._print_children()
            printer = _PRINTERS.get(self.op)
            if printer is not None:
                self._str = printer(self)
            else:
                head = self.op
                if self.params:
                    head += "[" + ",".join(map(_fmt_param, self.params)) + "]"
                self._str = head + ("(" + ", ".join(map(str, self.args)) + ")" if self.args else "")
        return self._str

    def __repr__(self):
        return f"Term({str(self)!r})"

    def _print_children(self):
        """Fill the text cache of uncached subterms, deepest first."""
        pending, order = [self], []
        while pending:
            t = pending.pop()
            for a in t.args:
                if isinstance(a, Term) and a._str is None:
                    order.append(a)
                    pending.append(a)
        for t in reversed(order):
            str(t)

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def is_ground(self) -> bool:
        return self._ground

    def variables(self) -> frozenset:
        return frozenset().union(*(a.variables() for a in self.args))

    def substitute(self, sigma: Mapping) -> "Term":
        if not sigma:
            return self
        return Term(self.op, (a.substitute(sigma) for a in self.args), self.params)

    def depth(self) -> int:
        return 1 + max((a.depth() for a in self.args), default=0)


HOLE = "_"


def hole() -> Var:
    return Var(HOLE)


def plug(context: Term, t) -> Term:
    """Fill the ``_`` hole of a unary context."""
    return context.substitute({HOLE: t})


class PhiVar:
    """A weight-function variable."""

    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def __eq__(self, other):
        return isinstance(other, PhiVar) and other.name == self.name

    def __hash__(self):
        return hash(("PhiVar", self.name))

    def __repr__(self):
        return f"PhiVar({self.name!r})"

    def __str__(self):
        return self.name


class WTerm:
    """Weight-signature node; leaves are ``Term``/``Var``, ``PhiVar`` or ``WeightFunction``."""

    __slots__ = ("op", "args", "params", "_hash")

    def __init__(self, op: str, args: Iterable = (), params: tuple = ()):
        self.op = op
        self.args = tuple(args)
        self.params = tuple(params)
        self._hash = hash(("W", op, self.args, self.params))

    def __eq__(self, other):
        return (isinstance(other, WTerm) and self.op == other.op
                and self.params == other.params and self.args == other.args)

    def __hash__(self):
        return self._hash

    def __str__(self):
        head = self.op
        if self.params:
            head += "[" + ",".join(map(_fmt_param, self.params)) + "]"
        return head + ("(" + ", ".join(map(_leaf_str, self.args)) + ")" if self.args else "")

    def __repr__(self):
        return f"WTerm({str(self)!r})"


def _leaf_str(x) -> str:
    if isinstance(x, WeightFunction):
        return x.format()
    return str(x)


def weight_leaves(psi) -> Iterable:
    """Leaves of a weight term in left-to-right order."""
    if isinstance(psi, WTerm):
        for a in psi.args:
            yield from weight_leaves(a)
    else:
        yield psi


def weight_vars(psi) -> tuple[frozenset, frozenset]:
    """Process variables and weight-function variables occurring in ``psi``."""
    procs, phis = set(), set()
    for leaf in weight_leaves(psi):
        if isinstance(leaf, PhiVar):
            phis.add(leaf.name)
        elif isinstance(leaf, (Term, Var)):
            procs |= leaf.variables()
        elif isinstance(leaf, WeightFunction):
            for t in leaf.support():
                if isinstance(t, (Term, Var)):
                    procs |= t.variables()
    return frozenset(procs), frozenset(phis)
