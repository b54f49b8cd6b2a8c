"""Command-line interface.

Exit status: 0 success, 1 a checked property fails, 2 usage or parse error,
3 inconclusive because exploration hit the budget.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from .bisim import coarsest_partition, largest_bisimulation, minimize
from .monoid import BUILTIN_NAMES, MonoidError, builtin, enumerate_clubs, is_positive, is_refinement
from .oracles import MAX_PAIRS, MAX_STATES, union_of_bisimilar_partitions, union_of_bisimulations
from .pepa import PepaSyntaxError, labels_of, parse_pepa, parse_pepa_file, pepa_wfgsos_spec
from .serialize import render_partition, render_system, ultras_from_json
from .specfile import (SpecSyntaxError, format_spec, parse_monoid, parse_sgsos, parse_spec,
                       parse_term, parse_wgsos)
from .translations import (TranslationError, translate_segala, translate_wgsos,
                           validate_segala_rule, validate_wgsos_rule)
from .ultras import Ultras, UltrasError
from .wfgsos import Specification, induce, validate_spec

OK, FAIL, USAGE, INCONCLUSIVE = 0, 1, 2, 3
_SPEC_KEYWORDS = ("monoid", "labels", "sig", "wsig", "interp", "rule", "leaf")


class UsageError(Exception):
    pass


class Failure(Exception):
    pass


class Truncated(Exception):
    pass


@dataclass
class Source:
    kind: str
    path: str
    payload: object
    spec: Specification | None = None
    defs: dict | None = None
    main: str | None = None


def _sniff(path: str, text: str) -> str:
    suffix = Path(path).suffix.lower()
    known = {".pepa": "pepa", ".wgsos": "wgsos", ".sgsos": "sgsos",
             ".ultras": "ultras", ".json": "ultras"}
    if suffix in known:
        return known[suffix]
    for line in text.splitlines():
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("{"):
            return "ultras"
        if body.split()[0] in _SPEC_KEYWORDS:
            return "spec"
        return "pepa"
    return "spec"


def load(path: str) -> Source:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    kind = _sniff(path, text)
    if kind == "pepa":
        defs, main = parse_pepa_file(text)
        labels = frozenset().union(*(labels_of(t) for t in defs.values())) if defs else frozenset()
        return Source(kind, path, defs, pepa_wfgsos_spec(labels), defs, main)
    if kind == "wgsos":
        ws = parse_wgsos(text)
        return Source(kind, path, ws)
    if kind == "sgsos":
        return Source(kind, path, parse_sgsos(text))
    if kind == "ultras":
        return Source(kind, path, ultras_from_json(text))
    spec = parse_spec(text)
    return Source(kind, path, spec, spec)


def _compiled(src: Source) -> Specification:
    if src.spec is None:
        try:
            if src.kind == "wgsos":
                src.spec = translate_wgsos(src.payload)
            elif src.kind == "sgsos":
                src.spec = translate_segala(src.payload)
        except TranslationError as e:
            raise Failure(str(e)) from None
    if src.spec is None:
        raise UsageError(f"{src.path} does not describe a specification")
    return src.spec


def split_roots(text: str | None) -> list[str]:
    """Split at commas that are not nested in brackets."""
    if not text:
        return []
    out, depth, cur = [], 0, []
    for ch in text:
        if ch in "([{<":
            depth += 1
        elif ch in ")]}>":
            depth -= 1
        if ch == "," and depth == 0:
            out.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur).strip())
    return [r for r in out if r]


def _root(src: Source, text: str):
    if src.kind == "pepa":
        if text in src.defs:
            return src.defs[text]
        return parse_pepa(text, src.defs)
    if src.kind == "ultras":
        if text not in src.payload.states:
            raise UsageError(f"{text!r} is not a state of {src.path}")
        return text
    spec = _compiled(src)
    t = parse_term(text, spec.sigma)
    if not t.is_ground:
        raise UsageError(f"root {text!r} is not a ground term")
    todo = [t]
    while todo:
        s = todo.pop()
        if s.op not in spec.sigma or spec.sigma.arity(s.op) != len(s.args):
            raise UsageError(f"root {text!r}: {s.op}/{len(s.args)} is not in the signature")
        todo.extend(s.args)
    return t


def _default_roots(src: Source) -> list[str]:
    if src.kind == "pepa" and src.main:
        return [src.main]
    if src.kind == "ultras":
        return []
    raise UsageError("no roots given (use --roots)")


def _reachable(u: Ultras, roots: list) -> Ultras:
    if not roots:
        return u
    seen, todo = set(roots), list(roots)
    while todo:
        x = todo.pop()
        if x not in u.states:
            continue
        for fns in (u.successors(x, a) for a in u.labels):
            for rho in fns:
                for y in rho.support() - seen:
                    seen.add(y)
                    todo.append(y)
    return u.restrict_to(seen)


def derive(src: Source, roots: list, budget: int) -> Ultras:
    if src.kind == "ultras":
        return _reachable(src.payload, roots)
    spec = _compiled(src)
    diags = validate_spec(spec)
    if diags:
        raise Failure("specification is not well formed:\n" + "\n".join(diags))
    return induce(spec, roots, budget)


# -- subcommands -------------------------------------------------------------------

def cmd_check(args, out) -> int:
    src = load(args.file)
    if src.kind == "spec":
        diags = validate_spec(src.spec)
    elif src.kind == "wgsos":
        w = src.payload
        diags = [f"{r.name}: {d}" for r in w.rules
                 for d in validate_wgsos_rule(r, w.monoid, w.labels, w.sigma)]
        if not diags:
            diags = validate_spec(_compiled(src))
    elif src.kind == "sgsos":
        s = src.payload
        diags = [f"{r.name}: {d}" for r in s.rules
                 for d in validate_segala_rule(r, s.labels, s.sigma)]
        if not diags:
            diags = validate_spec(_compiled(src))
    else:
        diags = []
    for d in diags:
        out.write(d + "\n")
    if diags:
        return FAIL
    out.write("ok\n")
    return OK


def cmd_derive(args, out) -> int:
    src = load(args.file)
    names = split_roots(args.roots) or _default_roots(src)
    u = derive(src, [_root(src, r) for r in names], args.budget)
    out.write(render_system(u, args.format))
    return OK


def _oracle_single(u: Ultras, partition, out) -> bool:
    if len(u.states) > MAX_STATES:
        out.write(f"oracle: skipped ({len(u.states)} states, limit {MAX_STATES})\n")
        return True
    agree = union_of_bisimilar_partitions(u) == partition.relation()
    out.write("oracle: agrees\n" if agree else "oracle: disagrees\n")
    return agree


def cmd_bisim(args, out) -> int:
    roots = split_roots(args.roots)
    if len(roots) != 2:
        raise UsageError("bisim needs exactly two roots (--roots P,Q)")
    first = load(args.file)
    if args.file2 is None:
        p, q = _root(first, roots[0]), _root(first, roots[1])
        u = derive(first, [p, q], args.budget)
        if u.boundary:
            raise Truncated(f"{len(u.boundary)} states left unexplored within budget {args.budget}")
        part = coarsest_partition(u)
        out.write(render_partition(part, args.format))
        if args.oracle and not _oracle_single(u, part, out):
            return FAIL
        return OK if part.same_block(p, q) else FAIL
    second = load(args.file2)
    if first.kind == second.kind == "pepa":
        labels = frozenset().union(*(labels_of(t) for t in
                                     list(first.defs.values()) + list(second.defs.values())))
        first.spec = second.spec = pepa_wfgsos_spec(labels)
    p, q = _root(first, roots[0]), _root(second, roots[1])
    u1, u2 = derive(first, [p], args.budget), derive(second, [q], args.budget)
    if u1.boundary or u2.boundary:
        raise Truncated(f"budget {args.budget} exhausted")
    if u1.monoid != u2.monoid or u1.labels != u2.labels:
        raise UsageError("the two systems use different monoids or label sets")
    part = largest_bisimulation(u1, u2)
    out.write(render_partition(part, args.format))
    if args.oracle:
        pairs = len(u1.states) * len(u2.states)
        if pairs > MAX_PAIRS:
            out.write(f"oracle: skipped ({pairs} pairs, limit {MAX_PAIRS})\n")
        else:
            agree = union_of_bisimulations(u1, u2) == part.cross_relation()
            out.write("oracle: agrees\n" if agree else "oracle: disagrees\n")
            if not agree:
                return FAIL
    return OK if part.same_block((0, p), (1, q)) else FAIL


def cmd_minimize(args, out) -> int:
    src = load(args.file)
    names = split_roots(args.roots) or _default_roots(src)
    u = derive(src, [_root(src, r) for r in names], args.budget)
    if u.boundary:
        raise Truncated(f"{len(u.boundary)} states left unexplored within budget {args.budget}")
    q, _ = minimize(u)
    out.write(render_system(q, args.format))
    if args.oracle and not _oracle_single(u, coarsest_partition(u), out):
        return FAIL
    return OK


def cmd_pepa(args, out) -> int:
    src = load(args.file)
    if src.kind != "pepa":
        raise UsageError(f"{args.file} is not a PEPA file")
    if args.file2 is not None:
        args.roots = args.roots or ",".join(
            filter(None, [src.main, load(args.file2).main]))
        return cmd_bisim(args, out)
    names = split_roots(args.roots) or _default_roots(src)
    if len(names) == 2:
        return cmd_bisim(argparse.Namespace(**{**vars(args), "roots": ",".join(names)}), out)
    if len(names) != 1:
        raise UsageError("pepa takes one process to derive or two to compare")
    u = derive(src, [_root(src, names[0])], args.budget)
    out.write(render_system(u, args.format))
    return OK


def cmd_translate(args, out) -> int:
    src = load(args.file)
    if src.kind not in ("wgsos", "sgsos"):
        raise UsageError("translate expects a .wgsos or .sgsos file")
    out.write(format_spec(_compiled(src)))
    return OK


def cmd_monoid(args, out) -> int:
    target = args.file
    if target in BUILTIN_NAMES and not Path(target).exists():
        m = builtin(target)
    else:
        try:
            m = parse_monoid(Path(target).read_text(encoding="utf-8"))
        except OSError as e:
            raise UsageError(f"cannot read {target}: {e.strerror}") from None
    pos, ref = is_positive(m), is_refinement(m)
    clubs = [c.describe(m) for c in enumerate_clubs(m)]
    if args.format == "structured":
        out.write(json.dumps({"monoid": m.declaration(), "positive": pos,
                              "refinement": ref, "clubs": clubs}, sort_keys=True, indent=2) + "\n")
    else:
        yn = lambda b: "yes" if b else "no"
        out.write(f"positive: {yn(pos)}, refinement: {yn(ref)}, clubs: {', '.join(clubs)}\n")
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ultrasos", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, two=False, roots=True):
        p = sub.add_parser(name, help=help_)
        p.add_argument("file")
        if two:
            p.add_argument("file2", nargs="?")
        if roots:
            p.add_argument("--roots", help="comma-separated root terms")
        p.add_argument("--budget", type=_budget, default=1000)
        p.add_argument("--format", choices=("text", "structured", "graph"), default="text")
        p.add_argument("--oracle", action="store_true",
                       help="cross-check against brute force on small instances")
        p.set_defaults(func=fn)

    add("check", cmd_check, "validate a specification", roots=False)
    add("derive", cmd_derive, "print the system induced from the roots")
    add("bisim", cmd_bisim, "partition into bisimilarity classes; succeed iff the roots match", two=True)
    add("minimize", cmd_minimize, "print the bisimulation quotient")
    add("pepa", cmd_pepa, "derive or compare PEPA processes", two=True)
    add("translate", cmd_translate, "compile .wgsos/.sgsos rules to a spec file", roots=False)
    add("monoid", cmd_monoid, "report positivity, refinement and clubs", roots=False)
    return parser


def _budget(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("budget must be at least 1")
    return n


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except Truncated as e:
        err.write(f"inconclusive: {e}\n")
        return INCONCLUSIVE
    except Failure as e:
        err.write(f"{e}\n")
        return FAIL
    except (UsageError, SpecSyntaxError, PepaSyntaxError, UltrasError, MonoidError, ValueError) as e:
        err.write(f"error: {e}\n")
        return USAGE


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
