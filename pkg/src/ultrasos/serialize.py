"""Text, structured (JSON) and graph (dot) renderings of systems and partitions.

Structured schema for a system::

    {"boundary": [state, ...],
     "labels": [label, ...],
     "monoid": declaration,
     "states": [state, ...],
     "transitions": [{"label": a, "source": s,
                      "weights": [{"target": t, "weight": w}, ...]}, ...]}

States are rendered as text; weights use the monoid's own notation
(``p/q`` and ``inf`` for rationals).  A stuck pair has no entry; a
terminal pair has an entry with an empty ``weights`` list.  All lists are
sorted and keys are sorted, so equal systems serialize byte-identically.
The same schema is accepted as input (``.ultras`` files).
"""
from __future__ import annotations

import json
from typing import Callable

from .bisim import Block, Partition
from .specfile import parse_monoid
from .ultras import Ultras, UltrasError
from .weightfn import WeightFunction, state_key

__all__ = ["ultras_to_text", "ultras_to_structured", "ultras_to_dot", "ultras_from_json",
           "partition_to_text", "partition_to_structured", "render_system", "render_partition"]


def _name(x) -> str:
    if isinstance(x, Block):
        return "{" + ",".join(_name(y) for y in x) + "}"
    if isinstance(x, tuple) and len(x) == 2 and x[0] in (0, 1):
        return f"{x[0] + 1}:{_name(x[1])}"
    return str(x)


def _rows(u: Ultras, name: Callable = _name):
    for x in u.sorted_states():
        for a in u.labels:
            if (x, a) in u.trans and u.trans[(x, a)]:
                for rho in u.sorted_successors(x, a):
                    yield x, a, rho


def ultras_to_text(u: Ultras, name: Callable = _name) -> str:
    lines = [f"monoid {u.monoid.declaration()}",
             "labels " + " ".join(map(str, u.labels)),
             f"states {len(u.states)}" + (f" (boundary {len(u.boundary)})" if u.boundary else "")]
    for x, a, rho in _rows(u, name):
        lines.append(f"{name(x)} -{a}-> {rho.format(name)}")
    if u.boundary:
        lines.append("unexplored " + ", ".join(name(x) for x in sorted(u.boundary, key=state_key)))
    return "\n".join(lines) + "\n"


def _weights(rho: WeightFunction, name: Callable) -> list:
    return [{"target": name(t), "weight": rho.monoid.format(v)} for t, v in rho.items()]


def ultras_to_structured(u: Ultras, name: Callable = _name) -> str:
    doc = {
        "monoid": u.monoid.declaration(),
        "labels": [str(a) for a in u.labels],
        "states": [name(x) for x in u.sorted_states()],
        "boundary": [name(x) for x in sorted(u.boundary, key=state_key)],
        "transitions": [{"source": name(x), "label": str(a), "weights": _weights(rho, name)}
                        for x, a, rho in _rows(u, name)],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def ultras_to_dot(u: Ultras, name: Callable = _name) -> str:
    """States are boxes; each weight function is a small point node."""
    out = ["digraph ultras {", "  rankdir=LR;", "  node [shape=box];"]
    for x in u.sorted_states():
        out.append(f"  {_q(name(x))};")
    for x in sorted(u.boundary, key=state_key):
        out.append(f"  {_q(name(x))} [style=dashed];")
    for k, (x, a, rho) in enumerate(_rows(u, name)):
        node = _q(f"#f{k}")
        out.append(f"  {node} [shape=point];")
        out.append(f"  {_q(name(x))} -> {node} [label={_q(str(a))}];")
        for t, v in rho.items():
            out.append(f"  {node} -> {_q(name(t))} [label={_q(u.monoid.format(v))}];")
    out.append("}")
    return "\n".join(out) + "\n"


def ultras_from_json(text: str) -> Ultras:
    """Read the structured schema back; states become their text names."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise UltrasError(f"line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise UltrasError("expected a JSON object")
    for key in ("monoid", "labels", "states", "transitions"):
        if key not in doc:
            raise UltrasError(f"missing field {key!r}")
    m = parse_monoid(doc["monoid"])
    trans: dict = {}
    for entry in doc["transitions"]:
        try:
            src, lab, ws = entry["source"], entry["label"], entry["weights"]
            rho = WeightFunction(m, [(w["target"], m.parse(str(w["weight"]))) for w in ws])
        except (KeyError, TypeError) as e:
            raise UltrasError(f"malformed transition entry: {e}") from None
        trans.setdefault((src, lab), set()).add(rho)
    return Ultras(m, doc["labels"], doc["states"], trans, doc.get("boundary", ()))


def partition_to_text(p: Partition, name: Callable = _name) -> str:
    return "".join("{" + ", ".join(name(x) for x in b) + "}\n" for b in p.blocks)


def partition_to_structured(p: Partition, name: Callable = _name) -> str:
    return json.dumps({"blocks": [[name(x) for x in b] for b in p.blocks]},
                      sort_keys=True, indent=2) + "\n"


def render_system(u: Ultras, fmt: str = "text") -> str:
    if fmt == "structured":
        return ultras_to_structured(u)
    if fmt == "graph":
        return ultras_to_dot(u)
    return ultras_to_text(u)


def render_partition(p: Partition, fmt: str = "text") -> str:
    if fmt == "structured":
        return partition_to_structured(p)
    if fmt == "graph":
        lines = ["graph partition {"]
        for k, b in enumerate(p.blocks):
            lines.append(f"  subgraph cluster_{k} {{")
            lines.extend(f"    {_q(_name(x))};" for x in b)
            lines.append("  }")
        lines.append("}")
        return "\n".join(lines) + "\n"
    return partition_to_text(p)
