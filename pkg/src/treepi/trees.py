"""Finite Lévy-Longo / Böhm tree approximants, three-valued comparison and rendering."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

from .lam import ORDER_OMEGA, ConfirmedUnsolvable, Solvable, Term, classify


@dataclass(frozen=True, slots=True)
class TopLeaf:
    pass


@dataclass(frozen=True, slots=True)
class BotLeaf:
    binders: int = 0
    names: tuple = field(default=(), compare=False)


@dataclass(frozen=True, slots=True)
class Node:
    binders: tuple
    head: str
    children: tuple


@dataclass(frozen=True, slots=True)
class UnknownLeaf:
    fuel_spent: int = 0


Tree = Union[TopLeaf, BotLeaf, Node, UnknownLeaf]


def _approx(M, depth, fuel, levy):
    est = classify(M, fuel)
    if type(est) is ConfirmedUnsolvable:
        if not levy:
            return BotLeaf(0)
        if est.order == ORDER_OMEGA:
            return TopLeaf()
        return BotLeaf(int(est.order), est.names)
    if type(est) is Solvable:
        h = est.hnf
        if depth <= 0:
            kids = tuple(UnknownLeaf(0) for _ in h.args)
        else:
            kids = tuple(_approx(a, depth - 1, fuel, levy) for a in h.args)
        return Node(h.binders, h.head, kids)
    return UnknownLeaf(est.fuel_spent)


def lt_approx(M: Term, depth: int, fuel: int) -> Tree:
    return _approx(M, depth, fuel, True)


def bt_approx(M: Term, depth: int, fuel: int) -> Tree:
    return _approx(M, depth, fuel, False)


def truncate(t: Tree, depth: int) -> Tree:
    if type(t) is not Node:
        return t
    if depth <= 0:
        return Node(t.binders, t.head, tuple(UnknownLeaf(0) for _ in t.children))
    return Node(t.binders, t.head, tuple(truncate(c, depth - 1) for c in t.children))


def collapse(t: Tree) -> Tree:
    """Map an LT approximant to the matching BT approximant."""
    if type(t) in (TopLeaf, BotLeaf):
        return BotLeaf(0)
    if type(t) is Node:
        return Node(t.binders, t.head, tuple(collapse(c) for c in t.children))
    return t


def has_unknown(t: Tree) -> bool:
    if type(t) is UnknownLeaf:
        return True
    return type(t) is Node and any(has_unknown(c) for c in t.children)


class TreeCmp(Enum):
    Equal = "equal"
    Different = "different"
    Unknown = "unknown"


@dataclass(frozen=True)
class TreeComparison:
    result: TreeCmp
    path: tuple = ()  # child indices to the first concrete mismatch


def tree_eq(t1: Tree, t2: Tree) -> TreeComparison:
    """Compare modulo renaming of binders; Different only at a concrete mismatch."""
    unknown = False

    def var_id(name, env):
        for depth in range(len(env) - 1, -1, -1):
            if name in env[depth]:
                return ("b", depth, env[depth].index(name))
        return ("f", name)

    def go(a, b, env_a, env_b, path):
        nonlocal unknown
        if type(a) is UnknownLeaf or type(b) is UnknownLeaf:
            unknown = True
            return None
        if type(a) is not type(b):
            return path
        if type(a) is BotLeaf:
            return None if a.binders == b.binders else path
        if type(a) is TopLeaf:
            return None
        if len(a.binders) != len(b.binders) or len(a.children) != len(b.children):
            return path
        env_a = env_a + [list(a.binders)]
        env_b = env_b + [list(b.binders)]
        if var_id(a.head, env_a) != var_id(b.head, env_b):
            return path
        for i, (ca, cb) in enumerate(zip(a.children, b.children)):
            r = go(ca, cb, env_a, env_b, path + (i,))
            if r is not None:
                return r
        return None

    where = go(t1, t2, [], [], ())
    if where is not None:
        return TreeComparison(TreeCmp.Different, where)
    return TreeComparison(TreeCmp.Unknown if unknown else TreeCmp.Equal)


# --- rendering ---------------------------------------------------------------

def _lam_prefix(names):
    return f"λ{' '.join(names)}." if names else ""


def _bot_names(t):
    return t.names if len(t.names) == t.binders else tuple(f"x{i + 1}" for i in range(t.binders))


def render_compact(t: Tree) -> str:
    """One-line rendering, e.g. ``λx.⊥`` or ``λx.x (λy.⊥)``."""
    if type(t) is TopLeaf:
        return "⊤"
    if type(t) is UnknownLeaf:
        return "?"
    if type(t) is BotLeaf:
        return _lam_prefix(_bot_names(t)) + "⊥"
    parts = [t.head]
    for c in t.children:
        s = render_compact(c)
        if type(c) is Node and (c.children or c.binders) or (type(c) is BotLeaf and c.binders):
            s = f"({s})"
        parts.append(s)
    return _lam_prefix(t.binders) + " ".join(parts)


def render_text(t: Tree, indent: int = 0) -> str:
    pad = "  " * indent
    if type(t) is Node:
        lines = [f"{pad}{_lam_prefix(t.binders)}{t.head}"]
        lines += [render_text(c, indent + 1) for c in t.children]
        return "\n".join(lines)
    return pad + render_compact(t)


def to_json(t: Tree) -> dict:
    if type(t) is TopLeaf:
        return {"tag": "top"}
    if type(t) is BotLeaf:
        return {"tag": "bot", "binders": t.binders}
    if type(t) is UnknownLeaf:
        return {"tag": "unknown", "fuel_spent": t.fuel_spent}
    return {"tag": "node", "binders": list(t.binders), "head": t.head,
            "children": [to_json(c) for c in t.children]}


def from_json(d: dict) -> Tree:
    tag = d["tag"]
    if tag == "top":
        return TopLeaf()
    if tag == "bot":
        return BotLeaf(d["binders"])
    if tag == "unknown":
        return UnknownLeaf(d["fuel_spent"])
    return Node(tuple(d["binders"]), d["head"], tuple(from_json(c) for c in d["children"]))


def to_dot(t: Tree, name: str = "tree") -> str:
    lines = [f"digraph {name} {{", "  node [shape=plaintext];"]
    counter = [0]

    def go(u):
        me = f"n{counter[0]}"
        counter[0] += 1
        if type(u) is Node:
            label = _lam_prefix(u.binders) + u.head
        else:
            label = render_compact(u)
        lines.append(f"  {me} [label={json.dumps(label, ensure_ascii=False)}];")
        if type(u) is Node:
            for c in u.children:
                lines.append(f"  {me} -> {go(c)};")
        return me

    go(t)
    lines.append("}")
    return "\n".join(lines)
