"""Linear types for the asynchronous pi-calculus and the typed Milner encoding.

Types are equi-recursive: ``mu X. L`` equals its unfolding, and both type
equality and subtyping are decided coinductively with a memo of assumed pairs.
Linear capabilities have no subtyping beyond equality.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from itertools import product

from . import lam
from .encode import MILNER, encode
from .equiv import Bounds, Status, Step, Verdict
from .lts import PLAIN, TAU, normalize, transitions
from .pi import (Abstraction, Agent, Apply, Hole, Input, Nil, Output, Par, RepInput, RepOutput,
                 Res, Wrong, apply, free_names, pretty)


# --- types --------------------------------------------------------------------

@dataclass(frozen=True)
class Unit:
    pass


@dataclass(frozen=True)
class Conn:
    obj: object


@dataclass(frozen=True)
class InCap:
    obj: object


@dataclass(frozen=True)
class OutCap:
    obj: object


@dataclass(frozen=True)
class LinConn:
    obj: object


@dataclass(frozen=True)
class LinIn:
    obj: object


@dataclass(frozen=True)
class LinOut:
    obj: object


@dataclass(frozen=True)
class Product:
    items: tuple


@dataclass(frozen=True)
class TVar:
    name: str


@dataclass(frozen=True)
class Mu:
    var: str
    body: object

    def __post_init__(self):
        if not _contractive(self.body, {self.var}):
            raise LinearTypeError(f"mu {self.var}: body is not contractive")


@dataclass(frozen=True)
class Behaviour:
    pass


@dataclass(frozen=True)
class AbsType:
    param: object


PROC = Behaviour()
UNIT = Unit()
_CAPS = (Conn, InCap, OutCap, LinConn, LinIn, LinOut)
_LINEAR = (LinConn, LinIn, LinOut)


class LinearTypeError(Exception):
    """A failed typing judgement; ``rule`` names the rule that could not apply."""

    def __init__(self, message, rule="", where=None):
        self.rule = rule
        self.where = where
        loc = f" at {pretty(where)}" if where is not None else ""
        super().__init__(f"{rule + ': ' if rule else ''}{message}{loc}")


class CombineError(LinearTypeError):
    pass


def _contractive(t, banned):
    ty = type(t)
    if ty is TVar:
        return t.name not in banned
    if ty is Mu:
        return _contractive(t.body, banned | {t.var})
    return True  # any constructor guards the variable


def tsubst(t, x, s):
    ty = type(t)
    if ty is TVar:
        return s if t.name == x else t
    if ty in _CAPS:
        return ty(tsubst(t.obj, x, s))
    if ty is Product:
        return Product(tuple(tsubst(i, x, s) for i in t.items))
    if ty is Mu:
        return t if t.var == x else Mu(t.var, tsubst(t.body, x, s))
    if ty is AbsType:
        return AbsType(tsubst(t.param, x, s))
    return t


def unfold(t):
    """Unfold leading mu binders until a constructor shows."""
    while type(t) is Mu:
        t = tsubst(t.body, t.var, t)
    return t


def is_linear(t) -> bool:
    return type(unfold(t)) in _LINEAR


def free_tvars(t) -> set:
    ty = type(t)
    if ty is TVar:
        return {t.name}
    if ty in _CAPS:
        return free_tvars(t.obj)
    if ty is Product:
        return set().union(*(free_tvars(i) for i in t.items))
    if ty is Mu:
        return free_tvars(t.body) - {t.var}
    if ty is AbsType:
        return free_tvars(t.param)
    return set()


def teq(s, t, seen=None) -> bool:
    """Type equality up to unfolding (coinductive)."""
    seen = set() if seen is None else seen
    if s == t or (s, t) in seen:
        return True
    seen.add((s, t))
    s, t = unfold(s), unfold(t)
    if type(s) is not type(t):
        return False
    ty = type(s)
    if ty in _CAPS:
        return teq(s.obj, t.obj, seen)
    if ty is Product:
        return len(s.items) == len(t.items) and all(teq(a, b, seen) for a, b in zip(s.items, t.items))
    if ty is AbsType:
        return teq(s.param, t.param, seen)
    return s == t


def subtype(s, t, seen=None) -> bool:
    """s ≤ t, checked coinductively up to unfolding."""
    seen = set() if seen is None else seen
    if s == t or (s, t) in seen:
        return True
    seen.add((s, t))
    s, t = unfold(s), unfold(t)
    a, b = type(s), type(t)
    if a is Conn and b in (InCap, OutCap):
        s = b(s.obj)
        a = b
    if a is not b:
        return False
    if a is InCap:
        return subtype(s.obj, t.obj, seen)
    if a is OutCap:
        return subtype(t.obj, s.obj, seen)
    if a is Conn:
        return subtype(s.obj, t.obj, seen) and subtype(t.obj, s.obj, seen)
    if a in _LINEAR:
        return teq(s.obj, t.obj)
    if a is Product:
        return len(s.items) == len(t.items) and all(
            subtype(x, y, seen) for x, y in zip(s.items, t.items))
    if a is AbsType:
        return subtype(t.param, s.param, seen)
    return s == t


def combine(s, t):
    """s ⊎ t: complementary linear capabilities join, equal non-linear types merge."""
    us, ut = unfold(s), unfold(t)
    if type(us) is LinIn and type(ut) is LinOut and teq(us.obj, ut.obj):
        return LinConn(us.obj)
    if type(us) is LinOut and type(ut) is LinIn and teq(us.obj, ut.obj):
        return LinConn(ut.obj)
    if not is_linear(s) and teq(s, t):
        return s
    raise CombineError(f"{show(s)} ⊎ {show(t)} is undefined", rule="combine")


def combine_env(g1: dict, g2: dict) -> dict:
    out = dict(g1)
    for x, t in g2.items():
        out[x] = combine(g1[x], t) if x in g1 else t
    return out


def lin(env: dict) -> set:
    return {x for x, t in env.items() if is_linear(t)}


# --- printing and parsing -----------------------------------------------------

def show(t) -> str:
    ty = type(t)
    prefix = {Conn: "#", InCap: "i", OutCap: "o", LinConn: "l#", LinIn: "li", LinOut: "lo"}
    if ty in prefix:
        inner = show(t.obj)
        if type(t.obj) is Mu and ty is not Conn:
            inner = f"({inner})"
        sep = " " if prefix[ty][-1].isalpha() and inner[0].isalnum() else ""
        return prefix[ty] + sep + inner
    if ty is Product:
        return "(" + ", ".join(show(i) for i in t.items) + ")"
    if ty is TVar:
        return t.name
    if ty is Mu:
        return f"mu {t.var}. {show(t.body)}"
    if ty is Unit:
        return "unit"
    if ty is Behaviour:
        return "proc"
    if ty is AbsType:
        return f"{show(t.param)} -> proc"
    raise TypeError(t)


_TOK = re.compile(r"->|l#|li|lo|[#(),.]|[A-Za-z_][A-Za-z0-9_']*")
_KEYWORDS = ("unit", "proc", "mu")


class TypeSyntaxError(LinearTypeError):
    pass


def _tokens(text):
    text = text.replace("♯", "#").replace("μ", "mu ").replace("◇", "proc")
    out, i = [], 0
    while i < len(text):
        if text[i].isspace():
            i += 1
            continue
        m = _TOK.match(text, i)
        if not m:
            raise TypeSyntaxError(f"unexpected {text[i]!r} at column {i + 1}")
        out += _word(m.group(0))
        i = m.end()
    return out


def _word(w):
    # a capability letter may be glued to what follows, as in iX or ounit
    if w in _KEYWORDS or w[0] not in "io":
        return [w]
    return [w[0]] + (_word(w[1:]) if len(w) > 1 else [])


class _TypeParser:
    def __init__(self, text):
        self.toks = _tokens(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def eat(self, tok=None):
        t = self.peek()
        if t is None or (tok is not None and t != tok):
            raise TypeSyntaxError(f"expected {tok or 'a type'}, got {t or 'end of input'}")
        self.i += 1
        return t

    def top(self):
        t = self.typ()
        if self.peek() == "->":
            self.eat()
            self.eat("proc")
            t = AbsType(t)
        if self.peek() is not None:
            raise TypeSyntaxError(f"trailing input at {self.peek()!r}")
        return t

    def typ(self):
        t = self.peek()
        caps = {"#": Conn, "i": InCap, "o": OutCap, "l#": LinConn, "li": LinIn, "lo": LinOut}
        if t in caps:
            self.eat()
            return caps[t](self.typ())
        if t == "unit":
            self.eat()
            return UNIT
        if t == "proc":
            self.eat()
            return PROC
        if t == "mu":
            self.eat()
            x = self.eat()
            self.eat(".")
            return Mu(x, self.typ())
        if t == "(":
            self.eat()
            if self.peek() == ")":
                self.eat()
                return Product(())
            items = [self.typ()]
            while self.peek() == ",":
                self.eat()
                items.append(self.typ())
            self.eat(")")
            return items[0] if len(items) == 1 else Product(tuple(items))
        if t is not None and re.fullmatch(r"[A-Za-z_][A-Za-z0-9_']*", t):
            self.eat()
            return TVar(t)
        raise TypeSyntaxError(f"unexpected {t or 'end of input'}")


def parse_type(text: str):
    return _TypeParser(text).top()


def parse_env(text: str) -> dict:
    """``name:type`` pairs separated by top-level commas."""
    env, depth, cur = {}, 0, ""
    parts = []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    if cur.strip():
        parts.append(cur)
    for p in parts:
        if ":" not in p:
            raise TypeSyntaxError(f"expected name:type, got {p.strip()!r}")
        name, ty = p.split(":", 1)
        env[name.strip()] = parse_type(ty)
    return env


# --- typing -------------------------------------------------------------------

def _objects(t, n, where, rule):
    """The tuple of object types carried by capability type t for an n-ary prefix."""
    o = t.obj
    if n == 1:
        return [o]
    u = unfold(o)
    if n == 0 and (u == UNIT or u == Product(())):
        return []  # a nullary prefix carries unit
    if type(u) is not Product or len(u.items) != n:
        raise LinearTypeError(f"arity {n} does not match object type {show(o)}", rule, where)
    return list(u.items)


def _check_closed(env):
    for x, t in env.items():
        if free_tvars(t):
            raise LinearTypeError(f"type of {x} has free type variables")
        if type(unfold(t)) in (Behaviour, AbsType):
            raise LinearTypeError(f"{x} must have a link type")


def _values(env, demands, where, rule):
    """Value typing for a multiset of (name, needed type); every linear name of
    env must be used up exactly by the demands."""
    need = {}
    for x, t in demands:
        if x not in env:
            raise LinearTypeError(f"name {x} is not in the environment", rule, where)
        need.setdefault(x, []).append(t)
    for x, ts in need.items():
        have = env[x]
        if is_linear(have):
            got = ts[0]
            for t in ts[1:]:
                got = combine(got, t)
            if not teq(got, have):
                raise LinearTypeError(f"{x} : {show(have)} cannot be used at {show(got)}", rule, where)
        else:
            for t in ts:
                if is_linear(t) or not subtype(have, t):
                    raise LinearTypeError(f"{x} : {show(have)} is not a subtype of {show(t)}", rule, where)
    unused = sorted(lin(env) - set(need))
    if unused:
        raise LinearTypeError(f"linear names {', '.join(unused)} left unused", rule, where)


class _Checker:
    def proc(self, env, A):
        t = type(A)
        if t is Nil:
            left = sorted(lin(env))
            if left:
                raise LinearTypeError(f"linear names {', '.join(left)} left unused", "T-NIL", A)
            return
        if t is Input or t is RepInput:
            return self.inp(env, A, rep=t is RepInput)
        if t is Output:
            if A.cont is not None:
                raise LinearTypeError("output prefixes are not part of the typed calculus", "T-OUT", A)
            return self.out(env, A)
        if t is Par:
            return self.par(env, A)
        if t is Res:
            return self.res(env, A)
        if t is Apply:
            if type(A.abs) is not Abstraction:
                raise LinearTypeError("application of a non-abstraction", "T-APP", A)
            return self.proc(env, apply(A.abs, A.arg))
        if t is Wrong:
            raise LinearTypeError("wrong is not typable", "", A)
        if t in (RepOutput, Hole):
            raise LinearTypeError(f"{t.__name__} is not part of the typed calculus", "", A)
        raise LinearTypeError(f"not a process: {A!r}")

    def inp(self, env, A, rep):
        rule = "T-REP" if rep else "T-INP"
        a = A.subject
        if a not in env:
            raise LinearTypeError(f"name {a} is not in the environment", rule, A)
        ta = unfold(env[a])
        rest = dict(env)
        if type(ta) is LinIn and not rep:
            del rest[a]
        elif type(ta) is LinConn and not rep:
            rest[a] = LinOut(ta.obj)
        elif type(ta) in (Conn, InCap):
            pass
        else:
            raise LinearTypeError(f"{a} : {show(env[a])} has no input capability", rule, A)
        objs = _objects(ta, len(A.params), A, rule)
        for b in A.params:
            rest.pop(b, None)
        if rep and lin(rest):
            raise LinearTypeError(f"replicated body may not own linear names {sorted(lin(rest))}", rule, A)
        if len(set(A.params)) != len(A.params):
            raise LinearTypeError("repeated input parameter", rule, A)
        rest.update(zip(A.params, objs))
        self.proc(rest, A.cont)

    def out(self, env, A):
        a = A.subject
        if a not in env:
            raise LinearTypeError(f"name {a} is not in the environment", "T-OUT", A)
        ta = unfold(env[a])
        if type(ta) is LinOut:
            used = LinOut(ta.obj)
        elif type(ta) is LinConn:
            used = LinOut(ta.obj)
        elif type(ta) in (Conn, OutCap):
            used = OutCap(ta.obj)
        else:
            raise LinearTypeError(f"{a} : {show(env[a])} has no output capability", "T-OUT", A)
        objs = _objects(ta, len(A.args), A, "T-OUT")
        _values(env, [(a, used)] + list(zip(A.args, objs)), A, "T-OUT")

    def par(self, env, A):
        fl, fr = free_names(A.left), free_names(A.right)
        fixed_l, fixed_r, choices = {}, {}, []
        for x, t in env.items():
            if not is_linear(t):
                fixed_l[x] = fixed_r[x] = t
                continue
            inl, inr = x in fl, x in fr
            if inl and inr:
                u = unfold(t)
                if type(u) is not LinConn:
                    raise LinearTypeError(f"linear name {x} used on both sides", "T-PAR", A)
                choices.append((x, [(LinIn(u.obj), LinOut(u.obj)), (LinOut(u.obj), LinIn(u.obj))]))
            elif inr:
                fixed_r[x] = t
            else:
                fixed_l[x] = t
        last = None
        for pick in product(*(opts for _, opts in choices)):
            gl, gr = dict(fixed_l), dict(fixed_r)
            for (x, _), (tl, tr) in zip(choices, pick):
                gl[x], gr[x] = tl, tr
            try:
                self.proc(gl, A.left)
                self.proc(gr, A.right)
                return
            except CombineError:
                raise
            except LinearTypeError as e:
                last = e
        raise last

    def res(self, env, A):
        inner = {k: v for k, v in env.items() if k != A.name}
        if A.ann is not None:
            try:
                return self.proc({**inner, A.name: A.ann}, A.body)
            except LinearTypeError as e:
                first = e
            if A.name in free_names(A.body):
                raise first
        elif A.name in free_names(A.body):
            raise LinearTypeError(f"restriction of {A.name} carries no type", "T-RES", A)
        self.proc(inner, A.body)


def type_check(env: dict, A: Agent, T=PROC) -> None:
    """Check env ⊢ A : T; raises LinearTypeError naming the failing rule."""
    _check_closed(env)
    c = _Checker()
    if type(T) is AbsType:
        if type(A) is not Abstraction:
            raise LinearTypeError("expected an abstraction", "T-ABS", A)
        body = {k: v for k, v in env.items() if k != A.param}
        body[A.param] = T.param
        return c.proc(body, A.body)
    if type(T) is not Behaviour:
        raise LinearTypeError(f"agents have type proc or L -> proc, not {show(T)}")
    c.proc(env, A)


def well_typed(env: dict, A: Agent, T=PROC) -> bool:
    try:
        type_check(env, A, T)
        return True
    except LinearTypeError:
        return False


# --- the typed Milner encoding ---------------------------------------------------

T_B = Mu("X", LinIn(Product((Conn(TVar("X")), TVar("X")))))
T_B_PRIME = LinConn(Product((Conn(T_B), T_B)))
VAR_TYPE = Conn(T_B)
ENCODING_ANNS = {"loc": T_B_PRIME, "var": VAR_TYPE}


def typed_encoding(M: lam.Term):
    """(Γ, ⟦M⟧) for Milner's encoding with the restriction types of the typed figure."""
    env = {x: VAR_TYPE for x in sorted(lam.free_vars(M))}
    return env, encode(MILNER, M, ENCODING_ANNS)


def check_encoding_typed(M: lam.Term) -> dict:
    """Γ ⊢ ⟦M⟧ : T_b → ◇ with Γ giving every free variable ♯T_b; returns Γ."""
    env, A = typed_encoding(M)
    type_check(env, A, AbsType(T_B))
    return env


def subject_reduction_probe(env: dict, P: Agent, steps: int = 5) -> Verdict:
    """Each τ-successor within ``steps`` is typed by env, or by env minus one
    linear connection name."""
    type_check(env, P)
    drops = [None] + [x for x, t in env.items() if type(unfold(t)) is LinConn]
    start = normalize(P, PLAIN)
    seen = {start: 0}
    todo = deque([(start, ())])
    while todo:
        s, path = todo.popleft()
        if len(path) >= steps:
            continue
        for lab, t in transitions(s, frozenset(free_names(s)), PLAIN, normalized=True):
            if lab is not TAU or t in seen:
                continue
            seen[t] = len(path) + 1
            trail = path + (Step("path", TAU, t),)
            if not any(well_typed({k: v for k, v in env.items() if k != d}, t) for d in drops):
                return Verdict(Status.Refuted, trail, "τ-successor is not typable",
                               len(seen), Bounds(), "subject-reduction")
            todo.append((t, trail))
    return Verdict(Status.Proved, None, "", len(seen), Bounds(), "subject-reduction")
