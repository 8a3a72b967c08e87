"""Named lambda terms: parsing, printing, substitution, reduction, order classification."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union


@dataclass(frozen=True, slots=True)
class Var:
    name: str


@dataclass(frozen=True, slots=True)
class Abs:
    binder: str
    body: "Term"


@dataclass(frozen=True, slots=True)
class App:
    fun: "Term"
    arg: "Term"


@dataclass(frozen=True, slots=True)
class Hole:
    """Context marker; only used to build encoding contexts."""
    index: int


Term = Union[Var, Abs, App, Hole]


class Strategy(Enum):
    CallByName = "cbn"
    StrongCallByName = "strong-cbn"
    Head = "head"


# --- parsing -----------------------------------------------------------------

class LambdaSyntaxError(ValueError):
    def __init__(self, msg, pos):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos


_TOKEN = re.compile(r"\s*(?:(?P<lam>\\|λ)|(?P<dot>\.)|(?P<lp>\()|(?P<rp>\))"
                    r"|(?P<id>[A-Za-z][A-Za-z0-9_']*)|(?P<omega>Ω))")


_SHOW = {"lam": "'λ'", "dot": "'.'", "lp": "'('", "rp": "')'", "id": "a variable"}


def _tokenize(text):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            pos += len(text[pos:]) - len(text[pos:].lstrip())
            raise LambdaSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(("eof", "", len(text)))
    return out


class _LambdaParser:
    def __init__(self, text, builtins):
        self.toks = _tokenize(text)
        self.i = 0
        self.builtins = builtins

    def peek(self):
        return self.toks[self.i]

    def take(self, kind):
        tok = self.toks[self.i]
        if tok[0] != kind:
            raise LambdaSyntaxError(f"expected {_SHOW.get(kind, kind)}, found {tok[1] or 'end of input'!r}", tok[2])
        self.i += 1
        return tok

    def term(self):
        if self.peek()[0] == "lam":
            self.take("lam")
            names = [self.take("id")[1]]
            while self.peek()[0] == "id":
                names.append(self.take("id")[1])
            self.take("dot")
            body = self.term()
            for n in reversed(names):
                body = Abs(n, body)
            return body
        left = self.atom()
        while self.peek()[0] in ("id", "lp", "omega", "lam"):
            if self.peek()[0] == "lam":
                left = App(left, self.term())
                break
            left = App(left, self.atom())
        return left

    def atom(self):
        kind, val, pos = self.peek()
        if kind == "id":
            self.i += 1
            if self.builtins and val in BUILTINS:
                return BUILTINS[val]
            return Var(val)
        if kind == "omega":
            self.i += 1
            return OMEGA
        if kind == "lp":
            self.i += 1
            t = self.term()
            self.take("rp")
            return t
        raise LambdaSyntaxError(f"unexpected {val or 'end of input'!r}", pos)


def parse_lambda(text: str, builtins: bool = True) -> Term:
    """Parse a term; ``OMEGA`` and ``FIX`` denote the usual combinators unless disabled."""
    p = _LambdaParser(text, builtins)
    t = p.term()
    p.take("eof")
    return t


def pretty(t: Term, lam: str = "λ") -> str:
    if type(t) is Var:
        return t.name
    if type(t) is Hole:
        return f"[{t.index}]"
    if type(t) is Abs:
        names = []
        while type(t) is Abs:
            names.append(t.binder)
            t = t.body
        return f"{lam}{' '.join(names)}.{pretty(t, lam)}"
    fun = pretty(t.fun, lam)
    if type(t.fun) is Abs:
        fun = f"({fun})"
    arg = pretty(t.arg, lam)
    if type(t.arg) in (Abs, App):
        arg = f"({arg})"
    return f"{fun} {arg}"


# --- names -------------------------------------------------------------------

def free_vars(t: Term) -> frozenset:
    if type(t) is Var:
        return frozenset((t.name,))
    if type(t) is Abs:
        return free_vars(t.body) - {t.binder}
    if type(t) is App:
        return free_vars(t.fun) | free_vars(t.arg)
    return frozenset()


def all_vars(t: Term) -> set:
    out = set()
    stack = [t]
    while stack:
        u = stack.pop()
        if type(u) is Var:
            out.add(u.name)
        elif type(u) is Abs:
            out.add(u.binder)
            stack.append(u.body)
        elif type(u) is App:
            stack.extend((u.fun, u.arg))
    return out


def fresh_name(base: str, avoid) -> str:
    name = base
    while name in avoid:
        name += "'"
    return name


def subst(M: Term, x: str, N: Term) -> Term:
    """Capture-avoiding M{N/x}."""
    return _subst(M, x, N, free_vars(N))


def _subst(M, x, N, fvN):
    if type(M) is Var:
        return N if M.name == x else M
    if type(M) is App:
        f, a = _subst(M.fun, x, N, fvN), _subst(M.arg, x, N, fvN)
        if f is M.fun and a is M.arg:
            return M
        return App(f, a)
    if type(M) is Abs:
        if M.binder == x or x not in free_vars(M.body):
            return M
        y, body = M.binder, M.body
        if y in fvN:
            z = fresh_name(y, fvN | free_vars(body) | {x})
            body = _subst(body, y, Var(z), frozenset((z,)))
            y = z
        return Abs(y, _subst(body, x, N, fvN))
    return M


def canonical(t: Term, number_free: bool = False):
    """De Bruijn-style key; with ``number_free`` free names are numbered by first occurrence."""
    free = {}

    def go(u, env):
        if type(u) is Var:
            for i in range(len(env) - 1, -1, -1):
                if env[i] == u.name:
                    return len(env) - 1 - i
            if number_free:
                return ("f", free.setdefault(u.name, len(free)))
            return ("f", u.name)
        if type(u) is Abs:
            env.append(u.binder)
            r = ("l", go(u.body, env))
            env.pop()
            return r
        if type(u) is App:
            return ("a", go(u.fun, env), go(u.arg, env))
        return ("h", u.index)

    return go(t, [])


def alpha_eq(M: Term, N: Term) -> bool:
    return canonical(M) == canonical(N)


def rename(t: Term, sigma: dict) -> Term:
    """Apply a variable-to-variable renaming to the free variables of ``t``."""
    # simultaneous: go through temporaries that cannot clash
    avoid = all_vars(t) | set(sigma.values()) | set(sigma)
    tmp = {}
    for x in sorted(free_vars(t) & set(sigma)):
        z = fresh_name(f"_{x}", avoid)
        avoid.add(z)
        tmp[z] = sigma[x]
        t = subst(t, x, Var(z))
    for z, y in tmp.items():
        t = subst(t, z, Var(y))
    return t


# --- reduction ---------------------------------------------------------------

def _spine_step(M):
    if type(M) is not App:
        return None
    if type(M.fun) is Abs:
        return subst(M.fun.body, M.fun.binder, M.arg)
    f = _spine_step(M.fun)
    return None if f is None else App(f, M.arg)


def step(M: Term, s: Strategy = Strategy.Head) -> Optional[Term]:
    if s is Strategy.CallByName:
        return _spine_step(M)
    binders = []
    while type(M) is Abs:
        binders.append(M.binder)
        M = M.body
    r = _spine_step(M)
    if r is None:
        return None
    for b in reversed(binders):
        r = Abs(b, r)
    return r


def strip_binders(M: Term):
    binders = []
    while type(M) is Abs:
        binders.append(M.binder)
        M = M.body
    return tuple(binders), M


def spine(M: Term):
    args = []
    while type(M) is App:
        args.append(M.arg)
        M = M.fun
    return M, tuple(reversed(args))


@dataclass(frozen=True, slots=True)
class Hnf:
    binders: tuple
    head: str
    args: tuple


@dataclass(frozen=True, slots=True)
class Exhausted:
    uncovered_binders: int
    residual: Term


@dataclass(frozen=True, slots=True)
class CycleDetected:
    uncovered_binders: int
    growing: bool = False
    names: tuple = field(default=(), compare=False)


HeadOutcome = Union[Hnf, Exhausted, CycleDetected]


def head_reduce(M: Term, fuel: int) -> HeadOutcome:
    """Iterate head steps, watching for a body that recurs up to renaming."""
    seen = {}
    steps = 0
    while True:
        binders, body = strip_binders(M)
        h, args = spine(body)
        if type(h) is Var:
            return Hnf(binders, h.name, args)
        if type(h) is Hole:
            return Exhausted(len(binders), M)
        key = canonical(body, number_free=True)
        if key in seen:
            return CycleDetected(len(binders), len(binders) > seen[key], binders)
        seen[key] = len(binders)
        if steps >= fuel:
            return Exhausted(len(binders), M)
        M = step(M, Strategy.Head)
        steps += 1


ORDER_OMEGA = math.inf


@dataclass(frozen=True, slots=True)
class Solvable:
    hnf: Hnf


@dataclass(frozen=True, slots=True)
class ConfirmedUnsolvable:
    order: float  # an int, or ORDER_OMEGA
    names: tuple = field(default=(), compare=False)


@dataclass(frozen=True, slots=True)
class Unknown:
    fuel_spent: int


OrderEstimate = Union[Solvable, ConfirmedUnsolvable, Unknown]


def classify(M: Term, fuel: int) -> OrderEstimate:
    out = head_reduce(M, fuel)
    if type(out) is Hnf:
        return Solvable(out)
    if type(out) is CycleDetected:
        if out.growing:
            return ConfirmedUnsolvable(ORDER_OMEGA, out.names)
        return ConfirmedUnsolvable(out.uncovered_binders, out.names)
    return Unknown(fuel)


# --- common terms ------------------------------------------------------------

def _p(s):
    return parse_lambda(s, builtins=False)


OMEGA = _p(r"(\x.x x)(\x.x x)")
FIX = _p(r"\f.(\x.f (x x))(\x.f (x x))")
I = _p(r"\x.x")
K = _p(r"\a.\b.a")
S = _p(r"\x y z.x z (y z)")
BUILTINS = {"OMEGA": OMEGA, "FIX": FIX}
