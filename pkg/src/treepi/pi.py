"""Polyadic pi-calculus agents: syntax, parsing, printing, names, substitution, sorts."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional, Union


@dataclass(frozen=True, slots=True)
class Nil:
    pass


@dataclass(frozen=True, slots=True)
class Input:
    subject: str
    params: tuple
    cont: "Agent"


@dataclass(frozen=True, slots=True)
class Output:
    subject: str
    args: tuple
    cont: Optional["Agent"] = None  # None: asynchronous output


@dataclass(frozen=True, slots=True)
class Par:
    left: "Agent"
    right: "Agent"


@dataclass(frozen=True, slots=True)
class Res:
    name: str
    body: "Agent"
    ann: object = field(default=None, compare=False)  # optional type, see linear.py


@dataclass(frozen=True, slots=True)
class RepInput:
    subject: str
    params: tuple
    cont: "Agent"


@dataclass(frozen=True, slots=True)
class RepOutput:
    """Replicated output ``!a<b>.P``; needed by the strong call-by-name encoding.

    Names in ``bound`` are restricted afresh in every copy, ``!(new r)a<r>.P``.
    """
    subject: str
    args: tuple
    cont: "Agent"
    bound: tuple = ()


@dataclass(frozen=True, slots=True)
class Apply:
    abs: "Agent"
    arg: str


@dataclass(frozen=True, slots=True)
class Abstraction:
    param: str
    body: "Agent"


@dataclass(frozen=True, slots=True)
class Hole:
    index: int
    arg: Optional[str] = None


@dataclass(frozen=True, slots=True)
class Wrong:
    pass


Agent = Union[Nil, Input, Output, Par, Res, RepInput, RepOutput, Apply, Abstraction, Hole, Wrong]
NIL = Nil()
PREFIXES = (Input, Output, RepInput, RepOutput)


class PiError(ValueError):
    pass


def par(*agents) -> Agent:
    agents = [a for a in agents if type(a) is not Nil]
    if not agents:
        return NIL
    out = agents[-1]
    for a in reversed(agents[:-1]):
        out = Par(a, out)
    return out


def res(names, body, anns=None) -> Agent:
    anns = anns or {}
    for n in reversed(list(names)):
        body = Res(n, body, anns.get(n))
    return body


def apply(F: Agent, b: str) -> Agent:
    """F<b> with the abstraction reduced away (the app rule is a plain substitution)."""
    if type(F) is Abstraction:
        return pi_subst(F.body, {F.param: b})
    return Apply(F, b)


# --- names -------------------------------------------------------------------

def free_names(A: Agent) -> frozenset:
    t = type(A)
    if t is Nil or t is Wrong:
        return frozenset()
    if t is Input or t is RepInput:
        return (free_names(A.cont) - set(A.params)) | {A.subject}
    if t is Output:
        out = frozenset((A.subject, *A.args))
        return out if A.cont is None else out | free_names(A.cont)
    if t is RepOutput:
        return (frozenset(A.args) | free_names(A.cont)) - set(A.bound) | {A.subject}
    if t is Par:
        return free_names(A.left) | free_names(A.right)
    if t is Res:
        return free_names(A.body) - {A.name}
    if t is Apply:
        return free_names(A.abs) | {A.arg}
    if t is Abstraction:
        return free_names(A.body) - {A.param}
    if t is Hole:
        return frozenset() if A.arg is None else frozenset((A.arg,))
    raise PiError(f"not an agent: {A!r}")


def all_names(A: Agent) -> set:
    out = set()

    def go(a):
        t = type(a)
        if t in PREFIXES:
            out.add(a.subject)
            out.update(a.params if t in (Input, RepInput) else a.args)
            if a.cont is not None:
                go(a.cont)
        elif t is Par:
            go(a.left)
            go(a.right)
        elif t is Res:
            out.add(a.name)
            go(a.body)
        elif t is Apply:
            out.add(a.arg)
            go(a.abs)
        elif t is Abstraction:
            out.add(a.param)
            go(a.body)
        elif t is Hole and a.arg is not None:
            out.add(a.arg)

    go(A)
    return out


def fresh(base: str, avoid) -> str:
    name = base
    while name in avoid:
        name += "'"
    return name


def is_async(A: Agent) -> bool:
    t = type(A)
    if t is Output:
        return A.cont is None
    if t is RepOutput:
        return False
    if t is Input or t is RepInput:
        return is_async(A.cont)
    if t is Par:
        return is_async(A.left) and is_async(A.right)
    if t is Res or t is Abstraction:
        return is_async(A.body)
    if t is Apply:
        return is_async(A.abs)
    return True


# --- substitution ------------------------------------------------------------

def pi_subst(A: Agent, sigma: dict) -> Agent:
    """Capture-avoiding simultaneous name substitution."""
    sigma = {k: v for k, v in sigma.items() if k != v}
    if not sigma:
        return A
    return _subst(A, sigma)


def _n(name, sigma):
    return sigma.get(name, name)


def _binders(binders, body, sigma):
    """Restrict sigma under binders, renaming binders that would capture."""
    sigma = {k: v for k, v in sigma.items() if k not in binders}
    if not sigma:
        return binders, body, sigma
    fn_body = free_names(body)
    sigma = {k: v for k, v in sigma.items() if k in fn_body}
    if not sigma:
        return binders, body, sigma
    targets = set(sigma.values())
    clash = [b for b in binders if b in targets]
    if clash:
        avoid = targets | fn_body | set(sigma) | set(binders)
        ren = {}
        for b in clash:
            z = fresh(b, avoid)
            avoid.add(z)
            ren[b] = z
        body = _subst(body, ren)
        binders = tuple(ren.get(b, b) for b in binders)
    return binders, body, sigma


def _subst(A, sigma):
    t = type(A)
    if t is Nil or t is Wrong:
        return A
    if t is Input or t is RepInput:
        params, cont, inner = _binders(A.params, A.cont, sigma)
        return t(_n(A.subject, sigma), params, _subst(cont, inner) if inner else cont)
    if t is Output:
        cont = None if A.cont is None else _subst(A.cont, sigma)
        return Output(_n(A.subject, sigma), tuple(_n(x, sigma) for x in A.args), cont)
    if t is RepOutput:
        if not A.bound:
            return RepOutput(_n(A.subject, sigma), tuple(_n(x, sigma) for x in A.args),
                             _subst(A.cont, sigma))
        # the subject lies outside the scope of the bound names
        inner_agent = Output("%", A.args, A.cont)
        bound, inner_agent, inner = _binders(A.bound, inner_agent, sigma)
        if inner:
            inner_agent = _subst(inner_agent, inner)
        return RepOutput(_n(A.subject, sigma), inner_agent.args, inner_agent.cont, bound)
    if t is Par:
        return Par(_subst(A.left, sigma), _subst(A.right, sigma))
    if t is Res:
        (name,), body, inner = _binders((A.name,), A.body, sigma)
        return Res(name, _subst(body, inner) if inner else body, A.ann)
    if t is Apply:
        return Apply(_subst(A.abs, sigma), _n(A.arg, sigma))
    if t is Abstraction:
        (param,), body, inner = _binders((A.param,), A.body, sigma)
        return Abstraction(param, _subst(body, inner) if inner else body)
    if t is Hole:
        return A if A.arg is None else Hole(A.index, _n(A.arg, sigma))
    raise PiError(f"not an agent: {A!r}")


# --- alpha equivalence -------------------------------------------------------

def alpha_key(A: Agent, env: Optional[dict] = None):
    """Structural key in which bound names are replaced by binding depth."""
    env = dict(env or {})
    depth = [len(env)]

    def nm(x, e):
        return ("b", e[x]) if x in e else ("f", x)

    def bind(e, names):
        e = dict(e)
        for x in names:
            e[x] = depth[0]
            depth[0] += 1
        return e

    def go(a, e):
        t = type(a)
        if t is Nil:
            return ("0",)
        if t is Input or t is RepInput:
            d = depth[0]
            inner = bind(e, a.params)
            r = ("i" if t is Input else "!i", nm(a.subject, e), len(a.params), go(a.cont, inner))
            depth[0] = d
            return r
        if t is Output or t is RepOutput:
            subj = nm(a.subject, e)
            d = depth[0]
            if t is RepOutput and a.bound:
                e = bind(e, a.bound)
            cont = ("-",) if a.cont is None else go(a.cont, e)
            r = ("o" if t is Output else "!o", subj, tuple(nm(x, e) for x in a.args), cont)
            depth[0] = d
            return r
        if t is Par:
            return ("|", go(a.left, e), go(a.right, e))
        if t is Res:
            d = depth[0]
            r = ("v", go(a.body, bind(e, (a.name,))))
            depth[0] = d
            return r
        if t is Abstraction:
            d = depth[0]
            r = ("\\", go(a.body, bind(e, (a.param,))))
            depth[0] = d
            return r
        if t is Apply:
            return ("@", go(a.abs, e), nm(a.arg, e))
        if t is Hole:
            return ("h", a.index, ("-",) if a.arg is None else nm(a.arg, e))
        return ("w",)

    return go(A, env)


def pi_alpha_eq(A: Agent, B: Agent) -> bool:
    return alpha_key(A) == alpha_key(B)


# --- printing ----------------------------------------------------------------

def _names(xs):
    return ",".join(xs)


def pretty(A: Agent) -> str:
    return _pp(A, top=True)


def _pp(A, top=False):
    t = type(A)
    if t is Nil:
        return "0"
    if t is Wrong:
        return "wrong"
    if t is Par:
        parts = []
        stack = [A]
        while stack:
            u = stack.pop()
            if type(u) is Par:
                stack.extend((u.right, u.left))
            else:
                parts.append(_pp(u))
        s = " | ".join(parts)
        return s if top else f"({s})"
    if t is Input or t is RepInput:
        bang = "!" if t is RepInput else ""
        return f"{bang}{A.subject}({_names(A.params)}).{_pp(A.cont)}"
    if t is Output:
        s = f"{A.subject}<{_names(A.args)}>"
        return s if A.cont is None else f"{s}.{_pp(A.cont)}"
    if t is RepOutput:
        nu = f"(new {_names(A.bound)})" if A.bound else ""
        return f"!{nu}{A.subject}<{_names(A.args)}>.{_pp(A.cont)}"
    if t is Res:
        names = []
        while type(A) is Res:
            names.append(A.name)
            A = A.body
        return f"new {_names(names)}. {_pp(A)}"
    if t is Abstraction:
        s = f"(\\{A.param}) {_pp(A.body, top=True)}"
        return s if top else f"({s})"
    if t is Apply:
        return f"{_pp(A.abs)}<{A.arg}>"
    if t is Hole:
        return f"[{A.index}]" if A.arg is None else f"[{A.index}]<{A.arg}>"
    raise PiError(f"not an agent: {A!r}")


# --- parsing -----------------------------------------------------------------

class PiSyntaxError(PiError):
    def __init__(self, msg, pos):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos


_TOK = re.compile(r"\s*(?:(?P<sym>[()<>.,|!\[\]]|\\|λ|ν)|(?P<num>[0-9]+)"
                  r"|(?P<id>[A-Za-z_][A-Za-z0-9_']*))")
_KEYWORDS = {"new", "wrong"}


class _PiParser:
    def __init__(self, text):
        self.toks = []
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            m = _TOK.match(text, pos)
            if not m:
                pos += len(text[pos:]) - len(text[pos:].lstrip())
                raise PiSyntaxError(f"unexpected character {text[pos]!r}", pos)
            kind = m.lastgroup
            val = m.group(kind)
            if kind == "sym" and val == "λ":
                val = "\\"
            if kind == "sym" and val == "ν":
                kind, val = "id", "new"
            self.toks.append((kind, val, m.start(kind)))
            pos = m.end()
        self.toks.append(("eof", "", len(text)))
        self.i = 0

    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, val, k=0):
        return self.peek(k)[1] == val and self.peek(k)[0] != "eof"

    def expect(self, val):
        kind, v, pos = self.peek()
        if v != val or kind == "eof":
            raise PiSyntaxError(f"expected {val!r}, found {v or 'end of input'!r}", pos)
        self.i += 1

    def name(self):
        kind, v, pos = self.peek()
        if kind != "id" or v in _KEYWORDS:
            raise PiSyntaxError(f"expected a name, found {v or 'end of input'!r}", pos)
        self.i += 1
        return v

    def names(self, close):
        out = []
        if self.at(close):
            return tuple(out)
        out.append(self.name())
        while self.at(","):
            self.i += 1
            out.append(self.name())
        return tuple(out)

    def agent(self):
        if self.at("(") and self.at("\\", 1):
            self.i += 2
            p = self.name()
            self.expect(")")
            return Abstraction(p, self.agent())
        parts = [self.prefix()]
        while self.at("|"):
            self.i += 1
            parts.append(self.prefix())
        out = parts[-1]
        for p in reversed(parts[:-1]):
            out = Par(p, out)
        return out

    def cont(self):
        if self.at("."):
            self.i += 1
            return self.prefix()
        return NIL

    def prefix(self):
        kind, v, pos = self.peek()
        if kind == "num" and v == "0":
            self.i += 1
            return NIL
        if kind == "id" and v == "wrong":
            self.i += 1
            return Wrong()
        if kind == "id" and v == "new":
            self.i += 1
            ns = [self.name()]
            while self.at(","):
                self.i += 1
                ns.append(self.name())
            self.expect(".")
            return res(ns, self.prefix())
        if v == "!" and kind == "sym":
            self.i += 1
            bound = ()
            if self.at("(") and self.at("new", 1):
                self.i += 2
                bound = self.names(")")
                self.expect(")")
            a = self.name()
            if bound and not self.at("<"):
                raise PiSyntaxError("expected '<' after a bound replicated output", self.peek()[2])
            if self.at("("):
                self.i += 1
                ps = self.names(")")
                self.expect(")")
                self._distinct(ps, pos)
                return RepInput(a, ps, self.cont())
            self.expect("<")
            xs = self.names(">")
            self.expect(">")
            return RepOutput(a, xs, self.cont(), bound)
        if v == "[" and kind == "sym":
            self.i += 1
            k = self.peek()
            if k[0] != "num":
                raise PiSyntaxError("expected hole index", k[2])
            self.i += 1
            self.expect("]")
            if self.at("<"):
                self.i += 1
                b = self.name()
                self.expect(">")
                return Hole(int(k[1]), b)
            return Hole(int(k[1]))
        if v == "(" and kind == "sym":
            self.i += 1
            inner = self.agent()
            self.expect(")")
            if self.at("<"):
                self.i += 1
                b = self.name()
                self.expect(">")
                return Apply(inner, b)
            return inner
        if kind == "id":
            a = self.name()
            if self.at("("):
                self.i += 1
                ps = self.names(")")
                self.expect(")")
                self._distinct(ps, pos)
                return Input(a, ps, self.cont())
            if self.at("<"):
                self.i += 1
                xs = self.names(">")
                self.expect(">")
                if self.at("."):
                    self.i += 1
                    return Output(a, xs, self.prefix())
                return Output(a, xs)
            raise PiSyntaxError(f"expected '(' or '<' after {a!r}", self.peek()[2])
        raise PiSyntaxError(f"unexpected {v or 'end of input'!r}", pos)

    @staticmethod
    def _distinct(ps, pos):
        if len(set(ps)) != len(ps):
            raise PiSyntaxError("input parameters must be pairwise distinct", pos)


def parse_pi(text: str) -> Agent:
    p = _PiParser(text)
    a = p.agent()
    if p.peek()[0] != "eof":
        raise PiSyntaxError(f"unexpected {p.peek()[1]!r}", p.peek()[2])
    return a


# --- JSON --------------------------------------------------------------------

def to_json(A: Agent) -> dict:
    t = type(A)
    if t is Nil:
        return {"tag": "nil"}
    if t is Wrong:
        return {"tag": "wrong"}
    if t is Input or t is RepInput:
        return {"tag": "input" if t is Input else "rep_input", "subject": A.subject,
                "params": list(A.params), "cont": to_json(A.cont)}
    if t is Output or t is RepOutput:
        d = {"tag": "output" if t is Output else "rep_output", "subject": A.subject,
             "args": list(A.args)}
        if A.cont is not None:
            d["cont"] = to_json(A.cont)
        if t is RepOutput and A.bound:
            d["bound"] = list(A.bound)
        return d
    if t is Par:
        return {"tag": "par", "left": to_json(A.left), "right": to_json(A.right)}
    if t is Res:
        d = {"tag": "res", "name": A.name, "body": to_json(A.body)}
        if A.ann is not None:
            d["type"] = str(A.ann)
        return d
    if t is Apply:
        return {"tag": "app", "abs": to_json(A.abs), "arg": A.arg}
    if t is Abstraction:
        return {"tag": "abs", "param": A.param, "body": to_json(A.body)}
    d = {"tag": "hole", "index": A.index}
    if A.arg is not None:
        d["arg"] = A.arg
    return d


def from_json(d: dict) -> Agent:
    tag = d["tag"]
    if tag == "nil":
        return NIL
    if tag == "wrong":
        return Wrong()
    if tag in ("input", "rep_input"):
        cls = Input if tag == "input" else RepInput
        return cls(d["subject"], tuple(d["params"]), from_json(d["cont"]))
    if tag == "output":
        return Output(d["subject"], tuple(d["args"]), from_json(d["cont"]) if "cont" in d else None)
    if tag == "rep_output":
        return RepOutput(d["subject"], tuple(d["args"]), from_json(d.get("cont", {"tag": "nil"})),
                         tuple(d.get("bound", ())))
    if tag == "par":
        return Par(from_json(d["left"]), from_json(d["right"]))
    if tag == "res":
        return Res(d["name"], from_json(d["body"]))
    if tag == "app":
        return Apply(from_json(d["abs"]), d["arg"])
    if tag == "abs":
        return Abstraction(d["param"], from_json(d["body"]))
    if tag == "hole":
        return Hole(d["index"], d.get("arg"))
    raise PiError(f"unknown tag {tag!r}")


def dumps(A: Agent) -> str:
    return json.dumps(to_json(A), ensure_ascii=False)


# --- sorting -----------------------------------------------------------------

@dataclass
class Sorting:
    obj: dict  # sort -> tuple of sorts
    sort_of: dict = field(default_factory=dict)  # name -> sort


class SortError(PiError):
    def __init__(self, msg, location):
        super().__init__(f"{msg} (at {location})")
        self.location = location


class _Unifier:
    def __init__(self, obj):
        self.obj = obj
        self.parent = {}
        self.sort = {}
        self.objs = {}

    def node(self, key):
        if key not in self.parent:
            self.parent[key] = key
            if key[0] == "S":
                self.sort[key] = key[1]
                self.objs[key] = tuple(("S", s) for s in self.obj.get(key[1], ()))
                for s in self.obj.get(key[1], ()):
                    self.node(("S", s))
        return key

    def find(self, k):
        while self.parent[k] != k:
            self.parent[k] = self.parent[self.parent[k]]
            k = self.parent[k]
        return k

    def unify(self, a, b, where):
        ra, rb = self.find(self.node(a)), self.find(self.node(b))
        if ra == rb:
            return
        sa, sb = self.sort.get(ra), self.sort.get(rb)
        if sa is not None and sb is not None and sa != sb:
            raise SortError(f"sort mismatch: {sa} vs {sb}", where)
        oa, ob = self.objs.get(ra), self.objs.get(rb)
        self.parent[rb] = ra
        self.sort[ra] = sa if sa is not None else sb
        self.objs[ra] = oa if oa is not None else ob
        if oa is not None and ob is not None:
            if len(oa) != len(ob):
                raise SortError(f"arity mismatch: {len(oa)} vs {len(ob)}", where)
            for x, y in zip(oa, ob):
                self.unify(x, y, where)

    def use(self, subject, args, where):
        r = self.find(self.node(subject))
        o = self.objs.get(r)
        if o is None:
            s = self.sort.get(r)
            if s is not None and s not in self.obj:
                raise SortError(f"sort {s} has no object sort", where)
            self.objs[r] = tuple(self.node(a) for a in args)
            return
        if len(o) != len(args):
            raise SortError(f"arity mismatch: expected {len(o)}, got {len(args)}", where)
        for x, y in zip(o, args):
            self.unify(x, y, where)

    def snapshot(self):
        return dict(self.parent), dict(self.sort), dict(self.objs)

    def restore(self, snap):
        self.parent, self.sort, self.objs = (dict(x) for x in snap)


def sort_check(A: Agent, s: Sorting) -> dict:
    """Check arities and sorts; returns the inferred sort of every free name and parameter.

    Raises SortError at the first violation.
    """
    u = _Unifier(s.obj)
    counter = [0]
    shown = {}

    def bind(e, xs):
        e = dict(e)
        for x in xs:
            counter[0] += 1
            e[x] = ("b", counter[0], x)
            u.node(e[x])
            shown.setdefault(x, e[x])
        return e

    def nm(x, e):
        if x in e:
            return e[x]
        k = u.node(("n", x))
        if x in s.sort_of:
            u.unify(k, ("S", s.sort_of[x]), x)
        shown.setdefault(x, k)
        return k

    def go(a, e):
        t = type(a)
        if t in PREFIXES:
            where = _pp(a)[:60]
            objs = a.params if t in (Input, RepInput) else a.args
            subj = nm(a.subject, e)
            if t in (Input, RepInput):
                inner = bind(e, objs)
            else:
                inner = bind(e, a.bound) if t is RepOutput and a.bound else e
            u.use(subj, [inner[x] if x in inner else nm(x, e) for x in objs], where)
            if a.cont is not None:
                go(a.cont, inner)
        elif t is Par:
            go(a.left, e)
            go(a.right, e)
        elif t is Res:
            go(a.body, bind(e, (a.name,)))
        elif t is Abstraction:
            go(a.body, bind(e, (a.param,)))
        elif t is Apply:
            if type(a.abs) is Abstraction:
                inner = bind(e, (a.abs.param,))
                u.unify(inner[a.abs.param], nm(a.arg, e), _pp(a)[:60])
                go(a.abs.body, inner)
            else:
                nm(a.arg, e)
                go(a.abs, e)
        elif t is Hole and a.arg is not None:
            nm(a.arg, e)

    if type(A) is Abstraction:
        e = bind({}, (A.param,))
        if A.param in s.sort_of:
            u.unify(e[A.param], ("S", s.sort_of[A.param]), A.param)
        go(A.body, e)
    else:
        go(A, {})
    _resolve(u, s)
    out = {}
    for x, k in shown.items():
        out[x] = u.sort.get(u.find(k))
    return out


def _resolve(u, s):
    """Assign concrete sorts to roots that only carry object constraints."""
    pending = [r for r in {u.find(k) for k in u.parent}
               if u.sort.get(r) is None and u.objs.get(r) is not None]
    if not pending:
        return
    r = pending[0]
    arity = len(u.objs[r])
    for cand in sorted(s.obj):
        if len(s.obj[cand]) != arity:
            continue
        snap = u.snapshot()
        try:
            u.unify(r, ("S", cand), "inference")
            _resolve(u, s)
            return
        except SortError:
            u.restore(snap)
    raise SortError(f"no sort with object arity {arity} fits", "inference")
