"""The three call-by-name encodings of lambda-terms into pi-calculus, their contexts and wires."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from . import lam
from .pi import (Abstraction, Agent, Hole, Input, Output, Par, RepInput, RepOutput, Res,
                 Sorting, all_names, apply, fresh, free_names, par, pi_alpha_eq, pi_subst, res)


class Encoding(Enum):
    MilnerCBN = "milner"
    VariantCBN = "variant"
    StrongCBN = "strong"

    @property
    def is_async(self) -> bool:
        return self is not Encoding.StrongCBN

    @property
    def sorting(self) -> Sorting:
        if self is Encoding.VariantCBN:
            # abstractions first send a private function name, hence the extra sort
            return Sorting({"Loc": ("Fun",), "Fun": ("Var", "Loc"), "Var": ("Loc",)})
        return Sorting({"Loc": ("Var", "Loc"), "Var": ("Loc",)})

    @classmethod
    def parse(cls, text: str) -> "Encoding":
        for e in cls:
            if e.value == text.lower() or e.name.lower() == text.lower():
                return e
        raise ValueError(f"unknown encoding {text!r}")


MILNER, VARIANT, STRONG = Encoding.MilnerCBN, Encoding.VariantCBN, Encoding.StrongCBN


class _Names:
    def __init__(self, used):
        self.used = set(used)

    def new(self, base):
        name, k = base, 0
        while name in self.used:
            k += 1
            name = f"{base}{k}"
        self.used.add(name)
        return name


def wire(p: str, q: str) -> Agent:
    """The one-shot location relay p(u,v).q<u,v>."""
    u, v = ("u", "v") if not {"u", "v"} & {p, q} else ("u_", "v_")
    return Input(p, (u, v), Output(q, (u, v)))


link = wire


class _Encoder:
    def __init__(self, e, M, anns=None):
        self.e = e
        self.names = _Names(lam.all_vars(M))
        self.anns = anns or {}

    def enc(self, M, p):
        t = type(M)
        if t is lam.Hole:
            return Hole(M.index, p)
        if self.e is MILNER:
            return self.milner(M, p)
        if self.e is VARIANT:
            return self.variant(M, p)
        return self.strong(M, p)

    def milner(self, M, p):
        t = type(M)
        if t is lam.Var:
            return Output(M.name, (p,))
        if t is lam.Abs:
            q = self.names.new("q")
            return Input(p, (M.binder, q), self.enc(M.body, q))
        r, y, q = self.names.new("r"), self.names.new("y"), self.names.new("q")
        body = par(self.enc(M.fun, r), Output(r, (y, p)), RepInput(y, (q,), self.enc(M.arg, q)))
        return Res(r, Res(y, body, self.anns.get("var")), self.anns.get("loc"))

    def variant(self, M, p):
        t = type(M)
        if t is lam.Var:
            return Output(M.name, (p,))
        if t is lam.Abs:
            v, q = self.names.new("v"), self.names.new("q")
            return Res(v, Par(Output(p, (v,)), Input(v, (M.binder, q), self.enc(M.body, q))))
        r, v, y, q = (self.names.new(b) for b in "rvyq")
        server = Res(y, Par(Output(v, (y, p)), RepInput(y, (q,), self.enc(M.arg, q))))
        return Res(r, Par(self.enc(M.fun, r), Input(r, (v,), server)))

    def strong(self, M, p):
        t = type(M)
        if t is lam.Var:
            p1 = self.names.new("p'")
            return Input(M.name, (p1,), wire(p1, p))
        if t is lam.Abs:
            q = self.names.new("q")
            return res((M.binder, q), Par(Output(p, (M.binder, q)), self.enc(M.body, q)))
        q, r, y, p1 = (self.names.new(b) for b in ("q", "r", "y", "p'"))
        # a fresh r for every copy of the argument
        server = Par(wire(p1, p), RepOutput(y, (r,), self.enc(M.arg, r), (r,)))
        return Res(q, Par(self.enc(M.fun, q), Input(q, (y, p1), server)))


def encode(e: Encoding, M: lam.Term, anns: dict | None = None) -> Abstraction:
    """⟦M⟧ as an abstraction over its location name.

    ``anns`` may carry type annotations for the restrictions introduced by the
    Milner application clause (keys ``loc`` and ``var``).
    """
    enc = _Encoder(e, M, anns)
    p = enc.names.new("p")
    return Abstraction(p, enc.enc(M, p))


def encode_at(e: Encoding, M: lam.Term, p: str = "p") -> Agent:
    """The process ⟦M⟧⟨p⟩."""
    return apply(encode(e, M), p)


def encoding_sorting(e: Encoding, M: lam.Term) -> Sorting:
    s = e.sorting
    A = encode(e, M)
    return Sorting(s.obj, {**{x: "Var" for x in lam.free_vars(M)}, A.param: "Loc"})


# --- contexts ----------------------------------------------------------------

@dataclass(frozen=True)
class PiContext:
    body: Agent
    keep: frozenset = field(default=frozenset())  # binders meant to capture (lambda binders)

    def holes(self) -> list:
        out = []

        def go(a):
            t = type(a)
            if t is Hole:
                out.append(a.index)
            elif t in (Input, RepInput, RepOutput) or (t is Output and a.cont is not None):
                go(a.cont)
            elif t is Par:
                go(a.left)
                go(a.right)
            elif t is Res or t is Abstraction:
                go(a.body)

        go(self.body)
        return out

    def fill(self, fills) -> Agent:
        """Plug agents into the holes; hole ``i`` takes ``fills[i - 1]``.

        Only the names in ``keep`` capture free names of the fills; any other
        clashing binder of the context is renamed first.
        """
        if not isinstance(fills, dict):
            fills = {i + 1: f for i, f in enumerate(fills)}
        holes = self.holes()
        if sorted(holes) != sorted(fills):
            raise ValueError(f"context has holes {sorted(holes)}, got fills for {sorted(fills)}")
        return plug(self.body, fills, self.keep)

    def is_guarded(self) -> bool:
        return is_guarded(self)

    def __str__(self):
        from .pi import pretty
        return pretty(self.body)


def plug(body, fills: dict, keep=frozenset()) -> Agent:
    """Fill holes of ``body``, renaming binders outside ``keep`` that would capture."""
    avoid = set().union(*(free_names(F) for F in fills.values())) - set(keep)
    if avoid:
        body = _unclash(body, avoid, avoid | all_names(body))
    return _plug(body, fills)


def _unclash(a, avoid, used):
    t = type(a)

    def ren(names, body):
        sigma = {}
        for n in names:
            if n in avoid:
                z = fresh(n, used)
                used.add(z)
                sigma[n] = z
        return tuple(sigma.get(n, n) for n in names), pi_subst(body, sigma) if sigma else body

    if t is Input or t is RepInput:
        params, cont = ren(a.params, a.cont)
        return t(a.subject, params, _unclash(cont, avoid, used))
    if t is Output:
        return a if a.cont is None else Output(a.subject, a.args, _unclash(a.cont, avoid, used))
    if t is RepOutput:
        bound, inner = ren(a.bound, Output("%", a.args, a.cont))
        return RepOutput(a.subject, inner.args, _unclash(inner.cont, avoid, used), bound)
    if t is Par:
        return Par(_unclash(a.left, avoid, used), _unclash(a.right, avoid, used))
    if t is Res:
        (name,), body = ren((a.name,), a.body)
        return Res(name, _unclash(body, avoid, used), a.ann)
    if t is Abstraction:
        (param,), body = ren((a.param,), a.body)
        return Abstraction(param, _unclash(body, avoid, used))
    return a


def _plug(a, fills):
    t = type(a)
    if t is Hole:
        F = fills[a.index]
        if a.arg is None:
            return F
        if type(F) is not Abstraction:
            raise ValueError("hole expects an abstraction")
        return apply(F, a.arg)
    if t is Input or t is RepInput:
        return t(a.subject, a.params, _plug(a.cont, fills))
    if t is Output:
        return a if a.cont is None else Output(a.subject, a.args, _plug(a.cont, fills))
    if t is RepOutput:
        return RepOutput(a.subject, a.args, _plug(a.cont, fills), a.bound)
    if t is Par:
        return Par(_plug(a.left, fills), _plug(a.right, fills))
    if t is Res:
        return Res(a.name, _plug(a.body, fills), a.ann)
    if t is Abstraction:
        return Abstraction(a.param, _plug(a.body, fills))
    return a


def is_guarded(C: PiContext) -> bool:
    """True iff every hole sits underneath some prefix."""
    def go(a, guarded):
        t = type(a)
        if t is Hole:
            return guarded
        if t in (Input, RepInput, RepOutput) or (t is Output and a.cont is not None):
            return go(a.cont, True)
        if t is Par:
            return go(a.left, guarded) and go(a.right, guarded)
        if t is Res or t is Abstraction:
            return go(a.body, guarded)
        return True

    return go(C.body, False)


def context_of(e: Encoding, C: lam.Term) -> PiContext:
    """The encoding of a lambda-context; its lambda binders capture, nothing else does."""
    return PiContext(encode(e, C), frozenset(_lambda_binders(C)))


def _lambda_binders(M):
    t = type(M)
    if t is lam.Abs:
        return {M.binder} | _lambda_binders(M.body)
    if t is lam.App:
        return _lambda_binders(M.fun) | _lambda_binders(M.arg)
    return set()


def abstraction_context(e: Encoding, x: str = "x") -> PiContext:
    return context_of(e, lam.Abs(x, lam.Hole(1)))


def variable_context(e: Encoding, x: str = "x", n: int = 1) -> PiContext:
    M = lam.Var(x)
    for i in range(1, n + 1):
        M = lam.App(M, lam.Hole(i))
    return context_of(e, M)


def uniformity_check(e: Encoding, M: lam.Term, sigma: dict) -> bool:
    """⟦Mσ⟧ and ⟦M⟧σ coincide up to alpha-conversion."""
    return pi_alpha_eq(encode(e, lam.rename(M, sigma)), pi_subst(encode(e, M), sigma))


def free_name_check(e: Encoding, M: lam.Term) -> bool:
    return free_names(encode(e, M)) == lam.free_vars(M)
