"""Labelled transitions and structural normalization of pi-calculus processes.

States are kept in a normal form: restrictions are pulled to the top of each
parallel level, parallel components are sorted, inert garbage is collected and
bound names are renamed canonically (``_0``, ``_1``, ...).  Fresh names handed
out in labels are ``_f0``, ``_f1``, ...
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

from .pi import (NIL, Abstraction, Agent, Apply, Hole, Input, Nil, Output, Par, PiError,
                 RepInput, RepOutput, Res, Wrong, all_names, alpha_key, free_names, par,
                 pi_subst)

STRONG, WEAK, PLAIN = "strong", "weak", "plain"


# --- labels ------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Tau:
    def __str__(self):
        return "τ"


@dataclass(frozen=True, slots=True)
class In:
    subject: str
    params: tuple

    def __str__(self):
        return f"{self.subject}({','.join(self.params)})"


@dataclass(frozen=True, slots=True)
class Out:
    subject: str
    extruded: tuple
    args: tuple

    def __str__(self):
        nu = f"(ν{','.join(self.extruded)})" if self.extruded else ""
        return f"{nu}{self.subject}<{','.join(self.args)}>"


TAU = Tau()
Label = Tau | In | Out


def label_key(lab):
    if type(lab) is Tau:
        return (0,)
    if type(lab) is In:
        return (1, lab.subject, lab.params)
    return (2, lab.subject, lab.args, lab.extruded)


def is_visible(lab) -> bool:
    return type(lab) is not Tau


def bound_names(lab) -> tuple:
    if type(lab) is In:
        return lab.params
    if type(lab) is Out:
        return lab.extruded
    return ()


def label_to_json(lab) -> dict:
    if type(lab) is Tau:
        return {"tag": "tau"}
    if type(lab) is In:
        return {"tag": "in", "subject": lab.subject, "params": list(lab.params)}
    return {"tag": "out", "subject": lab.subject, "extruded": list(lab.extruded),
            "args": list(lab.args)}


def fresh_names(count, taken, prefix="_f"):
    out, k = [], 0
    while len(out) < count:
        name = f"{prefix}{k}"
        if name not in taken:
            out.append(name)
        k += 1
    return out


# --- normalization -----------------------------------------------------------

def decompose(A: Agent):
    """Split a normalized agent into its top-level restricted names and components."""
    names, anns = [], {}
    while type(A) is Res:
        names.append(A.name)
        if A.ann is not None:
            anns[A.name] = A.ann
        A = A.body
    comps = []
    stack = [A]
    while stack:
        u = stack.pop()
        if type(u) is Par:
            stack.extend((u.right, u.left))
        elif type(u) is not Nil:
            comps.append(u)
    return names, comps, anns


class _Normalizer:
    def __init__(self, mode):
        self.mode = mode
        self.count = 0
        self.anns = {}

    def tmp(self, ann=None):
        self.count += 1
        t = f"%{self.count}"
        if ann is not None:
            self.anns[t] = ann
        return t

    def flat(self, P, env, names, comps):
        t = type(P)
        if t is Nil:
            return
        if t is Par:
            self.flat(P.left, env, names, comps)
            self.flat(P.right, env, names, comps)
        elif t is Res:
            u = self.tmp(P.ann)
            names.append(u)
            self.flat(P.body, {**env, P.name: u}, names, comps)
        elif t is Apply:
            if type(P.abs) is Abstraction:
                b = env.get(P.arg, P.arg)
                self.flat(P.abs.body, {**env, P.abs.param: b}, names, comps)
            else:
                comps.append(Apply(self.rename_raw(P.abs, env), env.get(P.arg, P.arg)))
        elif t is Input or t is RepInput:
            ps = tuple(self.tmp() for _ in P.params)
            inner = {**env, **dict(zip(P.params, ps))}
            comps.append(t(env.get(P.subject, P.subject), ps, self.agent(P.cont, inner)))
        elif t is Output:
            cont = None if P.cont is None else self.agent(P.cont, env)
            if type(cont) is Nil:
                cont = None
            comps.append(Output(env.get(P.subject, P.subject),
                                tuple(env.get(x, x) for x in P.args), cont))
        elif t is RepOutput:
            bs = tuple(self.tmp() for _ in P.bound)
            inner = {**env, **dict(zip(P.bound, bs))}
            comps.append(RepOutput(env.get(P.subject, P.subject),
                                   tuple(inner.get(x, x) for x in P.args),
                                   self.agent(P.cont, inner), bs))
        elif t is Hole:
            comps.append(P if P.arg is None else Hole(P.index, env.get(P.arg, P.arg)))
        elif t is Wrong:
            comps.append(P)
        elif t is Abstraction:
            raise PiError("abstraction in process position")
        else:
            raise PiError(f"not an agent: {P!r}")

    def rename_raw(self, A, env):
        sigma = {k: v for k, v in env.items() if k != v}
        return pi_subst(A, sigma) if sigma else A

    def agent(self, P, env):
        names, comps = self.level(P, env)
        return self.build(names, comps)

    def build(self, names, comps):
        body = par(*comps)
        for n in reversed(names):
            body = Res(n, body, self.anns.get(n))
        return body

    def level(self, P, env):
        names, comps = [], []
        self.flat(P, env, names, comps)
        if self.mode == PLAIN:
            return names, comps
        for _ in range(10_000):
            changed, names, comps = self.tidy(names, comps)
            if not changed:
                return names, comps
            raw = self.build(names, comps)
            names, comps = [], []
            self.flat(raw, {}, names, comps)
        raise PiError("normalization did not converge")

    def tidy(self, names, comps):
        occ = _occurrences(comps)
        # names nobody can ever receive on: no input prefix, and only ever sent
        # along channels of the same kind
        deaf = {n for n in names if n in occ and all(o[0] != "in" for o in occ[n])}
        shrinking = True
        while shrinking:
            shrinking = False
            for n in list(deaf):
                for role, node, _ in occ[n]:
                    if role == "obj" and (type(node) not in (Output, RepOutput)
                                          or node.subject not in deaf):
                        deaf.discard(n)
                        shrinking = True
                        break
        keep = []
        dead = set(deaf)
        for n in names:
            roles = {o[0] for o in occ.get(n, ())}
            if not roles or n in deaf:
                continue
            if roles == {"in"}:
                dead.add(n)
                continue
            keep.append(n)
        changed = len(keep) != len(names)
        if dead:
            comps = [_kill(c, dead) for c in comps]
        if self.mode == WEAK and not changed:
            r = _compress(keep, comps, occ)
            if r is not None:
                return True, r[0], r[1]
        seen, uniq = set(), []
        for c in comps:
            if type(c) is Nil:
                changed = True
                continue
            if type(c) in (RepInput, RepOutput):
                k = alpha_key(c)
                if k in seen:
                    changed = True
                    continue
                seen.add(k)
            uniq.append(c)
        return changed, keep, uniq


def _occurrences(comps):
    occ = defaultdict(list)

    def go(a, rep):
        t = type(a)
        if t is Input or t is RepInput:
            occ[a.subject].append(("in", a, rep))
            go(a.cont, rep or t is RepInput)
        elif t is Output or t is RepOutput:
            occ[a.subject].append(("out", a, rep))
            for x in a.args:
                occ[x].append(("obj", a, rep))
            if a.cont is not None:
                go(a.cont, rep or t is RepOutput)
        elif t is Par:
            go(a.left, rep)
            go(a.right, rep)
        elif t is Res:
            go(a.body, rep)
        elif t is Apply:
            occ[a.arg].append(("obj", a, rep))
            for x in free_names(a.abs):
                occ[x].append(("obj", a, rep))
        elif t is Hole and a.arg is not None:
            occ[a.arg].append(("obj", a, rep))
        elif t is Abstraction:
            go(a.body, rep)

    for c in comps:
        go(c, False)
    return occ


def _with_cont(a, c):
    t = type(a)
    if t in (Input, RepInput):
        return t(a.subject, a.params, c)
    if t is RepOutput:
        return RepOutput(a.subject, a.args, c, a.bound)
    return Output(a.subject, a.args, c)


def _kill(a, dead):
    """Replace every prefix whose subject is a dead channel by 0."""
    t = type(a)
    if t in (Input, RepInput, Output, RepOutput):
        if a.subject in dead:
            return NIL
        if a.cont is None:
            return a
        c = _kill(a.cont, dead)
        return a if c is a.cont else _with_cont(a, c)
    if t is Par:
        return Par(_kill(a.left, dead), _kill(a.right, dead))
    if t is Res:
        return Res(a.name, _kill(a.body, dead), a.ann)
    return a


def _replace(a, target, new):
    if a is target:
        return new
    t = type(a)
    if t in (Input, RepInput, Output, RepOutput):
        if a.cont is None:
            return a
        c = _replace(a.cont, target, new)
        return a if c is a.cont else _with_cont(a, c)
    if t is Par:
        return Par(_replace(a.left, target, new), _replace(a.right, target, new))
    if t is Res:
        return Res(a.name, _replace(a.body, target, new), a.ann)
    return a


def _is_relay(a, src, dst):
    """a == src(u,v).dst<u,v>"""
    return (type(a) is Input and a.subject == src and type(a.cont) is Output
            and a.cont.cont is None and a.cont.subject == dst and a.cont.args == a.params
            and len(set(a.params)) == len(a.params) and dst not in a.params)


def _is_request(a, y):
    """a == y(p).p(u~).R with p used nowhere else"""
    return (type(a) is Input and a.subject == y and len(a.params) == 1
            and type(a.cont) is Input and a.cont.subject == a.params[0]
            and a.params[0] not in free_names(a.cont.cont))


def _compress(names, comps, occ):
    """One weak-bisimilarity-preserving rewrite: drop a forwarder or a one-shot link."""
    level = set(names)
    for i, c in enumerate(comps):
        # !(new r)y<r>.x(p).p(u,v).r<u,v> relays every request on y to x
        if (type(c) is RepOutput and c.subject in level and c.args == c.bound
                and len(c.bound) == 1 and type(c.cont) is Input
                and _is_request(c.cont, c.cont.subject)
                and _is_relay(c.cont.cont, c.cont.params[0], c.bound[0])
                and c.cont.subject not in (c.subject, c.bound[0])):
            y, x = c.subject, c.cont.subject
            others = [o for o in occ[y] if o[1] is not c]
            if all(o[0] == "in" and _is_request(o[1], y) for o in others):
                rest = comps[:i] + comps[i + 1:]
                for o in others:
                    node = o[1]
                    rest = [_replace(d, node, Input(x, node.params, node.cont)) for d in rest]
                return [n for n in names if n != y], rest
    for i, c in enumerate(comps):
        t = type(c)
        if t not in (Input, RepInput) or c.subject not in level:
            continue
        body = c.cont
        if (type(body) is not Output or body.cont is not None or body.args != c.params
                or body.subject == c.subject or body.subject in c.params):
            continue
        y, x = c.subject, body.subject
        others = [o for o in occ[y] if o[1] is not c]
        if t is RepInput:
            if all(o[0] == "out" and type(o[1]) is Output and o[1].cont is None for o in others):
                rest = [pi_subst(d, {y: x}) for j, d in enumerate(comps) if j != i]
                return [n for n in names if n != y], rest
        else:
            if len(others) == 1 and others[0][0] == "out" and not others[0][2] \
                    and type(others[0][1]) is Output:
                node = others[0][1]
                new = Output(x, node.args)
                if node.cont is not None:
                    new = Par(new, node.cont)
                rest = [_replace(d, node, new) for j, d in enumerate(comps) if j != i]
                return [n for n in names if n != y], rest
    return None


# --- canonical naming --------------------------------------------------------

def _key(A, lookup):
    """Structural key; names bound inside A are numbered relative to A."""
    local = {}

    def nm(x):
        if x in local:
            return ("i", local[x])
        return lookup(x)

    def go(a):
        t = type(a)
        if t is Nil:
            return ("0",)
        if t is Input or t is RepInput:
            saved = {p: local.get(p) for p in a.params}
            for p in a.params:
                local[p] = len(local)
            r = ("i" if t is Input else "!i", nm(a.subject), len(a.params), go(a.cont))
            for p, v in saved.items():
                if v is None:
                    local.pop(p, None)
                else:
                    local[p] = v
            return r
        if t is Output or t is RepOutput:
            subj = nm(a.subject)
            bound = a.bound if t is RepOutput else ()
            for b in bound:
                local[b] = len(local)
            cont = ("-",) if a.cont is None else go(a.cont)
            r = ("o" if t is Output else "!o", subj, tuple(nm(x) for x in a.args), cont)
            for b in bound:
                local.pop(b)
            return r
        if t is Par:
            return ("|", go(a.left), go(a.right))
        if t is Res:
            local[a.name] = len(local)
            r = ("v", go(a.body))
            local.pop(a.name)
            return r
        if t is Apply:
            return ("@", repr(alpha_key(a.abs)), nm(a.arg))
        if t is Hole:
            return ("h", a.index, ("-",) if a.arg is None else nm(a.arg))
        return ("w",)

    return go(A)


def _name_order(comps, wanted):
    out = []
    seen = set()

    def see(x):
        if x in wanted and x not in seen:
            seen.add(x)
            out.append(x)

    def go(a):
        t = type(a)
        if t in (Input, RepInput, Output, RepOutput):
            see(a.subject)
            if t in (Output, RepOutput):
                for x in a.args:
                    see(x)
            if a.cont is not None:
                go(a.cont)
        elif t is Par:
            go(a.left)
            go(a.right)
        elif t is Res:
            go(a.body)
        elif t is Apply:
            for x in sorted(free_names(a.abs)):
                see(x)
            see(a.arg)
        elif t is Hole and a.arg is not None:
            see(a.arg)

    for c in comps:
        go(c)
    return out


class _Canon:
    def __init__(self, free, anns):
        self.free = free
        self.anns = anns
        self.count = 0

    def fresh(self):
        while True:
            name = f"_{self.count}"
            self.count += 1
            if name not in self.free:
                return name

    def level(self, names, comps, num, ren):
        level = set(names)

        def anon(x):
            if x in num:
                return ("n", num[x])
            return ("*",) if x in level else ("f", x)

        keys = [_key(c, anon) for c in comps]
        order = sorted(range(len(comps)), key=lambda i: keys[i])
        base = len(num)
        for _ in range(4):
            prov = {x: base + k for k, x in enumerate(_name_order([comps[i] for i in order], level))}

            def numbered(x):
                if x in num:
                    return ("n", num[x])
                if x in prov:
                    return ("n", prov[x])
                return ("f", x)

            full = [_key(c, numbered) for c in comps]
            new = sorted(range(len(comps)), key=lambda i: (keys[i], full[i]))
            if new == order:
                break
            order = new
        ordered = [comps[i] for i in order]
        num, ren = dict(num), dict(ren)
        final_names = []
        for x in _name_order(ordered, level) + [n for n in names if n not in prov]:
            if x in num:
                continue
            num[x] = len(num)
            ren[x] = self.fresh()
            final_names.append((ren[x], self.anns.get(x)))
        body = par(*(self.comp(c, num, ren) for c in ordered))
        for n, ann in reversed(final_names):
            body = Res(n, body, ann)
        return body

    def sub(self, A, num, ren):
        names, comps, anns = decompose(A)
        self.anns.update(anns)
        return self.level(names, comps, num, ren)

    def comp(self, c, num, ren):
        t = type(c)
        r = lambda x: ren.get(x, x)  # noqa: E731
        if t is Input or t is RepInput:
            num, ren = dict(num), dict(ren)
            ps = []
            for p in c.params:
                num[p] = len(num)
                ren[p] = self.fresh()
                ps.append(ren[p])
            return t(r(c.subject), tuple(ps), self.sub(c.cont, num, ren))
        if t is Output:
            cont = None if c.cont is None else self.sub(c.cont, num, ren)
            return Output(r(c.subject), tuple(r(x) for x in c.args), cont)
        if t is RepOutput:
            subj = r(c.subject)
            num, ren = dict(num), dict(ren)
            bs = []
            for b in c.bound:
                num[b] = len(num)
                ren[b] = self.fresh()
                bs.append(ren[b])
            return RepOutput(subj, tuple(ren.get(x, x) for x in c.args),
                             self.sub(c.cont, num, ren), tuple(bs))
        if t is Hole:
            return c if c.arg is None else Hole(c.index, r(c.arg))
        if t is Apply:
            sigma = {k: v for k, v in ren.items() if k in free_names(c.abs)}
            return Apply(pi_subst(c.abs, sigma), r(c.arg))
        return c


def normalize(P: Agent, mode: str = STRONG) -> Agent:
    """Canonical representative of P.

    ``strong`` applies strong-bisimilarity laws only; ``weak`` additionally
    removes forwarders and one-shot links (weak bisimilarity, divergence and
    barbs are preserved, expansion is not); ``plain`` only restructures.
    """
    if type(P) is Abstraction:
        n = _Normalizer(mode)
        u = n.tmp()
        body = n.agent(P.body, {P.param: u})
        canon = _Canon(free_names(P), n.anns)
        name = canon.fresh()
        return Abstraction(name, canon.sub(body, {u: 0}, {u: name}))
    n = _Normalizer(mode)
    names, comps = n.level(P, {})
    return _Canon(free_names(P), n.anns).level(names, comps, {}, {})


# --- transitions -------------------------------------------------------------

def _prefix_moves(c, taken):
    """(kind, objects, residual components, names restricted by the move)."""
    t = type(c)
    if t is Input:
        return "in", c.params, [c.cont], []
    if t is RepInput:
        return "in", c.params, [c.cont, c], []
    if t is Output:
        return "out", c.args, [] if c.cont is None else [c.cont], []
    if t is RepOutput:
        if not c.bound:
            return "out", c.args, [c.cont, c], []
        bs = fresh_names(len(c.bound), taken, prefix="%b")
        sigma = dict(zip(c.bound, bs))
        return "out", tuple(sigma.get(x, x) for x in c.args), [pi_subst(c.cont, sigma), c], bs
    return None


def transitions(P: Agent, avoid=frozenset(), mode: str = STRONG, normalized: bool = False):
    """All (label, successor) pairs of P; successors are normalized in ``mode``.

    Bound names of labels are fresh for ``avoid`` and for the names of P.
    """
    if type(P) is Abstraction:
        raise PiError("abstraction in process position")
    N = P if normalized else normalize(P, mode)
    names, comps, anns = decompose(N)
    level = set(names)
    taken = set(avoid) | all_names(N)
    out = {}

    def emit(lab, new_comps, new_names, sigma=None):
        body = par(*new_comps)
        if sigma:
            body = pi_subst(body, sigma)
        for n in reversed(new_names):
            body = Res(n, body, anns.get(n))
        s = normalize(body, mode)
        out[(lab, s)] = None

    moves = [(_prefix_moves(c, taken), i) for i, c in enumerate(comps)]
    for m, i in moves:
        if m is None:
            continue
        kind, objs, succ, local = m
        c = comps[i]
        rest = comps[:i] + succ + comps[i + 1:]
        if c.subject in level:
            continue
        if kind == "in":
            fs = fresh_names(len(objs), taken)
            emit(In(c.subject, tuple(fs)), rest, names, dict(zip(objs, fs)))
        else:
            ext = []
            for x in objs:
                if (x in level or x in local) and x not in ext:
                    ext.append(x)
            fs = fresh_names(len(ext), taken)
            sigma = dict(zip(ext, fs))
            args = tuple(sigma.get(x, x) for x in objs)
            emit(Out(c.subject, tuple(fs), args), rest,
                 [n for n in names + local if n not in sigma], sigma)
    for mi, i in moves:
        if mi is None or mi[0] != "in":
            continue
        for mo, j in moves:
            if mo is None or mo[0] != "out" or i == j:
                continue
            ci, co = comps[i], comps[j]
            if ci.subject != co.subject or len(mi[1]) != len(mo[1]):
                continue
            recv = [pi_subst(x, dict(zip(mi[1], mo[1]))) for x in mi[2][:1]] + mi[2][1:]
            rest = [c for k, c in enumerate(comps) if k not in (i, j)] + recv + mo[2]
            emit(TAU, rest, names + mo[3])
    return sorted(out, key=lambda m: (label_key(m[0]), repr(alpha_key(m[1]))))
