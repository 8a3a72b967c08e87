"""Bounded behavioural checks over the labelled transition system.

Every check answers Proved, Refuted (with a replayable witness) or Unknown.
Proved is only returned when every reachable state was expanded within the
bounds; whatever lies beyond the frontier is treated optimistically, so a
refutation found on a partial graph is still sound.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .lts import (STRONG, TAU, WEAK, In, Out, decompose, fresh_names, label_to_json,
                  normalize, transitions)
from .pi import (Abstraction, Agent, Hole, Input, Output, Par, RepInput, RepOutput, Res,
                 all_names, alpha_key, free_names, is_async, par, pi_subst, pretty, res)


@dataclass(frozen=True)
class Bounds:
    max_states: int = 4096
    tau_budget: int = 64
    max_rounds: int = 10_000

    def __post_init__(self):
        for k in ("max_states", "tau_budget", "max_rounds"):
            if getattr(self, k) <= 0:
                raise ValueError(f"{k} must be positive")

    def to_json(self):
        return {"max_states": self.max_states, "tau_budget": self.tau_budget,
                "max_rounds": self.max_rounds}


class Status(Enum):
    Proved = "proved"
    Refuted = "refuted"
    Unknown = "unknown"


@dataclass(frozen=True)
class Step:
    """One round of a game: the attacker's move and the defender's chosen answer.

    ``side`` names the attacking process (``left``/``right``); the special side
    ``div`` marks a divergence mismatch and ``path`` a plain reachability trace.
    """
    side: str
    label: object
    attacker: Optional[Agent]
    defender: Optional[Agent] = None

    def to_json(self):
        return {"side": self.side,
                "label": None if self.label is None else label_to_json(self.label),
                "label_text": None if self.label is None else str(self.label),
                "attacker": None if self.attacker is None else pretty(self.attacker),
                "defender": None if self.defender is None else pretty(self.defender)}


@dataclass
class Verdict:
    status: Status
    witness: Optional[tuple] = None
    reason: str = ""
    states_explored: int = 0
    bounds: Optional[Bounds] = None
    relation: str = ""

    @property
    def proved(self):
        return self.status is Status.Proved

    @property
    def refuted(self):
        return self.status is Status.Refuted

    @property
    def unknown(self):
        return self.status is Status.Unknown

    def to_json(self) -> dict:
        d = {"verdict": self.status.value, "bounds": (self.bounds or Bounds()).to_json(),
             "states_explored": self.states_explored}
        if self.relation:
            d["relation"] = self.relation
        if self.witness is not None:
            d["witness"] = [s.to_json() for s in self.witness]
        if self.reason:
            d["reason"] = self.reason
        return d

    def dumps(self):
        return json.dumps(self.to_json(), ensure_ascii=False)

    def __str__(self):
        s = self.status.value
        if self.reason:
            s += f" ({self.reason})"
        return s


def Proved(**kw):
    return Verdict(Status.Proved, **kw)


def Refuted(witness=None, **kw):
    return Verdict(Status.Refuted, witness=witness, **kw)


def Unknown(reason="", **kw):
    return Verdict(Status.Unknown, reason=reason, **kw)


# --- state spaces ------------------------------------------------------------

class _Space:
    """Memoized moves over canonical states, with a global state budget."""

    def __init__(self, mode, bounds):
        self.mode = mode
        self.b = bounds
        self.seen = set()
        self.full = False
        self._raw = {}
        self._inst = {}
        self._clos = {}
        self._div = {}

    def norm(self, P):
        s = normalize(P, self.mode)
        self.touch(s)
        return s

    def touch(self, s):
        if s not in self.seen:
            self.seen.add(s)
            if len(self.seen) > self.b.max_states or _depth(s) > MAX_DEPTH:
                self.full = True

    def raw(self, s, avoid):
        key = (s, avoid)
        r = self._raw.get(key)
        if r is None:
            r = transitions(s, avoid, self.mode, normalized=True)
            for _, t in r:
                self.touch(t)
            self._raw[key] = r
        return r

    def taus(self, s):
        return [t for lab, t in self.raw(s, frozenset(free_names(s))) if lab is TAU]

    def moves(self, s, avoid, sync):
        """Moves with input parameters instantiated early when ``sync``."""
        key = (s, avoid, sync)
        r = self._inst.get(key)
        if r is not None:
            return r
        r = []
        for lab, t in self.raw(s, avoid):
            if type(lab) is not In:
                r.append((lab, t))
                continue
            for tup in _tuples(lab.params, avoid, sync):
                if tup == lab.params:
                    r.append((lab, t))
                else:
                    t2 = self.norm(pi_subst(t, dict(zip(lab.params, tup))))
                    r.append((In(lab.subject, tup), t2))
        self._inst[key] = r
        return r

    def closure(self, s):
        """States reachable by at most tau_budget internal steps; flag set if cut short."""
        r = self._clos.get(s)
        if r is not None:
            return r
        seen = {s: 0}
        todo = deque([s])
        cut = False
        while todo:
            u = todo.popleft()
            d = seen[u]
            if self.full:
                cut = True
                break
            succ = self.taus(u)
            if succ and d >= self.b.tau_budget:
                cut = True
                continue
            for t in succ:
                if t not in seen:
                    seen[t] = d + 1
                    todo.append(t)
        r = (frozenset(seen), cut)
        self._clos[s] = r
        return r

    def answers(self, s, lab, avoid, sync, kind):
        """Defender answers to ``lab`` from ``s``; returns (states, truncated).

        kind: ``strong`` exact step, ``hat`` at most one step, ``weak`` the
        usual weak move, ``plus`` a weak move with at least one step.
        """
        if kind == "strong":
            return {t for l2, t in self.moves(s, avoid, sync) if l2 == lab}, False
        if kind == "hat":
            out = {t for l2, t in self.moves(s, avoid, sync) if l2 == lab}
            if lab is TAU:
                out.add(s)
            return out, False
        pre, cut = self.closure(s)
        if lab is TAU and kind == "weak":
            return set(pre), cut
        out = set()
        for u in pre:
            for l2, t in self.moves(u, avoid, sync):
                if l2 == lab:
                    post, c2 = self.closure(t)
                    cut = cut or c2
                    out |= post
        return out, cut

    def diverges(self, s):
        """True / False / None (unknown) for an infinite internal run from s."""
        r = self._div.get(s)
        if r is None:
            r = _tau_lasso(s, self.taus, self)
            self._div[s] = r
        return r


MAX_DEPTH = 150  # deeper states count as exhausting the budget (they grow without bound)


def _depth(A):
    best, stack = 0, [(A, 1)]
    while stack:
        a, d = stack.pop()
        best = max(best, d)
        t = type(a)
        if t is Par:
            stack += [(a.left, d + 1), (a.right, d + 1)]
        elif t is Res or t is Abstraction:
            stack.append((a.body, d + 1))
        elif getattr(a, "cont", None) is not None:
            stack.append((a.cont, d + 1))
    return best


def _tuples(params, avoid, sync):
    out = [tuple(params)]
    if not sync:
        return out
    for i in range(len(params)):
        for n in sorted(avoid):
            t = list(params)
            t[i] = n
            t = tuple(t)
            if t not in out:
                out.append(t)
    return out


def _tau_lasso(s, taus, space):
    """Search the internal-step graph from s for a cycle (iterative DFS)."""
    colour = {s: 1}
    stack = [(s, iter(taus(s)))]
    incomplete = False
    while stack:
        u, it = stack[-1]
        nxt = next(it, None)
        if nxt is None:
            colour[u] = 2
            stack.pop()
            continue
        c = colour.get(nxt)
        if c == 1:
            return True
        if c is None:
            if space.full:
                incomplete = True
                continue
            colour[nxt] = 1
            stack.append((nxt, iter(taus(nxt))))
    return None if incomplete else False


def _prep(P, Q=None):
    """Processes to compare; abstractions are applied to a common fresh name."""
    if Q is None:
        if type(P) is Abstraction:
            b = fresh_names(1, all_names(P), prefix="_a")[0]
            return pi_subst(P.body, {P.param: b})
        return P
    if (type(P) is Abstraction) != (type(Q) is Abstraction):
        raise ValueError("cannot compare an abstraction with a process")
    if type(P) is Abstraction:
        b = fresh_names(1, all_names(P) | all_names(Q), prefix="_a")[0]
        return pi_subst(P.body, {P.param: b}), pi_subst(Q.body, {Q.param: b})
    return P, Q


def _sync(p, q):
    return not (is_async(p) and is_async(q))


# --- the pair game -----------------------------------------------------------

_KINDS = {
    # relation: (mode, answer kind for left challenges, for right challenges)
    "strong": (STRONG, "strong", "strong"),
    "weak": (WEAK, "weak", "weak"),
    "expansion": (STRONG, "plus", "hat"),
    "dexpansion": (STRONG, "plus", "hat"),
}


@dataclass
class _Ob:
    side: str
    label: object
    target: Agent
    answers: list  # of (answer state, pair), most promising first
    optimistic: bool = False
    tried: int = 1  # answers handed to the search so far

    def settled(self, removed):
        """All answers tried and refuted."""
        return self.tried >= len(self.answers) and all(pr in removed for _, pr in self.answers)


def _cancel(space, pair):
    """Drop parallel components common to both sides that use no restricted name.

    Every relation checked here is preserved by parallel composition, so
    relating the remainders relates the pair.  The converse fails, hence a
    game played up to cancellation may only prove.
    """
    p, q = pair
    if p == q:
        return pair
    np, cp, ap = decompose(p)
    nq, cq, aq = decompose(q)
    if not cp or not cq:
        return pair
    keys = {}
    for c in cp:
        if not free_names(c) & set(np):
            keys.setdefault(alpha_key(c), []).append(c)
    drop_p, drop_q = [], []
    for c in cq:
        if free_names(c) & set(nq):
            continue
        bucket = keys.get(alpha_key(c))
        if bucket:
            drop_p.append(bucket.pop())
            drop_q.append(c)
    if not drop_q:
        return pair

    def rebuild(names, comps, anns, drop):
        ids = {id(c) for c in drop}
        return space.norm(res(names, par(*[c for c in comps if id(c) not in ids]), anns))

    return rebuild(np, cp, ap, drop_p), rebuild(nq, cq, aq, drop_q)


class _Game:
    def __init__(self, rel, bounds, up_to=False):
        self.rel = rel
        self.b = bounds
        self.up_to = up_to
        mode, self.left_kind, self.right_kind = _KINDS[rel]
        self.space = _Space(mode, bounds)
        self.div_space = _Space(WEAK, bounds) if rel == "dexpansion" else None
        self.nodes = {}
        self.incomplete = []

    def div(self, s):
        sp = self.div_space
        return sp.diverges(sp.norm(s))

    def expand(self, pair):
        p, q = pair
        if p == q:
            return []  # every relation here is reflexive
        sp = self.space
        avoid = frozenset(free_names(p) | free_names(q))
        sync = _sync(p, q)
        obs = []
        for side, me, other, kind in (("left", p, q, self.left_kind),
                                      ("right", q, p, self.right_kind)):
            for lab, t in sp.moves(me, avoid, sync):
                ans, cut = sp.answers(other, lab, avoid, sync, kind)
                if cut:
                    self.incomplete.append("internal-step budget exhausted")
                pairs = [(a, (t, a) if side == "left" else (a, t)) for a in sorted(ans, key=repr)]
                if self.up_to:
                    pairs = [(a, _cancel(sp, pr)) for a, pr in pairs]
                pairs.sort(key=lambda x: (x[1][0] != x[1][1], x[1] not in self.nodes,
                                          len(repr(x[1]))))
                obs.append(_Ob(side, lab, t, pairs, cut))
        if self.rel == "dexpansion":
            dq = self.div(q)
            if dq:
                dp = self.div(p)
                if dp is False:
                    obs.append(_Ob("div", None, None, []))
                elif dp is None:
                    self.incomplete.append("divergence undecided")
            elif dq is None:
                self.incomplete.append("divergence undecided")
        return obs

    def fixpoint(self):
        removed = {}
        for rnd in range(1, self.b.max_rounds + 1):
            changed = False
            for pair, obs in self.nodes.items():
                if obs is None or pair in removed:
                    continue
                for ob in obs:
                    if ob.optimistic:
                        continue
                    if ob.settled(removed):
                        removed[pair] = (rnd, ob)
                        changed = True
                        break
            if not changed:
                return removed, True
        return removed, False

    def advance(self, removed):
        """Hand over the next answer of every obligation whose tried answers all failed."""
        out = []
        for pair, obs in self.nodes.items():
            if obs is None or pair in removed:
                continue
            for ob in obs:
                while ob.tried < len(ob.answers) and all(
                        pr in removed for _, pr in ob.answers[:ob.tried]):
                    ob.tried += 1
                    pr = ob.answers[ob.tried - 1][1]
                    out.append(pr)
                    if pr not in removed:
                        break
        return out

    def witness(self, root, removed):
        steps = []
        pair = root
        while True:
            _, ob = removed[pair]
            if ob.side == "div":
                steps.append(Step("div", None, None))
                return tuple(steps)
            live = [(removed[pr][0], a, pr) for a, pr in ob.answers]
            if not live:
                steps.append(Step(ob.side, ob.label, ob.target))
                return tuple(steps)
            _, a, nxt = min(live, key=lambda x: x[0])
            steps.append(Step(ob.side, ob.label, ob.target, a))
            pair = nxt

    def run(self, P, Q):
        P, Q = _prep(P, Q)
        sp = self.space
        root = (sp.norm(P), sp.norm(Q))
        if self.up_to:
            root = _cancel(sp, root)
        self.nodes[root] = None
        todo = deque([root])
        expanded, next_check = 0, 8

        def offer(pr):
            if pr not in self.nodes:
                self.nodes[pr] = None
                todo.append(pr)

        while True:
            while todo:
                if sp.full:
                    self.incomplete.append(f"state budget {self.b.max_states} exhausted")
                    break
                pair = todo.popleft()
                obs = self.expand(pair)
                self.nodes[pair] = obs
                for ob in obs:
                    if ob.answers:
                        offer(ob.answers[0][1])
                expanded += 1
                if expanded >= next_check:
                    next_check *= 2
                    removed, _ = self.fixpoint()
                    if root in removed:
                        return self.verdict(Status.Refuted, self.witness(root, removed))
                    for pr in self.advance(removed):
                        offer(pr)
            if sp.full:
                break
            removed, _ = self.fixpoint()
            if root in removed:
                return self.verdict(Status.Refuted, self.witness(root, removed))
            fresh = self.advance(removed)
            if not fresh:
                break
            for pr in fresh:
                offer(pr)
        removed, converged = self.fixpoint()
        if root in removed:
            return self.verdict(Status.Refuted, self.witness(root, removed))
        if not converged:
            return self.verdict(Status.Unknown, reason=f"fixpoint not reached in {self.b.max_rounds} rounds")
        if todo or self.incomplete:
            reason = self.incomplete[0] if self.incomplete else "exploration incomplete"
            return self.verdict(Status.Unknown, reason=reason)
        return self.verdict(Status.Proved)

    def verdict(self, status, witness=None, reason=""):
        return Verdict(status, witness, reason, len(self.space.seen), self.b, self.rel)


def _barb_refutation(P, Q, b):
    """A weak barb on one side only refutes weak bisimilarity outright.

    The witness is the barb path played by the attacker while the defender
    idles; its last move has no answer since the idle side is inactive.
    """
    P, Q = _prep(P, Q)
    bp, bq = barbs(P, b).sync_barb, barbs(Q, b).sync_barb
    if {bp.status, bq.status} != {Status.Proved, Status.Refuted}:
        return None
    g = _Game("weak", b)
    sp = g.space
    p, q = sp.norm(P), sp.norm(Q)
    side, me, other = ("left", p, q) if bp.proved else ("right", q, p)
    parent = {me: None}
    todo = deque([me])
    while todo and not sp.full:
        s = todo.popleft()
        avoid = frozenset(free_names(s) | free_names(other))
        for lab, t in sp.moves(s, avoid, _sync(s, other)):
            if lab is not TAU:
                ans, cut = sp.answers(other, lab, avoid, _sync(s, other), "weak")
                if ans or cut:
                    continue
                steps = [Step(side, lab, t)]
                while parent[s] is not None:
                    s, lab0, t0 = parent[s]
                    steps.append(Step(side, lab0, t0, other))
                return g.verdict(Status.Refuted, tuple(reversed(steps)),
                                 reason="weak barb on one side only")
            if t not in parent:
                parent[t] = (s, lab, t)
                todo.append(t)
    return None


def _solve(rel, P, Q, b):
    if rel == "weak":
        v = _barb_refutation(P, Q, b)
        if v is not None:
            return v
    # up to cancellation first: its proofs are sound, anything else is replayed plainly
    v = _Game(rel, b, up_to=True).run(P, Q)
    if not v.refuted:
        return v
    w = _Game(rel, b).run(P, Q)
    w.states_explored += v.states_explored
    return w


def weak_bisim(P: Agent, Q: Agent, b: Bounds = Bounds()) -> Verdict:
    return _solve("weak", P, Q, b)


def strong_bisim(P: Agent, Q: Agent, b: Bounds = Bounds()) -> Verdict:
    return _solve("strong", P, Q, b)


def expansion_leq(P: Agent, Q: Agent, b: Bounds = Bounds()) -> Verdict:
    """P ≲ Q: Q expands P (P is the more efficient side)."""
    return _solve("expansion", P, Q, b)


def dexpansion_leq(P: Agent, Q: Agent, b: Bounds = Bounds()) -> Verdict:
    """Divergence-sensitive expansion: additionally, Q diverging forces P to diverge."""
    return _solve("dexpansion", P, Q, b)


RELATIONS = {"wbisim": weak_bisim, "sbisim": strong_bisim,
             "expansion": expansion_leq, "dexpansion": dexpansion_leq}


def replay_witness(P: Agent, Q: Agent, witness, relation: str = "weak",
                   b: Bounds = Bounds()) -> bool:
    """Re-check a refutation: each attacker move and defender answer must be a
    genuine (weak) transition, and the last challenge must have no answer."""
    rel = {"wbisim": "weak", "sbisim": "strong"}.get(relation, relation)
    g = _Game(rel, b)
    sp = g.space
    P, Q = _prep(P, Q)
    p, q = sp.norm(P), sp.norm(Q)
    for i, st in enumerate(witness):
        last = i == len(witness) - 1
        if st.side == "div":
            return last and rel == "dexpansion" and g.div(q) is True and g.div(p) is False
        avoid = frozenset(free_names(p) | free_names(q))
        sync = _sync(p, q)
        me, other = (p, q) if st.side == "left" else (q, p)
        kind = g.left_kind if st.side == "left" else g.right_kind
        target = normalize(st.attacker, sp.mode)
        if (st.label, target) not in set(sp.moves(me, avoid, sync)):
            return False
        ans, cut = sp.answers(other, st.label, avoid, sync, kind)
        if last:
            return not ans and not cut and st.defender is None
        d = normalize(st.defender, sp.mode)
        if d not in ans:
            return False
        p, q = (target, d) if st.side == "left" else (d, target)
    return False


# --- exploration, barbs, divergence -------------------------------------------

@dataclass
class LTSGraph:
    states: list
    edges: list  # (source index, label, target index)
    complete: bool

    def to_json(self):
        return {"states": [pretty(s) for s in self.states],
                "edges": [{"from": i, "label": label_to_json(l), "label_text": str(l), "to": j}
                          for i, l, j in self.edges],
                "complete": self.complete}

    def to_dot(self, name="lts"):
        lines = [f"digraph {name} {{", "  node [shape=box, fontname=monospace];"]
        for i, s in enumerate(self.states):
            lines.append(f"  s{i} [label={json.dumps(pretty(s), ensure_ascii=False)}];")
        for i, l, j in self.edges:
            lines.append(f"  s{i} -> s{j} [label={json.dumps(str(l), ensure_ascii=False)}];")
        lines.append("}")
        return "\n".join(lines)

    def tau_cycle(self) -> bool:
        succ = {}
        for i, l, j in self.edges:
            if l is TAU:
                succ.setdefault(i, []).append(j)
        colour = {}

        def visit(u):
            colour[u] = 1
            for v in succ.get(u, ()):
                c = colour.get(v)
                if c == 1 or (c is None and visit(v)):
                    return True
            colour[u] = 2
            return False

        return any(colour.get(i) is None and visit(i) for i in range(len(self.states)))


def explore(P: Agent, b: Bounds = Bounds(), mode: str = WEAK) -> LTSGraph:
    """Breadth-first exploration of the canonical state space of P.

    Labels use names fresh for the free names of P.  ``mode`` picks the
    normalization (``weak`` by default; ``strong`` preserves expansion).
    """
    P = _prep(P)
    s0 = normalize(P, mode)
    avoid = frozenset(free_names(s0))
    index = {s0: 0}
    states, edges = [s0], []
    todo = deque([s0])
    while todo:
        if len(states) > b.max_states:
            break
        s = todo.popleft()
        for lab, t in transitions(s, avoid, mode, normalized=True):
            if t not in index:
                index[t] = len(states)
                states.append(t)
                todo.append(t)
            edges.append((index[s], lab, index[t]))
    return LTSGraph(states, edges, not todo)


@dataclass
class Barbs:
    sync_barb: Verdict
    async_barb: Verdict

    def to_json(self):
        return {"sync_barb": self.sync_barb.to_json(), "async_barb": self.async_barb.to_json()}


def barbs(P: Agent, b: Bounds = Bounds()) -> Barbs:
    """P ⇓ (some visible action after internal steps) and P ⇓out (an output)."""
    P = _prep(P)
    sp = _Space(WEAK, b)
    s0 = sp.norm(P)
    avoid = frozenset(free_names(s0))
    parent = {s0: None}
    todo = deque([s0])
    found = {}
    while todo and len(found) < 2:
        if sp.full:
            break
        s = todo.popleft()
        for lab, t in sp.raw(s, avoid):
            if lab is TAU:
                if t not in parent:
                    parent[t] = (s, lab)
                    todo.append(t)
                continue
            for kind in ("sync", "async"):
                if kind not in found and (kind == "sync" or type(lab) is Out):
                    found[kind] = _path(parent, s) + (Step("path", lab, t),)
    complete = not todo and not sp.full

    def verdict(kind):
        if kind in found:
            return Proved(witness=found[kind], states_explored=len(sp.seen), bounds=b,
                          relation=f"{kind}-barb")
        if complete:
            return Refuted(states_explored=len(sp.seen), bounds=b, relation=f"{kind}-barb",
                           reason="no such action reachable on the complete graph")
        return Unknown("exploration incomplete", states_explored=len(sp.seen), bounds=b,
                       relation=f"{kind}-barb")

    return Barbs(verdict("sync"), verdict("async"))


def _path(parent, s):
    steps = []
    while parent[s] is not None:
        prev, lab = parent[s]
        steps.append(Step("path", lab, s))
        s = prev
    return tuple(reversed(steps))


def diverges(P: Agent, b: Bounds = Bounds()) -> Verdict:
    """Search for an infinite internal run (a reachable cycle of τ-steps)."""
    P = _prep(P)
    sp = _Space(WEAK, b)
    s0 = sp.norm(P)
    r = sp.diverges(s0)
    kw = dict(states_explored=len(sp.seen), bounds=b, relation="diverges")
    if r is True:
        return Proved(**kw)
    if r is False:
        return Refuted(reason="internal steps are finite on the complete graph", **kw)
    return Unknown("exploration incomplete", **kw)


def _fill(C, P):
    from .encode import PiContext
    if isinstance(C, PiContext):
        return C.fill([P])
    from .encode import _plug
    return _plug(C, {1: P})


def may_harness(P: Agent, Q: Agent, contexts, b: Bounds = Bounds(), must: bool = False) -> Verdict:
    """Look for a context separating P and Q by barbs (and, for ``must``, by
    divergence).  Never proves anything: Refuted or Unknown."""
    explored = 0
    for k, C in enumerate(contexts):
        CP, CQ = _fill(C, P), _fill(C, Q)
        bp, bq = barbs(CP, b), barbs(CQ, b)
        explored += bp.sync_barb.states_explored + bq.sync_barb.states_explored
        for name in ("sync_barb", "async_barb"):
            vp, vq = getattr(bp, name), getattr(bq, name)
            if {vp.status, vq.status} == {Status.Proved, Status.Refuted}:
                w = vp.witness if vp.proved else vq.witness
                side = "left" if vp.proved else "right"
                return Refuted(witness=w, states_explored=explored, bounds=b,
                               relation="must" if must else "may",
                               reason=f"context {k} separates {name.replace('_', ' ')} ({side} has it)")
        if must:
            dp, dq = diverges(CP, b), diverges(CQ, b)
            if {dp.status, dq.status} == {Status.Proved, Status.Refuted}:
                side = "left" if dp.proved else "right"
                return Refuted(states_explored=explored, bounds=b, relation="must",
                               reason=f"context {k} separates divergence ({side} diverges)")
    return Unknown("no separating context found", states_explored=explored, bounds=b,
                   relation="must" if must else "may")


def must_harness(P: Agent, Q: Agent, contexts, b: Bounds = Bounds()) -> Verdict:
    return may_harness(P, Q, contexts, b, must=True)


# --- rendez-vous cancellation ------------------------------------------------

def strip_rendezvous(P: Agent) -> Optional[Agent]:
    """Recognize new b~.(a<c~> | b(r).R) with b in b~ ⊆ c~ and a, b not free in R."""
    names = []
    while type(P) is Res:
        names.append(P.name)
        P = P.body
    if type(P) is not Par:
        return None
    parts = [P.left, P.right]
    outs = [x for x in parts if type(x) is Output and x.cont is None]
    ins = [x for x in parts if type(x) is Input]
    if len(outs) != 1 or len(ins) != 1:
        return None
    o, i = outs[0], ins[0]
    if not names or i.subject not in names or not set(names) <= set(o.args):
        return None
    R = i.cont
    if o.subject in names or {o.subject, i.subject} & free_names(R):
        return None
    return R


# --- up-to checking ----------------------------------------------------------

class HoleFlag(Enum):
    ClaimEquiv = "claim-equiv"
    InRelation = "in-relation"


@dataclass
class Certificate:
    context: Agent  # may contain Hole(i) / Hole(i, b)
    fill_left: tuple
    fill_right: tuple
    flags: tuple
    tests: dict = field(default_factory=dict)  # hole index -> list of substitutions


@dataclass
class UpToCandidate:
    pairs: list
    # certificates[k][(side, str(label))] for pair k
    certificates: list


class UpToError(ValueError):
    pass


def _holes_under_input(C):
    out = set()

    def go(a, under):
        t = type(a)
        if t is Hole:
            if under:
                out.add(a.index)
        elif t in (Input, RepInput):
            go(a.cont, True)
        elif t in (Output, RepOutput):
            if a.cont is not None:
                go(a.cont, under)
        elif t is Par:
            go(a.left, under)
            go(a.right, under)
        elif t is Res or t is Abstraction:
            go(a.body, under)

    go(C, False)
    return out


def check_up_to(c: UpToCandidate, leq: str = "expansion", equiv_oracle=None,
                b: Bounds = Bounds()) -> Verdict:
    """Validate a candidate relation up to expansion and contexts.

    For every pair and every move of either side, the certified context must
    expand-decompose the derivative and some weak answer of the other side;
    each hole pair is justified by the oracle or by membership in the candidate.
    """
    from .encode import PiContext
    leq_fn = {"expansion": expansion_leq, "dexpansion": dexpansion_leq}[leq]
    oracle = equiv_oracle or (lambda x, y: weak_bisim(x, y, b))
    if len(c.certificates) != len(c.pairs):
        raise UpToError("one certificate table per pair is required")
    members = {(normalize(_prep(x), WEAK), normalize(_prep(y), WEAK)) for x, y in c.pairs}
    sp = _Space(WEAK, b)
    explored = 0

    def member(x, y):
        return (normalize(_prep(x), WEAK), normalize(_prep(y), WEAK)) in members

    def fail(msg, k, side, lab):
        return Refuted(witness=(Step(side, lab, None),), reason=f"pair {k}: {msg}",
                       states_explored=explored, bounds=b, relation=f"up-to-{leq}")

    for k, ((P, Q), certs) in enumerate(zip(c.pairs, c.certificates)):
        P, Q = _prep(P, Q)
        p, q = sp.norm(P), sp.norm(Q)
        avoid = frozenset(free_names(p) | free_names(q))
        sync = _sync(p, q)
        for side, me, other in (("left", p, q), ("right", q, p)):
            for lab, t in sp.moves(me, avoid, sync):
                cert = certs.get((side, str(lab)))
                if cert is None:
                    raise UpToError(f"pair {k}: missing certificate for {side} move {lab}")
                holes = PiContext(cert.context).holes()
                n = len(set(holes))
                if not (len(cert.fill_left) == len(cert.fill_right) == len(cert.flags) == n):
                    raise UpToError(f"pair {k}: hole count mismatch for {side} move {lab}")
                fl = {i + 1: f for i, f in enumerate(cert.fill_left)}
                fr = {i + 1: f for i, f in enumerate(cert.fill_right)}
                mine, theirs = (fl, fr) if side == "left" else (fr, fl)
                from .encode import _plug
                C_mine, C_theirs = _plug(cert.context, mine), _plug(cert.context, theirs)
                v = leq_fn(C_mine, t, b)
                explored += v.states_explored
                if not v.proved:
                    return fail(f"derivative of {side} move {lab} not shown to expand the context "
                                f"({v.status.value})", k, side, lab)
                ans, _ = sp.answers(other, lab, avoid, sync, "weak")
                good = False
                for a in sorted(ans, key=repr):
                    va = leq_fn(C_theirs, a, b)
                    explored += va.states_explored
                    if va.proved:
                        good = True
                        break
                if not good:
                    return fail(f"no answer to {side} move {lab} expands the context", k, side, lab)
                under = _holes_under_input(cert.context)
                for i, flag in enumerate(cert.flags, start=1):
                    subs = [{}] + (list(cert.tests.get(i, ())) if i in under else [])
                    for sigma in subs:
                        x = pi_subst(fl[i], sigma) if sigma else fl[i]
                        y = pi_subst(fr[i], sigma) if sigma else fr[i]
                        if flag is HoleFlag.InRelation:
                            if not member(x, y):
                                return fail(f"hole {i} pair is not in the candidate", k, side, lab)
                        else:
                            vo = oracle(x, y)
                            explored += vo.states_explored
                            if not vo.proved:
                                return fail(f"hole {i} equivalence not established", k, side, lab)
    return Proved(states_explored=explored, bounds=b, relation=f"up-to-{leq}")


def auto_candidate(pairs, b: Bounds = Bounds()) -> UpToCandidate:
    """Certificates with the trivial context [·]1: each derivative is paired with
    a weakly bisimilar answer, flagged InRelation when the pair is a member."""
    sp = _Space(WEAK, b)
    members = {(normalize(_prep(x), WEAK), normalize(_prep(y), WEAK)) for x, y in pairs}
    certs = []
    for P, Q in pairs:
        P, Q = _prep(P, Q)
        p, q = sp.norm(P), sp.norm(Q)
        avoid = frozenset(free_names(p) | free_names(q))
        sync = _sync(p, q)
        table = {}
        for side, me, other in (("left", p, q), ("right", q, p)):
            for lab, t in sp.moves(me, avoid, sync):
                ans, _ = sp.answers(other, lab, avoid, sync, "weak")
                chosen = None
                for a in sorted(ans, key=repr):
                    if weak_bisim(t, a, b).proved:
                        chosen = a
                        break
                if chosen is None:
                    chosen = t
                l, r = (t, chosen) if side == "left" else (chosen, t)
                flag = HoleFlag.InRelation if (l, r) in members else HoleFlag.ClaimEquiv
                table[(side, str(lab))] = Certificate(Hole(1), (l,), (r,), (flag,))
        certs.append(table)
    return UpToCandidate(list(pairs), certs)


__all__ = [
    "Bounds", "Status", "Verdict", "Step", "Proved", "Refuted", "Unknown", "weak_bisim",
    "strong_bisim", "expansion_leq", "dexpansion_leq", "replay_witness", "explore", "LTSGraph",
    "barbs", "Barbs", "diverges", "may_harness", "must_harness", "strip_rendezvous",
    "HoleFlag", "Certificate", "UpToCandidate", "UpToError", "check_up_to", "auto_candidate",
    "RELATIONS",
]
