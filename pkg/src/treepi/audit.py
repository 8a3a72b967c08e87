"""Machine checks of the conditions under which an encoding is fully abstract for trees.

An audit runs each condition on desk-scale instances and records a
three-valued verdict next to the outcome the condition requires.  It never
concludes full abstraction; the report only lists condition instances.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Optional

from . import lam
from .encode import (Encoding, MILNER, STRONG, VARIANT, PiContext, abstraction_context,
                     encode, encode_at, is_guarded, plug, variable_context, wire)
from .equiv import (Bounds, Status, Verdict, barbs, dexpansion_leq, must_harness,
                    replay_witness, strip_rendezvous, weak_bisim)
from .pi import Hole, Input, Output, Par, apply, free_names, pi_alpha_eq, pretty, res

P = "p"  # location name used to run encodings

BETA_SAMPLES = [
    r"(\x.x) y",
    r"(\x.x x) (\z.z)",
    r"(\x.y) z",
    r"(\x.x) (\z.z)",
    r"(\x.\y.x) a",
    r"(\x.x y) (\z.z)",
    r"(\x.x) (y z)",
    r"(\x.\y.y) a",
    r"(\x.x) (\z.z z)",
    r"(\x.x (\z.z)) (\y.y)",
    r"(\x.\y.x) a b",
    r"(\x.x) x",
    r"(\x.x) y (\z.z)",
]

# redexes passing a variable to a head variable: the expanding side keeps an
# extra forwarder hop per request, so the pair space is infinite
BETA_HARD = [r"(\x.x x) y", r"(\x.\y.y x) a", r"(\x.y x) z"]

HEAD_SEQUENCES = [
    r"(\x.x) y",
    r"(\x.x) ((\y.y) z)",
    r"(\x y.x) a b",
    r"(\x y z.x z (y z)) (\a b.a) (\a b.a) w",
]

ORDER0 = ["OMEGA", "OMEGA OMEGA", r"OMEGA (\x.x)"]

# a second unsolvable of order omega for the (*) pair
XI = r"FIX (\a b.a)"
XI_ALT = r"\z.FIX (\a b.a)"


def _t(text):
    return lam.parse_lambda(text)


def _run(e, M):
    return encode_at(e, M if not isinstance(M, str) else _t(M), P)


# --- beta -------------------------------------------------------------------

def _contract(M):
    """One head step of a (possibly applied) beta-redex."""
    r = lam.step(M, lam.Strategy.Head)
    if r is None:
        raise ValueError(f"{lam.pretty(M)} is not a redex")
    return r


def check_beta(e: Encoding, samples, b: Bounds = Bounds()) -> list:
    """For each redex R with contractum R': ⟦R⟧ expands ⟦R'⟧ (divergence-sensitively)."""
    out = []
    for M in samples:
        M = _t(M) if isinstance(M, str) else M
        out.append(dexpansion_leq(_run(e, _contract(M)), _run(e, M), b))
    return out


def beta_theory_reduce(e: Encoding, M, fuel: int, b: Bounds = Bounds()) -> Verdict:
    """Each head step M -> M' within fuel must satisfy ⟦M'⟧ ≲ ⟦M⟧."""
    M = _t(M) if isinstance(M, str) else M
    explored = 0
    for k in range(fuel):
        N = lam.step(M, lam.Strategy.Head)
        if N is None:
            break
        v = dexpansion_leq(_run(e, N), _run(e, M), b)
        explored += v.states_explored
        if not v.proved:
            v.reason = f"step {k + 1}: {lam.pretty(M)} -> {lam.pretty(N)}: {v.reason}".rstrip(": ")
            return v
        M = N
    return Verdict(Status.Proved, states_explored=explored, bounds=b, relation="dexpansion")


# --- unsolvables --------------------------------------------------------------

def check_order0_collapse(e: Encoding, unsolvables, b: Bounds = Bounds()) -> list:
    """⟦M⟧ ≈ ⟦Ω⟧ for each M, plus inactivity of both sides on their complete graphs."""
    om = _run(e, lam.OMEGA)
    inactive_om = barbs(om, b).sync_barb
    out = []
    for M in unsolvables:
        PM = _run(e, M)
        v = weak_bisim(PM, om, b)
        act = barbs(PM, b).sync_barb
        if v.proved and not (act.refuted and inactive_om.refuted):
            v = Verdict(Status.Unknown, reason="inactivity not established on a complete graph",
                        states_explored=v.states_explored, bounds=b, relation=v.relation)
        out.append(v)
    return out


# --- discrimination -----------------------------------------------------------

DISCRIMINATION_TERMS = {
    "Ω": "OMEGA",
    "x": "x",
    "x M": r"x (\z.z)",
    "x M M'": r"x (\z.z) (\z.z)",
    "y": "y",
    "λx.M": r"\x.x",
}

# pairs required to be unrelated: pairwise among Ω, x M~ (lengths 0..2) and y,
# plus an abstraction against Ω and against every x M~
DISCRIMINATION_PAIRS = (
    [(a, c) for i, a in enumerate(["Ω", "x", "x M", "x M M'", "y"])
     for c in ["Ω", "x", "x M", "x M M'", "y"][i + 1:]]
    + [("λx.M", c) for c in ["Ω", "x", "x M", "x M M'"]]
)


def check_discrimination(e: Encoding, relation: str = "weak_bisim", b: Bounds = Bounds()) -> dict:
    """Every required inequation must be refuted; returns {(left, right): Verdict}.

    ``relation`` is ``weak_bisim``, ``barbs-must`` (separation by a must
    harness with the empty context) or ``barbs-async`` (only output barbs).
    """
    if relation not in ("weak_bisim", "barbs-must", "barbs-async"):
        raise ValueError(f"unknown relation {relation!r}")
    return {(l, r): check_discrimination_pair(e, l, r, relation, b) for l, r in DISCRIMINATION_PAIRS}


def _async_separation(A, B, b, contexts=(Hole(1),)):
    for k, C in enumerate(contexts):
        va = barbs(_plug_one(C, A), b).async_barb
        vb = barbs(_plug_one(C, B), b).async_barb
        if {va.status, vb.status} == {Status.Proved, Status.Refuted}:
            w = va.witness if va.proved else vb.witness
            return Verdict(Status.Refuted, witness=w, bounds=b, relation="async-barb",
                           reason=f"context {k}: output barb on one side only")
    return Verdict(Status.Unknown, reason="no context separates output barbs",
                   bounds=b, relation="async-barb")


def _plug_one(C, A):
    # observers capture the names of A on purpose
    return plug(C, {1: A}, free_names(A))


def barb_split(e: Encoding, b: Bounds = Bounds()) -> dict:
    """⟦λx.Ω⟧ against ⟦Ω⟧: separated by synchronous barbs, not by output barbs."""
    A, B = _run(e, r"\x.OMEGA"), _run(e, lam.OMEGA)
    ba, bb = barbs(A, b), barbs(B, b)
    return {"sync": (ba.sync_barb, bb.sync_barb), "async": (ba.async_barb, bb.async_barb)}


# --- inverse contexts -------------------------------------------------------

@dataclass(frozen=True)
class InverseContext:
    """D together with the shape new b~.(a<c~> | b(z).A<z>) it should produce."""
    context: object  # process with Hole(1, r)
    restricted: tuple  # b~
    a: str
    payload: tuple  # c~
    b: str

    def target(self, A, z: str = "z"):
        body = Par(Output(self.a, self.payload), Input(self.b, (z,), apply(A, z)))
        return res(self.restricted, body)

    def fill(self, C: PiContext, fills, keep=frozenset({"x"})) -> object:
        # D deliberately binds the variable name of the context
        return plug(self.context, {1: C.fill(list(fills))}, keep)

    def __str__(self):
        return pretty(self.context)


def _chain(steps, last):
    """Nest prefixes: steps is a list of callables taking a continuation."""
    out = last
    for s in reversed(steps):
        out = s(out)
    return out


def build_inverse(e: Encoding, kind: str, i: int = 1, n: int = 1, x: str = "x",
                  sequenced: bool = False) -> InverseContext:
    """The inverse context of the abstraction context (``kind='abstraction'``) or
    of the i-th hole of the n-hole variable context (``kind='variable'``).

    ``sequenced`` only affects the strong variable case: the rendez-vous is
    offered after the output chain instead of in parallel with it, so the
    environment cannot use the extruded x before the chain has been consumed.
    """
    a, b = "a", "b"
    if kind == "abstraction":
        if e is MILNER:
            D = res(("r", b), Par(Output(a, (b,)),
                                  Input(b, ("r1",), Par(Hole(1, "r"), Output("r", (x, "r1"))))))
            return InverseContext(D, (b,), a, (b,), b)
        if e is VARIANT:
            D = res(("r", b), Par(Output(a, (b,)), Input(b, ("r1",), Par(
                Hole(1, "r"), Input("r", ("v",), Output("v", (x, "r1")))))))
            return InverseContext(D, (b,), a, (b,), b)
        D = res(("r", b), Par(Hole(1, "r"), Input("r", (x, "q"), Par(
            Output(a, (x, b)), Input(b, ("r1",), wire("q", "r1"))))))
        return InverseContext(D, (b, x), a, (x, b), b)
    if kind != "variable":
        raise ValueError(f"unknown context kind {kind!r}")
    if not 1 <= i <= n:
        raise ValueError(f"invalid hole index {i} for {n} holes")
    rn = "rn"
    xs = [f"x{j}" for j in range(1, i + 1)]
    if e is MILNER:
        rs = [f"r{j}" for j in range(i)] + [f"r{i}'"]
        steps = [lambda k: Input(x, (rs[0],), k)]
        for j in range(i):
            steps.append(lambda k, j=j: Input(rs[j], (xs[j], rs[j + 1]), k))
        tail = Par(Output(a, (x, b)), Input(b, ("z",), Output(xs[-1], ("z",))))
        D = res((rn, x, b), Par(Hole(1, rn), _chain(steps, tail)))
        return InverseContext(D, (x, b), a, (x, b), b)
    if e is VARIANT:
        vs = [f"v{j}" for j in range(i)]
        rs = [f"r{j}" for j in range(i)] + [f"r{i}'"]
        comps = [Hole(1, rn), Input(x, (rs[0],), Output(rs[0], (vs[0],)))]
        for j in range(i - 1):
            comps.append(Input(vs[j], (xs[j], rs[j + 1]), Output(rs[j + 1], (vs[j + 1],))))
        comps.append(Input(vs[i - 1], (xs[i - 1], rs[i]), Par(
            Output(a, (x, b)), Input(b, ("z",), Output(xs[-1], ("z",))))))
        body = comps[-1]
        for c in reversed(comps[:-1]):
            body = Par(c, body)
        D = res((rn, x, *vs, b), body)
        return InverseContext(D, (x, b), a, (x, b), b)
    ps = [f"p{j}'" for j in range(i + 1)]
    outs = [lambda k: Output(x, (ps[0],), k)]
    for j in range(i):
        outs.append(lambda k, j=j: Output(ps[j], (xs[j], ps[j + 1]), k))
    rendez = Input(b, ("r1",), Input(xs[-1], ("r2",), wire("r2", "r1")))
    if sequenced:
        body = _chain(outs, Par(Output(a, (x, b)), rendez))
    else:
        body = Par(Output(a, (x, b)), Par(_chain(outs[:-1], outs[-1](None)), rendez))
    D = res((rn, *ps, x, *xs, b), Par(Hole(1, rn), body))
    return InverseContext(D, (x, b), a, (x, b), b)


def _context(e, kind, n, x="x"):
    return abstraction_context(e, x) if kind == "abstraction" else variable_context(e, x, n)


def verify_inverse(e: Encoding, kind: str, fills, b: Bounds = Bounds(), i: int = 1,
                   x: str = "x", sequenced: bool = False) -> Verdict:
    """target ≲ D[C[⟦M~⟧]] with divergence sensitivity, target = new b~.(a<c~> | b(z).⟦M_i⟧<z>)."""
    fills = [_t(M) if isinstance(M, str) else M for M in fills]
    n = len(fills)
    if kind == "abstraction" and n != 1:
        raise ValueError("the abstraction context has one hole")
    D = build_inverse(e, kind, i, n, x, sequenced)
    C = _context(e, kind, n, x)
    encs = [encode(e, M) for M in fills]
    lhs = D.target(encs[i - 1])
    rhs = D.fill(C, encs)
    return dexpansion_leq(lhs, rhs, b)


def cancellation_check(e: Encoding, M, z: str = "z") -> bool:
    """strip_rendezvous on an inverse target returns exactly ⟦M⟧<z>."""
    M = _t(M) if isinstance(M, str) else M
    D = build_inverse(e, "abstraction")
    R = strip_rendezvous(D.target(encode(e, M), z))
    return R is not None and pi_alpha_eq(R, encode_at(e, M, z))


# --- reports ----------------------------------------------------------------

@dataclass
class AuditEntry:
    name: str
    tag: str
    verdict: str
    required: tuple
    evidence: str = ""
    bounds: Optional[dict] = None
    states_explored: int = 0

    @property
    def ok(self):
        return self.verdict in self.required

    def to_json(self):
        return {"name": self.name, "tag": self.tag, "verdict": self.verdict,
                "required": list(self.required), "ok": self.ok, "evidence": self.evidence,
                "bounds": self.bounds, "states_explored": self.states_explored}


@dataclass
class AuditReport:
    encoding: str
    relation: str
    suite: str
    entries: list = field(default_factory=list)

    @property
    def ok(self):
        return all(x.ok for x in self.entries)

    def to_json(self):
        return {"encoding": self.encoding, "relation": self.relation, "suite": self.suite,
                "ok": self.ok, "entries": [x.to_json() for x in self.entries]}

    def dumps(self):
        return json.dumps(self.to_json(), ensure_ascii=False, indent=2)

    def table(self) -> str:
        rows = [("tag", "entry", "verdict", "required", "ok")]
        for x in self.entries:
            rows.append((x.tag, x.name, x.verdict, "/".join(x.required), "yes" if x.ok else "NO"))
        widths = [max(len(r[k]) for r in rows) for k in range(5)]
        lines = [f"audit {self.encoding} / {self.suite} ({self.relation})"]
        for k, r in enumerate(rows):
            lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
            if k == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines)


SUITES = {
    "lt-wbisim": "weak_bisim",
    "dexpansion-must": "barbs-must",
    "async-barb": "barbs-may",
}

PROVED, REFUTED, UNKNOWN = ("proved",), ("refuted",), ("unknown",)


def _entry(name, tag, v: Verdict, required, evidence=""):
    if not evidence:
        evidence = v.reason
        if v.witness:
            evidence = "; ".join(filter(None, [evidence, " · ".join(
                str(s.label) if s.label is not None else s.side for s in v.witness)]))
    return AuditEntry(name, tag, v.status.value, required, evidence,
                      (v.bounds or Bounds()).to_json(), v.states_explored).to_json()


def _bool_entry(name, tag, value, required=True, evidence=""):
    v = "proved" if value else "refuted"
    return AuditEntry(name, tag, v, PROVED if required else REFUTED, evidence).to_json()


def _task(job):
    """Run one audit entry; job holds only plain data so it can cross processes."""
    kind, enc, suite, arg, bd = job
    e = Encoding(enc)
    b = Bounds(**bd)
    if kind == "var-guarded":
        C = variable_context(e, "x", arg)
        return _bool_entry(f"variable context n={arg} guarded", "Def4.3(4)-var-guarded",
                           is_guarded(C), evidence=str(C))
    if kind == "abs-guarded":
        C = abstraction_context(e, "x")
        want = e is not STRONG
        return _bool_entry("abstraction context guarded", "Thm4.4(i)-abs-guarded", is_guarded(C),
                           required=want, evidence=str(C))
    if kind == "star-spec":
        v = weak_bisim(_run(e, XI), _run(e, lam.OMEGA), b)
        return _entry("⟦YK⟧ ≈ ⟦Ω⟧ (order-ω representative against Ω)", "Thm4.4-star-YK-Omega",
                      v, PROVED)
    if kind == "star":
        v = weak_bisim(_run(e, XI), _run(e, XI_ALT), b)
        return _entry("⟦YK⟧ ≈ ⟦λz.YK⟧ (two unsolvables of order ω)", "Thm4.4-star", v, PROVED)
    if kind == "beta":
        v = check_beta(e, [arg], b)[0]
        return _entry(f"beta {arg}", "Def4.3(5)-beta", v, PROVED)
    if kind == "order0":
        v = check_order0_collapse(e, [arg], b)[0]
        return _entry(f"order-0 {arg} vs OMEGA", "Def4.3(6)-order0", v, PROVED)
    if kind == "discr":
        l, r = arg
        rel = {"lt-wbisim": "weak_bisim", "dexpansion-must": "barbs-must",
               "async-barb": "barbs-async"}[suite]
        v = check_discrimination_pair(e, l, r, rel, b)
        tag = "Thm4.9(i)-abs-unrelated" if l == "λx.M" else "Def4.8(6)-discrimination"
        return _entry(f"⟦{l}⟧ vs ⟦{r}⟧", tag, v, REFUTED)
    if kind == "split":
        s = barb_split(e, b)
        (sa, sb), (aa, ab) = s["sync"], s["async"]
        sync_sep = {sa.status, sb.status} == {Status.Proved, Status.Refuted}
        async_same = aa.refuted and ab.refuted
        if suite == "async-barb":
            v = Verdict(Status.Unknown if async_same else Status.Refuted, bounds=b,
                        reason="not separated by output barbs" if async_same else "separated")
            # only Milner abstractions wait silently; the others output first
            return _entry("⟦λx.Ω⟧ vs ⟦Ω⟧ under output barbs", "Thm5.2-async-barb", v,
                          UNKNOWN if e is MILNER else REFUTED)
        v = Verdict(Status.Refuted if sync_sep else Status.Unknown, bounds=b,
                    reason="separated by a synchronous barb" if sync_sep else "not separated")
        return _entry("⟦λx.Ω⟧ vs ⟦Ω⟧ under synchronous barbs", "Thm5.2-sync-barb", v, REFUTED)
    if kind in ("inverse", "inverse-seq"):
        ctx, i, fills = arg
        seq = kind == "inverse-seq"
        v = verify_inverse(e, ctx, list(fills), b, i, sequenced=seq)
        label = "abstraction" if ctx == "abstraction" else f"variable({i},{len(fills)})"
        if seq:
            return _entry(f"sequenced inverse {label} fills {list(fills)}",
                          "Def4.8(7)-inverse-sequenced", v, ("proved", "refuted", "unknown"))
        return _entry(f"inverse {label} fills {list(fills)}", "Def4.8(7)-inverse", v, PROVED)
    if kind == "cancel":
        ok = cancellation_check(e, arg)
        return _bool_entry(f"rendez-vous stripping on ⟦{arg}⟧", "Def4.7-cancellation", ok)
    if kind == "diverge":
        from .equiv import diverges
        v = diverges(_run(e, arg), b)
        return _entry(f"{arg} diverges", "Thm6.1-must-divergence", v, PROVED)
    raise ValueError(kind)


def check_discrimination_pair(e, l, r, relation, b):
    A, B = _run(e, DISCRIMINATION_TERMS[l]), _run(e, DISCRIMINATION_TERMS[r])
    if relation == "weak_bisim":
        v = weak_bisim(A, B, b)
        if v.refuted and not replay_witness(A, B, v.witness, "weak", b):
            return Verdict(Status.Unknown, reason="witness failed to replay", bounds=b)
        return v
    obs = observers(e, free_names(A) | free_names(B))
    if relation == "barbs-must":
        return must_harness(A, B, obs, b)
    return _async_separation(A, B, b, obs)


def _head_observer(e, h, n, w):
    """Consume a head variable h applied to n arguments, then signal on w."""
    zs = [f"o{j}" for j in range(1, n + 2)]
    if e is STRONG:
        # play a function taking n+1 arguments: the location is reached iff h had at most n
        ps = [f"op{j}" for j in range(n + 2)]
        steps = [lambda k: Output(h, (ps[0],), k)]
        steps += [lambda k, j=j: Output(ps[j], (zs[j], ps[j + 1]), k) for j in range(n + 1)]
        chain = _chain(steps[:-1], steps[-1](None))
        done = Input(P, ("ou", "ov"), Output(w, ()))
        return res((*ps, *zs), Par(chain, done))
    rs = [f"or{j}" for j in range(n + 1)]
    if e is MILNER:
        steps = [lambda k: Input(h, (rs[0],), k)]
        steps += [lambda k, j=j: Input(rs[j], (zs[j], rs[j + 1]), k) for j in range(n)]
        return _chain(steps, Output(w, ()))
    vs = [f"ov{j}" for j in range(n)]
    body = Output(w, ())
    for j in reversed(range(n)):
        body = res((vs[j],), Par(Output(rs[j], (vs[j],)), Input(vs[j], (zs[j], rs[j + 1]), body)))
    return Input(h, (rs[0],), body)


def _abstraction_observer(e, w):
    """Feed an abstraction at P one argument and signal once the argument is used."""
    a, c = "oa", "oc"
    if e is MILNER:
        return res((a, c), Par(Output(P, (a, c)), Input(a, ("oz",), Output(w, ()))))
    if e is VARIANT:
        return Input(P, ("ov",), res((a, c), Par(Output("ov", (a, c)),
                                                 Input(a, ("oz",), Output(w, ())))))
    return Input(P, ("ou", "ov"), Output(w, ()))


def observers(e: Encoding, names, w: str = "w") -> list:
    """Test contexts for the discrimination suites: every name of ``names`` is
    restricted and only w is observable."""
    names = sorted(set(names) | {P})
    heads = [n for n in names if n != P]
    obs = [_abstraction_observer(e, w)]
    for h in heads:
        obs += [_head_observer(e, h, n, w) for n in range(3)]
    return [res(names, Par(Hole(1), o)) for o in obs]


def _jobs(e: Encoding, suite: str, b: Bounds):
    bd = b.to_json()
    jobs = [("var-guarded", e.value, suite, n, bd) for n in (1, 2)]
    jobs.append(("abs-guarded", e.value, suite, None, bd))
    if not is_guarded(abstraction_context(e, "x")):
        jobs.append(("star-spec", e.value, suite, None, bd))
        jobs.append(("star", e.value, suite, None, bd))
    jobs += [("beta", e.value, suite, s, bd) for s in BETA_SAMPLES]
    jobs += [("order0", e.value, suite, s, bd) for s in ORDER0]
    jobs += [("discr", e.value, suite, p, bd) for p in DISCRIMINATION_PAIRS]
    jobs.append(("split", e.value, suite, None, bd))
    jobs += [("inverse", e.value, suite, ("abstraction", 1, (f,)), bd) for f in ("x", r"\z.z")]
    for i, n in ((1, 1), (1, 2), (2, 2)):
        for fills in product(("x", r"\z.z"), repeat=n):
            jobs.append(("inverse", e.value, suite, ("variable", i, fills), bd))
            if e is STRONG:
                jobs.append(("inverse-seq", e.value, suite, ("variable", i, fills), bd))
    jobs.append(("cancel", e.value, suite, r"\z.z", bd))
    if suite == "dexpansion-must" and e is STRONG:
        jobs.append(("diverge", e.value, suite, r"\x.OMEGA", bd))
    return jobs


def audit(e: Encoding, suite: str = "lt-wbisim", b: Bounds = Bounds(), jobs: int = 1) -> AuditReport:
    """Run every condition check of ``suite``; entry order is fixed whatever ``jobs`` is."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    work = _jobs(e, suite, b)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_task, work))
    else:
        results = [_task(j) for j in work]
    report = AuditReport(e.value, SUITES[suite], suite)
    for r in results:
        report.entries.append(AuditEntry(r["name"], r["tag"], r["verdict"], tuple(r["required"]),
                                         r["evidence"], r["bounds"], r["states_explored"]))
    return report
