import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_async, related_variant
from treepi import lam
from treepi.encode import MILNER, encode_at, plug
from treepi.equiv import (Bounds, Certificate, HoleFlag, UpToCandidate, UpToError, auto_candidate,
                          barbs, check_up_to, dexpansion_leq, diverges, expansion_leq, explore,
                          may_harness, must_harness, replay_witness, strip_rendezvous,
                          strong_bisim, weak_bisim)
from treepi.lts import TAU
from treepi.pi import NIL, Hole, parse_pi, pi_subst

p = parse_pi
B = Bounds()


def enc(M):
    return encode_at(MILNER, lam.parse_lambda(M))


def test_bounds_positive():
    with pytest.raises(ValueError):
        Bounds(max_states=0)


# exploration

def test_explore_nil():
    g = explore(NIL)
    assert (len(g.states), len(g.edges), g.complete) == (1, 0, True)


def test_explore_output():
    g = explore(p("a<b>"))
    assert (len(g.states), len(g.edges), g.complete) == (2, 1, True)


def test_explore_omega():
    g = explore(enc("OMEGA"), Bounds(max_states=200))
    assert g.complete and g.edges
    assert all(l is TAU for _, l, _ in g.edges)
    assert g.tau_cycle()


def test_explore_incomplete():
    g = explore(p("!a(x).(a<x> | a<x>) | a<b>"), Bounds(max_states=5), mode="plain")
    assert not g.complete


# weak bisimilarity

def test_weak_inert_pair():
    assert weak_bisim(p("new a.(a<> | a().0)"), NIL).proved


def test_weak_output_barb():
    v = weak_bisim(p("a<b>"), NIL)
    assert v.refuted and replay_witness(p("a<b>"), NIL, v.witness)


def test_weak_unsolvables():
    assert weak_bisim(enc("OMEGA"), enc("OMEGA OMEGA")).proved


def test_weak_ignores_tau():
    assert weak_bisim(p("new t.(t<> | t().a<>)"), p("a<>")).proved


def test_weak_unknown_on_budget():
    # both sides grow a chain of fresh names forever; one pads each round with a τ
    P = p("!a(x).new c.(a<c> | x<c>) | a<b>")
    Q = p("!a(x).new t.(t<> | t().new c.(a<c> | x<c>)) | a<b>")
    v = weak_bisim(P, Q, Bounds(max_states=50))
    assert v.unknown and v.states_explored >= 50


# strong bisimilarity

def test_strong_cases():
    P = p("a<b> | c(x).0")
    assert strong_bisim(p("a<b> | 0"), p("a<b>")).proved
    assert strong_bisim(p("a<b>"), NIL).refuted
    assert strong_bisim(P, p("c(x).0 | a<b>")).proved
    assert strong_bisim(p("new t.(t<> | t().a<>)"), p("a<>")).refuted


def test_strong_witness_replays():
    P, Q = p("new t.(t<> | t().a<>)"), p("a<>")
    v = strong_bisim(P, Q)
    assert replay_witness(P, Q, v.witness, "strong")


def test_sync_input_instantiation():
    # a(x).[x=b]-like behaviour: after receiving b the two differ only on a known name
    P, Q = p("a(x).x<>.0"), p("a(x).b<>.0")
    assert weak_bisim(P, Q).refuted


# expansion

def test_comm_law_expansion():
    body = p("x<y> | y(z).0")
    lhs = pi_subst(body, {"x": "b", "y": "c"})
    rhs = p("new a.(a<b,c> | a(x,y).(x<y> | y(z).0))")
    assert expansion_leq(lhs, rhs).proved
    assert dexpansion_leq(lhs, rhs).proved


def test_expansion_reflexive():
    P = p("a<b> | !c(x).x<>")
    assert expansion_leq(P, P).proved and dexpansion_leq(P, P).proved


def test_expansion_direction_matters():
    slow, fast = p("new a.(a<> | a().b<>)"), p("b<>")
    v = expansion_leq(slow, fast)
    assert v.refuted and replay_witness(slow, fast, v.witness, "expansion")
    assert expansion_leq(fast, slow).proved


def test_dexpansion_divergence():
    v = dexpansion_leq(NIL, enc("OMEGA"))
    assert v.refuted and replay_witness(NIL, enc("OMEGA"), v.witness, "dexpansion")
    loop = p("new t.(t<> | !t().t<>)")
    assert expansion_leq(NIL, loop).proved  # expansion alone ignores divergence
    assert dexpansion_leq(NIL, loop).refuted


# barbs, divergence

def test_barbs():
    b = barbs(p("a(x).0"))
    assert b.sync_barb.proved and b.async_barb.refuted
    b = barbs(enc(r"\x.OMEGA"))
    assert b.sync_barb.proved and b.async_barb.refuted
    b = barbs(NIL)
    assert b.sync_barb.refuted and b.async_barb.refuted


def test_diverges():
    assert diverges(enc("OMEGA")).proved
    assert diverges(NIL).refuted
    assert diverges(p("a<b>")).refuted


# harnesses

def test_may_harness():
    assert may_harness(p("a<b>"), NIL, [Hole(1)]).refuted
    P = p("a<b> | c(x).0")
    assert may_harness(P, P, [Hole(1), p("new a. ([1] | a(y).0)")]).unknown


def test_must_harness_divergence():
    v = must_harness(NIL, enc("OMEGA"), [Hole(1)])
    assert v.refuted and "divergence" in v.reason


# rendez-vous stripping

def test_strip_rendezvous():
    R = p("z<q>")
    assert strip_rendezvous(p("new b. (a<b> | b(r). z<q>)")) == R
    assert strip_rendezvous(NIL) is None
    assert strip_rendezvous(p("new b. (a<b> | b(r). a<q>)")) is None


# up-to checking

def test_up_to_singleton():
    P = p("a<b> | c(x).0")
    assert check_up_to(auto_candidate([(P, P)])).proved


def test_up_to_missing_certificate():
    P = p("a<b>")
    with pytest.raises(UpToError):
        check_up_to(UpToCandidate([(P, P)], [{}]))


def test_up_to_hole_mismatch():
    P = p("a<b>")
    cand = auto_candidate([(P, P)])
    key, c = next(iter(cand.certificates[0].items()))
    cand.certificates[0][key] = Certificate(c.context, c.fill_left + (NIL,), c.fill_right, c.flags)
    with pytest.raises(UpToError):
        check_up_to(cand)


def test_up_to_hole_under_input_needs_tests():
    # context a(x).[1]: the hole pair must hold for each supplied substitution
    P, Q = p("a(x).x<>"), p("a(x).x<>")
    cand = auto_candidate([(P, Q)])
    assert check_up_to(cand).proved


# properties

@settings(max_examples=80, deadline=None)
@given(st.integers(0, 100_000))
def test_inclusion_chain(seed):
    rng = random.Random(seed)
    P = random_async(rng)
    Q = related_variant(P, rng)
    s, w = strong_bisim(P, Q), weak_bisim(P, Q)
    e1, e2, d = expansion_leq(P, Q), expansion_leq(Q, P), dexpansion_leq(P, Q)
    if s.proved:
        assert e1.proved and e2.proved
    if e1.proved or e2.proved:
        assert not w.refuted
    if d.proved:
        assert e1.proved
    if w.proved:
        assert weak_bisim(Q, P).proved
    for v, rel, A, C in ((s, "strong", P, Q), (w, "weak", P, Q), (e1, "expansion", P, Q),
                         (e2, "expansion", Q, P), (d, "dexpansion", P, Q)):
        if v.refuted:
            assert replay_witness(A, C, v.witness, rel)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_cancellation_of_rendezvous(seed):
    rng = random.Random(seed)
    R = random_async(rng, names=("c", "d"))
    S = related_variant(R, rng)
    C = p("new b. (a<b> | b(r). [1])")
    WR, WS = plug(C, {1: R}), plug(C, {1: S})
    assert strip_rendezvous(WR) == R
    if weak_bisim(WR, WS).proved:
        assert weak_bisim(R, S).proved


def test_json_shape():
    v = weak_bisim(p("a<b>"), NIL)
    d = v.to_json()
    assert d["verdict"] == "refuted" and d["bounds"]["max_states"] == 4096
    assert d["witness"][0]["label"] == {"tag": "out", "subject": "a", "extruded": [], "args": ["b"]}
