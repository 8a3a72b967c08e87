import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_async
from treepi.lts import (PLAIN, STRONG, TAU, WEAK, In, Out, normalize, transitions)
from treepi.pi import (NIL, Abstraction, Apply, Input, Output, Par, PiError, PiSyntaxError,
                       RepInput, RepOutput, Res, SortError, Sorting, dumps, free_names, from_json,
                       is_async, parse_pi, pi_alpha_eq, pi_subst, pretty, sort_check, to_json)

p = parse_pi
LOC = Sorting({"Loc": ("Var", "Loc"), "Var": ("Loc",)})


# syntax

def test_parse_output():
    assert p("a<b>") == Output("a", ("b",))


def test_parse_restricted_comm():
    assert p("new a. (a<b> | a(x).x<x>)") == Res(
        "a", Par(Output("a", ("b",)), Input("a", ("x",), Output("x", ("x",)))))


def test_parse_abstraction():
    assert p(r"(\p) p(x,q). x<q>") == Abstraction(
        "p", Input("p", ("x", "q"), Output("x", ("q",))))


def test_parse_misc():
    assert p("a<b>.c<>") == Output("a", ("b",), Output("c", ()))
    assert p("!a(x).x<>") == RepInput("a", ("x",), Output("x", ()))
    assert p("!(new r)y<r>.r<>") == RepOutput("y", ("r",), Output("r", ()), ("r",))
    assert p(r"((\p) p<>)<q>") == Apply(Abstraction("p", Output("p", ())), "q")
    assert p("new a, b. 0") == Res("a", Res("b", NIL))
    assert p("νa. a<>") == Res("a", Output("a", ()))


@pytest.mark.parametrize("bad", ["a(x,x).0", "a<b", "new . 0", "a b", "a<b> |", "a<b> $"])
def test_syntax_errors(bad):
    with pytest.raises(PiSyntaxError):
        p(bad)


def test_syntax_error_position():
    with pytest.raises(PiSyntaxError) as ei:
        p("a<b> $")
    assert ei.value.pos == 5


@pytest.mark.parametrize("src", [
    "a<b>", "new a. (a<b> | a(x).x<x>)", r"(\p) p(x,q).x<q>", "!a(x).new r. (x<r> | r().0)",
    "a<b>.b(c).0 | !(new r)y<r>.r<y>", "new a,b. (a<b> | b<a>)"])
def test_pretty_roundtrip(src):
    A = p(src)
    assert pi_alpha_eq(p(pretty(A)), A)
    assert from_json(json.loads(dumps(A))) == A
    assert from_json(to_json(A)) == A


# names and substitution

def test_free_names():
    assert free_names(p("a<b>")) == {"a", "b"}
    assert free_names(p("new a. a<b>")) == {"b"}
    assert free_names(p(r"(\p) x<p>")) == {"x"}
    assert free_names(p("!(new r)y<r>.r<z>")) == {"y", "z"}


def test_subst_avoids_capture():
    A = pi_subst(p("a(x).b<x>"), {"b": "x"})
    assert type(A) is Input and A.params[0] != "x" and A.cont == Output("x", A.params)


def test_subst_simultaneous():
    assert pi_subst(p("a<b>"), {"a": "b", "b": "a"}) == p("b<a>")


def test_subst_bound_untouched():
    assert pi_subst(p("new a. a<b>"), {"a": "c"}) == p("new a. a<b>")


def test_is_async():
    assert is_async(p("a<b> | c(x).x<>"))
    assert not is_async(p("a<b>.0"))
    assert not is_async(p("!(new r)y<r>.r<>"))


# sorts

def test_sort_ok():
    s = sort_check(p("p<x,q>"), Sorting(LOC.obj, {"p": "Loc"}))
    assert s["p"] == "Loc" and s["x"] == "Var" and s["q"] == "Loc"


def test_sort_arity_error():
    with pytest.raises(SortError):
        sort_check(p("p<x> | p(a,b).0"), LOC)
    with pytest.raises(SortError):
        sort_check(p("p<x>"), Sorting(LOC.obj, {"p": "Loc"}))


def test_sort_milner_identity():
    sort_check(p(r"(\p) p(x,q). x<q>"), LOC)


# transitions

def _labels(A, mode=STRONG):
    return sorted((str(l), pretty(s)) for l, s in transitions(A, mode=mode))


def test_output_transition():
    assert list(transitions(p("a<b>"))) == [(Out("a", (), ("b",)), NIL)]


def test_open_transition():
    [(lab, succ)] = transitions(p("new b. a<b>"))
    assert type(lab) is Out and lab.subject == "a" and lab.extruded == lab.args and succ == NIL
    assert lab.args[0] != "a"


def test_internal_communication():
    assert list(transitions(p("new a.(a<b> | a(x).x<x>)"))) == [(TAU, p("b<b>"))]


def test_input_label_fresh():
    [(lab, succ)] = transitions(p("a(x).x<b>"))
    assert type(lab) is In and lab.subject == "a"
    assert not set(lab.params) & {"a", "b"}
    assert succ == Output(lab.params[0], ("b",))


def test_replication():
    moves = transitions(p("!a(x).x<> | a<c>"))
    assert (TAU, normalize(p("c<> | !a(x).x<>"))) in moves


def test_synchronous_output_keeps_continuation():
    [(lab, succ)] = transitions(p("a<b>.c<>"))
    assert lab == Out("a", (), ("b",)) and succ == p("c<>")


def test_bound_replicated_output_extrudes_fresh_copies():
    moves = transitions(p("!(new r)y<r>.r<>"))
    [(lab, succ)] = moves
    assert lab.extruded == lab.args and len(lab.args) == 1
    assert lab.args[0] in free_names(succ)


def test_abstraction_rejected_in_process_position():
    with pytest.raises(PiError):
        transitions(p(r"(\p) p<>"))


def test_application_reduces_first():
    assert _labels(p(r"((\p) p<x>)<q>")) == _labels(p("q<x>"))


# normalization

def test_normalize_drops_nil():
    assert normalize(p("a<b> | 0")) == p("a<b>")


def test_normalize_gc_restriction():
    assert normalize(p("new a. 0")) == NIL


def test_normalize_removes_deaf_server():
    assert normalize(p("new a. !a(x).b<x>")) == NIL


def test_normalize_commutes_par():
    assert normalize(p("a<> | b<>")) == normalize(p("b<> | a<>"))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_normalize_idempotent_and_transition_preserving(seed):
    import random
    P = random_async(random.Random(seed))
    for mode in (PLAIN, STRONG, WEAK):
        N = normalize(P, mode)
        assert normalize(N, mode) == N
    a = {(l, s) for l, s in transitions(P, mode=STRONG)}
    b = {(l, s) for l, s in transitions(normalize(P, STRONG), mode=STRONG)}
    assert {str(l) for l, _ in a} == {str(l) for l, _ in b}


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_label_freshness_and_async_closure(seed):
    import random
    P = random_async(random.Random(seed))
    fn = free_names(P)
    for lab, succ in transitions(P, mode=PLAIN):
        bound = lab.params if type(lab) is In else lab.extruded if type(lab) is Out else ()
        assert not set(bound) & fn
        assert is_async(succ)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["a", "b", "z"]))
def test_plainness(seed, b):
    import random
    P = random_async(random.Random(seed), names=("a", "b", "c"))
    F = Abstraction("c", P)
    assert set(transitions(Apply(F, b))) == set(transitions(pi_subst(P, {"c": b})))
