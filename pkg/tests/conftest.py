import os
import random

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from treepi import lam
from treepi.pi import NIL, Input, Output, Par, Res, RepInput

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


# --- lambda terms -------------------------------------------------------------

VARS = ["x", "y", "z", "w"]


def lambda_terms(max_leaves=6):
    leaf = st.sampled_from(VARS).map(lam.Var)
    return st.recursive(
        leaf,
        lambda sub: st.one_of(
            st.tuples(st.sampled_from(VARS), sub).map(lambda t: lam.Abs(*t)),
            st.tuples(sub, sub).map(lambda t: lam.App(*t)),
        ),
        max_leaves=max_leaves,
    )


@st.composite
def injective_renamings(draw, names=tuple(VARS)):
    targets = draw(st.permutations(["a", "b", "c", "d", "e", "f"]))
    return dict(zip(names, targets))


# --- small asynchronous processes ---------------------------------------------

def random_async(rng: random.Random, names=("a", "b", "c"), ops=6):
    """A random asynchronous process with at most ``ops`` operators."""
    budget = [ops]

    def go(scope):
        if budget[0] <= 0:
            return NIL
        budget[0] -= 1
        k = rng.randrange(6)
        if k == 0:
            return NIL
        if k == 1:
            return Output(rng.choice(scope), tuple(rng.sample(scope, rng.randint(0, 1))))
        if k in (2, 3):
            arity = rng.randint(0, 1)
            params = (f"v{budget[0]}",) if arity else ()
            cont = go(scope + list(params))
            return Input(rng.choice(scope), params, cont)
        if k == 4:
            return Par(go(scope), go(scope))
        n = f"n{budget[0]}"
        return Res(n, go(scope + [n]))

    P = go(list(names))
    if budget[0] > 0 and rng.random() < 0.2:
        P = Par(P, RepInput(rng.choice(names), (), Output(rng.choice(names), ())))
    return P


# --- acceptance summary ---------------------------------------------------------

ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None and rep.when == "call":
        ACCEPTANCE.setdefault(m.args[0], []).append((item.name, rep.passed))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        runs = ACCEPTANCE[num]
        if not runs:
            continue
        ok = all(p for _, p in runs)
        failed = [n for n, p in runs if not p]
        line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}"
        if failed:
            line += "  (" + ", ".join(failed) + ")"
        tr.write_line(line)


def related_variant(P, rng: random.Random):
    """A process likely related to P: a structural rewrite, a tau-padded copy or a mutant."""
    k = rng.randrange(4)
    if k == 0:
        return Par(NIL, P) if rng.random() < 0.5 else Res("g", Par(P, NIL))
    if k == 1:
        # one internal step before P
        return Res("t", Par(Output("t", ()), Input("t", (), P)))
    if k == 2:
        return Par(P, Res("t", Par(Output("t", ()), Input("t", (), NIL))))
    return random_async(rng)
