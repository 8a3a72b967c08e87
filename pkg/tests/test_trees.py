import json

import pytest
from hypothesis import given

from conftest import injective_renamings, lambda_terms
from treepi import lam
from treepi.trees import (BotLeaf, Node, TopLeaf, TreeCmp, UnknownLeaf, bt_approx, collapse,
                          from_json, has_unknown, lt_approx, render_compact, render_text, to_dot,
                          to_json, tree_eq, truncate)

t = lam.parse_lambda
YK = r"FIX (\a b.a)"


def test_omega_is_bottom():
    assert lt_approx(t("OMEGA"), 3, 20) == BotLeaf(0)


def test_lambda_omega_keeps_its_binder():
    assert lt_approx(t(r"\x.OMEGA"), 3, 20) == BotLeaf(1)


def test_node_with_order_one_child():
    assert lt_approx(t(r"\x.x (\y.OMEGA)"), 2, 50) == Node(("x",), "x", (BotLeaf(1),))


def test_bt_collapses_orders():
    assert bt_approx(t(r"\x.OMEGA"), 3, 20) == BotLeaf(0)
    assert bt_approx(t(YK), 3, 50) == BotLeaf(0)


def test_lt_top_for_order_omega():
    assert lt_approx(t(YK), 3, 50) == TopLeaf()


def test_identity_tree():
    assert bt_approx(t(r"\x.x"), 3, 20) == Node(("x",), "x", ())


def test_depth_zero_marks_children_unknown():
    assert lt_approx(t("x y z"), 0, 20) == Node((), "x", (UnknownLeaf(0), UnknownLeaf(0)))


def test_fuel_exhaustion_is_unknown():
    assert type(lt_approx(t(r"(\x.x x x) (\x.x x x)"), 3, 4)) is UnknownLeaf


def test_tree_eq_cases():
    assert tree_eq(BotLeaf(0), BotLeaf(0)).result is TreeCmp.Equal
    r = tree_eq(BotLeaf(1), BotLeaf(0))
    assert r.result is TreeCmp.Different and r.path == ()
    r = tree_eq(Node(("x",), "x", (UnknownLeaf(),)), Node(("x",), "x", (BotLeaf(0),)))
    assert r.result is TreeCmp.Unknown


def test_tree_eq_alpha():
    assert tree_eq(lt_approx(t(r"\a b.a b"), 3, 20),
                   lt_approx(t(r"\u v.u v"), 3, 20)).result is TreeCmp.Equal
    assert tree_eq(lt_approx(t(r"\a b.a"), 3, 20),
                   lt_approx(t(r"\a b.b"), 3, 20)).result is TreeCmp.Different


def test_tree_eq_reports_path():
    r = tree_eq(lt_approx(t("x y (z z)"), 3, 20), lt_approx(t("x y (z y)"), 3, 20))
    assert r.result is TreeCmp.Different and r.path == (1, 0)


def test_difference_beats_unknown_elsewhere():
    a = Node((), "x", (UnknownLeaf(), BotLeaf(0)))
    b = Node((), "x", (BotLeaf(0), TopLeaf()))
    assert tree_eq(a, b).result is TreeCmp.Different


def test_renderings():
    tr = lt_approx(t(r"\x.x (\y.OMEGA) x"), 3, 50)
    assert render_compact(tr) == "λx.x (λy.⊥) x"
    assert render_compact(TopLeaf()) == "⊤"
    assert "x" in render_text(tr)
    assert to_dot(tr).startswith("digraph")
    assert from_json(json.loads(json.dumps(to_json(tr)))) == tr


@given(lambda_terms())
def test_truncation_monotone(M):
    assert truncate(lt_approx(M, 3, 60), 2) == lt_approx(M, 2, 60)


@given(lambda_terms())
def test_collapse_law(M):
    lt, bt = lt_approx(M, 3, 60), bt_approx(M, 3, 60)
    if not has_unknown(lt):
        assert collapse(lt) == bt


@given(lambda_terms(), injective_renamings())
def test_alpha_invariance(M, sigma):
    sigma = {a: b for a, b in sigma.items() if a in lam.free_vars(M)}
    mine = _rename_tree(lt_approx(M, 3, 60), sigma)
    theirs = lt_approx(lam.rename(M, sigma), 3, 60)
    assert tree_eq(mine, theirs).result is not TreeCmp.Different
    if not has_unknown(mine):
        assert tree_eq(mine, theirs).result is TreeCmp.Equal


def _rename_tree(tr, sigma, bound=frozenset()):
    if type(tr) is not Node:
        return tr
    bound = bound | set(tr.binders)
    head = tr.head if tr.head in bound else sigma.get(tr.head, tr.head)
    return Node(tr.binders, head, tuple(_rename_tree(c, sigma, bound) for c in tr.children))
