import io
import json
import subprocess
from importlib.resources import files

import pytest
from jsonschema import Draft202012Validator

from treepi import cli, lam, pi


def run(capsys, *args):
    code = cli.main(list(args))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *args):
    code, out, _ = run(capsys, *args, "--json")
    return code, json.loads(out)


def schema(name):
    return json.loads(files("treepi").joinpath("schemas", f"{name}.json").read_text())


def valid(name, data):
    errs = list(Draft202012Validator(schema(name)).iter_errors(data))
    assert not errs, errs[0].message


# --- examples and exit codes ---------------------------------------------------------

def test_tree_lambda_omega(capsys):
    code, out, _ = run(capsys, "tree", "--kind", "lt", "--depth", "3", r"\x. Ω")
    assert code == 0 and out.strip() == "λx.⊥"


def test_tree_compare_codes(capsys):
    assert run(capsys, "tree", r"\x.x", "--compare", r"\y.y")[0] == 0
    assert run(capsys, "tree", r"\x.x", "--compare", r"\x.OMEGA")[0] == 1


def test_equiv_refuted_with_witness(capsys):
    code, out, _ = run(capsys, "equiv", "--rel", "wbisim", "a<b>", "0")
    assert code == 1
    assert out.startswith("refuted")
    assert "attacker=" in out


def test_equiv_proved(capsys):
    assert run(capsys, "equiv", "a<b> | 0", "a<b>")[0] == 0


def test_equiv_unknown(capsys):
    P = "!a(x).new c.(a<c>|x<c>) | a<b>"
    Q = "!a(x).new t.(t<> | t().new c.(a<c>|x<c>)) | a<b>"
    code, out, _ = run(capsys, "equiv", "--max-states", "50", P, Q)
    assert code == 2 and out.startswith("unknown")


def test_equiv_lambda(capsys):
    assert run(capsys, "equiv", "--lambda", "milner", r"\x.x", r"\y.y")[0] == 0
    assert run(capsys, "equiv", "--lambda", "variant", "x", "y")[0] == 1


def test_reduce(capsys):
    code, out, _ = run(capsys, "reduce", "--trace", r"(\x.x x) (\z.z)")
    assert code == 0
    lines = out.splitlines()
    assert lines[-2] == "λz.z" and "normal" in lines[-1]


def test_reduce_omega_out_of_fuel(capsys):
    code, out, _ = run(capsys, "reduce", "--fuel", "10", "OMEGA")
    assert code == 0 and "unsolvable of order 0" in out


def test_encode(capsys):
    code, out, _ = run(capsys, "encode", "--enc", "milner", "x")
    assert code == 0 and out.strip() == r"(\p) x<p>"


def test_typecheck(capsys):
    assert run(capsys, "typecheck", "--lambda", "x y")[0] == 0
    code, out, _ = run(capsys, "typecheck", "--env", "a:li()", "a().0 | a().0")
    assert code == 1 and out.startswith("error:")


def test_lts_dot(capsys):
    code, out, _ = run(capsys, "lts", "--format", "dot", "a<b>")
    assert code == 0 and out.lstrip().startswith("digraph")


def test_audit_milner(capsys):
    code, out, _ = run(capsys, "audit", "--enc", "milner")
    assert code == 0 and out.startswith("audit milner")


# --- usage errors ---------------------------------------------------------------------

@pytest.mark.parametrize("args", [
    ["frobnicate"],
    ["parse", r"\x."],
    ["parse", "--calc", "pi", "a<b"],
    ["encode", "--enc", "church", "x"],
    ["equiv", "--max-states", "0", "0", "0"],
    ["parse", "--format", "dot", "x"],
    ["typecheck", "--env", "a:li", "0"],
    ["audit", "--jobs", "0"],
    [],
])
def test_usage_errors(capsys, args):
    assert run(capsys, *args)[0] == 3


def test_parse_error_position(capsys):
    code, _, err = run(capsys, "parse", r"\x. x )")
    assert code == 3 and "position 6" in err


def test_stdin_single_use(capsys, monkeypatch):
    monkeypatch.setattr("sys.stdin", io.StringIO("a<b>"))
    assert run(capsys, "equiv", "-", "-")[0] == 3


def test_stdin(capsys, monkeypatch):
    monkeypatch.setattr("sys.stdin", io.StringIO(r"\x.x  " + "\n"))
    code, out, _ = run(capsys, "parse", "-")
    assert code == 0 and out.strip() == "λx.x"


def test_env_override(capsys, monkeypatch):
    monkeypatch.setenv("TREEPI_ENC", "strong")
    monkeypatch.setenv("TREEPI_FORMAT", "json")
    code, out, _ = run(capsys, "encode", "x")
    assert code == 0 and json.loads(out)["encoding"] == "strong"
    monkeypatch.setenv("TREEPI_MAX_STATES", "0")
    assert run(capsys, "lts", "0")[0] == 3


# --- json outputs -----------------------------------------------------------------------

@pytest.mark.parametrize("name,args", [
    ("verdict", ["equiv", "a<b>", "0"]),
    ("verdict", ["equiv", "--rel", "dexpansion", "--lambda", "milner", r"(\x.x) y", r"(\x.x) y"]),
    ("lts", ["lts", "--lambda", "strong", r"(\x.x) y"]),
    ("tree", ["tree", r"\x y.x OMEGA (\z.z)"]),
    ("tree", ["tree", "--kind", "bt", r"FIX (\a b.a)"]),
    ("tree-compare", ["tree", r"\x.x", "--compare", r"\x.OMEGA"]),
    ("parse", ["parse", r"\x.x y"]),
    ("parse", ["parse", "--calc", "pi", "new r.(r<x> | !r(y).y<> | !(new q)a<q>.0)"]),
    ("encode", ["encode", "--enc", "variant", r"(\x.x) y"]),
    ("reduce", ["reduce", "--trace", r"(\x.x x) (\z.z)"]),
    ("typecheck", ["typecheck", "--lambda", "x y"]),
    ("typecheck", ["typecheck", "--env", "a:li()", "a().0|a().0"]),
])
def test_json_schema(capsys, name, args):
    _, data = run_json(capsys, *args)
    valid(name, data)


def test_audit_json_schema(capsys):
    _, data = run_json(capsys, "audit", "--enc", "variant", "--suite", "async-barb")
    valid("audit", data)


def test_schemas_are_draft_2020_12():
    for f in files("treepi").joinpath("schemas").iterdir():
        s = json.loads(f.read_text())
        assert s["$schema"].endswith("2020-12/schema")
        Draft202012Validator.check_schema(s)


# --- round trips ----------------------------------------------------------------------------

@pytest.mark.parametrize("text", [r"\x y.x (y y)", r"(\x.x) (\y.y) z", "x (y z) w"])
def test_parse_roundtrip_lambda(capsys, text):
    _, out, _ = run(capsys, "parse", text)
    assert lam.alpha_eq(lam.parse_lambda(out.strip()), lam.parse_lambda(text))


@pytest.mark.parametrize("text", ["new r.(r<x> | !r(y).y<>)", r"(\p) x<p>", "a(x).x<>.0 | b<>"])
def test_parse_roundtrip_pi(capsys, text):
    _, out, _ = run(capsys, "parse", "--calc", "pi", text)
    assert pi.pi_alpha_eq(pi.parse_pi(out.strip()), pi.parse_pi(text))


def test_console_script():
    r = subprocess.run(["treepi", "parse", "-"], input=r"\x.x", capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip() == "λx.x"
    r = subprocess.run(["treepi", "nope"], capture_output=True, text=True)
    assert r.returncode == 3
