"""treepi command line.

Exit codes: 0 ok or Proved, 1 Refuted or Different, 2 Unknown, 3 usage or
parse errors.  Every numeric flag also reads a TREEPI_<FLAG> environment
variable (for example TREEPI_MAX_STATES), command-line values win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import lam, linear, pi, trees
from .audit import SUITES, audit
from .encode import Encoding, encode, encode_at
from .equiv import RELATIONS, Bounds, explore
from .lts import PLAIN, STRONG, WEAK

EXIT_OK, EXIT_NO, EXIT_UNKNOWN, EXIT_USAGE = 0, 1, 2, 3

DEFAULTS = {"max_states": 4096, "tau_budget": 64, "max_rounds": 10_000, "fuel": 1000, "depth": 4}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _env(name, default, kind=int):
    raw = os.environ.get("TREEPI_" + name.upper())
    if raw is None:
        return default
    try:
        return kind(raw)
    except ValueError:
        raise UsageError(f"TREEPI_{name.upper()}={raw!r} is not a valid {kind.__name__}")


def _common(env_fmt):
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("bounds")
    for key, val in DEFAULTS.items():
        g.add_argument("--" + key.replace("_", "-"), type=int, default=_env(key, val),
                       help=f"default {val} (env TREEPI_{key.upper()})")
    p.add_argument("--format", choices=("text", "json", "dot"), default=env_fmt,
                   help="output format (env TREEPI_FORMAT)")
    p.add_argument("--json", dest="format", action="store_const", const="json",
                   help="same as --format json")
    return p


def build_parser() -> argparse.ArgumentParser:
    enc_default = os.environ.get("TREEPI_ENC", "milner")
    common = _common(os.environ.get("TREEPI_FORMAT", "text"))
    ap = _Parser(prog="treepi", description="Lambda trees, pi-calculus encodings and behavioural checks.")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("parse", parents=[common], help="parse and pretty-print a term")
    p.add_argument("--calc", choices=("lambda", "pi"), default="lambda")
    p.add_argument("term", help="term text, or - for stdin")

    p = sub.add_parser("reduce", parents=[common], help="reduce a lambda-term")
    p.add_argument("--strategy", choices=[s.value for s in lam.Strategy], default="head")
    p.add_argument("--trace", action="store_true", help="print every step")
    p.add_argument("term")

    p = sub.add_parser("tree", parents=[common], help="Levy-Longo or Bohm tree approximation")
    p.add_argument("--kind", choices=("lt", "bt"), default="lt")
    p.add_argument("--compare", metavar="TERM", help="compare with the tree of a second term")
    p.add_argument("term")

    p = sub.add_parser("encode", parents=[common], help="encode a lambda-term into pi")
    p.add_argument("--enc", default=enc_default, help="milner, variant or strong (env TREEPI_ENC)")
    p.add_argument("--at", metavar="NAME", help="apply the encoding to a location name")
    p.add_argument("term")

    p = sub.add_parser("lts", parents=[common], help="explore the transition graph of a process")
    p.add_argument("--mode", choices=(WEAK, STRONG, PLAIN), default=WEAK)
    p.add_argument("--lambda", dest="enc", nargs="?", const=enc_default, metavar="ENC",
                   help="read a lambda-term and explore its encoding at p")
    p.add_argument("term")

    p = sub.add_parser("equiv", parents=[common], help="decide a behavioural relation")
    p.add_argument("--rel", choices=sorted(RELATIONS), default=os.environ.get("TREEPI_REL", "wbisim"))
    p.add_argument("--lambda", dest="enc", nargs="?", const=enc_default, metavar="ENC",
                   help="read lambda-terms and compare their encodings at p")
    p.add_argument("left")
    p.add_argument("right")

    p = sub.add_parser("typecheck", parents=[common], help="linear type checking")
    p.add_argument("--env", default="", help="comma list of name:type")
    p.add_argument("--type", default="proc", help="goal type, proc or L -> proc")
    p.add_argument("--lambda", dest="typed_lambda", action="store_true",
                   help="read a lambda-term and check its typed Milner encoding")
    p.add_argument("term")

    p = sub.add_parser("audit", parents=[common], help="check the conditions on an encoding")
    p.add_argument("--enc", default=enc_default)
    p.add_argument("--suite", choices=sorted(SUITES), default="lt-wbisim")
    p.add_argument("--jobs", type=int, default=_env("jobs", 1))
    return ap


# --- helpers -----------------------------------------------------------------

_stdin_used = False


def _text(arg):
    global _stdin_used
    if arg != "-":
        return arg
    if _stdin_used:
        raise UsageError("stdin can supply only one term")
    _stdin_used = True
    return sys.stdin.read().strip()


def _lambda(arg):
    return lam.parse_lambda(_text(arg))


def _bounds(a):
    for key in ("max_states", "tau_budget", "max_rounds"):
        if getattr(a, key) < 1:
            raise UsageError(f"--{key.replace('_', '-')} must be positive")
    return Bounds(a.max_states, a.tau_budget, a.max_rounds)


def _encoding(name):
    try:
        return Encoding.parse(name)
    except ValueError as e:
        raise UsageError(str(e))


def _emit(a, text, data=None, dot=None):
    if a.format == "json":
        print(json.dumps(data, ensure_ascii=False, indent=2))
    elif a.format == "dot":
        if dot is None:
            raise UsageError(f"{a.cmd} has no dot output")
        print(dot, end="" if dot.endswith("\n") else "\n")
    else:
        print(text)


def _verdict_code(status):
    return {"proved": EXIT_OK, "refuted": EXIT_NO}.get(status, EXIT_UNKNOWN)


def _lambda_json(M):
    return {"calculus": "lambda", "term": lam.pretty(M), "ascii": lam.pretty(M, "\\"),
            "free_vars": sorted(lam.free_vars(M))}


# --- commands ----------------------------------------------------------------

def cmd_parse(a):
    if a.calc == "lambda":
        M = _lambda(a.term)
        _emit(a, lam.pretty(M), _lambda_json(M))
    else:
        P = pi.parse_pi(_text(a.term))
        _emit(a, pi.pretty(P), {"calculus": "pi", "term": pi.pretty(P), "ast": pi.to_json(P)})
    return EXIT_OK


def cmd_reduce(a):
    M = _lambda(a.term)
    strategy = lam.Strategy(a.strategy)
    steps = [M]
    while len(steps) <= a.fuel:
        N = lam.step(steps[-1], strategy)
        if N is None:
            break
        steps.append(N)
    done = lam.step(steps[-1], strategy) is None
    est = lam.classify(M, a.fuel)
    if type(est) is lam.Solvable:
        cls = "solvable"
    elif type(est) is lam.ConfirmedUnsolvable:
        order = "ω" if est.order == lam.ORDER_OMEGA else str(est.order)
        cls = f"unsolvable of order {order}"
    else:
        cls = "unknown within fuel"
    shown = steps if a.trace else [steps[-1]]
    text = "\n".join(lam.pretty(s) for s in shown)
    text += f"\n-- {len(steps) - 1} step(s), {'normal' if done else 'fuel exhausted'}; {cls}"
    data = {"steps": len(steps) - 1, "result": lam.pretty(steps[-1]), "normal": done,
            "classification": cls, "trace": [lam.pretty(s) for s in shown]}
    _emit(a, text, data)
    return EXIT_OK if done or type(est) is not lam.Unknown else EXIT_UNKNOWN


def cmd_tree(a):
    approx = trees.lt_approx if a.kind == "lt" else trees.bt_approx
    t = approx(_lambda(a.term), a.depth, a.fuel)
    if a.compare is None:
        _emit(a, trees.render_compact(t), trees.to_json(t), trees.to_dot(t))
        return EXIT_OK
    u = approx(_lambda(a.compare), a.depth, a.fuel)
    cmp = trees.tree_eq(t, u)
    res = cmp.result.value if hasattr(cmp.result, "value") else str(cmp.result)
    text = f"{trees.render_compact(t)}\n{trees.render_compact(u)}\n{res}"
    _emit(a, text, {"left": trees.to_json(t), "right": trees.to_json(u), "result": res,
                    "path": list(getattr(cmp, "path", []) or [])})
    return {"equal": EXIT_OK, "different": EXIT_NO}.get(res.lower(), EXIT_UNKNOWN)


def cmd_encode(a):
    e = _encoding(a.enc)
    M = _lambda(a.term)
    A = encode_at(e, M, a.at) if a.at else encode(e, M)
    _emit(a, pi.pretty(A), {"encoding": e.value, "term": lam.pretty(M), "agent": pi.pretty(A),
                            "ast": pi.to_json(A)})
    return EXIT_OK


def _process(a, arg):
    if a.enc:
        return encode_at(_encoding(a.enc), _lambda(arg), "p")
    return pi.parse_pi(_text(arg))


def cmd_lts(a):
    g = explore(_process(a, a.term), _bounds(a), a.mode)
    lines = [f"{i}: {pi.pretty(s)}" for i, s in enumerate(g.states)]
    lines += [f"{e['from']} --{e['label_text']}--> {e['to']}" for e in g.to_json()["edges"]]
    lines.append(f"-- {len(g.states)} state(s), {'complete' if g.complete else 'incomplete'}")
    _emit(a, "\n".join(lines), g.to_json(), g.to_dot())
    return EXIT_OK if g.complete else EXIT_UNKNOWN


def cmd_equiv(a):
    P, Q = _process(a, a.left), _process(a, a.right)
    v = RELATIONS[a.rel](P, Q, _bounds(a))
    text = [str(v)]
    for st in v.witness or ():
        d = st.to_json()
        text.append(f"  {d['side']}: {d['label_text'] or '-'}  attacker={d['attacker']}  defender={d['defender']}")
    _emit(a, "\n".join(text), v.to_json())
    return _verdict_code(v.status.value)


def cmd_typecheck(a):
    try:
        if a.typed_lambda:
            M = _lambda(a.term)
            env = linear.check_encoding_typed(M)
            text = "ok: " + ", ".join(f"{x}:{linear.show(t)}" for x, t in env.items())
            _emit(a, text.rstrip(": "), {"ok": True, "env": {x: linear.show(t) for x, t in env.items()}})
            return EXIT_OK
        env = linear.parse_env(a.env)
        goal = linear.parse_type(a.type)
        P = pi.parse_pi(_text(a.term))
    except linear.TypeSyntaxError as e:
        raise UsageError(str(e))
    except linear.LinearTypeError as e:
        _emit(a, f"error: {e}", {"ok": False, "rule": e.rule, "error": str(e)})
        return EXIT_NO
    try:
        linear.type_check(env, P, goal)
    except linear.LinearTypeError as e:
        _emit(a, f"error: {e}", {"ok": False, "rule": e.rule, "error": str(e)})
        return EXIT_NO
    _emit(a, "ok", {"ok": True})
    return EXIT_OK


def cmd_audit(a):
    if a.jobs < 1:
        raise UsageError("--jobs must be positive")
    r = audit(_encoding(a.enc), a.suite, _bounds(a), a.jobs)
    _emit(a, r.table(), r.to_json())
    if r.ok:
        return EXIT_OK
    bad = [x for x in r.entries if not x.ok]
    return EXIT_UNKNOWN if any(x.verdict == "unknown" for x in bad) else EXIT_NO


COMMANDS = {"parse": cmd_parse, "reduce": cmd_reduce, "tree": cmd_tree, "encode": cmd_encode,
            "lts": cmd_lts, "equiv": cmd_equiv, "typecheck": cmd_typecheck, "audit": cmd_audit}


def main(argv=None) -> int:
    global _stdin_used
    _stdin_used = False
    try:
        try:
            a = build_parser().parse_args(argv)
        except SystemExit as e:  # usage errors and --help
            return e.code
        return COMMANDS[a.cmd](a)
    except UsageError as e:
        print(f"treepi: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (lam.LambdaSyntaxError, pi.PiSyntaxError) as e:
        print(f"treepi: parse error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
