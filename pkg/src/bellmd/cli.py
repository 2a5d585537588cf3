"""Command-line entry point: ``bellmd <group> <command> [flags]``.

Exit codes: 0 success, 1 the computed property is false, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import contexts, multidev, pioneer, quantum, tbic
from .algebra import Intuple, format_rational
from .contexts import BellInequality, EventSpace, MultiContextDistribution
from .multidev import DistVector, LatticeIntuple, MultidevTable


class UsageError(Exception):
    pass


def _fmt_float(x: float) -> float:
    return float(f"{x:.12g}")


def _dump(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), sort_keys=False)


def _load(path: str):
    try:
        if path == "-":
            return json.load(sys.stdin)
        with open(path) as fh:
            return json.load(fh)
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}: malformed JSON ({e.msg} at line {e.lineno})") from None


def _require(args, name: str):
    v = getattr(args, name)
    if v is None:
        raise UsageError(f"--{name.replace('_', '-')} is required")
    return v


def _space(args, default_observers: int | None = None) -> EventSpace:
    if args.space:
        return EventSpace.from_json(_load(args.space))
    if default_observers is not None:
        return EventSpace.binary(default_observers)
    raise UsageError("--space is required")


# -- pioneer -------------------------------------------------------------------


def _verify_one(payload):
    n, data = payload
    spec = pioneer.PioneerSpec.from_json(data, n_observers=n)
    v = tbic.tbic_check(contexts.EventSpace.binary(n), pioneer.gamma_set(spec))
    return v.verdict, v.nullity, pioneer.connectivity_verify(spec)


def cmd_pioneer_count(args, out) -> int:
    n = _require(args, "observers")
    if args.top_level_only:
        out.write(_dump({"top_level": pioneer.count_pioneers(n, True)}) + "\n")
    else:
        out.write(_dump({"total": pioneer.count_pioneers(n), "top_level": pioneer.count_pioneers(n, True)}) + "\n")
    return 0


def cmd_pioneer_enumerate(args, out) -> int:
    n = _require(args, "observers")
    _, specs = pioneer.enumerate_pioneers(n, args.top_level_only, stream=True)
    if not args.verify:
        for s in specs:
            out.write(_dump(s.to_json()) + "\n")
        return 0
    specs = list(specs)
    payload = [(n, s.to_json()) for s in specs]
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as ex:
            results = list(ex.map(_verify_one, payload, chunksize=16))
    else:
        results = [_verify_one(p) for p in payload]
    status = 0
    for s, (verdict, nullity, conn) in zip(specs, results):
        row = s.to_json()
        row.update({"verdict": verdict, "nullity": nullity, "connected": conn})
        out.write(_dump(row) + "\n")
        if verdict != "tight":
            status = 1
    return status


# -- inequalities --------------------------------------------------------------


def _spec_from_file(path: str) -> pioneer.PioneerSpec:
    data = _load(path)
    return pioneer.PioneerSpec.from_json(data, n_observers=data.get("observers"))


def cmd_ineq_from_pioneer(args, out) -> int:
    spec = _spec_from_file(_require(args, "spec"))
    ineq = pioneer.coefficients(spec)
    if args.canonical:
        ineq = ineq.canonical()
    out.write(_dump(ineq.to_json()) + "\n")
    return 0


def cmd_ineq_lift(args, out) -> int:
    ineq = BellInequality.from_json(_load(_require(args, "ineq")))
    target = _space(args)
    spec = _load(_require(args, "lift"))
    p = [target.index_of(x) for x in spec["p"]]
    q = [target.index_of(x) for x in spec["q"]]
    alpha = LatticeIntuple.from_map({target.index_of(k): [int(o) - 1 for o in v] for k, v in spec["alpha"].items()})
    lifted = pioneer.lift(ineq, target, p, q, alpha)
    out.write(_dump(lifted.to_json()) + "\n")
    return 0


def cmd_ineq_eval(args, out) -> int:
    ineq = BellInequality.from_json(_load(_require(args, "ineq")))
    dist = MultiContextDistribution.from_json(ineq.space, _load(_require(args, "dist")))
    try:
        value = contexts.evaluate_inequality(ineq, dist)
    except contexts.ParameterDependenceError as e:
        out.write(_dump({"error": "parameter independence violated", "witness": e.witness}) + "\n")
        return 1
    ok = value >= 0
    out.write(_dump({"value": format_rational(value), "float": _fmt_float(float(value)), "satisfied": ok}) + "\n")
    return 0 if ok else 1


# -- tbic ------------------------------------------------------------------------


def _gamma_from_file(space: EventSpace, path: str) -> list[Intuple]:
    data = _load(path)
    items = data["members"] if isinstance(data, dict) else data
    out = []
    for item in items:
        if item and isinstance(item[0], list):
            out.append(Intuple.from_map({space.index_of(str(e)) if not isinstance(e, int) else e: int(o) - 1
                                         for e, o in item}))
        else:
            out.append(Intuple.full([int(o) - 1 for o in item]))
    return out


def cmd_tbic_check(args, out) -> int:
    if args.spec:
        spec = _spec_from_file(args.spec)
        space = EventSpace.binary(spec.n_observers)
        gamma = pioneer.gamma_set(spec)
    else:
        space = _space(args)
        gamma = _gamma_from_file(space, _require(args, "gamma"))
    v = tbic.tbic_check(space, gamma)
    out.write(_dump(v.to_json()) + "\n")
    return 0 if v.tight else 1


# -- projection and facets -------------------------------------------------------


def cmd_project(args, out) -> int:
    space = _space(args)
    data = _load(_require(args, "dist"))
    values = data["values"] if isinstance(data, dict) else data
    mu = DistVector(space.omni, values, probability=True)
    proj = contexts.project_omni(space, mu)
    row = proj.to_json()
    ident = contexts.projection_identity_holds(space, mu)
    row["identity_holds"] = ident.ok
    out.write(_dump(row) + "\n")
    return 0 if ident.ok and proj == contexts.bell_mixture(space, mu) else 1


def cmd_facets(args, out) -> int:
    space = _space(args, default_observers=2)
    facets = tbic.brute_force_facets(space)
    if args.format == "json":
        out.write(_dump({"count": len(facets), "facets": [f.to_json() for f in facets]}) + "\n")
    else:
        for f in facets:
            out.write(_dump(f.to_json()) + "\n")
    return 0


# -- quantum ---------------------------------------------------------------------


def _rows_out(rows: list[dict], fmt: str, out) -> None:
    rows = [{"observers": r["observers"], "d_over_pi": _fmt_float(r["d_over_pi"]), "value": _fmt_float(r["value"])}
            for r in rows]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["observers", "d_over_pi", "value"], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        out.write(buf.getvalue())
    elif fmt == "jsonl":
        for r in rows:
            out.write(_dump(r) + "\n")
    else:
        out.write(_dump(rows if len(rows) != 1 else rows[0]) + "\n")


def cmd_qm_table(args, out) -> int:
    try:
        rows = [int(x) for x in args.rows.split(",")] if args.rows else list(quantum.TABLE_ROWS)
    except ValueError:
        raise UsageError("--rows must be a comma-separated list of integers") from None
    if any(n < 2 for n in rows):
        raise UsageError("every row needs at least two observers")
    _rows_out(quantum.violation_table(rows, threads=args.threads), args.format, out)
    return 0


def cmd_qm_max_violation(args, out) -> int:
    n = _require(args, "observers")
    if n < 2:
        raise UsageError("--observers must be at least 2")
    if args.verify:
        row = {k: _fmt_float(v) if isinstance(v, float) else v for k, v in quantum.global_check(n).items()}
        out.write(_dump(row) + "\n")
        return 0
    _rows_out(quantum.violation_table([n]), args.format, out)
    return 0


# -- multideviations -------------------------------------------------------------


def cmd_md_transform(args, out) -> int:
    f = DistVector.from_json(_load(_require(args, "dist")))
    out.write(_dump(multidev.transform(f).to_json()) + "\n")
    return 0


def cmd_md_check(args, out) -> int:
    path = args.table or _require(args, "dist")
    data = _load(path)
    table = MultidevTable.from_json(data) if "orders" in data else multidev.transform(DistVector.from_json(data))
    res = multidev.check_constraints(table)
    out.write(_dump({"ok": res.ok, "witness": None if res.witness is None else res.witness.to_json()}) + "\n")
    return 0 if res.ok else 1


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--observers", type=int)
    common.add_argument("--space")
    common.add_argument("--spec")
    common.add_argument("--gamma")
    common.add_argument("--dist")
    common.add_argument("--ineq")
    common.add_argument("--lift")
    common.add_argument("--table")
    common.add_argument("--top-level-only", action="store_true")
    common.add_argument("--rows")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--format", choices=["json", "csv", "jsonl"], default="json")
    common.add_argument("--verify", action="store_true", help="pioneer enumerate: run the tightness check; qm max-violation: add a coarse global scan")
    common.add_argument("--canonical", action="store_true", help="integer coefficients with gcd 1")

    parser = argparse.ArgumentParser(prog="bellmd", description="Multideviation tools for Bell scenarios.")
    groups = parser.add_subparsers(dest="group", required=True)

    def group(name, commands):
        g = groups.add_parser(name)
        sub = g.add_subparsers(dest="command", required=True)
        for cname, fn, help_ in commands:
            p = sub.add_parser(cname, parents=[common], help=help_)
            p.set_defaults(fn=fn)

    group("pioneer", [("count", cmd_pioneer_count, "count pioneer sets"),
                      ("enumerate", cmd_pioneer_enumerate, "stream pioneer specs as JSON lines")])
    group("ineq", [("from-pioneer", cmd_ineq_from_pioneer, "inequality of a pioneer spec"),
                   ("lift", cmd_ineq_lift, "lift a binary inequality to a larger space"),
                   ("eval", cmd_ineq_eval, "evaluate an inequality on a distribution")])
    group("tbic", [("check", cmd_tbic_check, "tightness verdict for a set of vertices")])
    group("qm", [("table", cmd_qm_table, "maximal violations for several observer counts"),
                 ("max-violation", cmd_qm_max_violation, "maximal violation for one observer count")])
    group("md", [("transform", cmd_md_transform, "multideviation table of a function"),
                 ("check", cmd_md_check, "probability constraints of a table")])
    for name, fn, help_ in [("project", cmd_project, "contexts of an omni-joint distribution"),
                            ("facets", cmd_facets, "facets of the two-observer binary Bell polytope")]:
        p = groups.add_parser(name, parents=[common], help=help_)
        p.set_defaults(fn=fn)
    return parser


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.fn(args, out)
    except (UsageError, ValueError, KeyError, TypeError, IndexError, ZeroDivisionError) as e:
        msg = f"missing field {e.args[0]!r}" if isinstance(e, KeyError) and e.args else e
        print(f"bellmd: error: {msg}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


__all__ = ["run", "main", "build_parser"]
