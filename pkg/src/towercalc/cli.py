"""Command-line interface: parse DSL files, run the deciders, emit JSON/DOT.

Exit codes: 0 for decided verdicts, 2 for Unknown (so pipelines can tell a
decided No from a give-up), 1 for errors.  Reports are byte-stable for fixed
options; timing goes to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import classify, limits, towers
from .decision import Decision
from .dsl import ParseError, parse_expr
from .retract import decide_retractable
from .splittings import (CenteredSplitting, GroupExpr, InvalidSplitting,
                         format_expr, format_splitting, to_dot, validate)
from .words import parse_word

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNKNOWN = 2


def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _fail(message: str) -> int:
    sys.stderr.write(f"error: {message}\n")
    return EXIT_ERROR


def _load(path: str):
    with open(path, "r", encoding="utf-8") as handle:
        return parse_expr(handle.read())


def _load_expr(path: str) -> GroupExpr:
    parsed = _load(path)
    if isinstance(parsed, tuple):
        parsed = parsed[0]
    if isinstance(parsed, CenteredSplitting):
        from .splittings import SurfaceEtage
        parsed = SurfaceEtage(parsed, None)
    return towers.certify(parsed)


def _load_splitting(path: str) -> CenteredSplitting:
    parsed = _load(path)
    if isinstance(parsed, tuple):
        return parsed[0]
    if isinstance(parsed, CenteredSplitting):
        return parsed
    from .splittings import SurfaceEtage
    if isinstance(parsed, SurfaceEtage):
        return parsed.splitting
    raise ValueError("the input file does not describe a centered splitting")


def _decision_exit(d: Decision) -> int:
    return EXIT_UNKNOWN if d.is_unknown else EXIT_OK


def _read_config(path: str | None) -> dict:
    if not path:
        return {}
    out = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {line!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def main(argv: list[str] | None = None) -> int:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value defaults file")
    common.add_argument("--radius", type=int, help="search radius for word oracles")
    common.add_argument("--nmax", type=int, help="twist power bound for discriminate")
    common.add_argument("--max-genus", type=int, dest="max_genus")
    common.add_argument("--max-boundary", type=int, dest="max_boundary")
    common.add_argument("--max-index", type=int, dest="max_index")
    common.add_argument("--seed", type=int, help="seed for randomized rule orders")

    parser = argparse.ArgumentParser(
        prog="towercalc",
        description="tower calculus for torsion-free hyperbolic groups")
    sub = parser.add_subparsers(dest="verb", required=True)

    for verb in ("core", "ecore", "efree", "prime", "minimal"):
        p = sub.add_parser(verb, parents=[common])
        p.add_argument("file")
    p = sub.add_parser("equiv", parents=[common])
    p.add_argument("file1")
    p.add_argument("file2")
    for verb in ("retractable", "validate", "dot", "discriminate"):
        p = sub.add_parser(verb, parents=[common])
        p.add_argument("file")
    sub.add_parser("catalog", parents=[common])
    p = sub.add_parser("tower", parents=[common])
    p.add_argument("transform", choices=["normalize", "upgrade", "stabilize"])
    p.add_argument("file")

    args = parser.parse_args(argv)
    config = _read_config(args.config)

    def opt(name: str, default: int) -> int:
        value = getattr(args, name, None)
        if value is not None:
            return value
        if name in config:
            return int(config[name])
        return default

    radius = opt("radius", 4)
    try:
        return _dispatch(args, radius, opt)
    except (ParseError, InvalidSplitting, ValueError, OSError) as exc:
        return _fail(str(exc))


def _dispatch(args, radius: int, opt) -> int:
    verb = args.verb

    if verb == "validate":
        c = _load_splitting(args.file)
        violations = validate(c)
        _emit({"valid": not violations, "violations": violations})
        return EXIT_OK if not violations else EXIT_ERROR

    if verb == "dot":
        c = _load_splitting(args.file)
        sys.stdout.write(to_dot(c))
        return EXIT_OK

    if verb == "retractable":
        c = _load_splitting(args.file)
        decision = decide_retractable(c, radius=radius)
        _emit(decision.to_json())
        return _decision_exit(decision)

    if verb == "core":
        e = _load_expr(args.file)
        _emit({"normal_form": str(classify.core(e)), "verdict": "Yes"})
        return EXIT_OK

    if verb == "ecore":
        e = _load_expr(args.file)
        _emit({"normal_form": str(classify.ecore(e)), "verdict": "Yes"})
        return EXIT_OK

    if verb == "efree":
        e = _load_expr(args.file)
        _emit({"efree": classify.is_efree(e), "verdict": "Yes"})
        return EXIT_OK

    if verb == "prime":
        e = _load_expr(args.file)
        decision = classify.is_prime(e)
        _emit(decision.to_json())
        return _decision_exit(decision)

    if verb == "minimal":
        e = _load_expr(args.file)
        decision = classify.is_minimal(e)
        _emit(decision.to_json())
        return _decision_exit(decision)

    if verb == "equiv":
        e1 = _load_expr(args.file1)
        e2 = _load_expr(args.file2)
        _emit({"equiv": classify.equiv(e1, e2)})
        return EXIT_OK

    if verb == "catalog":
        entries = classify.minimal_efree_catalog(opt("max_genus", 2),
                                                 opt("max_boundary", 3),
                                                 opt("max_index", 4))
        _emit({"entries": [{"splitting": format_splitting(entry.splitting),
                            "retractable": entry.retractable.to_json()}
                           for entry in entries]})
        return EXIT_OK

    if verb == "tower":
        e = _load_expr(args.file)
        if args.transform == "normalize":
            result = towers.normalize_etages(e)
            _emit({"result": format_expr(result)})
            return EXIT_OK
        if args.transform == "stabilize":
            result, added = towers.stabilize(e, radius)
            _emit({"result": format_expr(result), "added_free_rank": added})
            return EXIT_OK
        from .splittings import SurfaceEtage
        if not isinstance(e, SurfaceEtage):
            return _fail("upgrade expects a single etage")
        result = towers.upgrade_to_simple(e, radius)
        _emit({"result": format_expr(result)})
        return EXIT_OK

    if verb == "discriminate":
        parsed = _load(args.file)
        if not (isinstance(parsed, tuple) and len(parsed) == 2):
            return _fail("discriminate expects an etage file with a rho clause")
        c, rho_texts = parsed
        from .retract import base_names, make_layout
        layout = make_layout(c)
        if layout is None:
            return _fail("discriminate needs a free bottom")
        assignments = {name: parse_word(text, layout.target_names)
                       for name, text in rho_texts.items()}
        ep = limits.etage_presentation(c, assignments)
        start = time.monotonic()
        report = limits.discriminating_report(ep, radius=opt("radius", 2),
                                              n_max=opt("nmax", 64))
        elapsed = time.monotonic() - start
        sys.stderr.write(f"elapsed: {elapsed:.3f}s\n")
        _emit(report)
        return EXIT_OK if report["found_n"] is not None else EXIT_UNKNOWN

    return _fail(f"unknown verb {verb!r}")


if __name__ == "__main__":
    sys.exit(main())
