"""Command-line driver.

Exit codes: 0 = accept / ok / all expectations met, 1 = reject / type error /
mismatch, 2 = usage or parse error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__
from .attacks import default_config, substitute, universe_for
from .corpus import bundled_dir, corpus_files, run_file
from .errors import RobustcheckError
from .knowledge import knowledge, progress_knowledge, public_part
from .parser import parse_command, parse_file
from .report import (
    dumps, header, knowledge_profile, plot_profiles, typecheck_report,
    verdict_figure, verdict_report,
)
from .robustness import CHECKED, ENDORSE, INTEGRITY, ROBUSTNESS, check
from .semantics import PI, PS, Machine, format_low, low_projection
from .syntax import pretty_program, uses_checked
from .transform import lower_checked, treach
from .typecheck import typecheck


def _parse_memory(text: str, p) -> dict:
    m = {x: 0 for x in p.env.variables}
    if not text:
        return m
    for item in text.split(","):
        name, _, value = item.partition("=")
        name = name.strip()
        if name not in m:
            raise RobustcheckError(f"unknown variable in --memory: {name}")
        m[name] = int(value) % p.domain
    return m


def _emit(doc, out) -> None:
    text = dumps(doc)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_typecheck(args) -> int:
    p = parse_file(args.file, args.domain)
    t0 = time.perf_counter()
    diags = typecheck(p)
    _emit(typecheck_report(args.file, diags, time.perf_counter() - t0 if args.timings else None),
          args.output)
    return 0 if not diags else 1


def cmd_check(args) -> int:
    p = parse_file(args.file, args.domain)
    if args.property == INTEGRITY and uses_checked(p.body):
        p = lower_checked(p)
        if args.emit_lowered:
            sys.stderr.write(pretty_program(p))
    mode = PI if args.property == INTEGRITY else args.mode
    cfg = default_config(p, mode, args.attack_len, args.diverge_attack)
    t0 = time.perf_counter()
    v = check(p, args.property, mode, cfg)
    seconds = time.perf_counter() - t0 if args.timings else None
    doc = verdict_report(args.file, v, seconds)
    if args.figures:
        fig = verdict_figure(p, v, Path(args.figures) / (Path(args.file).stem + ".png"),
                             universe_for(p, mode, cfg))
        if fig is not None:
            doc["figure"] = str(fig)
    _emit(doc, args.output)
    return 0 if v.accepted else 1


def cmd_lower(args) -> int:
    p = parse_file(args.file, args.domain)
    sys.stdout.write(pretty_program(lower_checked(p)))
    return 0


def cmd_treach(args) -> int:
    p = parse_file(args.file, args.domain)
    sys.stdout.write(pretty_program(treach(p)))
    return 0


def cmd_knowledge(args) -> int:
    p = parse_file(args.file, args.domain)
    m = _parse_memory(args.memory, p)
    attack = tuple(parse_command(a, p.env) for a in args.attack)
    if len(attack) < p.hole_count:
        attack += tuple(parse_command("skip", p.env) for _ in range(p.hole_count - len(attack)))
    body = substitute(p, attack)
    q = p.with_body(body)
    r = Machine(body, p.env.variables, p.domain).run(tuple(m[x] for x in p.env.variables))
    low = low_projection(r, p.env, args.mode)
    n = int(min(low.length, args.limit))
    steps = []
    for i in range(n + 1):
        ell = [low[j] for j in range(i)]
        items = [x for x in ell if isinstance(x, tuple)]
        k = knowledge(q, public_part(q, m), items, args.mode)
        kp = progress_knowledge(q, public_part(q, m), items, args.mode)
        steps.append({"observed": [format_low(x) for x in ell],
                      "knowledge": [_secret_view(p, mem) for mem in sorted(k)],
                      "progress_knowledge_size": len(kp)})
    prof = knowledge_profile(p, m, attack, args.mode)
    doc = {**header(), "file": args.file, "mode": args.mode, "memory": m,
           "low_events": [format_low(low[j]) for j in range(n)], "steps": steps,
           "profile": prof.as_dict()}
    if args.plot:
        doc["figure"] = str(plot_profiles([prof], args.plot, f"knowledge along the run from {args.memory or 'zero memory'}"))
    _emit(doc, args.output)
    return 0


def _secret_view(p, mem) -> dict:
    d = dict(mem)
    return {x: d[x] for x in p.env.variables if not p.env[x].public}


def cmd_corpus(args) -> int:
    directory = Path(args.dir) if args.dir else bundled_dir()
    records = []
    for f in corpus_files(directory):
        rec = run_file(f, args.domain, args.timings)
        records.append(rec)
        if args.figures:
            _corpus_figure(f, args)
    ok = all(r["ok"] for r in records)
    if not args.quiet:
        for r in records:
            for item in r["results"]:
                mark = "PASS" if item["ok"] else "FAIL"
                sys.stderr.write(f"{mark}  {r['file']:<30} {item['check']:<34} got {item['got']}\n")
    _emit({**header(), "directory": directory.name, "ok": ok, "files": records}, args.output)
    return 0 if ok else 1


def _corpus_figure(f: Path, args) -> None:
    p = parse_file(f, args.domain)
    attack = tuple(parse_command("skip", p.env) for _ in range(p.hole_count))
    m = {x: 0 for x in p.env.variables}
    modes = [PS, PI]
    profiles = [knowledge_profile(p, m, attack, mode, label=f"{mode}") for mode in modes]
    plot_profiles(profiles, Path(args.figures) / f"{f.stem}.png", f"{f.stem}: knowledge from the zero memory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="robustcheck",
                                 description="Knowledge-based robustness checking for programs with attacker holes.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, file=True):
        if file:
            sp.add_argument("file", help="program source (.ifc)")
        sp.add_argument("--domain", type=int, default=None, help="value domain size N (overrides the file)")
        sp.add_argument("--output", "-o", default=None, help="write JSON here instead of stdout")
        sp.add_argument("--timings", action="store_true", help="include wall-clock times in the report")

    sp = sub.add_parser("typecheck", help="run the security type checker")
    common(sp)
    sp.set_defaults(func=cmd_typecheck)

    sp = sub.add_parser("check", help="decide a robustness property by enumeration")
    common(sp)
    sp.add_argument("--mode", choices=[PS, PI], default=PS)
    sp.add_argument("--property", choices=[ROBUSTNESS, ENDORSE, CHECKED, INTEGRITY], default=ROBUSTNESS)
    sp.add_argument("--attack-len", type=int, default=None,
                    help="maximum assignments per hole (default: number of untrusted variables)")
    sp.add_argument("--diverge-attack", action=argparse.BooleanOptionalAction, default=None,
                    help="include the diverging attack (default: on for ps, off for pi)")
    sp.add_argument("--emit-lowered", action="store_true",
                    help="print the lowered program to stderr when lowering is applied")
    sp.add_argument("--figures", default=None, help="directory for knowledge plots of a witness")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("lower", help="print the program with checked endorsements lowered")
    common(sp)
    sp.set_defaults(func=cmd_lower)

    sp = sub.add_parser("treach", help="print the explicit-reachability translation")
    common(sp)
    sp.set_defaults(func=cmd_treach)

    sp = sub.add_parser("knowledge", help="knowledge sets along one run")
    common(sp)
    sp.add_argument("--memory", default="", help="initial memory, e.g. h=7,l=0 (missing variables are 0)")
    sp.add_argument("--attack", action="append", default=[], help="attack command for the next hole")
    sp.add_argument("--mode", choices=[PS, PI], default=PS)
    sp.add_argument("--limit", type=int, default=16, help="maximum low events to follow")
    sp.add_argument("--plot", default=None, help="write a knowledge-size plot (PNG) here")
    sp.set_defaults(func=cmd_knowledge)

    sp = sub.add_parser("corpus", help="check every .ifc file against its expect lines")
    sp.add_argument("dir", nargs="?", default=None, help="corpus directory (default: bundled corpus)")
    common(sp, file=False)
    sp.add_argument("--figures", default=None, help="directory for per-program knowledge plots")
    sp.add_argument("--quiet", "-q", action="store_true", help="no per-check table on stderr")
    sp.set_defaults(func=cmd_corpus)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (RobustcheckError, OSError, ValueError) as exc:
        sys.stderr.write(f"robustcheck: error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
