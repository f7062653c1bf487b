"""Command-line entry point ``cfl``.

Exit codes: 0 ok, 2 parse or validation error, 3 bad intervention, 4 zero
probability evidence, 5 evidence on a descendant of an intervened atom
(swip), 6 resource limit, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from fractions import Fraction
from pathlib import Path

from . import bench, benchgen
from .errors import CflError, ValidationError
from .graphs import d_separated
from .inference import Backend
from .parser import ParsedFile, parse_source, print_program
from .program import dependency_graph, fixed_name
from .transform import construct_twin, simplify, swift, twin_atom

PRIME_MARKS = ("'", "′")


def parse_assignments(text: str | None) -> dict[str, bool]:
    """``"a=true,r(v3)=false"`` as a mapping; a bare atom means true.

    Commas inside parentheses belong to the atom.
    """
    out: dict[str, bool] = {}
    if not text:
        return out
    items, depth, cur = [], 0, ""
    for ch in text:
        if ch == "," and depth == 0:
            items.append(cur)
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    items.append(cur)
    for item in items:
        item = item.strip()
        if not item:
            continue
        atom, _, value = item.partition("=")
        atom = "".join(atom.split())
        value = value.strip().lower() or "true"
        if value not in ("true", "false"):
            raise ValidationError(f"expected atom=true|false, got {item!r}")
        out[atom] = value == "true"
    return out


def parse_range(text: str) -> list[int]:
    """``"1..10"``, ``"20,40,80"`` or a mix of both."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _plural(n: int, word: str) -> str:
    return f"{n} {word}" if n == 1 else f"{n} {word}s"


def _load(path: str, args) -> ParsedFile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CflError(f"cannot read {path}: {exc.strerror}") from None
    return parse_source(text, exact=getattr(args, "exact", False), implicit_false=args.implicit_false)


def _intervention(parsed: ParsedFile, args) -> dict[str, bool]:
    # flags override the file's directives; fix and do carry the same payload
    merged = {**parsed.do, **parsed.fix}
    merged.update(parse_assignments(args.do))
    merged.update(parse_assignments(args.fix))
    return merged


def cmd_validate(args) -> int:
    p = _load(args.file, args).program
    line = f"ok: {_plural(len(p.facts), 'fact')}, {_plural(len(p.clauses), 'clause')}"
    if p.clauses:
        line += f", L_max={p.max_body_length}"
    print(line)
    return 0


def cmd_transform(args) -> int:
    parsed = _load(args.file, args)
    p = parsed.program
    iv = _intervention(parsed, args)
    if args.method == "swip":
        out, stats = swift(p, iv)
        rename = {a: fixed_name(a) for a in iv}
    else:
        out, stats = construct_twin(p, iv)
        rename = {a: twin_atom(p, iv, a) for a in p.atoms}
    if args.simplify:
        # keep what the directives ask about, or every atom of the input
        keep = set(parsed.queries) | set(parsed.evidence) or set(p.atoms)
        keep = {rename.get(a, a) for a in keep} | (keep if args.method == "twin" else set())
        out = simplify(out, keep)
    text = print_program(out)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    report = asdict(stats)
    report["output_size"] = out.size
    print(json.dumps(report), file=sys.stderr if not args.out else sys.stdout)
    return 0


def cmd_query(args) -> int:
    parsed = _load(args.file, args)
    iv = _intervention(parsed, args)
    evidence = {**parsed.evidence, **parse_assignments(args.evidence)}
    query = parse_assignments(args.query) if args.query else {q: True for q in parsed.queries}
    if not query:
        raise ValidationError("no query given (use --query or a query/1 directive)")
    m = bench.measure(parsed.program, args.method, iv, evidence, query, args.backend, args.literal_alg4)
    prob = m["probability"]
    if args.json:
        rec = bench.ResultRecord(
            instance=args.file, n=None, k=None, seed=None, method=args.method,
            backend=Backend.parse(args.backend).value, **{**m, "probability": float(prob)},
        )
        print(json.dumps(asdict(rec)))
    elif isinstance(prob, Fraction):
        print(f"{float(prob):.10f} ({prob})")
    else:
        print(f"{prob:.10f}")
    return 0


def _dsep_atom(name: str, p, do, twin: bool) -> str:
    primed = name.endswith(PRIME_MARKS)
    atom = name.rstrip("'′")
    if primed:
        if not twin:
            raise ValidationError(f"primed atom {name} only exists in the twin graph")
        return twin_atom(p, do, atom)
    return atom


def cmd_dsep(args) -> int:
    parsed = _load(args.file, args)
    p = parsed.program
    iv = _intervention(parsed, args)
    twin = args.method == "twin"
    names = [args.x, args.y] + list(parse_assignments(args.given))
    atoms = [_dsep_atom(a, p, iv, twin) for a in names]
    if twin:
        g = dependency_graph(construct_twin(p, iv)[0])
    elif iv:
        s, _ = swift(p, iv)
        atoms = [fixed_name(a) if a in iv else a for a in atoms]
        g = dependency_graph(simplify(s, set(atoms) | set(s.fact_atoms)))
    else:
        g = dependency_graph(p)
    x, y, given = atoms[0], atoms[1], atoms[2:]
    for a in atoms:
        if a not in g:
            # simplification may leave an atom constant; constants are independent of everything
            if twin or a not in set(p.atoms) | {fixed_name(b) for b in iv}:
                raise ValidationError(f"unknown atom {a}")
    if x not in g or y not in g:
        sep = True
    else:
        sep = d_separated(g, x, y, [a for a in given if a in g])
    print("yes" if sep else "no")
    return 0


def cmd_bench_gen(args) -> int:
    salt = int(os.environ.get("CFL_SEED", "0"))
    out = Path(args.out)
    count = 0
    for n in parse_range(args.n):
        for k in parse_range(args.k):
            for seed in parse_range(args.seeds):
                benchgen.write_instance(out, benchgen.generate_dag(n, k, seed), n_queries=args.queries, salt=salt)
                count += 1
    print(f"wrote {_plural(count, 'instance')} to {out}")
    return 0


def cmd_bench_run(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in bench.METHODS:
            raise ValidationError(f"unknown method {m}")

    def progress(rec):
        if args.verbose:
            print(f"{rec.instance} {rec.method} {rec.status} {rec.transform_ms + rec.inference_ms:.1f} ms",
                  file=sys.stderr)

    records = bench.run_bench(Path(args.dir), Path(args.out), methods, Backend.parse(args.backend).value,
                              args.timeout, args.workers, progress)
    failed = sum(r.status != "ok" for r in records)
    print(f"{_plural(len(records), 'row')} appended to {args.out} ({failed} not ok)")
    return 0


def cmd_bench_summary(args) -> int:
    s = bench.summarize(bench.read_records(Path(args.csv)))
    if args.json:
        print(json.dumps(asdict(s)))
    else:
        print(bench.format_summary(s))
    return 0


def _add_intervention(p):
    p.add_argument("--fix", help='intervention such as "a=true,b=false" (overrides file directives)')
    p.add_argument("--do", help="same payload as --fix")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cfl", description="Counterfactual queries on acyclic ProbLog programs.")
    sub = ap.add_subparsers(dest="command", required=True)

    def program_command(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("file")
        p.add_argument("--implicit-false", action="store_true", help="treat undeclared body atoms as 0.0 facts")
        return p

    p = program_command("validate", "parse and check a program")
    p.set_defaults(func=cmd_validate)

    p = program_command("transform", "write the SWIP or twin program")
    p.add_argument("--method", choices=["swip", "twin"], required=True)
    _add_intervention(p)
    p.add_argument("--out", help="output file (default: standard output, stats on stderr)")
    p.add_argument("--simplify", action="store_true", help="drop dead and constant rules")
    p.add_argument("--exact", action="store_true", help="keep probabilities as fractions")
    p.set_defaults(func=cmd_transform)

    p = program_command("query", "evaluate a counterfactual query")
    p.add_argument("--method", choices=list(bench.METHODS), default="swip")
    p.add_argument("--backend", choices=[b.value for b in Backend], default="circuit")
    _add_intervention(p)
    p.add_argument("--evidence", help='evidence such as "d=true"')
    p.add_argument("--query", help='conjunction such as "d" or "c=true,d=false"')
    p.add_argument("--json", action="store_true", help="print the full result record")
    p.add_argument("--exact", action="store_true", help="rational arithmetic")
    p.add_argument("--literal-alg4", action="store_true",
                   help="swip: warn instead of failing on evidence below an intervention")
    p.set_defaults(func=cmd_query)

    p = program_command("dsep", "d-separation in the SWIP or twin graph")
    p.add_argument("--method", choices=["swip", "twin"], default="swip")
    _add_intervention(p)
    p.add_argument("--x", required=True, help="atom; append ' for the counterfactual copy (twin)")
    p.add_argument("--y", required=True)
    p.add_argument("--given", help="comma-separated conditioning atoms")
    p.set_defaults(func=cmd_dsep)

    p = sub.add_parser("bench", help="benchmark generation, execution and summary")
    bsub = p.add_subparsers(dest="bench_command", required=True)
    g = bsub.add_parser("gen", help="write benchmark instances")
    g.add_argument("--n", default="20,40,80")
    g.add_argument("--k", default="2,4,8")
    g.add_argument("--seeds", default="1..10")
    g.add_argument("--queries", type=int, default=2, help="queries per instance")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_bench_gen)
    r = bsub.add_parser("run", help="run every instance below a directory")
    r.add_argument("dir")
    r.add_argument("--methods", default="swip,twin")
    r.add_argument("--backend", choices=[b.value for b in Backend], default="circuit")
    r.add_argument("--timeout", type=float, default=bench.DEFAULT_TIMEOUT, help="seconds per execution")
    r.add_argument("--workers", type=int, default=None, help="default: CFL_WORKERS or 1")
    r.add_argument("--out", default="results.csv")
    r.add_argument("--verbose", action="store_true")
    r.set_defaults(func=cmd_bench_run)
    s = bsub.add_parser("summary", help="paired SWIP/Twin comparison of a results CSV")
    s.add_argument("csv")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_bench_summary)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CflError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
