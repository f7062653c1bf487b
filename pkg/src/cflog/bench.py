"""Benchmark execution: one isolated, time-limited process per (instance, query, method)."""

from __future__ import annotations

import csv
import gc
import json
import multiprocessing as mp
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable

from .benchgen import MANIFEST_FILE, PROGRAM_FILE
from .errors import CflError
from .graphs import primal_graph, treewidth_estimate
from .inference import Backend, swip_query, twin_query
from .oracle import oracle_counterfactual
from .parser import parse_source
from .program import Program

DEFAULT_TIMEOUT = 60.0
METHODS = ("swip", "twin", "oracle")
PUBLISHED_RATIO = 0.65  # published SWIP runtime as a fraction of the twin baseline


@dataclass
class ResultRecord:
    instance: str
    n: int
    k: int
    seed: int
    method: str
    backend: str
    transform_ms: float
    inference_ms: float
    size: int
    tw_estimate: int
    probability: float | None
    status: str


CSV_FIELDS = [f.name for f in fields(ResultRecord)]


@dataclass
class Task:
    instance: str
    n: int
    k: int
    seed: int
    program_text: str
    query_text: str
    method: str
    backend: str


def measure(p: Program, method: str, intervention, evidence, query, backend="circuit", literal_alg4=False) -> dict:
    """Evaluate one counterfactual query; returns the measured ResultRecord fields.

    ``probability`` keeps the evaluator's number type (Fraction in exact mode).
    """
    backend = Backend.parse(backend)
    if method == "swip":
        out = swip_query(p, intervention, evidence, query, backend, literal_alg4=literal_alg4)
    elif method == "twin":
        out = twin_query(p, intervention, evidence, query, backend)
    elif method == "oracle":
        t0 = time.perf_counter()
        prob = oracle_counterfactual(p, intervention, evidence, query)
        ms = (time.perf_counter() - t0) * 1e3
        return dict(transform_ms=0.0, inference_ms=ms, size=p.size,
                    tw_estimate=treewidth_estimate(primal_graph(p)), probability=prob, status="ok")
    else:
        raise ValueError(f"unknown method {method}")
    return dict(
        transform_ms=out.transform_ms,
        inference_ms=out.inference_ms,
        size=out.program.size,
        tw_estimate=treewidth_estimate(primal_graph(out.program)),
        probability=out.probability,
        status="ok",
    )


def run_query(program_text: str, query_text: str, method: str, backend="circuit", literal_alg4=False) -> dict:
    """Parse a program plus its directive file and measure one query."""
    parsed = parse_source(program_text + "\n" + query_text)
    intervention = {**parsed.do, **parsed.fix}
    query = {q: True for q in parsed.queries}
    out = measure(parsed.program, method, intervention, parsed.evidence, query, backend, literal_alg4)
    out["probability"] = float(out["probability"])
    return out


def _child(task: Task, conn):
    gc.disable()  # short-lived child: no collector pauses inside the timed phases
    try:
        conn.send(run_query(task.program_text, task.query_text, task.method, task.backend))
    except CflError as exc:
        conn.send({"status": f"error:{exc.exit_code}", "message": str(exc)})
    except Exception as exc:  # reported as a row, the run goes on
        conn.send({"status": "error:1", "message": f"{type(exc).__name__}: {exc}"})
    finally:
        conn.close()


def execute(task: Task, timeout: float = DEFAULT_TIMEOUT) -> ResultRecord:
    """Run a task in a forked child with a wall-clock limit.

    A timeout is recorded with the limit itself as its inference time.
    """
    gc.freeze()  # keep the parent heap out of the child's copy-on-write traffic
    ctx = mp.get_context("fork")
    recv, send = ctx.Pipe(duplex=False)
    proc = ctx.Process(target=_child, args=(task, send), daemon=True)
    proc.start()
    send.close()
    result = None
    timed_out = not recv.poll(timeout)
    if not timed_out:
        try:
            result = recv.recv()
        except EOFError:  # child died without reporting
            result = None
    proc.join(1.0)
    if proc.is_alive():
        proc.kill()
        proc.join()
    base = dict(instance=task.instance, n=task.n, k=task.k, seed=task.seed, method=task.method, backend=task.backend)
    if result is None:
        status = "timeout" if timed_out else f"error:crash{proc.exitcode}"
        return ResultRecord(**base, transform_ms=0.0, inference_ms=timeout * 1e3 if timed_out else 0.0,
                            size=0, tw_estimate=-1, probability=None, status=status)
    if result["status"] != "ok":
        return ResultRecord(**base, transform_ms=0.0, inference_ms=0.0, size=0, tw_estimate=-1,
                            probability=None, status=result["status"])
    return ResultRecord(**base, **result)


def load_tasks(instance_dir: Path, methods: Iterable[str], backend: str) -> list[Task]:
    """Tasks for every instance below ``instance_dir`` (directories holding a manifest)."""
    tasks = []
    for manifest_path in sorted(Path(instance_dir).glob(f"**/{MANIFEST_FILE}")):
        d = manifest_path.parent
        manifest = json.loads(manifest_path.read_text())
        program_text = (d / PROGRAM_FILE).read_text()
        for i, q in enumerate(manifest["queries"]):
            query_text = (d / q["file"]).read_text()
            for method in methods:
                tasks.append(Task(f"{d.name}#q{i}", manifest["n"], manifest["k"], manifest["seed"],
                                  program_text, query_text, method, backend))
    return tasks


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("CFL_WORKERS", "1")))
    except ValueError:
        return 1


def run_bench(
    instance_dir: Path,
    out_csv: Path,
    methods=("swip", "twin"),
    backend: str = "circuit",
    timeout: float = DEFAULT_TIMEOUT,
    workers: int | None = None,
    progress=None,
) -> list[ResultRecord]:
    """Execute all tasks and append one CSV row per execution (header written once)."""
    tasks = load_tasks(instance_dir, methods, backend)
    workers = workers or worker_count()
    out_csv = Path(out_csv)
    new_file = not out_csv.exists() or out_csv.stat().st_size == 0
    records = []
    with open(out_csv, "a", newline="") as fh, ThreadPoolExecutor(max_workers=workers) as pool:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        if new_file:
            writer.writeheader()
        futures = [pool.submit(execute, t, timeout) for t in tasks]
        # rows are written by this thread only, in task order
        for fut in futures:
            rec = fut.result()
            writer.writerow(asdict(rec))
            fh.flush()
            records.append(rec)
            if progress:
                progress(rec)
    return records


def read_records(path: Path) -> list[ResultRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(ResultRecord(
                instance=row["instance"], n=int(row["n"]), k=int(row["k"]), seed=int(row["seed"]),
                method=row["method"], backend=row["backend"],
                transform_ms=float(row["transform_ms"]), inference_ms=float(row["inference_ms"]),
                size=int(row["size"]), tw_estimate=int(row["tw_estimate"]),
                probability=float(row["probability"]) if row["probability"] not in ("", "None") else None,
                status=row["status"],
            ))
    return out


@dataclass
class Summary:
    pairs: int
    median_inference_ratio: float
    median_total_ratio: float
    frac_swip_faster: float
    max_prob_diff: float
    mean_size_swip: float
    mean_size_twin: float
    mean_tw_swip: float
    mean_tw_twin: float
    by_grid: dict


def summarize(records: Iterable[ResultRecord]) -> Summary:
    """Pair swip and twin rows per (instance, backend) and compare them.

    Timed-out rows keep the limit as their time; pairs where
    either side errored are skipped.
    """
    rows: dict[tuple, dict[str, ResultRecord]] = {}
    for r in records:
        rows.setdefault((r.instance, r.backend), {})[r.method] = r
    pairs = []
    for key, by_method in rows.items():
        s, t = by_method.get("swip"), by_method.get("twin")
        if s is None or t is None:
            continue
        if s.status not in ("ok", "timeout") or t.status not in ("ok", "timeout"):
            continue
        if s.status == t.status == "timeout":
            continue
        pairs.append((s, t))
    if not pairs:
        return Summary(0, float("nan"), float("nan"), float("nan"), float("nan"), float("nan"), float("nan"),
                       float("nan"), float("nan"), {})

    def total(r):
        return r.transform_ms + r.inference_ms

    def ratio(a, b):
        return a / b if b > 0 else (1.0 if a == 0 else float("inf"))

    inf_ratios = [ratio(s.inference_ms, t.inference_ms) for s, t in pairs]
    tot_ratios = [ratio(total(s), total(t)) for s, t in pairs]
    faster = sum(total(s) <= total(t) for s, t in pairs) / len(pairs)
    diffs = [abs(s.probability - t.probability) for s, t in pairs if s.status == t.status == "ok"]
    grid: dict = {}
    for (s, t), r in zip(pairs, tot_ratios):
        grid.setdefault((s.n, s.k), []).append(r)
    by_grid = {f"n={n},k={k}": statistics.median(v) for (n, k), v in sorted(grid.items())}
    ok = [(s, t) for s, t in pairs if s.status == t.status == "ok"]
    return Summary(
        pairs=len(pairs),
        median_inference_ratio=statistics.median(inf_ratios),
        median_total_ratio=statistics.median(tot_ratios),
        frac_swip_faster=faster,
        max_prob_diff=max(diffs, default=0.0),
        mean_size_swip=statistics.mean(s.size for s, _ in ok) if ok else float("nan"),
        mean_size_twin=statistics.mean(t.size for _, t in ok) if ok else float("nan"),
        mean_tw_swip=statistics.mean(s.tw_estimate for s, _ in ok) if ok else float("nan"),
        mean_tw_twin=statistics.mean(t.tw_estimate for _, t in ok) if ok else float("nan"),
        by_grid=by_grid,
    )


def format_summary(s: Summary) -> str:
    lines = [
        f"paired queries: {s.pairs}",
        f"median SWIP/Twin inference time: {s.median_inference_ratio:.3f}",
        f"median SWIP/Twin total time: {s.median_total_ratio:.3f} (published: {PUBLISHED_RATIO:.2f})",
        f"SWIP total time <= Twin: {100 * s.frac_swip_faster:.1f}% of pairs",
        f"max |P_swip - P_twin|: {s.max_prob_diff:.3g}",
        f"mean program size: swip {s.mean_size_swip:.1f}, twin {s.mean_size_twin:.1f}",
        f"mean treewidth estimate: swip {s.mean_tw_swip:.2f}, twin {s.mean_tw_twin:.2f}",
    ]
    for cell, r in s.by_grid.items():
        lines.append(f"  {cell}: median total ratio {r:.3f}")
    return "\n".join(lines)
