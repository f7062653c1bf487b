"""Random reachability-with-traps benchmark programs and their counterfactual queries.

A uniformly random labelled tree on n nodes (rooted at the start vertex s)
is extended by k layer vertices, each fed by arcs from 2..min(5, n) random
tree vertices, and a goal g fed by every layer vertex. The program walks the
graph from s: each vertex picks one outgoing edge uniformly, and every
vertex with an incoming edge may be a trap (0.1) that stops the walk.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import networkx as nx
import numpy as np

from .errors import ValidationError
from .lpad import LPADClause
from .parser import parse_program, print_directives
from .program import Literal, Program

TRAP_PROB = Fraction(1, 10)
PROGRAM_FILE = "program.pl"
MANIFEST_FILE = "manifest.json"


@dataclass(frozen=True)
class BenchGraph:
    n: int
    k: int
    seed: int
    vertices: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    source: str = "s"
    goal: str = "g"

    def to_digraph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.vertices)
        g.add_edges_from(self.edges)
        return g

    def children(self, x: str) -> list[str]:
        return [v for u, v in self.edges if u == x]

    def has_parents(self, x: str) -> bool:
        return any(v == x for _, v in self.edges)

    @property
    def name(self) -> str:
        return f"n{self.n}_k{self.k}_s{self.seed}"


def _random_tree(n: int, rng) -> nx.Graph:
    if n == 2:
        return nx.Graph([(0, 1)])
    return nx.from_prufer_sequence([int(x) for x in rng.integers(0, n, size=n - 2)])


def generate_dag(n: int, k: int, seed: int) -> BenchGraph:
    """Tree on n vertices (s included) plus k layer vertices plus the goal."""
    if n < 2 or k < 1:
        raise ValidationError(f"need n >= 2 and k >= 1, got n={n}, k={k}")
    rng = np.random.default_rng(seed)
    tree = _random_tree(n, rng)
    names = ["s"] + [f"v{i}" for i in range(1, n)]
    edges = [(names[u], names[v]) for u, v in nx.bfs_edges(tree, 0, sort_neighbors=sorted)]
    layer = [f"u{j}" for j in range(1, k + 1)]
    for u in layer:
        m = int(rng.integers(2, min(5, n) + 1))
        for i in sorted(int(x) for x in rng.choice(n, size=m, replace=False)):
            edges.append((names[i], u))
    edges += [(u, "g") for u in layer]
    return BenchGraph(n, k, seed, tuple(names + layer + ["g"]), tuple(edges))


def _atom(functor: str, *args: str) -> str:
    return f"{functor}({','.join(args)})"


def emit_rules(bg: BenchGraph) -> tuple[list[LPADClause], list[tuple[str, tuple[Literal, ...]]]]:
    """Trap clauses and per-vertex choices as LPAD clauses (exact 1/d heads), and the
    deterministic reachability clauses."""
    ads: list[LPADClause] = []
    for x, y in bg.edges:
        ads.append(LPADClause(((_atom("trap", y), TRAP_PROB),), (Literal(_atom("p", x, y)),)))
    for x in bg.vertices:
        kids = bg.children(x)
        if not kids:
            continue
        d = len(kids)
        body = [Literal(_atom("r", x))]
        if bg.has_parents(x):
            body.append(Literal(_atom("trap", x), False))
        ads.append(LPADClause(tuple((_atom("p", x, y), Fraction(1, d)) for y in kids), tuple(body)))
    rules = [(_atom("r", y), (Literal(_atom("p", x, y)),)) for x, y in bg.edges]
    return ads, rules


def _fmt(q) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def emit_source(bg: BenchGraph) -> str:
    """Program text in the schema's surface syntax."""
    ads, rules = emit_rules(bg)
    lines = [f"% reachability benchmark {bg.name}", f"{_atom('r', bg.source)}."]
    for rc in ads:
        heads = "; ".join(f"{_fmt(q)}::{h}" for h, q in rc.heads)
        lines.append(f"{heads} :- {', '.join(str(l) for l in rc.body)}.")
    for head, body in rules:
        lines.append(f"{head} :- {', '.join(str(l) for l in body)}.")
    return "\n".join(lines) + "\n"


def emit_program(bg: BenchGraph, exact: bool = False) -> Program:
    return parse_program(emit_source(bg), exact=exact)


@dataclass
class QuerySpec:
    evidence: list[tuple[str, bool]] = field(default_factory=list)
    interventions: list[tuple[str, bool]] = field(default_factory=list)
    query: dict[str, bool] = field(default_factory=dict)
    seed: int = 0

    def directives(self) -> str:
        return print_directives(list(self.query), dict(self.evidence), None, dict(self.interventions))


def _evidence_possible(bg: BenchGraph, chosen: set[str]) -> bool:
    # s always moves on to one of its children, so they cannot all stay unreached
    return not set(bg.children(bg.source)) <= chosen


def sample_query(
    bg: BenchGraph,
    n_ev: int,
    n_int: int,
    seed: int,
    swip_safe: bool = True,
    positive: bool = False,
    max_tries: int = 100,
) -> QuerySpec:
    """Negative evidence and interventions on reachability of internal vertices.

    Interventions and evidence use distinct vertices other than s and g; with
    ``swip_safe`` evidence avoids descendants of intervened vertices.
    ``positive`` draws the signs at random instead.
    """
    if not (0 <= n_ev <= 5 and 0 <= n_int <= 5):
        raise ValidationError("at most five evidence items and five interventions")
    rng = np.random.default_rng(seed)
    g = bg.to_digraph()
    internal = [v for v in bg.vertices if v not in (bg.source, bg.goal)]
    if n_int > len(internal):
        raise ValidationError(f"only {len(internal)} internal vertices for {n_int} interventions")
    for _ in range(max_tries):
        fixed = [internal[j] for j in sorted(rng.choice(len(internal), size=n_int, replace=False))]
        banned = set(fixed)
        if swip_safe:
            for x in fixed:
                banned |= nx.descendants(g, x)
        eligible = [v for v in internal if v not in banned]
        if len(eligible) < n_ev:
            continue
        chosen = [eligible[j] for j in sorted(rng.choice(len(eligible), size=n_ev, replace=False))]
        ev_values = [bool(rng.integers(0, 2)) if positive else False for _ in chosen]
        if not positive and not _evidence_possible(bg, set(chosen)):
            continue
        int_values = [bool(rng.integers(0, 2)) if positive else False for _ in fixed]
        return QuerySpec(
            evidence=[(_atom("r", v), b) for v, b in zip(chosen, ev_values)],
            interventions=[(_atom("r", v), b) for v, b in zip(fixed, int_values)],
            query={_atom("r", bg.goal): True},
            seed=seed,
        )
    raise ValidationError(f"not enough eligible vertices for {n_ev} evidence items after {max_tries} draws")


def write_instance(
    root: Path,
    bg: BenchGraph,
    n_queries: int = 2,
    max_ev: int = 5,
    max_int: int = 5,
    swip_safe: bool = True,
    salt: int = 0,
) -> Path:
    """Write program, one directive file per query, and a manifest.

    Query sampling is seeded from the instance parameters and ``salt``.
    """
    rng = np.random.default_rng([bg.seed, bg.n, bg.k, salt])
    d = Path(root) / bg.name
    d.mkdir(parents=True, exist_ok=True)
    (d / PROGRAM_FILE).write_text(emit_source(bg))
    queries = []
    for i in range(n_queries):
        n_int = int(rng.integers(1, max_int + 1))
        n_ev = int(rng.integers(0, max_ev + 1))
        qseed = int(rng.integers(0, 2**31))
        spec = sample_query(bg, n_ev, n_int, qseed, swip_safe)
        (d / f"query{i}.pl").write_text(spec.directives())
        queries.append({"file": f"query{i}.pl", "n_ev": n_ev, "n_int": n_int, "seed": qseed, "swip_safe": swip_safe})
    manifest = {
        "n": bg.n,
        "k": bg.k,
        "seed": bg.seed,
        "salt": salt,
        "vertices": len(bg.vertices),
        "edges": [list(e) for e in bg.edges],
        "queries": queries,
    }
    (d / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2) + "\n")
    return d


def moral_graph(bg: BenchGraph) -> nx.Graph:
    g = bg.to_digraph()
    m = nx.Graph(g.to_undirected())
    for v in g:
        parents = list(g.predecessors(v))
        for i, a in enumerate(parents):
            for b in parents[i + 1 :]:
                m.add_edge(a, b)
    return m
