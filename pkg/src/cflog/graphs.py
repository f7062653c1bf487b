"""Graphical machinery: primal graphs, treewidth, SWIGs and d-separation."""

from __future__ import annotations

import re
from typing import Iterable, Mapping

import networkx as nx

from .errors import ValidationError
from .program import Program, base_name, dependency_graph, fixed_name
from .transform import check_intervention, simplify, swift

EXACT_LIMIT = 15


def primal_graph(p: Program) -> nx.Graph:
    """Undirected graph over clause heads; each clause makes a clique of its head
    and its non-fact body atoms."""
    g = nx.Graph()
    g.add_nodes_from(h for h in p.atoms if h in p.heads)
    for head, body in p.clauses:
        members = [head] + [l.atom for l in body if l.atom in p.heads]
        for i, u in enumerate(members):
            for v in members[i + 1 :]:
                if u != v:
                    g.add_edge(u, v)
    return g


def _tie_key(v):
    # counterfactual copies order exactly like their factual originals
    v = str(v)
    return (base_name(v), v)


def _min_fill_width(g: nx.Graph) -> int:
    adj = {v: set(g[v]) - {v} for v in g}
    if not adj:
        return -1

    def fill(v):
        nb = list(adj[v])
        missing = 0
        for i, a in enumerate(nb):
            na = adj[a]
            for b in nb[i + 1 :]:
                if b not in na:
                    missing += 1
        return missing

    cost = {v: fill(v) for v in adj}
    width = 0
    while adj:
        v = min(adj, key=lambda u: (cost[u], _tie_key(u)))
        nb = adj.pop(v)
        width = max(width, len(nb))
        del cost[v]
        for a in nb:
            adj[a].discard(v)
            adj[a] |= nb - {a}
        touched = set(nb)
        for a in nb:
            touched |= adj[a]
        for u in touched:
            cost[u] = fill(u)
    return width


def treewidth_estimate(g: nx.Graph) -> int:
    """Upper bound on treewidth by min-fill elimination, component by component.

    Ties are broken by vertex name (counterfactual copies by their original
    name), so isomorphic twin components get identical orderings. The empty
    graph has width -1 by convention; a graph of isolated vertices has 0.
    """
    best = -1
    for comp in nx.connected_components(g):
        best = max(best, _min_fill_width(g.subgraph(comp)))
    return best


def _degeneracy(adj: dict[int, int], n: int) -> int:
    # minimum-degree lower bound over the elimination of min-degree vertices
    alive = (1 << n) - 1
    lb = 0
    while alive:
        v = min((u for u in range(n) if alive >> u & 1), key=lambda u: bin(adj[u] & alive).count("1"))
        lb = max(lb, bin(adj[v] & alive).count("1"))
        alive &= ~(1 << v)
    return lb


def _exact_component(g: nx.Graph) -> int:
    nodes = sorted(g, key=_tie_key)
    n = len(nodes)
    if n <= 1:
        return 0
    idx = {v: i for i, v in enumerate(nodes)}
    adj = [0] * n
    for u, v in g.edges:
        if u != v:
            adj[idx[u]] |= 1 << idx[v]
            adj[idx[v]] |= 1 << idx[u]
    upper = _min_fill_width(g)
    if upper <= _degeneracy(adj, n):
        return upper

    def q_size(s: int, v: int) -> int:
        # vertices outside s+v reachable from v through s
        seen = 1 << v
        frontier = 1 << v
        out = 0
        while frontier:
            nxt = 0
            f = frontier
            while f:
                low = f & -f
                u = low.bit_length() - 1
                f ^= low
                nb = adj[u] & ~seen
                seen |= nb
                inside = nb & s
                out |= nb & ~s
                nxt |= inside
            frontier = nxt
        return bin(out).count("1")

    full = (1 << n) - 1
    tw = {0: -1}
    for s in range(1, full + 1):
        best = n
        t = s
        while t:
            low = t & -t
            v = low.bit_length() - 1
            t ^= low
            rest = s ^ low
            val = max(tw[rest], q_size(rest, v))
            if val < best:
                best = val
        tw[s] = best
    return tw[full]


def treewidth_exact_small(g: nx.Graph, limit: int = EXACT_LIMIT) -> int:
    """Exact treewidth by dynamic programming over vertex subsets.

    Runs per connected component; each component must have at most ``limit``
    vertices.
    """
    comps = [g.subgraph(c) for c in nx.connected_components(g)]
    for c in comps:
        if len(c) > limit:
            raise ValidationError(f"exact treewidth limited to {limit} vertices per component, got {len(c)}")
    return max((_exact_component(c) for c in comps), default=-1)


def unfolded_treewidth(p: Program, keep: Iterable[str]) -> int:
    """Width a knowledge compiler faces: min-fill on the simplified program's primal graph."""
    return treewidth_estimate(primal_graph(simplify(p, keep)))


def swig(p: Program, fix: Mapping[str, bool]) -> nx.DiGraph:
    """Single-world intervention graph.

    Each intervened atom X is split into its factual half ``X`` (keeping the
    incoming edges) and a fixed half ``fixed__X`` (a parentless constant
    carrying the value, owning the outgoing edges).
    """
    check_intervention(p, fix, allow_empty=True)
    dep = dependency_graph(p)
    g = nx.DiGraph()
    for a in p.atoms:
        g.add_node(a, kind="factual" if a in fix else "plain")
    for a, value in fix.items():
        g.add_node(fixed_name(a), kind="fixed", value=bool(value), split_of=a)
    for u, v, data in dep.edges(data=True):
        src = fixed_name(u) if u in fix else u
        g.add_edge(src, v, signs=set(data["signs"]))
    return g


def descendants(g: nx.DiGraph, seeds: Iterable[str]) -> set[str]:
    seeds = set(seeds)
    out: set[str] = set()
    for s in seeds:
        if s not in g:
            raise ValidationError(f"unknown vertex {s}")
        out |= nx.descendants(g, s)
    return out - seeds


def d_separated(g: nx.DiGraph, x: str, y: str, z: Iterable[str] = ()) -> bool:
    """d-separation of x and y given z via the moralized ancestral graph.

    Nodes marked ``kind="fixed"`` (SWIG fixed halves) are constants and are
    removed before the test.
    """
    z = set(z)
    for v in {x, y} | z:
        if v not in g:
            raise ValidationError(f"unknown vertex {v}")
    if x in z or y in z:
        raise ValidationError("x and y must not be in the conditioning set")
    if x == y:
        return False
    consts = {v for v, kind in g.nodes(data="kind") if kind == "fixed"}
    if x in consts or y in consts:
        return True
    h = g.subgraph(set(g) - consts)
    z -= consts
    anc = {x, y} | z
    for v in list(anc):
        anc |= nx.ancestors(h, v)
    sub = h.subgraph(anc)
    moral = nx.Graph()
    moral.add_nodes_from(sub)
    moral.add_edges_from(sub.edges)
    for v in sub:
        parents = list(sub.predecessors(v))
        for i, a in enumerate(parents):
            for b in parents[i + 1 :]:
                moral.add_edge(a, b)
    moral.remove_nodes_from(z)
    return not nx.has_path(moral, x, y)


def screening_independence(p: Program, fix: Mapping[str, bool], x: str, y: str) -> bool:
    """Whether y is independent of x under ``fix`` by d-separation in the simplified SWIP."""
    s, _ = swift(p, fix)
    rename = {a: fixed_name(a) for a in fix}
    x, y = rename.get(x, x), rename.get(y, y)
    s = simplify(s, {x, y} | set(s.fact_atoms))
    return d_separated(dependency_graph(s), x, y, ())


_ID_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def _dot_id(name: str) -> str:
    if _ID_RE.fullmatch(name):
        return name
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(g: nx.Graph, name: str = "G") -> str:
    """DOT text; names that are not plain identifiers are quoted."""
    directed = g.is_directed()
    arrow = "->" if directed else "--"
    lines = [f"{'digraph' if directed else 'graph'} {_dot_id(name)} {{"]
    for v, data in g.nodes(data=True):
        attrs = []
        if data.get("kind") == "fixed":
            attrs.append('shape=box')
            attrs.append(f'label={_dot_id(v + "=" + str(data["value"]).lower())}')
        lines.append(f"  {_dot_id(v)}" + (f" [{', '.join(attrs)}]" if attrs else "") + ";")
    for u, v, data in g.edges(data=True):
        style = " [style=dashed]" if data.get("signs") == {False} else ""
        lines.append(f"  {_dot_id(u)} {arrow} {_dot_id(v)}{style};")
    lines.append("}")
    return "\n".join(lines) + "\n"
