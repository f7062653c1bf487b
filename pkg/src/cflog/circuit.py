"""Exact weighted model counting through decision circuits.

Each atom's definition is unfolded into an ordered BDD over the fact
variables. A conjunction of literals is then compiled top-down: the residual
subproblem is the set of cofactored BDD roots, split into connected
components by variable support (AND nodes), otherwise branched on the
earliest fact variable (DECISION nodes). Residual root sets are canonical,
so they double as the cache key.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import ResourceLimitError, ValidationError
from .program import Program

FALSE, TRUE = 0, 1
DEFAULT_NODE_CAP = 2_000_000


def fact_order(p: Program) -> list[str]:
    """Fact variables ordered by the topological position of their first consumer."""
    ranked: dict[str, None] = {}
    facts = p.fact_probs
    by_head = p.clauses_by_head
    for atom in p.topological_order:
        for _, body in by_head.get(atom, ()):
            for lit in body:
                if lit.atom in facts:
                    ranked.setdefault(lit.atom)
    for atom in p.fact_atoms:
        ranked.setdefault(atom)
    return list(ranked)


class BDD:
    """Reduced ordered BDD store; node 0 is FALSE, node 1 is TRUE."""

    def __init__(self, num_vars: int, node_cap: int = DEFAULT_NODE_CAP):
        self.level = [num_vars, num_vars]
        self.lo = [0, 1]
        self.hi = [0, 1]
        self.unique: dict[tuple[int, int, int], int] = {}
        self.node_cap = node_cap
        self._and: dict[tuple[int, int], int] = {}
        self._or: dict[tuple[int, int], int] = {}
        self._not: dict[int, int] = {FALSE: TRUE, TRUE: FALSE}
        self._support: dict[int, int] = {FALSE: 0, TRUE: 0}

    def __len__(self):
        return len(self.level)

    def mk(self, level: int, lo: int, hi: int) -> int:
        if lo == hi:
            return lo
        key = (level, lo, hi)
        node = self.unique.get(key)
        if node is None:
            node = len(self.level)
            if node >= self.node_cap:
                raise ResourceLimitError(f"BDD node cap of {self.node_cap} exceeded")
            self.level.append(level)
            self.lo.append(lo)
            self.hi.append(hi)
            self.unique[key] = node
        return node

    def var(self, level: int) -> int:
        return self.mk(level, FALSE, TRUE)

    def negate(self, u: int) -> int:
        r = self._not.get(u)
        if r is None:
            r = self.mk(self.level[u], self.negate(self.lo[u]), self.negate(self.hi[u]))
            self._not[u] = r
        return r

    def conj(self, u: int, v: int) -> int:
        if u == FALSE or v == FALSE:
            return FALSE
        if u == TRUE:
            return v
        if v == TRUE or u == v:
            return u
        if u > v:
            u, v = v, u
        r = self._and.get((u, v))
        if r is None:
            lu, lv = self.level[u], self.level[v]
            top = min(lu, lv)
            u0, u1 = (self.lo[u], self.hi[u]) if lu == top else (u, u)
            v0, v1 = (self.lo[v], self.hi[v]) if lv == top else (v, v)
            r = self.mk(top, self.conj(u0, v0), self.conj(u1, v1))
            self._and[(u, v)] = r
        return r

    def disj(self, u: int, v: int) -> int:
        if u == TRUE or v == TRUE:
            return TRUE
        if u == FALSE:
            return v
        if v == FALSE or u == v:
            return u
        if u > v:
            u, v = v, u
        r = self._or.get((u, v))
        if r is None:
            lu, lv = self.level[u], self.level[v]
            top = min(lu, lv)
            u0, u1 = (self.lo[u], self.hi[u]) if lu == top else (u, u)
            v0, v1 = (self.lo[v], self.hi[v]) if lv == top else (v, v)
            r = self.mk(top, self.disj(u0, v0), self.disj(u1, v1))
            self._or[(u, v)] = r
        return r

    def support(self, u: int) -> int:
        """Variable support as a bitmask over levels."""
        s = self._support.get(u)
        if s is None:
            s = (1 << self.level[u]) | self.support(self.lo[u]) | self.support(self.hi[u])
            self._support[u] = s
        return s


@dataclass
class Circuit:
    """Decision circuit over fact variables.

    ``nodes[i]`` is ``("T",)``, ``("F",)``, ``("D", var, hi, lo)`` or
    ``("A", children)``; children always precede their parents.
    """

    nodes: list[tuple] = field(default_factory=lambda: [("F",), ("T",)])
    roots: dict[str, int] = field(default_factory=dict)
    _index: dict[tuple, int] = field(default_factory=dict, repr=False)
    node_cap: int = DEFAULT_NODE_CAP

    def add(self, node: tuple) -> int:
        i = self._index.get(node)
        if i is None:
            i = len(self.nodes)
            if i >= self.node_cap:
                raise ResourceLimitError(f"circuit node cap of {self.node_cap} exceeded")
            self.nodes.append(node)
            self._index[node] = i
        return i

    def decision(self, var: str, hi: int, lo: int) -> int:
        if hi == lo:
            return hi
        return self.add(("D", var, hi, lo))

    def conjunction(self, children: Iterable[int]) -> int:
        kids = sorted(set(children))
        if FALSE in kids:
            return FALSE
        kids = [k for k in kids if k != TRUE]
        if not kids:
            return TRUE
        if len(kids) == 1:
            return kids[0]
        return self.add(("A", tuple(kids)))

    def __len__(self):
        return len(self.nodes)

    def values(self, weights: Mapping[str, object]) -> list:
        """Weighted count of every node; ``weights[v]`` is P(v is true)."""
        out: list = [0] * len(self.nodes)
        out[TRUE] = 1
        for i in range(2, len(self.nodes)):
            node = self.nodes[i]
            if node[0] == "D":
                w = weights[node[1]]
                out[i] = w * out[node[2]] + (1 - w) * out[node[3]]
            else:
                acc = 1
                for c in node[1]:
                    acc = acc * out[c]
                out[i] = acc
        return out

    def count(self, weights: Mapping[str, object], root: str | int | None = None):
        if root is None:
            (root,) = self.roots.values()
        elif isinstance(root, str):
            root = self.roots[root]
        if root in (FALSE, TRUE):
            return root
        return self.values(weights)[root]

    def variables(self, root: int) -> frozenset[str]:
        seen, stack, out = set(), [root], set()
        while stack:
            i = stack.pop()
            if i in seen:
                continue
            seen.add(i)
            node = self.nodes[i]
            if node[0] == "D":
                out.add(node[1])
                stack += [node[2], node[3]]
            elif node[0] == "A":
                stack += list(node[1])
        return frozenset(out)

    def decision_depth(self, root: int) -> int:
        depth = [0] * len(self.nodes)
        for i in range(2, root + 1):
            node = self.nodes[i]
            if node[0] == "D":
                depth[i] = 1 + max(depth[node[2]], depth[node[3]])
            else:
                depth[i] = max(depth[c] for c in node[1])
        return depth[root] if root >= 2 else 0


class Compiler:
    """Compiles literal conjunctions over one program into a shared circuit."""

    def __init__(self, p: Program, node_cap: int = DEFAULT_NODE_CAP):
        self.program = p
        self.order = fact_order(p)
        self.level = {v: i for i, v in enumerate(self.order)}
        self.bdd = BDD(len(self.order), node_cap)
        self.circuit = Circuit(node_cap=node_cap)
        self._atom: dict[str, int] = {}
        self._conv: dict[int, int] = {FALSE: FALSE, TRUE: TRUE}
        self._cache: dict[frozenset, int] = {}
        limit = 4 * len(self.order) + 1000
        if sys.getrecursionlimit() < limit:
            sys.setrecursionlimit(limit)

    def atom_bdd(self, atom: str) -> int:
        """Unfold the definition of ``atom`` into a BDD over fact variables."""
        done = self._atom
        if atom in done:
            return done[atom]
        p = self.program
        # iterative post-order over the (acyclic) dependency cone
        stack = [atom]
        while stack:
            a = stack[-1]
            if a in done:
                stack.pop()
                continue
            if a in p.fact_probs:
                done[a] = self.bdd.var(self.level[a])
                stack.pop()
                continue
            clauses = p.clauses_by_head.get(a, ())
            pending = [l.atom for _, body in clauses for l in body if l.atom not in done]
            if pending:
                stack.extend(pending)
                continue
            stack.pop()
            acc = FALSE
            for _, body in clauses:
                term = TRUE
                for lit in body:
                    u = done[lit.atom]
                    term = self.bdd.conj(term, u if lit.positive else self.bdd.negate(u))
                    if term == FALSE:
                        break
                acc = self.bdd.disj(acc, term)
                if acc == TRUE:
                    break
            done[a] = acc
        return done[atom]

    def literal_bdd(self, atom: str, value: bool) -> int:
        u = self.atom_bdd(atom)
        return u if value else self.bdd.negate(u)

    def _convert(self, u: int) -> int:
        """A lone BDD is already a decision circuit."""
        conv = self._conv
        if u in conv:
            return conv[u]
        stack = [u]
        bdd = self.bdd
        while stack:
            x = stack[-1]
            if x in conv:
                stack.pop()
                continue
            lo, hi = bdd.lo[x], bdd.hi[x]
            if lo in conv and hi in conv:
                stack.pop()
                conv[x] = self.circuit.decision(self.order[bdd.level[x]], conv[hi], conv[lo])
            else:
                if lo not in conv:
                    stack.append(lo)
                if hi not in conv:
                    stack.append(hi)
        return conv[u]

    def _components(self, roots: frozenset[int]) -> list[frozenset[int]]:
        groups: list[tuple[int, set[int]]] = []
        for r in roots:
            s = self.bdd.support(r)
            merged_s, merged_r = s, {r}
            rest = []
            for gs, gr in groups:
                if gs & merged_s:
                    merged_s |= gs
                    merged_r |= gr
                else:
                    rest.append((gs, gr))
            groups = rest + [(merged_s, merged_r)]
        return [frozenset(gr) for _, gr in groups]

    def compile_roots(self, roots: Iterable[int]) -> int:
        roots = frozenset(roots)
        if FALSE in roots:
            return FALSE
        roots = roots - {TRUE}
        if not roots:
            return TRUE
        cached = self._cache.get(roots)
        if cached is not None:
            return cached
        if len(roots) == 1:
            (r,) = roots
            out = self._convert(r)
        else:
            comps = self._components(roots)
            if len(comps) > 1:
                out = self.circuit.conjunction(self.compile_roots(c) for c in comps)
            else:
                bdd = self.bdd
                top = min(bdd.level[r] for r in roots)
                hi_roots, lo_roots = [], []
                for r in roots:
                    if bdd.level[r] == top:
                        hi_roots.append(bdd.hi[r])
                        lo_roots.append(bdd.lo[r])
                    else:
                        hi_roots.append(r)
                        lo_roots.append(r)
                out = self.circuit.decision(
                    self.order[top], self.compile_roots(hi_roots), self.compile_roots(lo_roots)
                )
        self._cache[roots] = out
        return out

    def compile_formula(self, formula: Mapping[str, bool]) -> int:
        return self.compile_roots(self.literal_bdd(a, v) for a, v in formula.items())

    def weights(self):
        return self.program.fact_probs


def compile_circuit(p: Program, targets: Iterable[str], node_cap: int = DEFAULT_NODE_CAP) -> Circuit:
    """Circuit with one root per target atom; counting a root gives its marginal."""
    comp = Compiler(p, node_cap)
    for t in targets:
        if t not in p.atoms:
            raise ValidationError(f"unknown atom {t}")
        comp.circuit.roots[t] = comp.compile_formula({t: True})
    return comp.circuit


def circuit_probability(p: Program, formula: Mapping[str, bool], node_cap: int = DEFAULT_NODE_CAP):
    """Probability of a literal conjunction via compilation and counting."""
    comp = Compiler(p, node_cap)
    root = comp.compile_formula(formula)
    return comp.circuit.count(p.fact_probs, root)
