"""Seeded random programs and queries for property checks and acceptance runs."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import networkx as nx
import numpy as np

from .lpad import LPADClause, LPADProgram, lpad_to_problog
from .program import Clause, Literal, ProbFact, Program, dependency_graph, evaluate_world


def _prob(rng, exact: bool, deterministic_rate: float = 0.0):
    if rng.random() < deterministic_rate:
        v = int(rng.integers(0, 2))
        return Fraction(v) if exact else float(v)
    k = int(rng.integers(1, 20))
    return Fraction(k, 20) if exact else k / 20


def _internal_name(i: int, rng) -> str:
    return f"r(n{i})" if rng.random() < 0.3 else f"q{i}"


def random_program(
    seed: int,
    max_facts: int = 12,
    max_clauses: int = 25,
    max_body: int = 4,
    exact: bool = False,
    neg_rate: float = 0.3,
    deterministic_rate: float = 0.1,
) -> Program:
    """Acyclic ground program: bodies only use facts and earlier internal atoms."""
    rng = np.random.default_rng(seed)
    n_facts = int(rng.integers(1, max_facts + 1))
    n_internal = int(rng.integers(1, min(12, max_clauses) + 1))
    n_clauses = int(rng.integers(n_internal, max_clauses + 1))
    facts = [ProbFact(f"f{i}", _prob(rng, exact, deterministic_rate)) for i in range(n_facts)]
    internal = [_internal_name(i, rng) for i in range(n_internal)]
    heads = list(range(n_internal)) + [int(rng.integers(0, n_internal)) for _ in range(n_clauses - n_internal)]
    rng.shuffle(heads)
    clauses = []
    for h in heads:
        pool = [f.atom for f in facts] + internal[:h]
        size = int(rng.integers(1, min(max_body, len(pool)) + 1))
        picked = rng.choice(len(pool), size=size, replace=False)
        body = tuple(Literal(pool[j], bool(rng.random() >= neg_rate)) for j in picked)
        clauses.append(Clause(internal[h], body))
    return Program(tuple(facts), tuple(clauses))


@dataclass
class QueryCase:
    intervention: dict[str, bool]
    evidence: dict[str, bool] = field(default_factory=dict)
    query: dict[str, bool] = field(default_factory=dict)


def _positive_world(rng, p: Program) -> dict[str, bool]:
    world = {}
    for atom, prob in p.facts:
        if prob == 0:
            world[atom] = False
        elif prob == 1:
            world[atom] = True
        else:
            world[atom] = bool(rng.random() < float(prob))
    return world


def random_query(
    seed: int, p: Program, n_fix: tuple[int, int] = (1, 3), n_ev: tuple[int, int] = (0, 3), safe: bool = True
) -> QueryCase:
    """Intervention, evidence with positive probability, and a query conjunction.

    With ``safe`` the evidence avoids descendants of intervened atoms.
    """
    rng = np.random.default_rng(seed)
    atoms = list(p.atoms)
    k = int(rng.integers(n_fix[0], min(n_fix[1], len(atoms)) + 1))
    fix = {atoms[j]: bool(rng.integers(0, 2)) for j in rng.choice(len(atoms), size=k, replace=False)}
    g = dependency_graph(p)
    if safe:
        below = set()
        for x in fix:
            below |= nx.descendants(g, x)
        candidates = [a for a in atoms if a not in below]
    else:
        candidates = atoms
    m = int(rng.integers(n_ev[0], min(n_ev[1], len(candidates)) + 1)) if candidates else 0
    model = evaluate_world(p, _positive_world(rng, p))
    evidence = {candidates[j]: model[candidates[j]] for j in rng.choice(len(candidates), size=m, replace=False)}
    q = int(rng.integers(1, min(2, len(atoms)) + 1))
    query = {atoms[j]: bool(rng.integers(0, 2)) for j in rng.choice(len(atoms), size=q, replace=False)}
    return QueryCase(fix, evidence, query)


def random_lpad(seed: int, max_clauses: int = 10, max_arity: int = 3, n_atoms: int = 8, exact: bool = True) -> LPADProgram:
    """Random acyclic LPAD: heads always come later in a fixed atom order than body atoms."""
    rng = np.random.default_rng(seed)
    atoms = [f"a{i}" for i in range(n_atoms)]
    clauses = []
    for _ in range(int(rng.integers(1, max_clauses + 1))):
        arity = int(rng.integers(1, max_arity + 1))
        first = int(rng.integers(0, n_atoms - arity + 1))
        heads_idx = sorted(rng.choice(np.arange(first, n_atoms), size=arity, replace=False))
        lo = min(heads_idx)
        body_len = int(rng.integers(0, min(3, lo) + 1))
        body_idx = rng.choice(lo, size=body_len, replace=False) if body_len else []
        # head masses in twentieths, total at most 20
        total = int(rng.integers(arity, 21))
        cuts = sorted(rng.choice(np.arange(1, total), size=arity - 1, replace=False)) if arity > 1 else []
        parts = np.diff([0, *cuts, total])
        probs = [Fraction(int(x), 20) if exact else int(x) / 20 for x in parts]
        heads = tuple((atoms[i], q) for i, q in zip(heads_idx, probs))
        body = tuple(Literal(atoms[j], bool(rng.random() >= 0.3)) for j in body_idx)
        clauses.append(LPADClause(heads, body))
    return LPADProgram(tuple(clauses))


def random_lpad_query(seed: int, lp: LPADProgram, n_fix=(1, 2), n_ev=(0, 2)) -> QueryCase:
    """Query over the LPAD's own atoms, evidence outside the intervened descendants."""
    rng = np.random.default_rng(seed)
    atoms = list(lp.atoms)
    k = int(rng.integers(n_fix[0], min(n_fix[1], len(atoms)) + 1))
    fix = {atoms[j]: bool(rng.integers(0, 2)) for j in rng.choice(len(atoms), size=k, replace=False)}
    p = lpad_to_problog(lp)
    g = dependency_graph(p)
    below = set()
    for x in fix:
        below |= nx.descendants(g, x)
    candidates = [a for a in atoms if a not in below]
    m = int(rng.integers(n_ev[0], min(n_ev[1], len(candidates)) + 1)) if candidates else 0
    model = evaluate_world(p, _positive_world(rng, p))
    evidence = {candidates[j]: model[candidates[j]] for j in rng.choice(len(candidates), size=m, replace=False)}
    query = {atoms[int(rng.integers(0, len(atoms)))]: bool(rng.integers(0, 2))}
    return QueryCase(fix, evidence, query)
