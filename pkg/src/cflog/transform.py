"""Counterfactual program transformations: SWIFT, twin network, simplification."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .errors import InterventionError, ValidationError
from .program import Clause, Literal, ProbFact, Program, cf_name, fixed_name


@dataclass(frozen=True)
class TransformStats:
    clauses_visited: int
    literals_rewritten: int
    output_size: int


def _const(p: Program, value: bool):
    one = Fraction(1) if p.is_exact() else 1.0
    return one if value else one * 0


def check_intervention(p: Program, intervention: Mapping[str, bool], allow_empty=False):
    if not intervention and not allow_empty:
        raise InterventionError("empty intervention")
    known = set(p.atoms)
    for atom in intervention:
        if atom not in known:
            raise InterventionError(f"unknown intervened atom {atom}")


def _check_fresh(p: Program, names: Iterable[str]):
    known = set(p.atoms)
    for name in names:
        if name in known:
            raise ValidationError(f"generated atom {name} collides with an atom of the program")


def swift(p: Program, fix: Mapping[str, bool]) -> tuple[Program, TransformStats]:
    """Single-world intervention program for ``fix(X := x)``.

    Facts are copied unchanged, clauses defining an intervened atom are
    dropped, body occurrences of intervened atoms are redirected (same sign)
    to a fresh ``fixed__X`` atom, and each fixed atom gets a deterministic fact.
    """
    check_intervention(p, fix)
    _check_fresh(p, (fixed_name(a) for a in fix))
    rewritten = 0
    clauses = []
    for head, body in p.clauses:
        if head in fix:
            continue
        new_body = []
        for lit in body:
            if lit.atom in fix:
                new_body.append(Literal(fixed_name(lit.atom), lit.positive))
                rewritten += 1
            else:
                new_body.append(lit)
        clauses.append(Clause(head, tuple(new_body)))
    facts = list(p.facts) + [ProbFact(fixed_name(a), _const(p, v)) for a, v in fix.items()]
    out = Program(tuple(facts), tuple(clauses))
    return out, TransformStats(len(p.clauses), rewritten, out.size)


def twin_atom(p: Program, do: Mapping[str, bool], atom: str) -> str:
    """Counterfactual counterpart of ``atom`` in ``construct_twin(p, do)``.

    Non-intervened facts are exogenous and shared between the two worlds.
    """
    if atom in do or atom not in p.fact_probs:
        return cf_name(atom)
    return atom


def construct_twin(p: Program, do: Mapping[str, bool], literal: bool = False) -> tuple[Program, TransformStats]:
    """Twin network program for ``do(X := x)``.

    The factual copy is ``p`` itself. The counterfactual copy primes every
    internal atom and shares the probabilistic facts; intervened atoms get a
    deterministic primed fact carrying the intervened value.

    ``literal=True`` gives the naive construction instead: every fact
    is duplicated as an independent primed fact, intervened facts become
    ``1.0::a`` / ``0.0::a'`` and clauses for intervened heads are dropped.
    Only fact interventions are accepted in that mode.
    """
    check_intervention(p, do, allow_empty=True)
    if literal:
        return _construct_twin_literal(p, do)
    primed = {a: twin_atom(p, do, a) for a in p.atoms}
    _check_fresh(p, {v for k, v in primed.items() if v != k})
    facts: list[ProbFact] = []
    for atom, prob in p.facts:
        facts.append(ProbFact(atom, prob))
        if atom in do:
            facts.append(ProbFact(primed[atom], _const(p, do[atom])))
    for atom, value in do.items():
        if atom not in p.fact_probs:
            facts.append(ProbFact(primed[atom], _const(p, value)))
    clauses: list[Clause] = []
    copied = 0
    for head, body in p.clauses:
        clauses.append(Clause(head, body))
        if head in do:
            continue
        clauses.append(Clause(primed[head], tuple(Literal(primed[l.atom], l.positive) for l in body)))
        copied += len(body)
    out = Program(tuple(facts), tuple(clauses))
    return out, TransformStats(len(p.clauses), copied, out.size)


def _construct_twin_literal(p: Program, do: Mapping[str, bool]):
    internal = [a for a in do if a not in p.fact_probs]
    if internal:
        raise InterventionError(f"literal twin construction only handles fact interventions, not {internal[0]}")
    _check_fresh(p, (cf_name(a) for a in p.atoms))
    facts: list[ProbFact] = []
    for atom, prob in p.facts:
        if atom in do:
            facts += [ProbFact(atom, _const(p, True)), ProbFact(cf_name(atom), _const(p, False))]
        else:
            facts += [ProbFact(atom, prob), ProbFact(cf_name(atom), prob)]
    clauses: list[Clause] = []
    copied = 0
    for head, body in p.clauses:
        if head in do:
            continue
        clauses.append(Clause(head, body))
        clauses.append(Clause(cf_name(head), tuple(Literal(cf_name(l.atom), l.positive) for l in body)))
        copied += len(body)
    out = Program(tuple(facts), tuple(clauses))
    return out, TransformStats(len(p.clauses), copied, out.size)


def constant_atoms(p: Program, order: Iterable[str] | None = None) -> dict[str, bool]:
    """Atoms whose truth value is the same in every world, found by unit propagation.

    ``order`` may supply any topological order covering the atoms of ``p``.
    """
    const: dict[str, bool] = {}
    for atom, prob in p.facts:
        if prob == 1:
            const[atom] = True
        elif prob == 0:
            const[atom] = False
    by_head = p.clauses_by_head
    for atom in p.topological_order if order is None else order:
        if atom not in by_head:
            continue
        alive = 0
        for _, body in by_head[atom]:
            status = True  # True: satisfied, None: open
            for lit in body:
                v = const.get(lit.atom)
                if v is None:
                    status = None
                elif v != lit.positive:
                    status = False
                    break
            if status is True:
                const[atom] = True
                break
            if status is None:
                alive += 1
        else:
            if alive == 0:
                const[atom] = False
    return const


def simplify(p: Program, keep: Iterable[str], max_passes: int | None = None) -> Program:
    """Structural simplification preserving the joint distribution of ``keep``.

    Deterministic facts and atoms that become constant are substituted into
    bodies (true literals removed, clauses with a false literal dropped);
    constant kept atoms turn into deterministic facts; everything that is not
    an ancestor of a kept atom is removed.
    """
    keep = set(keep) & set(p.atoms)
    budget = max_passes if max_passes is not None else max(1, len(p.atoms))
    # every pass only deletes atoms and body literals, so the input order stays topological
    order = p.topological_order
    current = p
    for _ in range(budget):
        nxt = _simplify_pass(current, keep, order)
        if nxt == current:
            break
        current = nxt
    return current


def _simplify_pass(p: Program, keep: set[str], order) -> Program:
    const = constant_atoms(p, order)
    clauses = []
    for head, body in p.clauses:
        if head in const:
            continue
        if any(const.get(l.atom, l.positive) != l.positive for l in body):
            continue
        clauses.append(Clause(head, tuple(l for l in body if l.atom not in const)))
    facts = list(p.facts)
    for atom in order:
        if atom in const and atom in p.heads and atom in keep:
            facts.append(ProbFact(atom, _const(p, const[atom])))

    # relevance: ancestors of the kept atoms
    by_head: dict[str, list[Clause]] = {}
    for c in clauses:
        by_head.setdefault(c.head, []).append(c)
    needed = set()
    stack = list(keep)
    while stack:
        a = stack.pop()
        if a in needed:
            continue
        needed.add(a)
        for _, body in by_head.get(a, ()):
            stack.extend(l.atom for l in body)
    facts = [f for f in facts if f.atom in needed]
    clauses = [c for c in clauses if c.head in needed]
    return Program(tuple(facts), tuple(clauses))
