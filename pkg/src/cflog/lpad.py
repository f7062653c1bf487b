"""Annotated disjunctions (LPAD) and their translation to/from ProbLog."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .errors import ValidationError
from .program import Clause, Literal, ProbFact, Program


@dataclass(frozen=True)
class LPADClause:
    heads: tuple[tuple[str, float | Fraction], ...]
    body: tuple[Literal, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "heads", tuple((h, p) for h, p in self.heads))
        object.__setattr__(self, "body", tuple(Literal(*l) for l in self.body))
        atoms = [h for h, _ in self.heads]
        if not atoms:
            raise ValidationError("annotated disjunction without heads")
        if len(set(atoms)) != len(atoms):
            raise ValidationError(f"repeated head atom in annotated disjunction {atoms}")
        for _, p in self.heads:
            if not 0 <= p <= 1:
                raise ValidationError(f"head probability {p} outside [0, 1]")
        if self.mass > 1 + 1e-12:
            raise ValidationError(f"head probabilities of {atoms} sum to {self.mass} > 1")

    @property
    def mass(self):
        return sum((p for _, p in self.heads), 0)

    @property
    def none_weight(self):
        """Probability that no head is selected."""
        rest = 1 - self.mass
        return max(rest, rest * 0)


@dataclass(frozen=True)
class LPADProgram:
    clauses: tuple[LPADClause, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(self.clauses))

    @property
    def atoms(self) -> tuple[str, ...]:
        order: dict[str, None] = {}
        for c in self.clauses:
            for h, _ in c.heads:
                order.setdefault(h)
            for l in c.body:
                order.setdefault(l.atom)
        return tuple(order)


def switch_name(k: int, i: int) -> str:
    return f"ad{k}__u{i}"


def choice_name(k: int, i: int) -> str:
    return f"ad{k}__h{i}"


def translate_clause(rc: LPADClause, k: int) -> tuple[list[ProbFact], list[Clause]]:
    """Translate one annotated disjunction (numbered ``k``) to facts and clauses.

    Head ``i`` is chosen through a switch fact with probability
    ``pi_i / (1 - sum_{j<i} pi_j)``; earlier heads take precedence through
    negated choice atoms. Single-head clauses skip the choice atom.
    """
    facts: list[ProbFact] = []
    clauses: list[Clause] = []
    if len(rc.heads) == 1:
        (h, p), = rc.heads
        u = switch_name(k, 1)
        facts.append(ProbFact(u, p))
        clauses.append(Clause(h, rc.body + (Literal(u),)))
        return facts, clauses
    taken = 0
    for i, (h, p) in enumerate(rc.heads, start=1):
        remaining = 1 - taken
        prob = p / remaining if remaining > 0 else p * 0
        if prob > 1:  # rounding at the tail of a float AD
            prob = prob * 0 + 1
        taken += p
        u, hc = switch_name(k, i), choice_name(k, i)
        facts.append(ProbFact(u, prob))
        earlier = tuple(Literal(choice_name(k, j), False) for j in range(1, i))
        clauses.append(Clause(hc, rc.body + earlier + (Literal(u),)))
        clauses.append(Clause(h, (Literal(hc),)))
    return facts, clauses


def generated_names(rc: LPADClause, k: int) -> list[str]:
    n = len(rc.heads)
    names = [switch_name(k, i) for i in range(1, n + 1)]
    if n > 1:
        names += [choice_name(k, i) for i in range(1, n + 1)]
    return names


def lpad_to_problog(lp: LPADProgram) -> Program:
    """ProbLog program with the same distribution over the LPAD's atoms.

    Atoms that occur only in bodies are declared as probability-0 facts, since
    under selection semantics nothing can make them true.
    """
    facts, clauses = desugar(lp.clauses, 1, lp.atoms)
    heads = {h for rc in lp.clauses for h, _ in rc.heads}
    zero = Fraction(0) if any(isinstance(p, Fraction) for rc in lp.clauses for _, p in rc.heads) else 0.0
    for a in lp.atoms:
        if a not in heads:
            facts.append(ProbFact(a, zero))
    return Program(tuple(facts), tuple(clauses))


def problog_to_lpad(p: Program) -> LPADProgram:
    clauses = [LPADClause(((a, pi),)) for a, pi in p.facts]
    one = Fraction(1) if p.is_exact() else 1.0
    clauses += [LPADClause(((c.head, one),), c.body) for c in p.clauses]
    return LPADProgram(tuple(clauses))


def desugar(rules: Iterable[LPADClause], first_index: int = 1, reserved: Iterable[str] = ()):
    """Translate several annotated disjunctions, numbering them from ``first_index``."""
    reserved = set(reserved)
    facts: list[ProbFact] = []
    clauses: list[Clause] = []
    for k, rc in enumerate(rules, start=first_index):
        clash = reserved.intersection(generated_names(rc, k))
        if clash:
            raise ValidationError(f"atom {sorted(clash)[0]} collides with a generated name")
        fs, cs = translate_clause(rc, k)
        facts += fs
        clauses += cs
    return facts, clauses
