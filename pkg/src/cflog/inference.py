"""Exact inference and the two counterfactual query evaluators."""

from __future__ import annotations

import enum
import time
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .circuit import DEFAULT_NODE_CAP, Compiler
from .errors import EvidenceOnDescendant, ResourceLimitError, ValidationError, ZeroEvidenceError
from .program import (
    Program,
    evaluate_columns,
    fixed_name,
    formula_mask,
    iter_world_batches,
    weighted_sum,
    world_scale,
)
from .transform import TransformStats, check_intervention, construct_twin, simplify, swift, twin_atom

ENUM_FACT_LIMIT = 24
UNDERFLOW = 1e-300


class Backend(enum.Enum):
    ENUM = "enum"
    CIRCUIT = "circuit"

    @classmethod
    def parse(cls, value) -> "Backend":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


def as_formula(formula) -> dict[str, bool]:
    """Accept a mapping atom -> bool or an iterable of positive atoms."""
    if isinstance(formula, Mapping):
        return {a: bool(v) for a, v in formula.items()}
    if isinstance(formula, str):
        return {formula: True}
    return {a: True for a in formula}


def _check_atoms(p: Program, formula: Mapping[str, bool], what="query"):
    known = set(p.atoms)
    for a in formula:
        if a not in known:
            raise ValidationError(f"unknown {what} atom {a}")


def relevant_subprogram(p: Program, atoms: Iterable[str]) -> Program:
    """Facts and clauses in the dependency cone of ``atoms``."""
    by_head = p.clauses_by_head
    needed, stack = set(), list(atoms)
    while stack:
        a = stack.pop()
        if a in needed:
            continue
        needed.add(a)
        for _, body in by_head.get(a, ()):
            stack.extend(l.atom for l in body)
    return Program(
        tuple(f for f in p.facts if f.atom in needed),
        tuple(c for c in p.clauses if c.head in needed),
    )


def _enum_marginal(p: Program, formula: Mapping[str, bool]):
    cone = relevant_subprogram(p, formula)
    stochastic = [f for f in cone.facts if 0 < f.prob < 1]
    if len(stochastic) > ENUM_FACT_LIMIT:
        raise ResourceLimitError(
            f"enumeration refused: {len(stochastic)} probabilistic facts (limit {ENUM_FACT_LIMIT}); use the circuit backend"
        )
    fixed = {f.atom: bool(f.prob == 1) for f in cone.facts if not 0 < f.prob < 1}
    total = 0
    probs = [f.prob for f in stochastic]
    for cols, weights in iter_world_batches(probs):
        width = len(weights)
        columns = {f.atom: c for f, c in zip(stochastic, cols)}
        for a, v in fixed.items():
            columns[a] = np.full(width, v)
        values = evaluate_columns(cone, columns, width=width)
        total = total + weighted_sum(weights, formula_mask(values, formula, width))
    return world_scale(probs)(total)


def marginal(p: Program, formula, backend=Backend.CIRCUIT, node_cap: int = DEFAULT_NODE_CAP):
    """Probability that the literal conjunction ``formula`` holds.

    Exact (a Fraction) when the program carries Fraction probabilities.
    """
    formula = as_formula(formula)
    _check_atoms(p, formula)
    if Backend.parse(backend) is Backend.ENUM:
        return _enum_marginal(p, formula)
    comp = Compiler(p, node_cap)
    return comp.circuit.count(p.fact_probs, comp.compile_formula(formula))


def _is_zero(x) -> bool:
    return x == 0 or abs(x) < UNDERFLOW


def conditional(p: Program, formula, evidence=None, backend=Backend.CIRCUIT, node_cap: int = DEFAULT_NODE_CAP):
    """P(formula | evidence); the division happens last."""
    formula = as_formula(formula)
    evidence = as_formula(evidence or {})
    _check_atoms(p, formula)
    _check_atoms(p, evidence, "evidence")
    joint_formula = dict(evidence)
    for a, v in formula.items():
        if joint_formula.get(a, v) != v:
            joint_formula = None
            break
        joint_formula[a] = v
    if Backend.parse(backend) is Backend.ENUM:
        p1 = _enum_marginal(p, evidence) if evidence else 1
        p2 = _enum_marginal(p, joint_formula) if joint_formula is not None else 0
    else:
        comp = Compiler(p, node_cap)
        w = p.fact_probs
        p1 = comp.circuit.count(w, comp.compile_formula(evidence)) if evidence else 1
        p2 = comp.circuit.count(w, comp.compile_formula(joint_formula)) if joint_formula is not None else 0
    if _is_zero(p1):
        raise ZeroEvidenceError(p1)
    return p2 / p1


@dataclass
class QueryOutcome:
    """A counterfactual answer together with the program it was computed on."""

    probability: object
    program: Program
    stats: TransformStats
    transform_ms: float
    inference_ms: float


def evidence_violation(p: Program, fix: Mapping[str, bool], evidence: Mapping[str, bool]):
    """First (atom, intervened ancestor) pair breaking the SWIP evidence precondition."""
    for x in fix:
        below = p.descendants(x)
        for atom in evidence:
            if atom != x and atom in below:
                return atom, x
    return None


def swip_query(
    p: Program,
    fix,
    evidence,
    formula,
    backend=Backend.CIRCUIT,
    *,
    reduce: bool = True,
    literal_alg4: bool = False,
    node_cap: int = DEFAULT_NODE_CAP,
) -> QueryOutcome:
    """Counterfactual query answered on the single-world intervention program.

    Evidence must lie outside the descendants of the intervened atoms, since
    the single world only contains their intervened values. Evidence on an
    intervened atom itself refers to its factual value, so that atom's
    original definition is kept next to its fixed copy.

    ``literal_alg4`` skips the guard and conditions inside the transformed
    program as-is; for descendant evidence that answers a different question.
    """
    fix, evidence, formula = as_formula(fix), as_formula(evidence or {}), as_formula(formula)
    check_intervention(p, fix)
    _check_atoms(p, formula)
    _check_atoms(p, evidence, "evidence")
    t0 = time.perf_counter()
    bad = evidence_violation(p, fix, evidence)
    if bad and not literal_alg4:
        raise EvidenceOnDescendant(*bad)
    if bad:
        warnings.warn(
            f"evidence on {bad[0]}, a descendant of intervened {bad[1]}, is conditioned inside the "
            "intervened world; the result is not the counterfactual probability",
            stacklevel=2,
        )
    s, stats = swift(p, fix)
    if literal_alg4:
        ev = {a if a in s.atoms else fixed_name(a): v for a, v in evidence.items()}
    else:
        restore = [c for c in p.clauses if c.head in fix and c.head in evidence]
        if restore:
            s = Program(s.facts, s.clauses + tuple(restore))
        ev = evidence
    phi = {fixed_name(a) if a in fix else a: v for a, v in formula.items()}
    if reduce:
        s = simplify(s, set(phi) | set(ev))
    t1 = time.perf_counter()
    prob = conditional(s, phi, ev, backend, node_cap)
    t2 = time.perf_counter()
    return QueryOutcome(prob, s, stats, (t1 - t0) * 1e3, (t2 - t1) * 1e3)


def twin_query(
    p: Program,
    do,
    evidence,
    formula,
    backend=Backend.CIRCUIT,
    *,
    reduce: bool = False,
    node_cap: int = DEFAULT_NODE_CAP,
) -> QueryOutcome:
    """Counterfactual query answered on the twin network.

    The evidence probability comes from the original program, the joint of
    primed query and unprimed evidence from the twin program. ``reduce``
    applies the same structural simplification the SWIP evaluator uses; it
    is off by default so the twin network is evaluated as constructed.
    """
    do, evidence, formula = as_formula(do), as_formula(evidence or {}), as_formula(formula)
    check_intervention(p, do, allow_empty=True)
    _check_atoms(p, formula)
    _check_atoms(p, evidence, "evidence")
    t0 = time.perf_counter()
    t, stats = construct_twin(p, do)
    phi = {twin_atom(p, do, a): v for a, v in formula.items()}
    joint = dict(evidence)
    contradiction = any(joint.get(a, v) != v for a, v in phi.items())
    joint.update(phi)
    if reduce:
        t = simplify(t, set(joint))
    t1 = time.perf_counter()
    p1 = marginal(p, evidence, backend, node_cap) if evidence else 1
    if _is_zero(p1):
        raise ZeroEvidenceError(p1)
    p2 = 0 if contradiction else marginal(t, joint, backend, node_cap)
    t2 = time.perf_counter()
    return QueryOutcome(p2 / p1, t, stats, (t1 - t0) * 1e3, (t2 - t1) * 1e3)


def evaluate_swip_query(p, fix, evidence, formula, backend=Backend.CIRCUIT, **kwargs):
    return swip_query(p, fix, evidence, formula, backend, **kwargs).probability


def evaluate_twin_query(p, do, evidence, formula, backend=Backend.CIRCUIT, **kwargs):
    return twin_query(p, do, evidence, formula, backend, **kwargs).probability
