"""Ground propositional ProbLog programs and their distribution semantics."""

from __future__ import annotations

import heapq
import re
from math import gcd
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import CycleError, ValidationError

ATOM_RE = re.compile(r"[a-z][A-Za-z0-9_]*(\([a-z][A-Za-z0-9_]*(,[a-z][A-Za-z0-9_]*)*\))?")

FIXED_PREFIX = "fixed__"
CF_SUFFIX = "__cf"


def _split_functor(atom: str) -> tuple[str, str]:
    i = atom.find("(")
    return (atom, "") if i < 0 else (atom[:i], atom[i:])


def fixed_name(atom: str) -> str:
    """Name of the fixed half of an intervened atom: ``fixed__a``, ``fixed__p(x)``."""
    return FIXED_PREFIX + atom


def cf_name(atom: str) -> str:
    """Name of the counterfactual copy: ``a__cf``, ``p__cf(x)``."""
    functor, args = _split_functor(atom)
    return functor + CF_SUFFIX + args


def base_name(atom: str) -> str:
    """Strip the counterfactual marker (identity on factual atoms)."""
    functor, args = _split_functor(atom)
    if functor.endswith(CF_SUFFIX):
        functor = functor[: -len(CF_SUFFIX)]
    return functor + args


def canonical_atom(text: str) -> str:
    return "".join(text.split())


class Literal(NamedTuple):
    atom: str
    positive: bool = True

    def __str__(self):
        return self.atom if self.positive else "\\+ " + self.atom

    def negate(self) -> "Literal":
        return Literal(self.atom, not self.positive)


class ProbFact(NamedTuple):
    atom: str
    prob: float | Fraction


class Clause(NamedTuple):
    head: str
    body: tuple[Literal, ...]


def format_prob(prob) -> str:
    if isinstance(prob, Fraction):
        return f"{prob.numerator}/{prob.denominator}"
    return repr(float(prob))


@dataclass(frozen=True, eq=True)
class Program:
    """A pair (facts, clauses). Tuple order is source order.

    Invariants checked on construction: probabilities in [0, 1], one fact per
    atom, fact atoms and clause heads disjoint, distinct atoms per body, and
    every body atom defined by a fact or a clause. Acyclicity is checked by
    :func:`check_acyclic` (parsing enforces it).
    """

    facts: tuple[ProbFact, ...] = ()
    clauses: tuple[Clause, ...] = ()

    def __post_init__(self):
        facts = tuple(ProbFact(f[0], f[1]) for f in self.facts)
        clauses = tuple(Clause(c[0], tuple(Literal(*l) for l in c[1])) for c in self.clauses)
        object.__setattr__(self, "facts", facts)
        object.__setattr__(self, "clauses", clauses)
        self._validate()

    def _validate(self):
        seen = set()
        for atom, prob in self.facts:
            if not ATOM_RE.fullmatch(atom):
                raise ValidationError(f"malformed atom name {atom!r}")
            if not 0 <= prob <= 1:
                raise ValidationError(f"probability {prob} of {atom} outside [0, 1]")
            if atom in seen:
                raise ValidationError(f"duplicate probabilistic fact for {atom}")
            seen.add(atom)
        heads = {c.head for c in self.clauses}
        overlap = seen & heads
        if overlap:
            raise ValidationError(f"atom {sorted(overlap)[0]} is both a fact and a clause head")
        defined = seen | heads
        for head, body in self.clauses:
            if not ATOM_RE.fullmatch(head):
                raise ValidationError(f"malformed atom name {head!r}")
            if not body:
                raise ValidationError(f"clause for {head} has an empty body; use a fact")
            atoms = [l.atom for l in body]
            if len(set(atoms)) != len(atoms):
                raise ValidationError(f"clause for {head} repeats a body atom")
            for a in atoms:
                if a not in defined:
                    raise ValidationError(f"atom {a} is used in a body but never defined")

    # -- structure ---------------------------------------------------------

    @cached_property
    def fact_probs(self) -> dict[str, float | Fraction]:
        return {f.atom: f.prob for f in self.facts}

    @cached_property
    def fact_atoms(self) -> tuple[str, ...]:
        return tuple(f.atom for f in self.facts)

    @cached_property
    def heads(self) -> frozenset[str]:
        return frozenset(c.head for c in self.clauses)

    @cached_property
    def atoms(self) -> tuple[str, ...]:
        order = dict.fromkeys(self.fact_atoms)
        for head, body in self.clauses:
            order.setdefault(head)
            for l in body:
                order.setdefault(l.atom)
        return tuple(order)

    @cached_property
    def clauses_by_head(self) -> dict[str, list[Clause]]:
        out: dict[str, list[Clause]] = {}
        for c in self.clauses:
            out.setdefault(c.head, []).append(c)
        return out

    @cached_property
    def topological_order(self) -> tuple[str, ...]:
        """All atoms, parents before children; ties broken by first appearance."""
        index = {a: i for i, a in enumerate(self.atoms)}
        children: dict[str, set[str]] = {a: set() for a in self.atoms}
        indeg = dict.fromkeys(self.atoms, 0)
        for head, body in self.clauses:
            for l in body:
                if head not in children[l.atom]:
                    children[l.atom].add(head)
                    indeg[head] += 1
        heap = [(index[a], a) for a in self.atoms if indeg[a] == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            _, a = heapq.heappop(heap)
            order.append(a)
            for c in children[a]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(heap, (index[c], c))
        if len(order) != len(self.atoms):
            raise CycleError(check_acyclic(self) or [])
        return tuple(order)

    @cached_property
    def children(self) -> dict[str, set[str]]:
        """Heads of the clauses each atom occurs in."""
        out: dict[str, set[str]] = {}
        for head, body in self.clauses:
            for l in body:
                out.setdefault(l.atom, set()).add(head)
        return out

    def descendants(self, atom: str) -> set[str]:
        children = self.children
        seen: set[str] = set()
        stack = [atom]
        while stack:
            for c in children.get(stack.pop(), ()):
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return seen

    @property
    def size(self) -> int:
        return len(self.facts) + len(self.clauses)

    @property
    def max_body_length(self) -> int:
        return max((len(c.body) for c in self.clauses), default=0)

    def is_exact(self) -> bool:
        return any(isinstance(f.prob, Fraction) for f in self.facts)

    def to_float(self) -> "Program":
        return Program(tuple(ProbFact(a, float(p)) for a, p in self.facts), self.clauses)

    def to_exact(self) -> "Program":
        return Program(
            tuple(ProbFact(a, p if isinstance(p, Fraction) else Fraction(str(p))) for a, p in self.facts),
            self.clauses,
        )


def dependency_graph(p: Program):
    """Signed dependency graph: an edge ``b -> h`` per body literal of each clause.

    Edge attribute ``signs`` is the set of literal polarities seen on that edge.
    """
    import networkx as nx

    g = nx.DiGraph()
    g.add_nodes_from(p.atoms)
    for head, body in p.clauses:
        for l in body:
            if g.has_edge(l.atom, head):
                g.edges[l.atom, head]["signs"].add(l.positive)
            else:
                g.add_edge(l.atom, head, signs={l.positive})
    return g


def check_acyclic(p: Program) -> list[str] | None:
    """None when acyclic, otherwise a witness cycle ``[a, b, ..., a]``."""
    import networkx as nx

    g = dependency_graph(p)
    try:
        edges = nx.find_cycle(g)
    except nx.NetworkXNoCycle:
        return None
    return [u for u, _ in edges] + [edges[0][0]]


def _check_world(p: Program, world: Mapping[str, bool]):
    if set(world) != set(p.fact_atoms):
        missing = set(p.fact_atoms) - set(world)
        extra = set(world) - set(p.fact_atoms)
        raise ValidationError(f"world must assign exactly the fact atoms (missing {sorted(missing)}, extra {sorted(extra)})")


def evaluate_world(p: Program, world: Mapping[str, bool]) -> dict[str, bool]:
    """Unique supported model of an acyclic program under a total fact assignment."""
    _check_world(p, world)
    value = dict(world)
    by_head = p.clauses_by_head
    for atom in p.topological_order:
        if atom in value:
            continue
        value[atom] = any(
            all(value[l.atom] == l.positive for l in body) for _, body in by_head.get(atom, ())
        )
    return value


def world_probability(p: Program, world: Mapping[str, bool]):
    _check_world(p, world)
    prob = 1
    for atom, pi in p.facts:
        prob *= pi if world[atom] else 1 - pi
    return prob


def satisfies(model: Mapping[str, bool], formula: Mapping[str, bool]) -> bool:
    return all(model[a] == v for a, v in formula.items())


# -- vectorised evaluation over many worlds at once -------------------------


def evaluate_columns(
    p: Program,
    columns: Mapping[str, np.ndarray],
    clamp: Mapping[str, bool] | None = None,
    width: int | None = None,
) -> dict[str, np.ndarray]:
    """Supported models for a batch of worlds.

    ``columns`` maps every fact atom to a boolean vector (one entry per world).
    Atoms in ``clamp`` ignore their definition and take the clamped value,
    which is how the intervened model M_x is built.
    """
    clamp = clamp or {}
    if width is None:
        width = len(next(iter(columns.values()))) if columns else 1
    value: dict[str, np.ndarray] = {}
    by_head = p.clauses_by_head
    for atom in p.topological_order:
        if atom in clamp:
            value[atom] = np.full(width, bool(clamp[atom]))
        elif atom in columns:
            value[atom] = columns[atom]
        else:
            acc = np.zeros(width, dtype=bool)
            for _, body in by_head.get(atom, ()):
                term = np.ones(width, dtype=bool)
                for l in body:
                    term &= value[l.atom] if l.positive else ~value[l.atom]
                acc |= term
            value[atom] = acc
    return value


def formula_mask(values: Mapping[str, np.ndarray], formula: Mapping[str, bool], width: int) -> np.ndarray:
    mask = np.ones(width, dtype=bool)
    for atom, v in formula.items():
        mask &= values[atom] if v else ~values[atom]
    return mask


CHUNK_BITS = 16
INT64_SAFE = 1 << 62


class ExactWeights:
    """Independent choices with rational weights, scaled to integers.

    Each choice is a list of Fractions; ``table[j][i]`` is the integer weight
    of option i of choice j and ``scale`` the product of the per-choice common
    denominators. Integer arithmetic is much cheaper than Fraction arithmetic,
    and stays in int64 whenever the scale allows it.
    """

    def __init__(self, choices: Iterable[Iterable]):
        self.table = []
        self.scale = 1
        for options in choices:
            options = [Fraction(o) for o in options]
            den = 1
            for o in options:
                den = den * o.denominator // gcd(den, o.denominator)
            self.table.append([int(o * den) for o in options])
            self.scale *= den
        self.dtype = np.int64 if self.scale < INT64_SAFE else object

    def column(self, j: int) -> np.ndarray:
        return np.array(self.table[j], dtype=self.dtype)

    def ones(self, width: int) -> np.ndarray:
        return np.ones(width, dtype=self.dtype)

    def normalise(self, total) -> Fraction:
        return Fraction(int(total), self.scale)


def iter_world_batches(probs: Iterable, chunk_bits: int = CHUNK_BITS):
    """Enumerate all assignments to independent boolean variables in batches.

    Yields ``(columns, weights)`` where ``columns[j]`` is the boolean vector
    for variable j and ``weights`` the joint probability of each assignment.
    When any probability is a Fraction the weights are integers scaled by
    ``ExactWeights(...).scale``; use :func:`world_sum` to get probabilities.
    """
    probs = list(probs)
    exact = ExactWeights([(1 - q, q) for q in probs]) if any(isinstance(q, Fraction) for q in probs) else None
    n = len(probs)
    low = min(n, chunk_bits)
    idx = np.arange(1 << low, dtype=np.int64)
    low_cols = [((idx >> j) & 1).astype(bool) for j in range(low)]
    if exact:
        low_w = exact.ones(1 << low)
        for j in range(low):
            low_w = low_w * exact.column(j)[low_cols[j].astype(np.int64)]
    else:
        low_w = np.ones(1 << low)
        for j in range(low):
            low_w = low_w * np.where(low_cols[j], probs[j], 1 - probs[j])
    for high in range(1 << (n - low)):
        cols = list(low_cols)
        w = low_w
        for j in range(low, n):
            bit = int((high >> (j - low)) & 1)
            cols.append(np.full(1 << low, bool(bit)))
            w = w * (exact.table[j][bit] if exact else (probs[j] if bit else 1 - probs[j]))
        yield cols, w


def world_scale(probs: Iterable):
    """Normaliser turning summed batch weights into a probability."""
    probs = list(probs)
    if any(isinstance(q, Fraction) for q in probs):
        return ExactWeights([(1 - q, q) for q in probs]).normalise
    return float


def weighted_sum(weights: np.ndarray, mask: np.ndarray):
    if weights.dtype == object:
        return sum(weights[mask].tolist(), 0)
    if weights.dtype == np.int64:
        return int(weights[mask].sum())
    return float(weights[mask].sum())
