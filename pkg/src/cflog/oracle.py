"""Brute-force reference semantics for counterfactual queries.

Two independent routes to the same numbers: enumeration of exogenous worlds
of the structural model (abduction, action, prediction in one sum), and
enumeration of LPAD selections.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping

import networkx as nx
import numpy as np

from .errors import InterventionError, ResourceLimitError, ValidationError, ZeroEvidenceError
from .inference import UNDERFLOW, as_formula
from .lpad import LPADProgram
from .program import ExactWeights, Program, evaluate_columns, formula_mask, iter_world_batches, weighted_sum

ORACLE_FACT_LIMIT = 20
LPAD_CLAUSE_LIMIT = 12
CHUNK = 1 << 16


def _check(known, mapping, what):
    for a in mapping:
        if a not in known:
            raise (InterventionError if what == "intervened" else ValidationError)(f"unknown {what} atom {a}")


def oracle_counterfactual(p: Program, fix, evidence, formula):
    """P(formula in the intervened model | evidence in the factual model).

    Sums over every assignment of the probabilistic facts; the intervened
    model replaces the definitions of the fixed atoms (facts included) by
    their constants.
    """
    fix, evidence, formula = as_formula(fix), as_formula(evidence or {}), as_formula(formula)
    known = set(p.atoms)
    _check(known, fix, "intervened")
    _check(known, evidence, "evidence")
    _check(known, formula, "query")
    stochastic = [f for f in p.facts if 0 < f.prob < 1]
    if len(stochastic) > ORACLE_FACT_LIMIT:
        raise ResourceLimitError(f"oracle limited to {ORACLE_FACT_LIMIT} probabilistic facts, got {len(stochastic)}")
    fixed = {f.atom: bool(f.prob == 1) for f in p.facts if not 0 < f.prob < 1}
    num = den = 0
    for cols, weights in iter_world_batches([f.prob for f in stochastic]):
        width = len(weights)
        columns = {f.atom: c for f, c in zip(stochastic, cols)}
        for a, v in fixed.items():
            columns[a] = np.full(width, v)
        factual = evaluate_columns(p, columns, width=width)
        ev_mask = formula_mask(factual, evidence, width)
        intervened = evaluate_columns(p, columns, clamp=fix, width=width)
        phi_mask = formula_mask(intervened, formula, width)
        den = den + weighted_sum(weights, ev_mask)
        num = num + weighted_sum(weights, ev_mask & phi_mask)
    return _ratio(num, den, exact=any(isinstance(f.prob, Fraction) for f in stochastic))


def _ratio(num, den, exact: bool):
    # with exact weights both sums carry the same integer scale
    if den == 0 or (not exact and abs(den) < UNDERFLOW):
        raise ZeroEvidenceError(0.0 if not exact else Fraction(0))
    return Fraction(num, den) if exact else num / den


def oracle_interventional(p: Program, fix, formula):
    return oracle_counterfactual(p, fix, {}, formula)


def _lpad_order(lp: LPADProgram) -> list[str]:
    g = nx.DiGraph()
    g.add_nodes_from(lp.atoms)
    for rc in lp.clauses:
        for h, _ in rc.heads:
            for l in rc.body:
                g.add_edge(l.atom, h)
    try:
        return list(nx.lexicographical_topological_sort(g, key=lambda a: lp.atoms.index(a)))
    except nx.NetworkXUnfeasible:
        raise ValidationError("LPAD has a cyclic dependency graph; selections need not have unique models") from None


def _selection_models(lp: LPADProgram, order, digits, options, clamp: Mapping[str, bool], width):
    value: dict[str, np.ndarray] = {}
    for a in order:
        if a in clamp:
            value[a] = np.full(width, bool(clamp[a]))
            continue
        acc = np.zeros(width, dtype=bool)
        for k, rc in enumerate(lp.clauses):
            for i, (h, _) in enumerate(rc.heads):
                if h != a or i not in options[k]:
                    continue
                term = digits[k] == options[k].index(i)
                for l in rc.body:
                    term = term & (value[l.atom] if l.positive else ~value[l.atom])
                acc |= term
        value[a] = acc
    return value


def lpad_counterfactual(lp: LPADProgram, fix, evidence, formula):
    """Counterfactual probability under LPAD selection semantics.

    Every selection picks one head (or none) per clause independently. The
    factual model of a selection must satisfy the evidence and the model of
    the same selection with the fixed atoms clamped must satisfy the query.
    Zero-weight choices are skipped.
    """
    fix, evidence, formula = as_formula(fix), as_formula(evidence or {}), as_formula(formula)
    if len(lp.clauses) > LPAD_CLAUSE_LIMIT:
        raise ResourceLimitError(f"selection enumeration limited to {LPAD_CLAUSE_LIMIT} clauses")
    known = set(lp.atoms)
    _check(known, fix, "intervened")
    _check(known, evidence, "evidence")
    _check(known, formula, "query")
    order = _lpad_order(lp)
    exact = any(isinstance(p, Fraction) for rc in lp.clauses for _, p in rc.heads)
    # options[k]: head indices with positive weight, None standing for no head
    options, weights_k = [], []
    for rc in lp.clauses:
        opts = [i for i, (_, p) in enumerate(rc.heads) if p > 0]
        ws = [rc.heads[i][1] for i in opts]
        if rc.none_weight > 0:
            opts.append(None)
            ws.append(rc.none_weight)
        options.append(opts)
        weights_k.append(ws)
    if exact:
        table = ExactWeights(weights_k)
        option_w = [table.column(k) for k in range(len(options))]
        ones = table.ones
    else:
        option_w = [np.array(ws, dtype=float) for ws in weights_k]
        ones = lambda width: np.ones(width)
    radix = [len(o) for o in options]
    total = 1
    for r in radix:
        total *= r
    num = den = 0
    for start in range(0, total, CHUNK):
        idx = np.arange(start, min(total, start + CHUNK), dtype=np.int64)
        width = len(idx)
        digits, weights = [], ones(width)
        rest = idx
        for k, r in enumerate(radix):
            d = rest % r
            rest = rest // r
            digits.append(d)
            weights = weights * option_w[k][d]
        factual = _selection_models(lp, order, digits, options, {}, width)
        ev_mask = formula_mask(factual, evidence, width)
        cf = _selection_models(lp, order, digits, options, fix, width)
        phi_mask = formula_mask(cf, formula, width)
        den = den + weighted_sum(weights, ev_mask)
        num = num + weighted_sum(weights, ev_mask & phi_mask)
    return _ratio(num, den, exact)
