import itertools
from fractions import Fraction

import pytest

from cflog.corpus import random_program, random_query
from cflog.errors import EvidenceOnDescendant, InterventionError, ResourceLimitError, ValidationError, ZeroEvidenceError
from cflog.inference import (
    Backend,
    as_formula,
    conditional,
    evaluate_swip_query,
    evaluate_twin_query,
    evidence_violation,
    marginal,
    relevant_subprogram,
    swip_query,
    twin_query,
)
from cflog.parser import parse_program
from cflog.program import Clause, Literal, ProbFact, Program

BACKENDS = [Backend.ENUM, Backend.CIRCUIT]


@pytest.fixture(params=BACKENDS, ids=lambda b: b.value)
def backend(request):
    return request.param


# -- marginals ------------------------------------------------------------------


def test_marginal_examples(power_exact, smoking_exact, backend):
    assert marginal(power_exact, {"d": True}, backend) == Fraction(3, 4)
    assert marginal(smoking_exact, {"cancer": True}, backend) == Fraction(9, 50)
    assert marginal(power_exact, {"u_a": True}, backend) == Fraction(1, 2)


def test_marginal_float(power, backend):
    assert marginal(power, {"d": True}, backend) == pytest.approx(0.75, abs=1e-12)


def test_marginal_unknown_atom(power, backend):
    with pytest.raises(ValidationError):
        marginal(power, {"zzz": True}, backend)


def test_enum_guard():
    facts = tuple(ProbFact(f"f{i}", 0.5) for i in range(30))
    p = Program(facts, (Clause("a", tuple(Literal(f.atom) for f in facts)),))
    with pytest.raises(ResourceLimitError):
        marginal(p, {"a": True}, Backend.ENUM)
    assert marginal(p, {"a": True}, Backend.CIRCUIT) == pytest.approx(0.5**30)
    assert marginal(p, {"f0": True}, Backend.ENUM) == 0.5


def test_enum_guard_counts_only_relevant_stochastic_facts():
    facts = tuple(ProbFact(f"f{i}", 0.5) for i in range(30)) + (ProbFact("g", 1.0),)
    p = Program(facts, ())
    assert marginal(p, {"g": True}, Backend.ENUM) == 1


def test_relevant_subprogram(power):
    sub = relevant_subprogram(power, ["a"])
    assert set(sub.atoms) == {"a", "u_a"}


def test_as_formula():
    assert as_formula("d") == {"d": True}
    assert as_formula(["a", "b"]) == {"a": True, "b": True}
    assert as_formula({"a": 0}) == {"a": False}


@pytest.mark.parametrize("seed", range(50))
def test_backends_agree(seed):
    p = random_program(seed)
    atoms = list(p.atoms)
    for a in atoms:
        e = marginal(p, {a: True}, Backend.ENUM)
        c = marginal(p, {a: True}, Backend.CIRCUIT)
        assert abs(e - c) <= 1e-9
    for a, b in itertools.islice(itertools.combinations(atoms, 2), 10):
        f = {a: True, b: False}
        assert abs(marginal(p, f, Backend.ENUM) - marginal(p, f, Backend.CIRCUIT)) <= 1e-9


# -- conditionals ---------------------------------------------------------------


def test_conditional_examples(power, smoking, backend):
    assert conditional(power, {"d": True}, {"b": True}, backend) == pytest.approx(1.0)
    assert conditional(power, {"a": True}, {"d": False}, backend) == 0
    assert conditional(smoking, {"cancer": True}, {"genetic_risk": True}, backend) == pytest.approx(0.3)


def test_conditioning_coherence(power, backend):
    assert conditional(power, {"d": True}, {}, backend) == marginal(power, {"d": True}, backend)


def test_zero_evidence(power, backend):
    with pytest.raises(ZeroEvidenceError):
        conditional(power, {"a": True}, {"c": False, "a": True}, backend)
    p = parse_program("0.0::z.\n0.5::u.\na :- z.")
    with pytest.raises(ZeroEvidenceError) as info:
        conditional(p, {"u": True}, {"a": True}, backend)
    assert info.value.probability == 0
    assert info.value.exit_code == 4


def test_observation_is_not_intervention(smoking, backend):
    assert conditional(smoking, {"cancer": True}, {"smokes": False}, backend) == 0
    assert evaluate_swip_query(smoking, {"smokes": False}, {}, {"cancer": True}, backend) == 0
    seen = conditional(smoking, {"smokes": True}, {"cancer": True}, backend)
    assert seen == pytest.approx(1.0)
    assert seen != pytest.approx(marginal(smoking, {"smokes": True}, backend))


# -- SWIP evaluator -------------------------------------------------------------


def test_swip_examples(smoking_exact, power_exact, backend):
    assert evaluate_swip_query(smoking_exact, {"smokes": True}, {}, {"cancer": True}, backend) == Fraction(3, 5)
    assert evaluate_swip_query(power_exact, {"a": False}, {"b": False}, {"d": True}, backend) == 0


def test_swip_descendant_guard(power, backend):
    with pytest.raises(EvidenceOnDescendant) as info:
        evaluate_swip_query(power, {"a": True}, {"d": True}, {"d": True}, backend)
    assert (info.value.atom, info.value.ancestor) == ("d", "a")
    assert "twin" in str(info.value)
    assert info.value.exit_code == 5


def test_swip_literal_mode_warns_and_answers_differently(power_exact):
    with pytest.warns(UserWarning):
        literal = evaluate_swip_query(power_exact, {"a": False}, {"d": True}, {"d": True}, literal_alg4=True)
    assert literal == 1
    assert evaluate_twin_query(power_exact, {"a": False}, {"d": True}, {"d": True}) == Fraction(2, 3)


def test_swip_evidence_on_intervened_atom_is_factual(power_exact, backend):
    # a observed true in the factual world, then forced false: d needs the backup
    got = evaluate_swip_query(power_exact, {"a": False}, {"a": True}, {"d": True}, backend)
    assert got == Fraction(1, 2)


def test_swip_query_on_intervened_atom(power_exact, backend):
    assert evaluate_swip_query(power_exact, {"a": False}, {}, {"a": True}, backend) == 0


def test_swip_requires_intervention(power):
    with pytest.raises(InterventionError):
        evaluate_swip_query(power, {}, {}, {"d": True})


def test_swip_outcome_reports_timings(power):
    out = swip_query(power, {"b": True}, {}, {"d": True})
    assert out.transform_ms >= 0 and out.inference_ms >= 0
    assert out.stats.clauses_visited == 5
    assert out.probability == pytest.approx(1.0)


def test_evidence_violation(power):
    assert evidence_violation(power, {"a": True}, {"d": True}) == ("d", "a")
    assert evidence_violation(power, {"a": True}, {"a": True, "b": False}) is None


# -- twin evaluator -------------------------------------------------------------


def test_twin_examples(power_exact, smoking_exact, backend):
    assert evaluate_twin_query(power_exact, {"a": False}, {"d": True}, {"d": True}, backend) == Fraction(2, 3)
    assert evaluate_twin_query(smoking_exact, {"smokes": True}, {"cancer": False}, {"cancer": True}, backend) == Fraction(21, 41)
    assert evaluate_twin_query(power_exact, {}, {}, {"d": True}, backend) == Fraction(3, 4)


def test_twin_float(smoking, backend):
    got = evaluate_twin_query(smoking, {"smokes": True}, {"cancer": False}, {"cancer": True}, backend)
    assert got == pytest.approx(21 / 41, abs=1e-12)


def test_twin_zero_evidence(power):
    with pytest.raises(ZeroEvidenceError):
        evaluate_twin_query(power, {"a": True}, {"c": False, "a": True}, {"d": True})


def test_twin_reduce_gives_same_answer(power_exact):
    plain = twin_query(power_exact, {"a": False}, {"d": True}, {"d": True})
    reduced = twin_query(power_exact, {"a": False}, {"d": True}, {"d": True}, reduce=True)
    assert plain.probability == reduced.probability
    assert reduced.program.size <= plain.program.size


@pytest.mark.parametrize("seed", range(60))
def test_swip_and_twin_agree(seed):
    p = random_program(seed)
    q = random_query(seed, p)
    s = evaluate_swip_query(p, q.intervention, q.evidence, q.query)
    t = evaluate_twin_query(p, q.intervention, q.evidence, q.query)
    assert abs(s - t) <= 1e-9


@pytest.mark.parametrize("seed", range(20))
def test_twin_self_evidence_is_certain(seed):
    # phi = evidence with no intervention reduces to conditioning on itself
    p = random_program(seed)
    q = random_query(seed, p, n_ev=(1, 3))
    if not q.evidence:
        pytest.skip("no evidence drawn")
    assert evaluate_twin_query(p, {}, q.evidence, q.evidence) == pytest.approx(1.0)
