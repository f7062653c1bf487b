import json
from fractions import Fraction

import networkx as nx
import pytest

from cflog.benchgen import (
    MANIFEST_FILE,
    PROGRAM_FILE,
    BenchGraph,
    emit_program,
    emit_rules,
    generate_dag,
    moral_graph,
    sample_query,
    write_instance,
)
from cflog.errors import ValidationError
from cflog.graphs import treewidth_exact_small
from cflog.inference import marginal, swip_query
from cflog.parser import parse_source
from cflog.program import check_acyclic


def test_small_instance_shape():
    bg = generate_dag(5, 2, 42)
    assert len(bg.vertices) == 8
    g = bg.to_digraph()
    assert nx.is_directed_acyclic_graph(g)
    assert g.in_degree("g") == 2
    assert all(g.has_edge(u, "g") for u in ("u1", "u2"))
    assert g.in_degree("s") == 0


def test_determinism():
    assert generate_dag(20, 4, 7) == generate_dag(20, 4, 7)
    assert generate_dag(20, 4, 7).edges != generate_dag(20, 4, 8).edges


def test_smallest_instance():
    bg = generate_dag(2, 1, 0)
    g = bg.to_digraph()
    assert nx.is_directed_acyclic_graph(g) and nx.has_path(g, "s", "g")


def test_parameter_bounds():
    with pytest.raises(ValidationError):
        generate_dag(1, 1, 0)
    with pytest.raises(ValidationError):
        generate_dag(5, 0, 0)


@pytest.mark.parametrize("n,k,seed", [(5, 2, 1), (20, 4, 2), (40, 8, 3), (80, 2, 4)])
def test_tree_part_and_layer(n, k, seed):
    bg = generate_dag(n, k, seed)
    tree = [(u, v) for u, v in bg.edges if not v.startswith("u") and v != "g"]
    assert len(tree) == n - 1
    t = nx.Graph(tree)
    assert nx.is_tree(t) and t.number_of_nodes() == n
    for j in range(1, k + 1):
        d = sum(v == f"u{j}" for _, v in bg.edges)
        assert 2 <= d <= min(5, n)


def test_two_vertex_program():
    bg = BenchGraph(1, 0, 0, ("s", "g"), (("s", "g"),))
    p = emit_program(bg, exact=True)
    ads, rules = emit_rules(bg)
    assert [len(a.heads) for a in ads] == [1, 1]
    assert rules == [("r(g)", rules[0][1])]
    # the trap on g only stops departures from g, and s has no trap of its own
    assert marginal(p, {"r(g)": True}) == 1
    assert marginal(p, {"trap(g)": True}) == Fraction(1, 10)


def test_choice_probabilities_are_exact():
    bg = generate_dag(20, 4, 3)
    ads, _ = emit_rules(bg)
    for ad in ads:
        if ad.heads[0][0].startswith("p("):
            d = len(ad.heads)
            assert all(q == Fraction(1, d) for _, q in ad.heads)
            assert sum(q for _, q in ad.heads) == 1


def test_goal_has_no_choice():
    ads, _ = emit_rules(generate_dag(10, 2, 1))
    assert not any(l.atom == "r(g)" for ad in ads for l in ad.body)


@pytest.mark.parametrize("n,k,seed", [(5, 1, 1), (10, 2, 2), (20, 4, 3), (20, 8, 4)])
def test_emitted_program_invariants(n, k, seed):
    p = emit_program(generate_dag(n, k, seed))
    assert check_acyclic(p) is None
    assert not set(p.fact_atoms) & p.heads
    assert 0 < marginal(p, {"r(g)": True}) < 1


def test_sample_query_plain():
    q = sample_query(generate_dag(10, 2, 1), 0, 0, 5)
    assert q.evidence == [] and q.interventions == [] and q.query == {"r(g)": True}


def test_sample_query_swip_safe():
    bg = generate_dag(20, 4, 2)
    g = bg.to_digraph()
    for seed in range(20):
        q = sample_query(bg, 1, 1, seed)
        (x, _), = q.interventions
        (e, value), = q.evidence
        x, e = x[2:-1], e[2:-1]
        assert e not in nx.descendants(g, x) and e != x
        assert value is False


def test_sample_query_repeatable():
    bg = generate_dag(20, 4, 2)
    assert sample_query(bg, 3, 2, 11) == sample_query(bg, 3, 2, 11)


def test_sample_query_bounds():
    with pytest.raises(ValidationError):
        sample_query(generate_dag(10, 2, 1), 6, 1, 0)


def test_sampled_queries_evaluate():
    bg = generate_dag(20, 4, 5)
    p = emit_program(bg)
    for seed in range(5):
        q = sample_query(bg, 3, 2, seed)
        out = swip_query(p, dict(q.interventions), dict(q.evidence), q.query)
        assert 0 <= out.probability <= 1


def test_write_instance(tmp_path):
    d = write_instance(tmp_path, generate_dag(20, 2, 1), n_queries=3, salt=4)
    manifest = json.loads((d / MANIFEST_FILE).read_text())
    assert (manifest["n"], manifest["k"], manifest["seed"], manifest["salt"]) == (20, 2, 1, 4)
    assert len(manifest["queries"]) == 3
    program_text = (d / PROGRAM_FILE).read_text()
    for q in manifest["queries"]:
        parsed = parse_source(program_text + (d / q["file"]).read_text())
        assert parsed.queries == ["r(g)"]
        assert 1 <= len(parsed.do) <= 5 and len(parsed.evidence) <= 5
    again = write_instance(tmp_path / "again", generate_dag(20, 2, 1), n_queries=3, salt=4)
    assert (again / "query0.pl").read_text() == (d / "query0.pl").read_text()


def test_tiny_moral_treewidth_is_reported():
    # the generated width is compared against min(n, k) without asserting the claim
    for n, k in [(4, 2), (6, 3)]:
        for seed in range(3):
            width = treewidth_exact_small(moral_graph(generate_dag(n, k, seed)))
            assert 1 <= width <= n + k
