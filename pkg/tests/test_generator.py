import numpy as np
import pytest

from kgcomplete.generator import (
    GeneratorConfig,
    cluster_pools,
    draw_candidates,
    entity_weights,
    generate_triples,
    generate_uniform,
    relation_pools,
    subject_distribution,
)
from kgcomplete.graph import KnowledgeGraph, clustering_coefficients
from kgcomplete.synth import SynthConfig, generate


def sparse_graph(n_entities=10, n_relations=2, n_triples=12, seed=0):
    rng = np.random.default_rng(seed)
    rows = {(f"e{rng.integers(n_entities)}", f"r{rng.integers(n_relations)}", f"e{rng.integers(n_entities)}") for _ in range(n_triples)}
    g = KnowledgeGraph.from_labeled(sorted(rows))
    for i in range(n_entities):
        g.entities.add(f"e{i}")
    for i in range(n_relations):
        g.relations.add(f"r{i}")
    return g


def assert_valid(cands, g, exclude=None):
    keys = {tuple(t) for t in cands.tolist()}
    assert len(keys) == len(cands)
    assert not any(t in g for t in keys)
    if exclude is not None:
        assert not keys & {tuple(t) for t in exclude.tolist()}


def test_uniform_small():
    g = sparse_graph()
    rng = np.random.default_rng(0)
    assert len(generate_uniform(g, 0, rng)) == 0
    cands = generate_uniform(g, 5, rng)
    assert len(cands) == 5
    assert_valid(cands, g)


def test_uniform_on_complete_graph_is_empty():
    g = KnowledgeGraph.from_labeled([(s, "r", o) for s in "ab" for o in "ab"])
    assert len(generate_uniform(g, 10, np.random.default_rng(0))) == 0


def test_uniform_short_return_when_complement_small():
    g = KnowledgeGraph.from_labeled([(s, "r", o) for s in "ab" for o in "ab" if (s, o) != ("b", "a")])
    cands = generate_uniform(g, 10, np.random.default_rng(0))
    assert cands.tolist() == [[1, 0, 0]]


def test_two_subject_weights():
    g = KnowledgeGraph.from_labeled(
        [("A", "t", "B"), ("B", "t", "C"), ("C", "t", "A"), ("A", "r", "B"), ("D", "r", "E")]
    )
    cc = clustering_coefficients(g)
    assert cc[g.entities.id("A")] == 1.0 and cc[g.entities.id("D")] == 0.0
    cfg = GeneratorConfig(smoothing=0.01, type_filter=False)
    pool, p = subject_distribution(g, g.relations.id("r"), cfg)
    probs = dict(zip(g.entities.decode(pool), p))
    assert np.isclose(probs["D"], 1.01 / 1.02) and np.isclose(probs["A"], 0.01 / 1.02)
    pool, p = subject_distribution(g, g.relations.id("r"), GeneratorConfig(weight="direct", type_filter=False))
    assert np.isclose(dict(zip(g.entities.decode(pool), p))["A"], 1.01 / 1.02)


def test_clique_degenerates_to_uniform():
    names = "abcd"
    g = KnowledgeGraph.from_labeled([(s, "r", o) for s in names for o in names if s < o])
    w = entity_weights(g, GeneratorConfig(smoothing=0.05))
    assert np.allclose(w, 0.05)


def test_pools_and_type_filter():
    g = KnowledgeGraph.from_labeled(
        [("ann", "worksFor", "acme"), ("bob", "type", "Employee"), ("ann", "type", "Employee"), ("cat", "type", "Robot")]
    )
    onto = KnowledgeGraph.from_labeled([("worksFor", "domain", "Employee")], g.entities, g.relations)
    r = g.relations.id("worksFor")
    subj, obj = relation_pools(g, r, GeneratorConfig(type_filter=False), onto)
    assert g.entities.decode(subj) == ["ann"]
    subj, obj = relation_pools(g, r, GeneratorConfig(), onto)
    assert sorted(g.entities.decode(subj)) == ["ann", "bob"]
    assert g.entities.decode(obj) == ["acme"]


def test_schema_relations_skipped_by_default():
    d = generate(SynthConfig(seed=1))
    g = d.graph.with_triples(d.ontology.triples)
    cands = generate_triples(g, GeneratorConfig(budget=500), d.ontology)
    names = set(g.relations.decode(np.unique(cands[:, 1])))
    assert not names & {"domain", "range", "subClass", "subProperty"}
    assert_valid(cands, g)


def test_cluster_weighted_output_is_valid_and_reproducible():
    d = generate(SynthConfig(seed=2))
    cfg = GeneratorConfig(budget=300, seed=4)
    a = generate_triples(d.graph, cfg, d.ontology)
    b = generate_triples(d.graph, cfg, d.ontology)
    assert a.tobytes() == b.tobytes()
    assert len(a) == 300
    assert_valid(a, d.graph)


def test_exclusion_set_is_respected():
    g = sparse_graph(6, 1, 10)
    held = generate_uniform(g, 10, np.random.default_rng(1))
    for strategy in ("uniform", "cluster"):
        cands = generate_triples(g, GeneratorConfig(strategy=strategy, budget=20, type_filter=False), exclude=held)
        assert_valid(cands, g, held)


def test_relation_without_triples_is_never_proposed():
    g = KnowledgeGraph.from_labeled([("a", "p", "b"), ("c", "q", "d")])
    empty = g.relations.add("unused")
    pools, rel_p = cluster_pools(g, GeneratorConfig(type_filter=False))
    assert empty not in pools and rel_p[empty] == 0.0
    assert np.isclose(rel_p.sum(), 1.0)
    cands = generate_triples(g, GeneratorConfig(budget=5, type_filter=False))
    assert empty not in cands[:, 1]


def test_raw_draw_frequencies_match_weights():
    d = generate(SynthConfig(seed=3))
    cfg = GeneratorConfig(type_filter=False)
    pools, rel_p = cluster_pools(d.graph, cfg, d.ontology)
    r = d.graph.relations.id("advisor")
    n = 10_000
    draws = draw_candidates({r: pools[r]}, np.eye(len(rel_p))[r], n, np.random.default_rng(0))
    subj, p, _, _ = pools[r]
    counts = np.array([(draws[:, 0] == e).sum() for e in subj])
    se = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) <= 3 * se)


def test_config_validation():
    with pytest.raises(ValueError):
        GeneratorConfig(budget=-1)
    with pytest.raises(ValueError):
        GeneratorConfig(smoothing=0)
    with pytest.raises(ValueError):
        GeneratorConfig(strategy="magic")
    assert GeneratorConfig(strategy="cluster-weighted").strategy == "cluster"
