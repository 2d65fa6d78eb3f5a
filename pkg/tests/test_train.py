import itertools

import numpy as np
import pytest

from kgcomplete.graph import KnowledgeGraph, Vocabulary
from kgcomplete.kge import (
    EmbeddingModel,
    SamplingError,
    ScoredTriple,
    TrainConfig,
    TrainingError,
    accept,
    corrupt,
    fit,
    load_checkpoint,
    predict,
    save_checkpoint,
)
from kgcomplete.kge.train import platt_scaling, scatter_add


def toy_graph(n_triples=50, n_entities=20, n_relations=3, seed=0):
    rng = np.random.default_rng(seed)
    rows = set()
    while len(rows) < n_triples:
        s, o = rng.integers(n_entities, size=2)
        if s != o:
            rows.add((f"e{s}", f"r{rng.integers(n_relations)}", f"e{o}"))
    return KnowledgeGraph.from_labeled(sorted(rows))


def auc(pos, neg):
    # brute-force pairwise comparison, ties count one half
    wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_corrupt_replaces_exactly_one_side():
    g = KnowledgeGraph.from_labeled([("Plato", "bornIn", "Athens"), ("Athens", "locatedIn", "Greece"), ("Socrates", "bornIn", "Athens")])
    t = g.triples[0]
    negs = corrupt(t, g, 20, np.random.default_rng(0))
    assert len(negs) == 20
    for s, r, o in negs:
        assert r == t[1]
        assert (s == t[0]) != (o == t[2])
        assert (s, r, o) not in g


def test_corrupt_errors():
    g = KnowledgeGraph.from_labeled([("a", "r", "b")])
    with pytest.raises(ValueError):
        corrupt(g.triples[0], g, 0, np.random.default_rng(0))
    full = KnowledgeGraph.from_labeled([(s, "r", o) for s in "ab" for o in "ab"])
    with pytest.raises(SamplingError):
        corrupt(full.triples[0], full, 1, np.random.default_rng(0))


def test_scatter_add_matches_add_at():
    rng = np.random.default_rng(1)
    rows = rng.integers(0, 7, size=40)
    vals = rng.normal(size=(40, 3))
    a, b = np.zeros((7, 3)), np.zeros((7, 3))
    np.add.at(a, rows, vals)
    scatter_add(b, rows, vals)
    assert np.allclose(a, b)


def test_fit_separates_toy_graph_transe():
    g = toy_graph()
    m = fit(g, TrainConfig(model="transe-l1", dim=16, epochs=200, batch_size=16, seed=0))
    rng = np.random.default_rng(99)
    negs = np.array([c for t in g.triples for c in corrupt(t, g, 1, rng)])
    assert auc(m.score_many(g.triples), m.score_many(negs)) > 0.9


@pytest.mark.parametrize("kind", ["transe-l2", "distmult", "complex", "hole"])
def test_fit_beats_corruptions_on_average(kind):
    g = toy_graph(seed=1)
    m = fit(g, TrainConfig(model=kind, dim=16, epochs=100, batch_size=16, seed=0))
    rng = np.random.default_rng(5)
    negs = np.array([c for t in g.triples for c in corrupt(t, g, 2, rng)])
    assert m.score_many(g.triples).mean() > m.score_many(negs).mean()


def test_single_triple_beats_every_corruption():
    ents = Vocabulary(["a", "b", "c", "d"])
    rels = Vocabulary(["r"])
    X = KnowledgeGraph(ents, rels, np.array([[0, 0, 1]]))
    m = fit(X, TrainConfig(model="distmult", dim=8, epochs=200, batch_size=1, seed=0))
    target = m.score((0, 0, 1))
    corruptions = [(s, 0, 1) for s in range(4) if s != 0] + [(0, 0, o) for o in range(4) if o != 1]
    assert all(target > m.score(c) for c in corruptions)
    worst = max(corruptions, key=m.score)
    p_t, p_w = (st.probability for st in predict([(0, 0, 1), worst], m))
    assert p_t > p_w


def test_empty_graph_is_rejected():
    with pytest.raises(ValueError):
        fit(KnowledgeGraph(Vocabulary(["a"]), Vocabulary(["r"])), TrainConfig())


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_names_the_epoch():
    g = toy_graph()
    cfg = TrainConfig(model="distmult", dim=8, epochs=50, optimizer="sgd", learning_rate=1e6, loss="logistic")
    with pytest.raises(TrainingError) as err:
        fit(g, cfg)
    assert err.value.epoch >= 1
    assert f"epoch {err.value.epoch}" in str(err.value)


@pytest.mark.parametrize("kind", ["transe-l1", "hole"])
def test_fit_is_deterministic(kind):
    g = toy_graph()
    cfg = TrainConfig(model=kind, dim=8, epochs=10, batch_size=8, seed=3)
    a, b = fit(g, cfg), fit(g, cfg)
    assert a.entity_emb.tobytes() == b.entity_emb.tobytes()
    assert a.relation_emb.tobytes() == b.relation_emb.tobytes()


def test_parallel_mode_runs_and_stays_finite():
    g = toy_graph(200)
    m = fit(g, TrainConfig(model="distmult", dim=8, epochs=5, batch_size=16, threads=3))
    assert m.is_finite()


def test_transe_rows_stay_unit_norm():
    m = fit(toy_graph(), TrainConfig(model="transe-l2", dim=8, epochs=5, batch_size=8))
    assert np.allclose(np.linalg.norm(m.entity_emb, axis=1), 1.0)


def test_table_shapes():
    g = toy_graph()
    m = fit(g, TrainConfig(model="complex", dim=5, epochs=1))
    assert m.entity_emb.shape == (g.n_entities, 10)
    assert m.relation_emb.shape == (g.n_relations, 10)
    with pytest.raises(IndexError):
        m.score((g.n_entities, 0, 0))


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    g = toy_graph()
    m = fit(g, TrainConfig(model="hole", dim=8, epochs=3), valid=g.triples[:10])
    save_checkpoint(m, tmp_path / "m.ckpt", g.entities, g.relations)
    m2, header = load_checkpoint(tmp_path / "m.ckpt")
    assert m2.kind == "hole" and m2.dim == 8
    assert m2.entity_emb.tobytes() == m.entity_emb.tobytes()
    assert m2.relation_emb.tobytes() == m.relation_emb.tobytes()
    assert m2.calibration == m.calibration
    assert header["entities"] == list(g.entities)
    save_checkpoint(m2, tmp_path / "m2.ckpt", g.entities, g.relations)
    assert (tmp_path / "m.ckpt").read_bytes() == (tmp_path / "m2.ckpt").read_bytes()


def test_not_a_checkpoint(tmp_path):
    (tmp_path / "x").write_bytes(b"hello")
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "x")


def test_calibration_defaults_and_fitting():
    g = toy_graph()
    m = fit(g, TrainConfig(epochs=2, dim=4))
    assert m.calibration == (1.0, 0.0)
    m = fit(g, TrainConfig(epochs=30, dim=8), valid=g.triples[:20])
    assert m.calibration[0] > 0


def test_platt_recovers_logistic_parameters():
    rng = np.random.default_rng(0)
    s = rng.normal(size=20000) * 2
    y = (rng.random(20000) < 1 / (1 + np.exp(-(1.5 * s - 0.5)))).astype(float)
    a, b = platt_scaling(s, y, ridge=0.0)
    assert abs(a - 1.5) < 0.1 and abs(b + 0.5) < 0.1


def test_predict_probability_and_order():
    m = EmbeddingModel("distmult", 2, np.zeros((3, 2)), np.zeros((1, 2)))
    assert predict([], m) == []
    out = predict([(2, 0, 1), (0, 0, 1)], m)
    assert [st.triple for st in out] == [(2, 0, 1), (0, 0, 1)]
    assert out[0].probability == 0.5 and out[0].provenance == "kge"
    m.calibration = (2.0, 1.0)
    m.entity_emb[:] = 1.0
    m.relation_emb[:] = 0.5
    (st,) = predict([(0, 0, 1)], m)
    assert np.isclose(st.probability, 1 / (1 + np.exp(-(2.0 * 1.0 + 1.0))))


def test_accept_filters_strictly():
    items = [ScoredTriple((0, 0, i), 0.0, p) for i, p in enumerate([0.95, 0.4, 0.91])]
    assert [s.triple[2] for s in accept(items, 0.9)] == [0, 2]
    assert accept(items, 1.0) == []
    assert accept(items, 0.0) == items
    for lo, hi in itertools.combinations([0.0, 0.3, 0.5, 0.92, 1.0], 2):
        assert set(accept(items, hi)) <= set(accept(items, lo))


def test_config_round_trip_and_validation():
    cfg = TrainConfig(model="TransE", dim=4)
    assert cfg.model == "transe-l1"
    assert TrainConfig.from_dict({**cfg.to_dict(), "unknown": 1}) == cfg
    with pytest.raises(ValueError):
        TrainConfig(model="rotate")
    with pytest.raises(ValueError):
        TrainConfig(dim=0)
