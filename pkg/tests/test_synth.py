import pytest

from kgcomplete.graph import load_graph
from kgcomplete.reasoner import closure, infer, load_rules
from kgcomplete.synth import SynthConfig, generate
from oracles import naive_closure


def kinds(names, prefix):
    return sum(1 for n in names if n.startswith(prefix) and n[len(prefix) : len(prefix) + 1].isdigit())


def test_minimal_config_without_sparsity():
    d = generate(SynthConfig(1, 1, 1, 1, sparsity=0.0))
    assert len(d.withheld) == 0
    base = set(d.graph.labeled()) | set(d.ontology.labeled())
    extra = closure(base, d.rules) - base
    assert extra == naive_closure(base, d.rules) - base
    assert extra and {r for _, r, _ in extra} <= {"subClass", "subProperty"}


def test_full_sparsity_withholds_every_derivable_triple():
    d = generate(SynthConfig(sparsity=1.0, seed=3))
    base = set(d.graph.labeled()) | set(d.ontology.labeled())
    full = closure(base, d.rules)
    ground = {t for t in full - base if t[1] not in ("subClass", "subProperty", "domain", "range")}
    assert set(d.withheld.labeled()) == ground
    assert len(d.withheld) == d.derivable


@pytest.mark.parametrize("sparsity", [0.0, 0.3, 0.5, 1.0])
def test_withheld_triples_are_recoverable(sparsity):
    d = generate(SynthConfig(universities=2, sparsity=sparsity, seed=1))
    new = set(infer(d.graph, d.ontology, d.rules).labeled())
    assert set(d.withheld.labeled()) <= new
    assert len(d.withheld) == round(sparsity * d.derivable)
    assert not set(d.withheld.labeled()) & set(d.graph.labeled())


def test_entity_counts_follow_the_config():
    cfg = SynthConfig(universities=2, departments=3, professors=4, students=5, courses=2)
    names = list(generate(cfg).graph.entities)
    assert kinds(names, "University") == 2
    assert kinds(names, "Department") == 2 * 3
    assert kinds(names, "Professor") == 2 * 3 * 4
    assert kinds(names, "Student") == 2 * 3 * 4 * 5
    assert kinds(names, "Course") == 2 * 3 * 4 * 2


def test_schema_shape():
    d = generate(SynthConfig())
    onto = set(d.ontology.labeled())
    assert ("FullProfessor", "subClass", "Professor") in onto
    assert ("headOf", "subProperty", "worksFor") in onto
    assert {r for _, r, _ in onto} == {"subClass", "subProperty", "domain", "range"}
    assert d.rules.names() == ["rdfs2", "rdfs3", "rdfs5", "rdfs7", "rdfs9", "rdfs11"]
    g, o, rules = d
    assert g is d.graph and o is d.ontology and rules is d.rules


def test_files_round_trip_and_are_deterministic(tmp_path):
    cfg = SynthConfig(universities=1, seed=7)
    a = generate(cfg).write(tmp_path / "a")
    b = generate(cfg).write(tmp_path / "b")
    assert set(a) == {"triples", "ontology", "withheld", "rules"}
    for k in a:
        assert a[k].read_bytes() == b[k].read_bytes()
    g = load_graph(a["triples"])
    assert len(g) == len(generate(cfg).graph)
    assert load_rules(a["rules"]).names() == generate(cfg).rules.names()
    other = generate(SynthConfig(universities=1, seed=8)).write(tmp_path / "c")
    assert other["triples"].read_bytes() != a["triples"].read_bytes()


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(universities=0)
    with pytest.raises(ValueError):
        SynthConfig(sparsity=1.5)
