"""Candidate triple generation for KGE prediction.

Candidates are never members of the input graph (or of an optional exclusion
set such as evaluation splits) and are pairwise distinct.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .graph import (
    DOMAIN,
    RANGE,
    SUB_CLASS,
    SUB_PROPERTY,
    TYPE,
    KnowledgeGraph,
    clustering_coefficients,
    keys_isin,
    triple_keys,
)

logger = logging.getLogger(__name__)

SCHEMA_RELATIONS = (DOMAIN, RANGE, SUB_PROPERTY, SUB_CLASS)


@dataclass
class GeneratorConfig:
    strategy: str = "cluster"
    budget: int = 1000
    smoothing: float = 0.01
    type_filter: bool = True
    #: ``inverse`` favours sparse neighbourhoods, ``direct`` weights by cc itself
    weight: str = "inverse"
    #: also propose domain/range/subProperty/subClass triples
    schema_relations: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.strategy in ("cluster-weighted", "cluster_weighted"):
            self.strategy = "cluster"
        if self.strategy not in ("uniform", "cluster"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.budget < 0:
            raise ValueError("budget must be non-negative")
        if self.smoothing <= 0:
            raise ValueError("smoothing must be positive")
        if self.weight not in ("inverse", "direct"):
            raise ValueError(f"unknown weight mode {self.weight!r}")

    def to_dict(self) -> dict:
        return asdict(self)


class _Collector:
    """Accumulates distinct candidates not present in the excluded key set."""

    def __init__(self, g: KnowledgeGraph, exclude: np.ndarray | None, n: int):
        self.ne, self.nr = g.n_entities, g.n_relations
        keys = g.keys()
        if exclude is not None and len(exclude):
            keys = np.union1d(keys, triple_keys(exclude, self.ne, self.nr))
        self.excluded = keys
        self.seen: set[int] = set()
        self.rows: list[np.ndarray] = []
        self.n = n

    def offer(self, cand: np.ndarray) -> None:
        if len(cand) == 0 or self.full:
            return
        keys = triple_keys(cand, self.ne, self.nr)
        ok = ~keys_isin(keys, self.excluded)
        for row, key in zip(cand[ok], keys[ok].tolist()):
            if key not in self.seen:
                self.seen.add(key)
                self.rows.append(row)
                if self.full:
                    break

    @property
    def full(self) -> bool:
        return len(self.rows) >= self.n

    def result(self) -> np.ndarray:
        return np.array(self.rows, dtype=np.int64).reshape(-1, 3)


def generate_uniform(
    g: KnowledgeGraph, n: int, rng: np.random.Generator, exclude: np.ndarray | None = None
) -> np.ndarray:
    """Up to ``n`` candidates with subject, relation and object drawn uniformly.

    At most ``50 n`` draws are made; fewer than ``n`` rows come back only when
    that budget is exhausted.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    out = _Collector(g, exclude, n)
    if n == 0 or g.n_entities == 0 or g.n_relations == 0:
        return out.result()
    draws_left = 50 * n
    while not out.full and draws_left > 0:
        m = min(draws_left, max(2 * (n - len(out.rows)), 64))
        draws_left -= m
        cand = np.c_[
            rng.integers(g.n_entities, size=m),
            rng.integers(g.n_relations, size=m),
            rng.integers(g.n_entities, size=m),
        ]
        out.offer(cand)
    return out.result()


def entity_weights(g: KnowledgeGraph, cfg: GeneratorConfig, cc: np.ndarray | None = None) -> np.ndarray:
    """Unnormalised sampling weight of every entity."""
    cc = clustering_coefficients(g) if cc is None else cc
    base = 1.0 - cc if cfg.weight == "inverse" else cc
    return base + cfg.smoothing


def _typed_entities(g: KnowledgeGraph, ontology: KnowledgeGraph | None, classes: list[int]) -> np.ndarray:
    t = g.relations.get(TYPE)
    if t is None or not classes:
        return np.zeros(0, dtype=np.int64)
    rows = g.triples
    if ontology is not None and len(ontology):
        rows = np.vstack([rows, ontology.triples])
    typed = rows[rows[:, 1] == t]
    members = None
    for c in classes:
        s = set(typed[typed[:, 2] == c, 0].tolist())
        members = s if members is None else members & s
    return np.array(sorted(members or ()), dtype=np.int64)


def _schema_classes(g: KnowledgeGraph, ontology: KnowledgeGraph | None, r: int, which: str) -> list[int]:
    rel = g.relations.get(which)
    if rel is None:
        return []
    rows = g.triples if ontology is None else np.vstack([g.triples, ontology.triples])
    name = g.relations.name(r)
    ent = g.entities.get(name)
    if ent is None:
        return []
    hit = rows[(rows[:, 1] == rel) & (rows[:, 0] == ent)]
    return sorted(set(hit[:, 2].tolist()))


def relation_pools(
    g: KnowledgeGraph, r: int, cfg: GeneratorConfig, ontology: KnowledgeGraph | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Eligible subjects and objects for relation ``r``."""
    idx = g.by_relation.get(r, np.zeros(0, dtype=np.int64))
    subjects = np.unique(g.triples[idx, 0])
    objects = np.unique(g.triples[idx, 2])
    if cfg.type_filter:
        typed = _typed_entities(g, ontology, _schema_classes(g, ontology, r, DOMAIN))
        if len(typed):
            subjects = typed
        typed = _typed_entities(g, ontology, _schema_classes(g, ontology, r, RANGE))
        if len(typed):
            objects = typed
    return subjects, objects


def subject_distribution(
    g: KnowledgeGraph, r: int, cfg: GeneratorConfig, ontology: KnowledgeGraph | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Subject pool of ``r`` and the normalised probability of each member."""
    subjects, _ = relation_pools(g, r, cfg, ontology)
    w = entity_weights(g, cfg)[subjects]
    return subjects, w / w.sum() if len(w) else w


def cluster_pools(
    g: KnowledgeGraph, cfg: GeneratorConfig, ontology: KnowledgeGraph | None = None
) -> tuple[dict, np.ndarray]:
    """Per-relation ``(subjects, p_subject, objects, p_object)`` and the relation distribution.

    Relations are weighted by their triple counts; schema relations and
    relations without eligible endpoints get probability zero.
    """
    weights = entity_weights(g, cfg)
    counts = g.relation_counts().astype(np.float64)
    if not cfg.schema_relations:
        for name in SCHEMA_RELATIONS:
            rid = g.relations.get(name)
            if rid is not None and rid < len(counts):
                counts[rid] = 0.0
    pools = {}
    for r in np.flatnonzero(counts).tolist():
        subj, obj = relation_pools(g, r, cfg, ontology)
        if len(subj) == 0 or len(obj) == 0:
            logger.info("skipping relation %s: no eligible subjects or objects", g.relations.name(r))
            counts[r] = 0.0
            continue
        ws, wo = weights[subj], weights[obj]
        pools[r] = (subj, ws / ws.sum(), obj, wo / wo.sum())
    total = counts.sum()
    return pools, counts / total if total else counts


def draw_candidates(pools: dict, rel_p: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` raw draws (duplicates and known triples included)."""
    rels = rng.choice(len(rel_p), size=m, p=rel_p)
    cand = np.empty((m, 3), dtype=np.int64)
    cand[:, 1] = rels
    for r in np.unique(rels).tolist():
        mask = rels == r
        k = int(mask.sum())
        subj, ps, obj, po = pools[r]
        cand[mask, 0] = subj[rng.choice(len(subj), size=k, p=ps)]
        cand[mask, 2] = obj[rng.choice(len(obj), size=k, p=po)]
    return cand


def generate_cluster_weighted(
    g: KnowledgeGraph,
    cfg: GeneratorConfig,
    rng: np.random.Generator,
    ontology: KnowledgeGraph | None = None,
    exclude: np.ndarray | None = None,
) -> np.ndarray:
    """Candidates whose endpoints are sampled by clustering-coefficient weight.

    Relations are drawn in proportion to their triple counts; for each, the
    subject comes from the entities seen as its subject (or typed with its
    domain, when the type filter applies) and the object likewise. Draws
    that are known or repeated are rejected, up to ``50 * budget`` draws.
    """
    n = cfg.budget
    out = _Collector(g, exclude, n)
    if n == 0 or len(g) == 0:
        return out.result()
    pools, rel_p = cluster_pools(g, cfg, ontology)
    if not pools:
        return out.result()
    draws_left = 50 * n
    while not out.full and draws_left > 0:
        m = min(draws_left, max(2 * (n - len(out.rows)), 64))
        draws_left -= m
        out.offer(draw_candidates(pools, rel_p, m, rng))
    return out.result()


def generate_triples(
    g: KnowledgeGraph,
    cfg: GeneratorConfig,
    ontology: KnowledgeGraph | None = None,
    exclude: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Candidate triples not contained in ``g`` (or ``exclude``)."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    if cfg.strategy == "uniform":
        return generate_uniform(g, cfg.budget, rng, exclude)
    return generate_cluster_weighted(g, cfg, rng, ontology, exclude)
