"""Dictionary-encoded knowledge graphs, loaders and structural statistics."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
from scipy import sparse

logger = logging.getLogger(__name__)

TYPE = "type"
DOMAIN = "domain"
RANGE = "range"
SUB_PROPERTY = "subProperty"
SUB_CLASS = "subClass"
RESERVED_RELATIONS = (TYPE, DOMAIN, RANGE, SUB_PROPERTY, SUB_CLASS)

# provenance codes stored alongside each triple
INPUT, KGE, REASONER = 0, 1, 2
PROVENANCE_NAMES = {INPUT: "input", KGE: "kge", REASONER: "reasoner"}

RDFS_ALIASES = {
    "rdf:type": TYPE,
    "a": TYPE,
    "http://www.w3.org/1999/02/22-rdf-syntax-ns#type": TYPE,
    "rdfs:domain": DOMAIN,
    "http://www.w3.org/2000/01/rdf-schema#domain": DOMAIN,
    "rdfs:range": RANGE,
    "http://www.w3.org/2000/01/rdf-schema#range": RANGE,
    "rdfs:subPropertyOf": SUB_PROPERTY,
    "http://www.w3.org/2000/01/rdf-schema#subPropertyOf": SUB_PROPERTY,
    "rdfs:subClassOf": SUB_CLASS,
    "http://www.w3.org/2000/01/rdf-schema#subClassOf": SUB_CLASS,
}


class ParseError(ValueError):
    """A triple file line that could not be parsed."""

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = f"{path}:{line}: " if line is not None else ""
        super().__init__(where + message)


class Vocabulary:
    """Append-only bijection between strings and dense integer ids."""

    def __init__(self, names: Iterable[str] = ()):
        self._names: list[str] = []
        self._ids: dict[str, int] = {}
        for name in names:
            self.add(name)

    def add(self, name: str) -> int:
        idx = self._ids.get(name)
        if idx is None:
            idx = len(self._names)
            self._ids[name] = idx
            self._names.append(name)
        return idx

    def id(self, name: str) -> int:
        return self._ids[name]

    def get(self, name: str, default=None):
        return self._ids.get(name, default)

    def name(self, idx: int) -> str:
        if idx < 0:
            raise IndexError(idx)
        return self._names[idx]

    def encode(self, names: Iterable[str]) -> list[int]:
        return [self._ids[n] for n in names]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self._names[i] for i in ids]

    @property
    def names(self) -> list[str]:
        return list(self._names)

    def copy(self) -> "Vocabulary":
        return Vocabulary(self._names)

    def __contains__(self, name: object) -> bool:
        return name in self._ids

    def __len__(self) -> int:
        return len(self._names)

    def __iter__(self) -> Iterator[str]:
        return iter(self._names)

    def __repr__(self) -> str:
        return f"Vocabulary({len(self)} names)"


def _dedupe(triples: np.ndarray, provenance: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if len(triples) == 0:
        return triples, provenance
    _, first = np.unique(triples, axis=0, return_index=True)
    first.sort()
    return triples[first], provenance[first]


@dataclass(eq=False)
class KnowledgeGraph:
    """A deduplicated set of ``(subject, relation, object)`` id triples.

    The triple array is treated as read-only once the graph is built; use
    :meth:`with_triples` to obtain a grown copy. Vocabularies may be shared
    between graphs (e.g. a graph, its ontology and its splits), which keeps ids
    comparable across them.
    """

    entities: Vocabulary
    relations: Vocabulary
    triples: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.int64))
    provenance: np.ndarray | None = None

    def __post_init__(self):
        triples = np.asarray(self.triples, dtype=np.int64).reshape(-1, 3)
        prov = (
            np.full(len(triples), INPUT, dtype=np.int8)
            if self.provenance is None
            else np.asarray(self.provenance, dtype=np.int8)
        )
        if len(prov) != len(triples):
            raise ValueError("provenance length does not match triple count")
        triples, prov = _dedupe(triples, prov)
        if len(triples):
            if triples[:, [0, 2]].min() < 0 or triples[:, [0, 2]].max() >= len(self.entities):
                raise IndexError("entity id out of range")
            if triples[:, 1].min() < 0 or triples[:, 1].max() >= len(self.relations):
                raise IndexError("relation id out of range")
        triples.setflags(write=False)
        prov.setflags(write=False)
        self.triples = triples
        self.provenance = prov
        self._keys: tuple | None = None
        self._set: frozenset | None = None
        self._by_subject: dict | None = None
        self._by_object: dict | None = None
        self._by_relation: dict | None = None

    # construction helpers -------------------------------------------------

    @classmethod
    def from_labeled(
        cls,
        triples: Iterable[tuple[str, str, str]],
        entities: Vocabulary | None = None,
        relations: Vocabulary | None = None,
    ) -> "KnowledgeGraph":
        entities = Vocabulary() if entities is None else entities
        relations = Vocabulary() if relations is None else relations
        rows = [(entities.add(s), relations.add(r), entities.add(o)) for s, r, o in triples]
        return cls(entities, relations, np.array(rows, dtype=np.int64).reshape(-1, 3))

    def with_triples(self, triples: np.ndarray, provenance: int | np.ndarray = INPUT) -> "KnowledgeGraph":
        """Return a new graph holding these triples plus ``triples``.

        Existing triples keep their provenance; only genuinely new rows take
        the given one.
        """
        triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        prov = np.broadcast_to(np.asarray(provenance, dtype=np.int8), (len(triples),))
        return KnowledgeGraph(
            self.entities,
            self.relations,
            np.concatenate([self.triples, triples]),
            np.concatenate([self.provenance, prov]),
        )

    def subgraph(self, triples: np.ndarray) -> "KnowledgeGraph":
        """A graph over the same vocabularies holding only ``triples``."""
        return KnowledgeGraph(self.entities, self.relations, triples)

    # views ------------------------------------------------------------------

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self) -> Iterator[tuple[int, int, int]]:
        return (tuple(t) for t in self.triples.tolist())

    def __contains__(self, triple) -> bool:
        return tuple(int(x) for x in triple) in self.triple_set

    @property
    def triple_set(self) -> frozenset:
        if self._set is None:
            self._set = frozenset(map(tuple, self.triples.tolist()))
        return self._set

    def keys(self) -> np.ndarray:
        """Sorted scalar keys of the triples, for vectorised membership tests."""
        # vocabularies may grow after construction, which changes the encoding
        sizes = (self.n_entities, self.n_relations)
        if self._keys is None or self._keys[0] != sizes:
            self._keys = (sizes, np.sort(triple_keys(self.triples, *sizes)))
        return self._keys[1]

    def contains_many(self, triples: np.ndarray) -> np.ndarray:
        return keys_isin(triple_keys(triples, self.n_entities, self.n_relations), self.keys())

    def labeled(self) -> list[tuple[str, str, str]]:
        e, r = self.entities, self.relations
        return [(e.name(s), r.name(p), e.name(o)) for s, p, o in self.triples.tolist()]

    def _index(self, column: int) -> dict[int, np.ndarray]:
        order = np.argsort(self.triples[:, column], kind="stable")
        col = self.triples[order, column]
        bounds = np.flatnonzero(np.diff(col)) + 1
        starts = np.r_[0, bounds] if len(col) else np.zeros(0, dtype=np.int64)
        return {int(col[i]): grp for i, grp in zip(starts, np.split(order, bounds)) if len(grp)}

    @property
    def by_subject(self) -> dict[int, np.ndarray]:
        """Subject id -> row indices into :attr:`triples`."""
        if self._by_subject is None:
            self._by_subject = self._index(0)
        return self._by_subject

    @property
    def by_relation(self) -> dict[int, np.ndarray]:
        if self._by_relation is None:
            self._by_relation = self._index(1)
        return self._by_relation

    @property
    def by_object(self) -> dict[int, np.ndarray]:
        if self._by_object is None:
            self._by_object = self._index(2)
        return self._by_object

    def relation_counts(self) -> np.ndarray:
        return np.bincount(self.triples[:, 1], minlength=self.n_relations)

    def __repr__(self) -> str:
        return (
            f"KnowledgeGraph({len(self)} triples, {self.n_entities} entities, "
            f"{self.n_relations} relations)"
        )


def triple_keys(triples: np.ndarray, n_entities: int, n_relations: int) -> np.ndarray:
    """Encode id triples as unique int64 scalars."""
    t = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    return (t[:, 0] * max(n_relations, 1) + t[:, 1]) * max(n_entities, 1) + t[:, 2]


def keys_isin(keys: np.ndarray, sorted_keys: np.ndarray) -> np.ndarray:
    if len(sorted_keys) == 0:
        return np.zeros(len(keys), dtype=bool)
    pos = np.searchsorted(sorted_keys, keys)
    pos[pos == len(sorted_keys)] = 0
    return sorted_keys[pos] == keys


# file I/O -------------------------------------------------------------------

_NT_TERM = re.compile(r'<[^>]*>|"(?:[^"\\]|\\.)*"(?:\^\^<[^>]*>|@[\w-]+)?|[^\s<>"]+')


def _strip_iri(term: str) -> str:
    return term[1:-1] if term.startswith("<") and term.endswith(">") else term


def _parse_tsv_line(line: str) -> list[str]:
    parts = line.split("\t") if "\t" in line else line.split()
    return [p.strip() for p in parts if p.strip()]


def _parse_nt_line(line: str, path, lineno: int) -> list[str]:
    body = line.rstrip()
    if not body.endswith("."):
        raise ParseError("N-Triples statement must end with '.'", path, lineno)
    terms = _NT_TERM.findall(body[:-1])
    for term in terms:
        if term.startswith('"'):
            raise ParseError(f"literals are not supported: {term}", path, lineno)
        if term.startswith("_:"):
            raise ParseError(f"blank nodes are not supported: {term}", path, lineno)
    return [_strip_iri(t) for t in terms]


def read_triples(
    path: str | Path, format: str = "tsv", rdfs_aliases: bool = False
) -> list[tuple[str, str, str]]:
    """Read labeled triples from ``path`` without encoding them."""
    if format not in ("tsv", "ntriples"):
        raise ValueError(f"unknown triple format {format!r}")
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if format == "tsv":
                terms = _parse_tsv_line(line)
            else:
                terms = _parse_nt_line(line, path, lineno)
            if len(terms) != 3:
                raise ParseError(f"expected 3 terms, found {len(terms)}", path, lineno)
            s, r, o = terms
            if rdfs_aliases:
                r = RDFS_ALIASES.get(r, r)
            rows.append((s, r, o))
    return rows


def load_graph(
    path: str | Path,
    format: str = "tsv",
    entities: Vocabulary | None = None,
    relations: Vocabulary | None = None,
    rdfs_aliases: bool = False,
) -> KnowledgeGraph:
    """Load a triple file; ids follow first-occurrence order.

    Pass the vocabularies of an existing graph to encode into the same id
    space (needed for ontologies and evaluation splits).
    """
    return KnowledgeGraph.from_labeled(read_triples(path, format, rdfs_aliases), entities, relations)


def save_graph(g: KnowledgeGraph, path: str | Path, provenance: bool = False) -> None:
    """Write ``g`` as tab-separated lines, optionally with a provenance column."""
    with open(path, "w", encoding="utf-8") as fh:
        for (s, r, o), p in zip(g.labeled(), g.provenance.tolist()):
            if provenance:
                fh.write(f"{s}\t{r}\t{o}\t{PROVENANCE_NAMES[p]}\n")
            else:
                fh.write(f"{s}\t{r}\t{o}\n")


def write_labeled(rows: Iterable[tuple[str, ...]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write("\t".join(row) + "\n")


# statistics -------------------------------------------------------------------


def undirected_adjacency(g: KnowledgeGraph) -> sparse.csr_matrix:
    """Simple undirected projection: labels and multi-edges merged, loops dropped."""
    n = g.n_entities
    s, o = g.triples[:, 0], g.triples[:, 2]
    keep = s != o
    s, o = s[keep], o[keep]
    data = np.ones(2 * len(s), dtype=np.float64)
    adj = sparse.coo_matrix((data, (np.r_[s, o], np.r_[o, s])), shape=(n, n)).tocsr()
    adj.data[:] = 1.0
    adj.eliminate_zeros()
    return adj


def clustering_coefficients(g: KnowledgeGraph) -> np.ndarray:
    """Local clustering coefficient of every entity.

    ``cc(e) = 2 T(e) / (deg(e) (deg(e) - 1))`` on the undirected simple
    projection of ``g``; zero for nodes of degree at most one.
    """
    adj = undirected_adjacency(g)
    deg = np.asarray(adj.sum(axis=1)).ravel()
    # (A @ A) ∘ A summed per row counts each triangle through a node twice
    closed = np.asarray((adj @ adj).multiply(adj).sum(axis=1)).ravel()
    cc = np.zeros(g.n_entities, dtype=np.float64)
    ok = deg > 1
    cc[ok] = closed[ok] / (deg[ok] * (deg[ok] - 1))
    return np.clip(cc, 0.0, 1.0)


def clustering_coefficient(g: KnowledgeGraph, e: int) -> float:
    if not 0 <= e < g.n_entities:
        raise IndexError(f"entity id {e} out of range")
    return float(clustering_coefficients(g)[e])


def complement_excluded_size(g: KnowledgeGraph) -> int:
    """Number of triples in the full candidate space ``N^2 R`` absent from ``g``."""
    n, r = g.n_entities, g.n_relations
    return n * n * r - len(g)
