"""Embedding parameter tables and the on-disk checkpoint format.

Checkpoint layout (all integers and floats little-endian)::

    b"KGECKPT\\n"                      8-byte magic
    <header length: uint64>
    <header: UTF-8 JSON, sorted keys>  kind, dim, n_entities, n_relations,
                                       entity_width, relation_width,
                                       calibration [a, b], dtype "<f8",
                                       optional vocabularies
    <entity table: float64, row-major, n_entities x entity_width>
    <relation table: float64, row-major, n_relations x relation_width>

Floats in the header are written with their shortest round-trip repr, so a
save / load cycle is bit-exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .scoring import ScoringFunction, canonical_kind, get_scoring_function

MAGIC = b"KGECKPT\n"


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    return np.exp(-np.logaddexp(0.0, -x))


@dataclass(eq=False)
class EmbeddingModel:
    kind: str
    dim: int
    entity_emb: np.ndarray
    relation_emb: np.ndarray
    calibration: tuple[float, float] = (1.0, 0.0)
    scorer: ScoringFunction = field(init=False, repr=False)

    def __post_init__(self):
        self.kind = canonical_kind(self.kind)
        self.scorer = get_scoring_function(self.kind)
        if self.dim <= 0:
            raise ValueError("dimension must be positive")
        ew, rw = self.scorer.entity_width(self.dim), self.scorer.relation_width(self.dim)
        if self.entity_emb.ndim != 2 or self.entity_emb.shape[1] != ew:
            raise ValueError(f"entity table must have width {ew}")
        if self.relation_emb.ndim != 2 or self.relation_emb.shape[1] != rw:
            raise ValueError(f"relation table must have width {rw}")
        self.calibration = (float(self.calibration[0]), float(self.calibration[1]))

    @property
    def n_entities(self) -> int:
        return self.entity_emb.shape[0]

    @property
    def n_relations(self) -> int:
        return self.relation_emb.shape[0]

    def _check(self, triples: np.ndarray) -> np.ndarray:
        t = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        if len(t):
            if t[:, [0, 2]].min() < 0 or t[:, [0, 2]].max() >= self.n_entities:
                raise IndexError("entity id out of range for this model")
            if t[:, 1].min() < 0 or t[:, 1].max() >= self.n_relations:
                raise IndexError("relation id out of range for this model")
        return t

    def score_many(self, triples: np.ndarray) -> np.ndarray:
        t = self._check(triples)
        E, R = self.entity_emb, self.relation_emb
        return self.scorer.score(E[t[:, 0]], R[t[:, 1]], E[t[:, 2]])

    def score(self, triple) -> float:
        return float(self.score_many(np.asarray(triple).reshape(1, 3))[0])

    def probability(self, scores) -> np.ndarray:
        a, b = self.calibration
        return sigmoid(a * np.asarray(scores) + b)

    def all_objects(self, subjects, relations) -> np.ndarray:
        """Scores of ``(s, r, e)`` for every entity ``e``."""
        E, R = self.entity_emb, self.relation_emb
        return self.scorer.score_all_objects(E[subjects], R[relations], E)

    def all_subjects(self, relations, objects) -> np.ndarray:
        E, R = self.entity_emb, self.relation_emb
        return self.scorer.score_all_subjects(R[relations], E[objects], E)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.entity_emb).all() and np.isfinite(self.relation_emb).all())

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(
            self.kind, self.dim, self.entity_emb.copy(), self.relation_emb.copy(), self.calibration
        )


def init_model(kind: str, dim: int, n_entities: int, n_relations: int, rng: np.random.Generator) -> EmbeddingModel:
    """Uniform initialisation in ``[-6/sqrt(d), 6/sqrt(d)]``."""
    scorer = get_scoring_function(kind)
    bound = 6.0 / np.sqrt(dim)
    E = rng.uniform(-bound, bound, size=(n_entities, scorer.entity_width(dim)))
    R = rng.uniform(-bound, bound, size=(n_relations, scorer.relation_width(dim)))
    return EmbeddingModel(kind, dim, E, R)


def grow_model(m: EmbeddingModel, n_entities: int, n_relations: int, rng: np.random.Generator) -> EmbeddingModel:
    """Copy of ``m`` with freshly initialised rows for new vocabulary entries."""
    bound = 6.0 / np.sqrt(m.dim)
    E, R = m.entity_emb, m.relation_emb
    if n_entities > len(E):
        E = np.vstack([E, rng.uniform(-bound, bound, size=(n_entities - len(E), E.shape[1]))])
    if n_relations > len(R):
        R = np.vstack([R, rng.uniform(-bound, bound, size=(n_relations - len(R), R.shape[1]))])
    return EmbeddingModel(m.kind, m.dim, E.copy(), R.copy(), m.calibration)


def save_checkpoint(m: EmbeddingModel, path: str | Path, entities=None, relations=None) -> None:
    header = {
        "format": 1,
        "kind": m.kind,
        "dim": m.dim,
        "n_entities": m.n_entities,
        "n_relations": m.n_relations,
        "entity_width": m.entity_emb.shape[1],
        "relation_width": m.relation_emb.shape[1],
        "calibration": list(m.calibration),
        "dtype": "<f8",
    }
    if entities is not None:
        header["entities"] = list(entities)[: m.n_entities]
    if relations is not None:
        header["relations"] = list(relations)[: m.n_relations]
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(m.entity_emb, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(m.relation_emb, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> tuple[EmbeddingModel, dict]:
    """Return the model and the decoded header (which may carry vocabularies)."""
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path} is not a model checkpoint")
        (size,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(size).decode("utf-8"))
        ne, ew = header["n_entities"], header["entity_width"]
        nr, rw = header["n_relations"], header["relation_width"]
        E = np.frombuffer(fh.read(8 * ne * ew), dtype="<f8").reshape(ne, ew).astype(np.float64)
        R = np.frombuffer(fh.read(8 * nr * rw), dtype="<f8").reshape(nr, rw).astype(np.float64)
    model = EmbeddingModel(header["kind"], header["dim"], E, R, tuple(header["calibration"]))
    return model, header
