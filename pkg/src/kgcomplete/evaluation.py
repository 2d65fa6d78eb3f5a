"""Link-prediction evaluation: splits, filtered ranks, MRR and Hits@k."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .graph import KnowledgeGraph, Vocabulary, load_graph, save_graph
from .kge.model import EmbeddingModel

HITS_AT = (1, 3, 10)
METRICS = ("mrr", "hits@1", "hits@3", "hits@10")


class SplitError(ValueError):
    pass


@dataclass(eq=False)
class Split:
    train: KnowledgeGraph
    valid: KnowledgeGraph
    test: KnowledgeGraph
    seed: int | None = None

    @property
    def entities(self) -> Vocabulary:
        return self.train.entities

    @property
    def relations(self) -> Vocabulary:
        return self.train.relations

    def known(self) -> np.ndarray:
        return np.vstack([self.train.triples, self.valid.triples, self.test.triples])

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.valid), len(self.test)

    def save(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for name in ("train", "valid", "test"):
            save_graph(getattr(self, name), d / f"{name}.tsv")

    @classmethod
    def load(cls, directory: str | Path, entities: Vocabulary | None = None, relations: Vocabulary | None = None) -> "Split":
        d = Path(directory)
        ents = Vocabulary() if entities is None else entities
        rels = Vocabulary() if relations is None else relations
        parts = {}
        for name in ("train", "valid", "test"):
            path = d / f"{name}.tsv"
            parts[name] = load_graph(path, entities=ents, relations=rels) if path.exists() else KnowledgeGraph(ents, rels)
        return cls(**parts)


def make_split(g: KnowledgeGraph, ratios=(0.8, 0.1, 0.1), seed: int = 0) -> Split:
    """Random train/valid/test split in which train covers every entity and relation.

    Held-out triples that would mention an entity or relation missing from
    train are moved into train.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or min(ratios) < 0 or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise SplitError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    if len(g) == 0:
        raise SplitError("cannot split an empty graph")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(g))
    n_train = int(round(ratios[0] * len(g)))
    n_valid = int(round(ratios[1] * len(g)))
    parts = [order[:n_train], order[n_train : n_train + n_valid], order[n_train + n_valid :]]
    t = g.triples
    seen_e = np.zeros(g.n_entities, dtype=bool)
    seen_r = np.zeros(g.n_relations, dtype=bool)
    seen_e[t[parts[0]][:, [0, 2]].ravel()] = True
    seen_r[t[parts[0]][:, 1]] = True
    train = list(parts[0])
    held = [[], []]
    for k in (1, 2):
        for i in parts[k].tolist():
            s, r, o = t[i]
            if seen_e[s] and seen_e[o] and seen_r[r]:
                held[k - 1].append(i)
            else:
                train.append(i)
                seen_e[[s, o]] = True
                seen_r[r] = True
    train_idx = np.sort(np.array(train, dtype=np.int64))
    # a triple moved to train late may cover entities of earlier held triples;
    # they stay held out, which only makes coverage stronger
    return Split(
        g.subgraph(t[train_idx]),
        g.subgraph(t[np.sort(np.array(held[0], dtype=np.int64))]),
        g.subgraph(t[np.sort(np.array(held[1], dtype=np.int64))]),
        seed,
    )


# ranking ------------------------------------------------------------------------


class _Filter:
    def __init__(self, known: np.ndarray):
        self.objects: dict = defaultdict(list)
        self.subjects: dict = defaultdict(list)
        for s, r, o in np.asarray(known, dtype=np.int64).reshape(-1, 3).tolist():
            self.objects[(s, r)].append(o)
            self.subjects[(r, o)].append(s)


def _ranks_from_scores(scores: np.ndarray, targets: np.ndarray, filtered: list[list[int]] | None) -> np.ndarray:
    rows = np.arange(len(targets))
    target_scores = scores[rows, targets].copy()
    if filtered is not None:
        for i, ids in enumerate(filtered):
            if ids:
                scores[i, ids] = -np.inf
        scores[rows, targets] = target_scores
    # t itself counts once, equal-scored corruptions rank above t
    return (scores >= target_scores[:, None]).sum(axis=1)


def filtered_rank(m: EmbeddingModel, t, known, side: str, filtered: bool = True) -> int:
    """Rank of ``t`` among all corruptions of one side.

    ``known`` holds true triples (train, valid, test, ...); those other than
    ``t`` are dropped from the competition. Ties count against ``t``.
    """
    s, r, o = (int(x) for x in t)
    known = np.asarray(list(known) if not isinstance(known, np.ndarray) else known, dtype=np.int64).reshape(-1, 3)
    if side == "object":
        scores = m.all_objects(np.array([s]), np.array([r]))
        ids = known[(known[:, 0] == s) & (known[:, 1] == r), 2].tolist()
        target = o
    elif side == "subject":
        scores = m.all_subjects(np.array([r]), np.array([o]))
        ids = known[(known[:, 1] == r) & (known[:, 2] == o), 0].tolist()
        target = s
    else:
        raise ValueError("side must be 'subject' or 'object'")
    return int(_ranks_from_scores(scores, np.array([target]), [ids] if filtered else None)[0])


def rank_triples(
    m: EmbeddingModel, triples: np.ndarray, known: np.ndarray, filtered: bool = True, chunk: int = 256
) -> tuple[np.ndarray, np.ndarray]:
    """Subject-side and object-side ranks of every triple."""
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    flt = _Filter(known) if filtered else None
    subj = np.empty(len(triples), dtype=np.int64)
    obj = np.empty(len(triples), dtype=np.int64)
    for start in range(0, len(triples), chunk):
        batch = triples[start : start + chunk]
        s, r, o = batch[:, 0], batch[:, 1], batch[:, 2]
        so = m.all_objects(s, r)
        fo = [flt.objects.get((a, b), []) for a, b in zip(s.tolist(), r.tolist())] if flt else None
        obj[start : start + chunk] = _ranks_from_scores(so, o, fo)
        ss = m.all_subjects(r, o)
        fs = [flt.subjects.get((b, c), []) for b, c in zip(r.tolist(), o.tolist())] if flt else None
        subj[start : start + chunk] = _ranks_from_scores(ss, s, fs)
    return subj, obj


@dataclass
class EvalResult:
    mrr: float
    hits: dict
    count: int
    per_relation: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def hits1(self) -> float:
        return self.hits[1]

    @property
    def hits3(self) -> float:
        return self.hits[3]

    @property
    def hits10(self) -> float:
        return self.hits[10]

    def metric(self, name: str) -> float:
        if name == "mrr":
            return self.mrr
        return self.hits[int(name.split("@")[1])]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hits"] = {f"hits@{k}": v for k, v in self.hits.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EvalResult":
        hits = {int(k.split("@")[1]): v for k, v in d["hits"].items()}
        return cls(d["mrr"], hits, d["count"], d.get("per_relation", {}), d.get("metadata", {}))

    @classmethod
    def from_ranks(cls, ranks: np.ndarray, **kw) -> "EvalResult":
        ranks = np.asarray(ranks, dtype=np.float64)
        if len(ranks) == 0:
            raise ValueError("no ranks to aggregate")
        return cls(
            float(np.mean(1.0 / ranks)),
            {k: float(np.mean(ranks <= k)) for k in HITS_AT},
            len(ranks),
            **kw,
        )


def evaluate(
    m: EmbeddingModel,
    split: Split,
    extra_known: np.ndarray | None = None,
    filtered: bool = True,
) -> EvalResult:
    """Filtered MRR and Hits@{1,3,10} over both corruption sides of the test set.

    ``extra_known`` (e.g. reasoner-derived triples) joins the filter set but is
    never evaluated.
    """
    test = split.test.triples
    if len(test) == 0:
        raise ValueError("test set is empty")
    known = split.known()
    if extra_known is not None and len(extra_known):
        known = np.vstack([known, np.asarray(extra_known, dtype=np.int64).reshape(-1, 3)])
    subj, obj = rank_triples(m, test, known, filtered)
    ranks = np.concatenate([subj, obj])
    per_relation = {}
    for r in np.unique(test[:, 1]).tolist():
        mask = test[:, 1] == r
        sub = EvalResult.from_ranks(np.concatenate([subj[mask], obj[mask]]))
        per_relation[split.relations.name(r)] = {
            "mrr": sub.mrr,
            **{f"hits@{k}": v for k, v in sub.hits.items()},
            "count": int(mask.sum()),
        }
    meta = {"sides": "both", "ties": "pessimistic", "filtered": filtered}
    res = EvalResult.from_ranks(ranks, per_relation=per_relation, metadata=meta)
    res.count = len(test)
    return res


def mean_result(results: list[EvalResult]) -> EvalResult:
    """Metric-wise average of several runs (per-relation detail dropped)."""
    return EvalResult(
        float(np.mean([r.mrr for r in results])),
        {k: float(np.mean([r.hits[k] for r in results])) for k in HITS_AT},
        int(sum(r.count for r in results)),
        metadata={"runs": len(results)},
    )


def compare(vanilla: EvalResult, star: EvalResult) -> dict:
    """Per-metric values, differences and ratios (``star / vanilla``)."""
    out = {}
    for name in METRICS:
        a, b = vanilla.metric(name), star.metric(name)
        ratio = b / a if a else (1.0 if b == a else math.inf)
        out[name] = {"vanilla": a, "star": b, "delta": b - a, "ratio": ratio}
    return out


def format_table(rows: list[tuple[str, EvalResult]], title: str | None = None) -> str:
    """Aligned text table: Method / MRR / Hits@1 / Hits@3 / Hits@10."""
    header = ("Method", "MRR", "Hits@1", "Hits@3", "Hits@10")
    width = max([len(header[0])] + [len(name) for name, _ in rows])
    lines = []
    if title:
        lines.append(title)
    line = f"{header[0]:<{width}}  " + "  ".join(f"{h:>7}" for h in header[1:])
    lines += [line, "-" * len(line)]
    for name, res in rows:
        vals = [res.mrr, res.hits[1], res.hits[3], res.hits[10]]
        lines.append(f"{name:<{width}}  " + "  ".join(f"{v:>7.3f}" for v in vals))
    return "\n".join(lines)


def format_comparison(cmp: dict) -> str:
    lines = [f"{'Metric':<8}  {'vanilla':>8}  {'star':>8}  {'delta':>8}  {'ratio':>7}"]
    for name, c in cmp.items():
        lines.append(
            f"{name:<8}  {c['vanilla']:>8.4f}  {c['star']:>8.4f}  {c['delta']:>+8.4f}  {c['ratio']:>7.3f}"
        )
    return "\n".join(lines)


def write_json(obj, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
