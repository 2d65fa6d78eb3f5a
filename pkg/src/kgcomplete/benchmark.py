"""Vanilla KGE versus loop-augmented KGE (KGE*) on the same split."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .evaluation import EvalResult, Split, compare, evaluate, make_split
from .graph import REASONER, KnowledgeGraph, keys_isin, triple_keys
from .kge.model import EmbeddingModel
from .kge.train import fit
from .loop import LoopConfig, LoopReport, run_loop

logger = logging.getLogger(__name__)


def withheld_split(
    g: KnowledgeGraph,
    withheld: KnowledgeGraph,
    ontology: KnowledgeGraph | None = None,
    ratios=(0.8, 0.1, 0.1),
    withheld_fraction: float = 0.3,
    seed: int = 0,
) -> Split:
    """Split ``g`` and top up the test set with withheld (derivable) triples.

    Enough withheld triples are added that they make up at least
    ``withheld_fraction`` of the test set; only those whose entities and
    relation occur in train (or the ontology) are eligible.
    """
    base = make_split(g, ratios, seed)
    if not 0.0 <= withheld_fraction < 1.0:
        raise ValueError("withheld_fraction must lie in [0, 1)")
    cover = base.train.triples if ontology is None else np.vstack([base.train.triples, ontology.triples])
    ents = np.zeros(g.n_entities, dtype=bool)
    rels = np.zeros(g.n_relations, dtype=bool)
    ents[cover[:, [0, 2]].ravel()] = True
    rels[cover[:, 1]] = True
    w = withheld.triples
    w = w[ents[w[:, 0]] & ents[w[:, 2]] & rels[w[:, 1]]]
    n_regular = len(base.test)
    need = math.ceil(withheld_fraction / (1.0 - withheld_fraction) * n_regular) if withheld_fraction else 0
    rng = np.random.default_rng(seed + 7919)
    pick = np.sort(rng.choice(len(w), size=min(need, len(w)), replace=False)) if len(w) else np.zeros(0, dtype=np.int64)
    test = base.test.with_triples(w[pick])
    return Split(base.train, base.valid, test, seed)


def withheld_share(split: Split, withheld: KnowledgeGraph) -> float:
    test = split.test.triples
    if len(test) == 0:
        return 0.0
    keys = np.sort(triple_keys(withheld.triples, split.train.n_entities, split.train.n_relations))
    return float(keys_isin(triple_keys(test, split.train.n_entities, split.train.n_relations), keys).mean())


@dataclass
class PipelineResult:
    vanilla: EvalResult
    star: EvalResult
    loop_report: LoopReport
    comparison: dict
    seconds: dict = field(default_factory=dict)
    vanilla_model: EmbeddingModel | None = None
    star_model: EmbeddingModel | None = None
    graph: KnowledgeGraph | None = None

    def to_dict(self) -> dict:
        return {
            "vanilla": self.vanilla.to_dict(),
            "star": self.star.to_dict(),
            "loop": self.loop_report.to_dict(timings=False),
            "comparison": self.comparison,
            "seconds": self.seconds,
        }


def run_vanilla_vs_star(
    split: Split,
    ontology: KnowledgeGraph | None,
    cfg: LoopConfig,
) -> PipelineResult:
    """Train a plain model and a loop model on ``split.train`` and evaluate both.

    Both evaluations share one filter set: train, valid and test plus every
    triple the reasoner derived during the loop. Held-out triples are never
    proposed as loop candidates.
    """
    train = split.train
    if cfg.schema_in_training and ontology is not None and len(ontology):
        vanilla_train = train.with_triples(ontology.triples)
    else:
        vanilla_train = train
    t0 = time.perf_counter()
    vanilla_model = fit(vanilla_train, cfg.train, split.valid.triples)
    t1 = time.perf_counter()
    exclude = np.vstack([split.valid.triples, split.test.triples])
    final, star_model, report = run_loop(train, ontology, cfg, valid=split.valid, exclude=exclude)
    t2 = time.perf_counter()
    derived = final.triples[final.provenance == REASONER]
    vanilla = evaluate(vanilla_model, split, extra_known=derived)
    star = evaluate(star_model, split, extra_known=derived)
    t3 = time.perf_counter()
    return PipelineResult(
        vanilla,
        star,
        report,
        compare(vanilla, star),
        {"vanilla_fit": t1 - t0, "loop": t2 - t1, "evaluate": t3 - t2},
        vanilla_model,
        star_model,
        final,
    )


def with_seed(cfg: LoopConfig, seed: int) -> LoopConfig:
    return replace(cfg, train=replace(cfg.train, seed=seed), generator=replace(cfg.generator, seed=seed))
