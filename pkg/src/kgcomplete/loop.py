"""Alternate KGE prediction and rule inference until nothing new is produced."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .generator import GeneratorConfig, generate_triples
from .graph import KGE, REASONER, KnowledgeGraph, save_graph
from .kge.model import EmbeddingModel, save_checkpoint
from .kge.train import TrainConfig, accept, fit, predict
from .reasoner import RuleSet, infer

logger = logging.getLogger(__name__)

REPORT_SCHEMA = "kgcomplete.loop-report/1"


class LoopError(RuntimeError):
    """An iteration failed; carries the state after the last completed one."""

    def __init__(self, iteration: int, graph: KnowledgeGraph, model, report: "LoopReport", cause: Exception):
        self.iteration = iteration
        self.graph = graph
        self.model = model
        self.report = report
        super().__init__(f"iteration {iteration} failed: {cause}")


@dataclass
class LoopConfig:
    threshold: float = 0.9
    max_iterations: int = 10
    candidate_budget: int = 1000
    retrain: str = "warm-start"
    #: epochs for warm-start refits; defaults to a quarter of the full schedule
    warm_epochs: int | None = None
    order: str = "kge-first"
    schema_in_training: bool = True
    train: TrainConfig = field(default_factory=TrainConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    rules: RuleSet = field(default_factory=RuleSet)
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if self.retrain not in ("warm-start", "full-retrain"):
            raise ValueError(f"unknown retrain policy {self.retrain!r}")
        if self.order not in ("kge-first", "reasoner-first"):
            raise ValueError(f"unknown order {self.order!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rules"] = self.rules.names()
        return d


@dataclass
class IterationStats:
    iteration: int
    candidates: int = 0
    accepted: int = 0
    inferred: int = 0
    kg_size: int = 0
    seconds: dict = field(default_factory=dict)


@dataclass
class LoopReport:
    initial_size: int
    iterations: list = field(default_factory=list)
    termination: str = ""

    @property
    def sizes(self) -> list[int]:
        return [self.initial_size] + [it.kg_size for it in self.iterations]

    def to_dict(self, timings: bool = True) -> dict:
        """Plain-data form; ``timings=False`` drops wall-clock fields for reproducible files."""
        its = [asdict(it) for it in self.iterations]
        if not timings:
            for it in its:
                it.pop("seconds")
        return {
            "schema": REPORT_SCHEMA,
            "initial_size": self.initial_size,
            "termination": self.termination,
            "iterations": its,
        }

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), indent=2, sort_keys=True)

    def format_table(self) -> str:
        head = f"{'iter':>4}  {'candidates':>10}  {'accepted':>8}  {'inferred':>8}  {'kg size':>8}  {'seconds':>8}"
        lines = [head, "-" * len(head)]
        for it in self.iterations:
            secs = sum(it.seconds.values())
            lines.append(
                f"{it.iteration:>4}  {it.candidates:>10}  {it.accepted:>8}  {it.inferred:>8}  {it.kg_size:>8}  {secs:>8.2f}"
            )
        lines.append(f"termination: {self.termination}")
        return "\n".join(lines)


def _align(ontology: KnowledgeGraph | None, g: KnowledgeGraph) -> KnowledgeGraph | None:
    if ontology is None:
        return None
    if ontology.entities is g.entities and ontology.relations is g.relations:
        return ontology
    return KnowledgeGraph.from_labeled(ontology.labeled(), g.entities, g.relations)


def _training_graph(current: KnowledgeGraph, ontology, cfg: LoopConfig) -> KnowledgeGraph:
    if cfg.schema_in_training and ontology is not None and len(ontology):
        return current.with_triples(ontology.triples)
    return current


def _array(kg: KnowledgeGraph | np.ndarray | None) -> np.ndarray:
    if kg is None:
        return np.zeros((0, 3), dtype=np.int64)
    return kg.triples if isinstance(kg, KnowledgeGraph) else np.asarray(kg, dtype=np.int64).reshape(-1, 3)


class _Runner:
    def __init__(self, ontology, cfg: LoopConfig, valid, exclude):
        self.ontology = ontology
        self.cfg = cfg
        self.valid = valid
        self.exclude = exclude
        self.model: EmbeddingModel | None = None

    def fit(self, current: KnowledgeGraph, it: int) -> EmbeddingModel:
        cfg = self.cfg
        train_graph = _training_graph(current, self.ontology, cfg)
        if cfg.retrain == "warm-start" and self.model is not None:
            epochs = cfg.warm_epochs or max(1, cfg.train.epochs // 4)
            tc = replace(cfg.train, seed=cfg.train.seed + it)
            return fit(train_graph, tc, self.valid, init=self.model, epochs=epochs)
        return fit(train_graph, cfg.train, self.valid)

    def kge_phase(self, current: KnowledgeGraph, it: int, stats: IterationStats) -> np.ndarray:
        cfg = self.cfg
        t0 = time.perf_counter()
        self.model = self.fit(current, it)
        t1 = time.perf_counter()
        gen = replace(cfg.generator, budget=cfg.candidate_budget, seed=cfg.generator.seed + it)
        train_graph = _training_graph(current, self.ontology, cfg)
        cands = generate_triples(train_graph, gen, self.ontology, self.exclude)
        t2 = time.perf_counter()
        accepted = accept(predict(cands, self.model), cfg.threshold)
        acc = np.array([st.triple for st in accepted], dtype=np.int64).reshape(-1, 3)
        t3 = time.perf_counter()
        stats.candidates = len(cands)
        stats.accepted = len(acc)
        stats.seconds.update(fit=t1 - t0, generate=t2 - t1, predict=t3 - t2)
        return acc

    def reasoner_phase(self, current: KnowledgeGraph, stats: IterationStats) -> np.ndarray:
        t0 = time.perf_counter()
        new = infer(current, self.ontology, self.cfg.rules) if len(self.cfg.rules) else None
        stats.inferred = 0 if new is None else len(new)
        stats.seconds["infer"] = time.perf_counter() - t0
        return _array(new)


def run_loop(
    g: KnowledgeGraph,
    ontology: KnowledgeGraph | None,
    cfg: LoopConfig,
    valid: KnowledgeGraph | np.ndarray | None = None,
    exclude: KnowledgeGraph | np.ndarray | None = None,
) -> tuple[KnowledgeGraph, EmbeddingModel, LoopReport]:
    """Run the prediction / inference loop on ``g``.

    Each iteration fits a model on the current triples, proposes candidates,
    keeps those with calibrated probability above the threshold, then runs
    the reasoner over the current triples plus the accepted ones. The loop
    stops once an iteration adds nothing, or after ``max_iterations``.

    ``valid`` calibrates the probabilities; ``exclude`` (e.g. held-out
    evaluation triples) is never proposed as a candidate.
    """
    if len(g) == 0:
        raise ValueError("the input graph is empty")
    ontology = _align(ontology, g)
    valid_arr = _array(valid)
    runner = _Runner(ontology, cfg, valid_arr if len(valid_arr) else None, _array(exclude))
    report = LoopReport(initial_size=len(g))
    current = g
    ckpt_root = Path(cfg.checkpoint_dir) if cfg.checkpoint_dir else None
    for it in range(1, cfg.max_iterations + 1):
        stats = IterationStats(it)
        try:
            if cfg.order == "kge-first":
                acc = runner.kge_phase(current, it, stats)
                staged = current.with_triples(acc, KGE)
                inf = runner.reasoner_phase(staged, stats)
                staged = staged.with_triples(inf, REASONER)
            else:
                inf = runner.reasoner_phase(current, stats)
                staged = current.with_triples(inf, REASONER)
                acc = runner.kge_phase(staged, it, stats)
                staged = staged.with_triples(acc, KGE)
        except Exception as exc:
            report.termination = "error"
            raise LoopError(it, current, runner.model, report, exc) from exc
        current = staged
        stats.kg_size = len(current)
        report.iterations.append(stats)
        logger.info(
            "iteration %d: %d candidates, %d accepted, %d inferred, %d triples",
            it, stats.candidates, stats.accepted, stats.inferred, stats.kg_size,
        )
        if ckpt_root is not None:
            _checkpoint(ckpt_root / f"iteration_{it:03d}", runner.model, current, acc, inf, report)
        if stats.accepted + stats.inferred == 0:
            report.termination = "fixpoint"
            break
    else:
        report.termination = "max-iterations"
    return current, runner.model, report


def _checkpoint(directory: Path, model, graph: KnowledgeGraph, acc, inf, report: LoopReport) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, directory / "model.ckpt", graph.entities, graph.relations)
    rows = np.vstack([acc, inf]).reshape(-1, 3)
    prov = np.r_[np.full(len(acc), KGE), np.full(len(inf), REASONER)].astype(np.int8)
    delta = KnowledgeGraph(graph.entities, graph.relations, rows, prov)
    save_graph(delta, directory / "delta.tsv", provenance=True)
    (directory / "report.json").write_text(report.to_json(timings=False) + "\n")
