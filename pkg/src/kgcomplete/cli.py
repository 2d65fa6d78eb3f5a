"""Command-line entry point: ``kgcomplete <command> [options]``.

Every command writes its outputs plus a ``manifest.json`` into ``--out``. The
manifest records the fully resolved configuration, input hashes, seeds and
library versions; ``kgcomplete replay manifest.json`` reruns the command from
it and checks that every output is byte-identical.

Exit codes: 0 on success, 1 when the inputs cannot be processed (parse
errors, training failures, replay mismatch), 2 for usage and config errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .benchmark import run_vanilla_vs_star, withheld_split
from .config import ConfigError, resolve
from .evaluation import EvalResult, Split, compare, evaluate, format_comparison, format_table, make_split, write_json
from .generator import GeneratorConfig, generate_triples
from .graph import REASONER, KnowledgeGraph, ParseError, Vocabulary, load_graph, save_graph
from .kge.model import load_checkpoint, save_checkpoint
from .kge.scoring import ALIASES, MODEL_KINDS
from .kge.train import TrainConfig, TrainingError, fit
from .loop import LoopConfig, LoopError, run_loop
from .reasoner import ReasoningTimeout, RuleSyntaxError, UnsafeRuleError, infer, resolve_rules, simplify_rules
from .synth import SynthConfig, generate

logger = logging.getLogger("kgcomplete")

MANIFEST_SCHEMA = "kgcomplete.manifest/1"
TRAIN_LOG_SCHEMA = "kgcomplete.train-log/1"
EVAL_SCHEMA = "kgcomplete.eval/1"
INFER_SCHEMA = "kgcomplete.infer/1"
GENERATE_SCHEMA = "kgcomplete.generate/1"
COMPARISON_SCHEMA = "kgcomplete.comparison/1"
SYNTH_SCHEMA = "kgcomplete.synth/1"


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class Option:
    key: str
    default: Any
    help: str
    choices: tuple | None = None
    #: a path whose content hash goes into the manifest
    input: bool = False
    required: bool = False

    @property
    def flag(self) -> str:
        return "--" + self.key.replace("_", "-")


COMMON = [
    Option("seed", 0, "seed for every random choice"),
    Option("threads", 1, "training worker threads (>1 is lock-free and not reproducible)"),
    Option("deterministic", False, "force sequential, reproducible execution"),
    Option("out", "kgcomplete-out", "output directory"),
    Option("figures", True, "write PNG figures next to the data outputs"),
]

INPUT = [
    Option("graph", "", "triple file (TSV or N-Triples)", input=True),
    Option("split", "", "directory with train.tsv, valid.tsv and test.tsv", input=True),
    Option("format", "tsv", "triple file format", ("tsv", "ntriples")),
    Option("rdfs_aliases", False, "map rdf:type, rdfs:subClassOf, ... to the internal names"),
    Option("ontology", "", "schema triples (domain, range, subClass, subProperty)", input=True),
]

TRAIN = [
    Option("model", "distmult", "scoring function", MODEL_KINDS + tuple(ALIASES)),
    Option("dim", 50, "embedding dimension"),
    Option("epochs", 100, "training epochs"),
    Option("batch_size", 512, "positives per batch"),
    Option("learning_rate", 0.1, "step size"),
    Option("optimizer", "adagrad", "optimizer", ("adagrad", "sgd")),
    Option("margin", 1.0, "margin of the pairwise ranking loss"),
    Option("loss", "pairwise", "training loss", ("pairwise", "logistic")),
    Option("negatives", 2, "corruptions per positive"),
    Option("norm_constraint", True, "unit-norm entity rows for TransE"),
    Option("regularization", 0.0, "L2 weight on the touched rows"),
]

GENERATOR = [
    Option("strategy", "cluster", "candidate strategy", ("cluster", "uniform")),
    Option("budget", 1000, "number of candidates"),
    Option("smoothing", 0.01, "epsilon added to every entity weight"),
    Option("type_filter", True, "restrict subjects/objects by domain and range"),
    Option("weight", "inverse", "inverse favours sparse neighbourhoods", ("inverse", "direct")),
    Option("schema_relations", False, "also propose schema triples"),
]

LOOP = [
    Option("rules", "rdfs", "rule preset name, rules file, or 'none'", input=True),
    Option("theta", 0.9, "acceptance threshold on the calibrated probability"),
    Option("max_iters", 10, "iteration cap"),
    Option("retrain", "warm-start", "refit policy per iteration", ("warm-start", "full-retrain")),
    Option("warm_epochs", 0, "epochs per warm-start refit (0: a quarter of --epochs)"),
    Option("order", "kge-first", "phase order", ("kge-first", "reasoner-first")),
    Option("schema_in_training", True, "train on the ontology triples as well"),
    Option("checkpoints", False, "write model and delta after every iteration"),
]


def _opts(*groups) -> list[Option]:
    return [o for g in groups for o in g]


# helpers ------------------------------------------------------------------------


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _hash_input(path: str) -> dict | str | None:
    p = Path(path)
    if p.is_dir():
        return {f.name: sha256_file(f) for f in sorted(p.iterdir()) if f.is_file()}
    if p.is_file():
        return sha256_file(p)
    return None


def _versions() -> dict:
    import matplotlib
    import scipy

    return {
        "kgcomplete": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
        "python": platform.python_version(),
    }


def _train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        model=cfg["model"],
        dim=cfg["dim"],
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        learning_rate=cfg["learning_rate"],
        optimizer=cfg["optimizer"],
        margin=cfg["margin"],
        loss=cfg["loss"],
        negatives=cfg["negatives"],
        norm_constraint=cfg["norm_constraint"],
        regularization=cfg["regularization"],
        seed=cfg["seed"],
        threads=cfg["threads"],
    )


def _generator_config(cfg: dict) -> GeneratorConfig:
    return GeneratorConfig(
        strategy=cfg["strategy"],
        budget=cfg["budget"],
        smoothing=cfg["smoothing"],
        type_filter=cfg["type_filter"],
        weight=cfg["weight"],
        schema_relations=cfg["schema_relations"],
        seed=cfg["seed"],
    )


def _loop_config(cfg: dict, out: Path) -> LoopConfig:
    return LoopConfig(
        threshold=cfg["theta"],
        max_iterations=cfg["max_iters"],
        candidate_budget=cfg["budget"],
        retrain=cfg["retrain"],
        warm_epochs=cfg["warm_epochs"] or None,
        order=cfg["order"],
        schema_in_training=cfg["schema_in_training"],
        train=_train_config(cfg),
        generator=_generator_config(cfg),
        rules=resolve_rules(cfg["rules"]),
        checkpoint_dir=str(out / "iterations") if cfg["checkpoints"] else None,
    )


class _Inputs:
    """Graphs, split and ontology loaded into one shared vocabulary."""

    def __init__(self, cfg: dict, need_split: bool = False, entities=None, relations=None):
        self.entities = Vocabulary() if entities is None else entities
        self.relations = Vocabulary() if relations is None else relations
        self.graph: KnowledgeGraph | None = None
        self.split: Split | None = None
        if cfg.get("split"):
            self.split = Split.load(cfg["split"], self.entities, self.relations)
            self.graph = self.split.train
        elif cfg.get("graph"):
            self.graph = self._load(cfg["graph"], cfg)
        else:
            raise UsageError("one of --graph or --split is required")
        if need_split and self.split is None:
            raise UsageError("--split is required here")
        onto = cfg.get("ontology")
        self.ontology = self._load(onto, cfg) if onto else None

    def _load(self, path, cfg) -> KnowledgeGraph:
        return load_graph(path, cfg.get("format", "tsv"), self.entities, self.relations, cfg.get("rdfs_aliases", False))

    def training_graph(self, with_ontology: bool = True) -> KnowledgeGraph:
        if with_ontology and self.ontology is not None and len(self.ontology):
            return self.graph.with_triples(self.ontology.triples)
        return self.graph


def _write_json(obj, path: Path) -> Path:
    write_json(obj, path)
    return path


def _figure(cfg: dict, draw: Callable, *args) -> None:
    if cfg["figures"]:
        draw(*args)


# commands -----------------------------------------------------------------------


def cmd_train(cfg: dict, out: Path, timing: dict) -> dict[str, Path]:
    data = _Inputs(cfg)
    tc = _train_config(cfg)
    valid = data.split.valid.triples if data.split is not None else None
    if cfg["valid"]:
        valid = data._load(cfg["valid"], cfg).triples
    X = data.training_graph()
    history: list[float] = []
    t0 = time.perf_counter()
    model = fit(X, tc, valid, history=history)
    timing["fit"] = time.perf_counter() - t0
    ckpt = out / "model.ckpt"
    save_checkpoint(model, ckpt, data.entities, data.relations)
    log = {
        "schema": TRAIN_LOG_SCHEMA,
        "config": tc.to_dict(),
        "triples": len(X),
        "entities": X.n_entities,
        "relations": X.n_relations,
        "loss": history,
        "calibration": list(model.calibration),
    }
    outputs = {"checkpoint": ckpt}
    if data.split is not None and len(data.split.test):
        res = evaluate(model, data.split)
        log["test"] = res.to_dict()
        print(format_table([(tc.model, res)]))
    outputs["log"] = _write_json(log, out / "train.json")
    print(f"trained {tc.model} on {len(X)} triples; final loss {history[-1]:.4f}; checkpoint {ckpt}")
    return outputs


def cmd_evaluate(cfg: dict, out: Path, timing: dict) -> dict[str, Path]:
    model, header = load_checkpoint(cfg["model"])
    ents = Vocabulary(header.get("entities", ()))
    rels = Vocabulary(header.get("relations", ()))
    split = Split.load(cfg["split"], ents, rels)
    if len(ents) > model.n_entities or len(rels) > model.n_relations:
        raise ValueError("the split mentions entities or relations the model was not trained on")
    extra = None
    if cfg["extra_known"]:
        extra = load_graph(cfg["extra_known"], entities=ents, relations=rels).triples
        if len(ents) > model.n_entities or len(rels) > model.n_relations:
            raise ValueError("--extra-known mentions entities or relations the model was not trained on")
    t0 = time.perf_counter()
    res = evaluate(model, split, extra_known=extra, filtered=cfg["filtered"])
    timing["evaluate"] = time.perf_counter() - t0
    name = header["kind"]
    print(format_table([(name, res)], title="filtered" if cfg["filtered"] else "raw"))
    payload = {"schema": EVAL_SCHEMA, "model": name, "result": res.to_dict()}
    print(json.dumps({"mrr": res.mrr, **{f"hits@{k}": v for k, v in res.hits.items()}}, sort_keys=True))
    outputs = {"metrics": _write_json(payload, out / "eval.json")}
    if cfg["figures"]:
        from .plotting import plot_metrics

        outputs["figure"] = plot_metrics([(name, res)], out / "metrics.png")
    return outputs


def cmd_infer(cfg: dict, out: Path, timing: dict) -> dict[str, Path]:
    rules = resolve_rules(cfg["rules"])
    data = _Inputs(cfg)
    t0 = time.perf_counter()
    new = infer(data.graph, data.ontology, rules, simplify=cfg["simplify"])
    timing["infer"] = time.perf_counter() - t0
    path = out / "inferred.tsv"
    save_graph(new, path, provenance=True)
    plan = simplify_rules(rules)[1] if cfg["simplify"] else None
    summary = {
        "schema": INFER_SCHEMA,
        "input_triples": len(data.graph),
        "ontology_triples": 0 if data.ontology is None else len(data.ontology),
        "rules": rules.names(),
        "inferred": len(new),
        "plan": None if plan is None else plan.describe(),
    }
    print(f"{len(new)} new triples written to {path}")
    return {"triples": path, "summary": _write_json(summary, out / "infer.json")}


def cmd_generate(cfg: dict, out: Path, timing: dict) -> dict[str, Path]:
    data = _Inputs(cfg)
    exclude = []
    if data.split is not None and cfg["exclude_heldout"]:
        exclude += [data.split.valid.triples, data.split.test.triples]
    if cfg["exclude"]:
        exclude.append(data._load(cfg["exclude"], cfg).triples)
    ex = np.vstack(exclude) if exclude else None
    base = data.training_graph(with_ontology=cfg["schema_in_training"])
    gen = _generator_config(cfg)
    t0 = time.perf_counter()
    cands = generate_triples(base, gen, data.ontology, ex)
    timing["generate"] = time.perf_counter() - t0
    path = out / "candidates.tsv"
    # generation order is kept on disk
    with open(path, "w", encoding="utf-8") as fh:
        for s, r, o in cands.tolist():
            fh.write(f"{base.entities.name(s)}\t{base.relations.name(r)}\t{base.entities.name(o)}\n")
    summary = {"schema": GENERATE_SCHEMA, "config": gen.to_dict(), "candidates": len(cands)}
    print(f"{len(cands)} candidates written to {path}")
    return {"candidates": path, "summary": _write_json(summary, out / "generate.json")}


def cmd_loop(cfg: dict, out: Path, timing: dict) -> dict[str, Path]:
    lc = _loop_config(cfg, out)
    data = _Inputs(cfg)
    outputs: dict[str, Path] = {}
    if cfg["vanilla_vs_star"]:
        split = data.split
        if split is None:
            if cfg["withheld"]:
                held = data._load(cfg["withheld"], cfg)
                split = withheld_split(data.graph, held, data.ontology, withheld_fraction=cfg["withheld_fraction"], seed=cfg["seed"])
            else:
                split = make_split(data.graph, seed=cfg["seed"])
            split.save(out / "split")
            outputs.update({f"split/{n}": out / "split" / f"{n}.tsv" for n in ("train", "valid", "test")})
        res = run_vanilla_vs_star(split, data.ontology, lc)
        timing.update(res.seconds)
        kind = lc.train.model
        print(format_table([(kind, res.vanilla), (kind + "*", res.star)], title="filtered, both sides"))
        print()
        print(format_comparison(res.comparison))
        payload = {
            "schema": COMPARISON_SCHEMA,
            "model": kind,
            "vanilla": res.vanilla.to_dict(),
            "star": res.star.to_dict(),
            "comparison": res.comparison,
            "loop": res.loop_report.to_dict(timings=False),
        }
        outputs["comparison"] = _write_json(payload, out / "comparison.json")
        save_checkpoint(res.vanilla_model, out / "vanilla.ckpt", data.entities, data.relations)
        outputs["vanilla_checkpoint"] = out / "vanilla.ckpt"
        final, model, report = res.graph, res.star_model, res.loop_report
        derived = final.subgraph(final.triples[final.provenance == REASONER])
        save_graph(derived, out / "derived.tsv")
        outputs["derived"] = out / "derived.tsv"
        if cfg["figures"]:
            from .plotting import plot_comparison

            outputs["comparison_figure"] = plot_comparison(res.comparison, out / "comparison.png", (kind, kind + "*"))
    else:
        valid = data.split.valid if data.split is not None else None
        if cfg["valid"]:
            valid = data._load(cfg["valid"], cfg)
        exclude = None
        if data.split is not None:
            exclude = np.vstack([data.split.valid.triples, data.split.test.triples])
        t0 = time.perf_counter()
        final, model, report = run_loop(data.graph, data.ontology, lc, valid=valid, exclude=exclude)
        timing["loop"] = time.perf_counter() - t0
        print(report.format_table())
    save_graph(final, out / "graph.tsv", provenance=True)
    save_checkpoint(model, out / "model.ckpt", final.entities, final.relations)
    outputs["graph"] = out / "graph.tsv"
    outputs["checkpoint"] = out / "model.ckpt"
    outputs["report"] = out / "report.json"
    (out / "report.json").write_text(report.to_json(timings=False) + "\n", encoding="utf-8")
    timing["iterations"] = [it.seconds for it in report.iterations]
    if cfg["figures"]:
        from .plotting import plot_loop_report

        outputs["loop_figure"] = plot_loop_report(report, out / "loop.png")
    if lc.checkpoint_dir:
        for p in sorted(Path(lc.checkpoint_dir).rglob("*")):
            if p.is_file():
                outputs[str(p.relative_to(out))] = p
    return outputs


def cmd_synth(cfg: dict, out: Path, timing: dict) -> dict[str, Path]:
    sc = SynthConfig(
        universities=cfg["universities"],
        departments=cfg["departments"],
        professors=cfg["professors"],
        students=cfg["students"],
        courses=cfg["courses"],
        courses_per_student=cfg["courses_per_student"],
        sparsity=cfg["sparsity"],
        seed=cfg["seed"],
    )
    t0 = time.perf_counter()
    data = generate(sc)
    timing["generate"] = time.perf_counter() - t0
    paths = data.write(out)
    paths["stats"] = _write_json({"schema": SYNTH_SCHEMA, "config": sc.to_dict(), "stats": data.stats}, out / "synth.json")
    print("  ".join(f"{k}={v}" for k, v in data.stats.items()))
    return paths


def cmd_compare(cfg: dict, out: Path, timing: dict) -> dict[str, Path]:
    def load(path):
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        return EvalResult.from_dict(d.get("result", d))

    a, b = load(cfg["vanilla"]), load(cfg["star"])
    cmp = compare(a, b)
    print(format_table([(cfg["vanilla_label"], a), (cfg["star_label"], b)]))
    print()
    print(format_comparison(cmp))
    outputs = {"comparison": _write_json({"schema": COMPARISON_SCHEMA, "comparison": cmp}, out / "comparison.json")}
    if cfg["figures"]:
        from .plotting import plot_comparison

        outputs["figure"] = plot_comparison(cmp, out / "comparison.png", (cfg["vanilla_label"], cfg["star_label"]))
    return outputs


@dataclass(frozen=True)
class Command:
    name: str
    help: str
    run: Callable
    options: list


COMMANDS = {
    c.name: c
    for c in [
        Command(
            "train",
            "fit an embedding model",
            cmd_train,
            _opts(INPUT, [Option("valid", "", "held-out positives for calibration", input=True)], TRAIN, COMMON),
        ),
        Command(
            "infer",
            "forward-chain rules over a graph",
            cmd_infer,
            _opts(
                INPUT,
                [
                    Option("rules", "", "rule preset name, rules file, or 'none'", input=True, required=True),
                    Option("simplify", True, "run transitive rules on the dedicated executor"),
                ],
                COMMON,
            ),
        ),
        Command(
            "generate",
            "propose candidate triples",
            cmd_generate,
            _opts(
                INPUT,
                GENERATOR,
                [
                    Option("exclude", "", "further triples never to propose", input=True),
                    Option("exclude_heldout", True, "with --split, never propose valid/test triples"),
                    Option("schema_in_training", True, "count ontology triples as known"),
                ],
                COMMON,
            ),
        ),
        Command(
            "loop",
            "alternate prediction and inference until a fixpoint",
            cmd_loop,
            _opts(
                INPUT,
                [
                    Option("valid", "", "held-out positives for calibration", input=True),
                    Option("vanilla_vs_star", False, "also train a plain model and compare both on the test split"),
                    Option("withheld", "", "derivable triples to seed the test split with", input=True),
                    Option("withheld_fraction", 0.3, "minimum share of withheld triples in the test split"),
                ],
                LOOP,
                TRAIN,
                GENERATOR,
                COMMON,
            ),
        ),
        Command(
            "evaluate",
            "filtered MRR and Hits@k of a checkpoint",
            cmd_evaluate,
            _opts(
                [
                    Option("model", "", "model checkpoint", input=True, required=True),
                    Option("split", "", "split directory", input=True, required=True),
                    Option("extra_known", "", "additional true triples for the filter", input=True),
                    Option("filtered", True, "drop known triples from the competition"),
                ],
                COMMON,
            ),
        ),
        Command(
            "synth",
            "write a synthetic university graph",
            cmd_synth,
            _opts(
                [
                    Option("universities", 1, "universities"),
                    Option("departments", 2, "departments per university"),
                    Option("professors", 4, "professors per department"),
                    Option("students", 5, "students per professor"),
                    Option("courses", 1, "courses per professor"),
                    Option("courses_per_student", 2, "courses each student takes"),
                    Option("sparsity", 0.5, "fraction of derivable triples withheld"),
                ],
                COMMON,
            ),
        ),
        Command(
            "compare",
            "compare two evaluation results",
            cmd_compare,
            _opts(
                [
                    Option("vanilla", "", "baseline eval.json", input=True, required=True),
                    Option("star", "", "loop eval.json", input=True, required=True),
                    Option("vanilla_label", "vanilla", "row label of the baseline"),
                    Option("star_label", "star", "row label of the loop model"),
                ],
                COMMON,
            ),
        ),
    ]
}


# parsing ------------------------------------------------------------------------


def _add_option(p: argparse.ArgumentParser, o: Option) -> None:
    kw: dict[str, Any] = {"default": None, "help": f"{o.help} (default: {o.default!r})"}
    if isinstance(o.default, bool):
        p.add_argument(o.flag, action=argparse.BooleanOptionalAction, **kw)
        return
    if o.choices:
        kw["choices"] = o.choices
    p.add_argument(o.flag, type=type(o.default), metavar=o.key.upper(), **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgcomplete",
        description="Knowledge graph completion with embeddings and rules.",
        epilog="Options can also come from --config (key = value lines) or KGCOMPLETE_<KEY> variables; flags win.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for cmd in COMMANDS.values():
        p = sub.add_parser(cmd.name, help=cmd.help, description=cmd.help)
        p.add_argument("--config", default=None, help="flat key = value config file")
        for o in cmd.options:
            _add_option(p, o)
    rp = sub.add_parser("replay", help="rerun a command from its manifest and compare outputs")
    rp.add_argument("manifest", help="manifest.json of an earlier run")
    rp.add_argument("--out", default=None, help="output directory (default: <original>-replay)")
    rp.add_argument("--force", action="store_true", help="run even if input hashes changed")
    return parser


def resolve_command(cmd: Command, flags: dict, config_file: str | None, environ=None) -> dict:
    defaults = {o.key: o.default for o in cmd.options}
    cfg = resolve(defaults, config_file, {k: flags.get(k) for k in defaults}, environ)
    for o in cmd.options:
        if o.choices and cfg[o.key] not in o.choices:
            raise UsageError(f"invalid choice for {o.flag}: {cfg[o.key]!r} (choose from {', '.join(o.choices)})")
        if o.required and not cfg[o.key]:
            raise UsageError(f"{o.flag} is required")
    if cfg["deterministic"]:
        cfg["threads"] = 1
    return cfg


def execute(cmd: Command, cfg: dict, argv: list[str] | None = None) -> dict:
    """Run ``cmd`` with a resolved config and write its manifest."""
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    inputs = {}
    for o in cmd.options:
        if o.input and cfg[o.key]:
            digest = _hash_input(cfg[o.key])
            if digest is not None:
                inputs[o.key] = {"path": cfg[o.key], "sha256": digest}
    timing: dict = {}
    t0 = time.perf_counter()
    outputs = cmd.run(cfg, out, timing)
    timing["total"] = time.perf_counter() - t0
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "command": cmd.name,
        "argv": list(argv) if argv is not None else None,
        "config": cfg,
        "deterministic": cfg["threads"] == 1,
        "seeds": {"seed": cfg["seed"]},
        "inputs": inputs,
        "outputs": {k: {"path": str(p), "sha256": sha256_file(p)} for k, p in sorted(outputs.items())},
        "versions": _versions(),
        "timing": timing,
    }
    write_json(manifest, out / "manifest.json")
    return manifest


def replay(path: str, out: str | None = None, force: bool = False) -> tuple[dict, list[str]]:
    """Rerun a manifest; returns the new manifest and the names of differing outputs."""
    old = json.loads(Path(path).read_text(encoding="utf-8"))
    if old.get("schema") != MANIFEST_SCHEMA:
        raise UsageError(f"{path} is not a kgcomplete manifest")
    cmd = COMMANDS[old["command"]]
    cfg = dict(old["config"])
    for key, rec in old["inputs"].items():
        now = _hash_input(rec["path"])
        if now != rec["sha256"] and not force:
            raise UsageError(f"input {key} ({rec['path']}) changed since the recorded run; use --force to ignore")
    if not old.get("deterministic", True):
        logger.warning("the recorded run was not deterministic; outputs may differ")
    cfg["out"] = out or str(Path(cfg["out"])) + "-replay"
    new = execute(cmd, cfg, ["replay", path])
    diffs = []
    for name, rec in old["outputs"].items():
        got = new["outputs"].get(name)
        if got is None or got["sha256"] != rec["sha256"]:
            diffs.append(name)
    diffs += [n for n in new["outputs"] if n not in old["outputs"]]
    return new, diffs


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.command == "replay":
            new, diffs = replay(args.manifest, args.out, args.force)
            if diffs:
                print("outputs differ: " + ", ".join(sorted(diffs)), file=sys.stderr)
                return 1
            print(f"replay identical: {len(new['outputs'])} outputs in {new['config']['out']}")
            return 0
        cmd = COMMANDS[args.command]
        flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
        cfg = resolve_command(cmd, flags, args.config)
        execute(cmd, cfg, argv)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"kgcomplete: error: {exc}", file=sys.stderr)
        return 2
    except (RuleSyntaxError, UnsafeRuleError, ParseError) as exc:
        print(f"kgcomplete: error: {exc}", file=sys.stderr)
        return 1
    except (TrainingError, LoopError, ReasoningTimeout, OSError, ValueError, IndexError) as exc:
        print(f"kgcomplete: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
