"""Seeded university-domain graphs with an RDFS-expressible schema.

The schema is a cut-down univ-bench: class and property hierarchies plus
domain/range statements, all within the six-rule RDFS fragment. A chosen
fraction of the rule-derivable ground triples is withheld from the emitted
graph and exported separately as ground truth.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .graph import DOMAIN, RANGE, SUB_CLASS, SUB_PROPERTY, TYPE, KnowledgeGraph, Vocabulary, write_labeled
from .reasoner import RuleSet, closure, rdfs_preset

CLASS_HIERARCHY = [
    ("FullProfessor", "Professor"),
    ("AssociateProfessor", "Professor"),
    ("AssistantProfessor", "Professor"),
    ("Professor", "Faculty"),
    ("Lecturer", "Faculty"),
    ("Faculty", "Employee"),
    ("Employee", "Person"),
    ("GraduateStudent", "Student"),
    ("UndergraduateStudent", "Student"),
    ("Student", "Person"),
    ("University", "Organization"),
    ("Department", "Organization"),
    ("GraduateCourse", "Course"),
]

PROPERTY_HIERARCHY = [
    ("headOf", "worksFor"),
    ("worksFor", "memberOf"),
    ("doctoralDegreeFrom", "degreeFrom"),
    ("undergraduateDegreeFrom", "degreeFrom"),
]

DOMAINS = [
    ("memberOf", "Person"),
    ("worksFor", "Employee"),
    ("headOf", "Professor"),
    ("advisor", "Student"),
    ("teacherOf", "Faculty"),
    ("takesCourse", "Student"),
    ("subOrganizationOf", "Organization"),
    ("degreeFrom", "Person"),
]

RANGES = [
    ("memberOf", "Organization"),
    ("headOf", "Department"),
    ("advisor", "Professor"),
    ("teacherOf", "Course"),
    ("takesCourse", "Course"),
    ("subOrganizationOf", "Organization"),
    ("degreeFrom", "University"),
]

PROFESSOR_RANKS = ("FullProfessor", "AssociateProfessor", "AssistantProfessor")
SCHEMA_RELATIONS = {DOMAIN, RANGE, SUB_CLASS, SUB_PROPERTY}


@dataclass
class SynthConfig:
    universities: int = 1
    departments: int = 2
    professors: int = 4
    students: int = 5
    courses: int = 1
    courses_per_student: int = 2
    sparsity: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("universities", "departments", "professors", "students", "courses"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.courses_per_student < 0:
            raise ValueError("courses_per_student must be non-negative")
        if not 0.0 <= self.sparsity <= 1.0:
            raise ValueError("sparsity must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class SynthData:
    graph: KnowledgeGraph
    ontology: KnowledgeGraph
    rules: RuleSet
    withheld: KnowledgeGraph
    derivable: int = 0
    stats: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.graph, self.ontology, self.rules))

    def write(self, directory: str | Path) -> dict[str, Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {
            "triples": d / "triples.tsv",
            "ontology": d / "ontology.tsv",
            "withheld": d / "withheld.tsv",
            "rules": d / "rules.txt",
        }
        write_labeled(self.graph.labeled(), paths["triples"])
        write_labeled(self.ontology.labeled(), paths["ontology"])
        write_labeled(self.withheld.labeled(), paths["withheld"])
        paths["rules"].write_text(self.rules.to_text(), encoding="utf-8")
        return paths


def schema_triples() -> list[tuple[str, str, str]]:
    rows = [(a, SUB_CLASS, b) for a, b in CLASS_HIERARCHY]
    rows += [(a, SUB_PROPERTY, b) for a, b in PROPERTY_HIERARCHY]
    rows += [(p, DOMAIN, c) for p, c in DOMAINS]
    rows += [(p, RANGE, c) for p, c in RANGES]
    return rows


def base_triples(cfg: SynthConfig, rng: np.random.Generator) -> list[tuple[str, str, str]]:
    """Most-specific facts; everything else is derived by the rules."""
    rows: list[tuple[str, str, str]] = []
    add = rows.append
    unis = [f"University{u}" for u in range(cfg.universities)]
    for u, uni in enumerate(unis):
        add((uni, TYPE, "University"))
    for u, uni in enumerate(unis):
        for d in range(cfg.departments):
            dept = f"Department{u}.{d}"
            add((dept, TYPE, "Department"))
            add((dept, "subOrganizationOf", uni))
            courses = []
            profs = []
            for p in range(cfg.professors):
                prof = f"Professor{u}.{d}.{p}"
                profs.append(prof)
                rank = PROFESSOR_RANKS[p % len(PROFESSOR_RANKS)]
                add((prof, TYPE, rank))
                add((prof, "headOf" if p == 0 else "worksFor", dept))
                add((prof, "doctoralDegreeFrom", unis[int(rng.integers(len(unis)))]))
                for c in range(cfg.courses):
                    course = f"Course{u}.{d}.{p}.{c}"
                    courses.append(course)
                    add((course, TYPE, "GraduateCourse" if c == 0 and rank == "FullProfessor" else "Course"))
                    add((prof, "teacherOf", course))
            for p, prof in enumerate(profs):
                for s in range(cfg.students):
                    student = f"Student{u}.{d}.{p}.{s}"
                    grad = s % 2 == 0
                    add((student, TYPE, "GraduateStudent" if grad else "UndergraduateStudent"))
                    add((student, "memberOf", dept))
                    add((student, "advisor", prof))
                    k = min(cfg.courses_per_student, len(courses))
                    for c in sorted(rng.choice(len(courses), size=k, replace=False).tolist()):
                        add((student, "takesCourse", courses[c]))
                    if grad:
                        add((student, "undergraduateDegreeFrom", unis[int(rng.integers(len(unis)))]))
    return rows


def derivable_triples(base, ontology, rules: RuleSet) -> list[tuple[str, str, str]]:
    """Ground (non-schema) triples entailed by ``base`` and ``ontology`` but absent from both."""
    known = set(base) | set(ontology)
    full = closure(known, rules)
    return sorted(t for t in full - known if t[1] not in SCHEMA_RELATIONS)


def generate(cfg: SynthConfig) -> SynthData:
    rng = np.random.default_rng(cfg.seed)
    rules = rdfs_preset()
    onto_rows = schema_triples()
    base = base_triples(cfg, rng)
    derived = derivable_triples(base, onto_rows, rules)
    n_hold = int(round(cfg.sparsity * len(derived)))
    hold_idx = set(rng.choice(len(derived), size=n_hold, replace=False).tolist()) if n_hold else set()
    withheld = [t for i, t in enumerate(derived) if i in hold_idx]
    emitted = base + [t for i, t in enumerate(derived) if i not in hold_idx]
    ents, rels = Vocabulary(), Vocabulary()
    graph = KnowledgeGraph.from_labeled(emitted, ents, rels)
    ontology = KnowledgeGraph.from_labeled(onto_rows, ents, rels)
    held = KnowledgeGraph.from_labeled(withheld, ents, rels)
    stats = {
        "entities": len(ents),
        "relations": len(rels),
        "triples": len(graph),
        "ontology": len(ontology),
        "withheld": len(held),
        "derivable": len(derived),
    }
    return SynthData(graph, ontology, rules, held, len(derived), stats)
