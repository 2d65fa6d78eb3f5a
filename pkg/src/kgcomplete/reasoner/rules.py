"""Horn rules over triple atoms and their line-oriented text syntax.

One rule per line::

    [name:] (?x, bornIn, ?y), (?y, locatedIn, ?z) -> (?x, bornIn, ?z)

Terms starting with ``?`` are variables, anything else is a constant. Blank
lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator

from ..graph import DOMAIN, RANGE, SUB_CLASS, SUB_PROPERTY, TYPE


class RuleSyntaxError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class UnsafeRuleError(ValueError):
    """A head variable that no body atom binds."""

    def __init__(self, rule: str, variable: str):
        self.variable = variable
        super().__init__(f"rule {rule!r} is unsafe: head variable {variable} does not occur in the body")


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return "?" + self.name


def is_var(term) -> bool:
    return isinstance(term, Var)


@dataclass(frozen=True)
class Atom:
    subject: object
    relation: object
    object: object

    @property
    def terms(self) -> tuple:
        return (self.subject, self.relation, self.object)

    def variables(self) -> set[Var]:
        return {t for t in self.terms if is_var(t)}

    def __str__(self) -> str:
        return "(" + ", ".join(str(t) for t in self.terms) + ")"


@dataclass(frozen=True)
class HornRule:
    body: tuple[Atom, ...]
    head: Atom
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "body", tuple(self.body))
        if not self.body:
            raise RuleSyntaxError(f"rule {self.name!r} has an empty body")
        bound = set().union(*(a.variables() for a in self.body))
        for term in self.head.terms:
            if is_var(term) and term not in bound:
                raise UnsafeRuleError(self.name or str(self), str(term))

    def variables(self) -> set[Var]:
        return set().union(self.head.variables(), *(a.variables() for a in self.body))

    def __str__(self) -> str:
        body = ", ".join(str(a) for a in self.body)
        return f"{body} -> {self.head}"

    def to_text(self) -> str:
        return f"{self.name}: {self}" if self.name else str(self)


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[HornRule, ...] = ()
    preset: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        names = [r.name for r in self.rules]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise ValueError(f"duplicate rule names: {', '.join(sorted(dupes))}")
        if self.preset not in ("rdfs-subset", "custom", "mixed"):
            raise ValueError(f"unknown preset tag {self.preset!r}")

    def __iter__(self) -> Iterator[HornRule]:
        return iter(self.rules)

    def __len__(self) -> int:
        return len(self.rules)

    def __getitem__(self, name: str) -> HornRule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)

    def names(self) -> list[str]:
        return [r.name for r in self.rules]

    def __add__(self, other: "RuleSet") -> "RuleSet":
        preset = self.preset if self.preset == other.preset else "mixed"
        if not self.rules:
            preset = other.preset
        elif not other.rules:
            preset = self.preset
        return RuleSet(self.rules + other.rules, preset)

    def to_text(self) -> str:
        return "".join(r.to_text() + "\n" for r in self.rules)


_ATOM = re.compile(r"\(\s*([^(),]+?)\s*,\s*([^(),]+?)\s*,\s*([^(),]+?)\s*\)")
_NAME = re.compile(r"^\s*([A-Za-z_][\w.-]*)\s*:\s*(?=\()")


def _term(token: str):
    return Var(token[1:]) if token.startswith("?") else token


def _parse_atoms(text: str, lineno: int, offset: int) -> list[Atom]:
    atoms = []
    pos = 0
    while True:
        ws = len(text) - len(text[pos:].lstrip())
        pos = ws
        if pos >= len(text):
            break
        m = _ATOM.match(text, pos)
        if not m:
            raise RuleSyntaxError(f"expected an atom near {text[pos:pos + 20]!r}", lineno, offset + pos + 1)
        terms = [_term(g) for g in m.groups()]
        for g in m.groups():
            if g == "?" or (" " in g):
                raise RuleSyntaxError(f"bad term {g!r}", lineno, offset + m.start() + 1)
        atoms.append(Atom(*terms))
        pos = m.end()
        rest = text[pos:].lstrip()
        if not rest:
            break
        if not rest.startswith(","):
            raise RuleSyntaxError("atoms must be separated by ','", lineno, offset + len(text) - len(rest) + 1)
        pos = len(text) - len(rest) + 1
    return atoms


def parse_rule(line: str, lineno: int = 1, default_name: str | None = None) -> HornRule:
    text = line
    name = default_name or f"rule{lineno}"
    m = _NAME.match(text)
    offset = 0
    if m:
        name = m.group(1)
        offset = m.end()
        text = text[m.end():]
    for arrow in ("->", "=>"):
        if arrow in text:
            body_text, head_text = text.split(arrow, 1)
            break
    else:
        raise RuleSyntaxError("missing '->'", lineno)
    body = _parse_atoms(body_text, lineno, offset)
    head = _parse_atoms(head_text, lineno, offset + len(body_text) + 2)
    if not body:
        raise RuleSyntaxError("rule body is empty", lineno)
    if len(head) != 1:
        raise RuleSyntaxError(f"rule head must be exactly one atom, found {len(head)}", lineno)
    return HornRule(tuple(body), head[0], name)


def parse_rules(text: str, preset: str = "custom") -> RuleSet:
    """Parse rules text; raises :class:`RuleSyntaxError` or :class:`UnsafeRuleError`."""
    rules = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            rules.append(parse_rule(line, lineno))
    return RuleSet(tuple(rules), preset)


def load_rules(path) -> RuleSet:
    with open(path, encoding="utf-8") as fh:
        return parse_rules(fh.read())


_RDFS_TEXT = f"""
rdfs2: (?r, {DOMAIN}, ?c), (?x, ?r, ?y) -> (?x, {TYPE}, ?c)
rdfs3: (?r, {RANGE}, ?c), (?x, ?r, ?y) -> (?y, {TYPE}, ?c)
rdfs5: (?r1, {SUB_PROPERTY}, ?r2), (?r2, {SUB_PROPERTY}, ?r3) -> (?r1, {SUB_PROPERTY}, ?r3)
rdfs7: (?r1, {SUB_PROPERTY}, ?r2), (?x, ?r1, ?y) -> (?x, ?r2, ?y)
rdfs9: (?c1, {SUB_CLASS}, ?c2), (?x, {TYPE}, ?c1) -> (?x, {TYPE}, ?c2)
rdfs11: (?c1, {SUB_CLASS}, ?c2), (?c2, {SUB_CLASS}, ?c3) -> (?c1, {SUB_CLASS}, ?c3)
"""


def rdfs_preset() -> RuleSet:
    """The six-rule RDFS fragment (rdfs2, 3, 5, 7, 9, 11)."""
    return parse_rules(_RDFS_TEXT, preset="rdfs-subset")


PRESETS = {"rdfs": rdfs_preset}


def resolve_rules(source: str | None) -> RuleSet:
    """A preset name (``rdfs``), a path to a rules file, or ``None`` for no rules."""
    if source is None or source in ("", "none"):
        return RuleSet()
    if source in PRESETS:
        return PRESETS[source]()
    return load_rules(source)


def rules_from(items: Iterable[HornRule], preset: str = "custom") -> RuleSet:
    return RuleSet(tuple(items), preset)
