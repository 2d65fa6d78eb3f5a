"""Semi-naive forward chaining to a fixpoint."""

from __future__ import annotations

import logging
import time
from collections import defaultdict
from dataclasses import dataclass
from itertools import chain
from typing import Hashable, Iterable

import numpy as np

from ..graph import REASONER, KnowledgeGraph
from .rules import HornRule, RuleSet, is_var
from .simplify import ExecutionPlan, simplify_rules

logger = logging.getLogger(__name__)


class ReasoningTimeout(RuntimeError):
    """The fixpoint was not reached within the time budget."""

# bound-position masks: bit 0 subject, bit 1 relation, bit 2 object
_POSITIONS = {m: tuple(i for i in range(3) if m >> i & 1) for m in range(1, 7)}


class FactStore:
    """Triple set with hash indexes for partially bound patterns.

    Indexes are built on first use of a bound-position mask and maintained
    incrementally afterwards.
    """

    def __init__(self, facts: Iterable[tuple] = ()):
        self.facts: set[tuple] = set()
        self.all: list[tuple] = []
        self.index: dict[int, dict] = {}
        for f in facts:
            self.add(f)

    def add(self, f: tuple) -> bool:
        if f in self.facts:
            return False
        self.facts.add(f)
        self.all.append(f)
        for m, idx in self.index.items():
            idx[tuple(f[i] for i in _POSITIONS[m])].append(f)
        return True

    def _build(self, mask: int) -> dict:
        idx: dict = defaultdict(list)
        pos = _POSITIONS[mask]
        for f in self.all:
            idx[tuple(f[i] for i in pos)].append(f)
        self.index[mask] = idx
        return idx

    def match(self, pattern: tuple) -> Iterable[tuple]:
        """Facts agreeing with ``pattern`` on every non-``None`` position."""
        mask = (pattern[0] is not None) | (pattern[1] is not None) << 1 | (pattern[2] is not None) << 2
        if mask == 0:
            return self.all
        if mask == 7:
            return (pattern,) if pattern in self.facts else ()
        idx = self.index.get(mask)
        if idx is None:
            idx = self._build(mask)
        return idx.get(tuple(pattern[i] for i in _POSITIONS[mask]), ())

    def __contains__(self, f) -> bool:
        return f in self.facts

    def __len__(self) -> int:
        return len(self.facts)


@dataclass(frozen=True)
class _CompiledAtom:
    # each slot: ("v", var index) or ("c", term id)
    slots: tuple

    def pattern(self, binding: list) -> tuple:
        return tuple(binding[v] if kind == "v" else v for kind, v in self.slots)

    def unify(self, fact: tuple, binding: list) -> list | None:
        new = None
        for (kind, v), value in zip(self.slots, fact):
            if kind == "c":
                if v != value:
                    return None
                continue
            current = binding[v] if new is None else new[v]
            if current is None:
                if new is None:
                    new = list(binding)
                new[v] = value
            elif current != value:
                return None
        return binding if new is None else new


class _CompiledRule:
    def __init__(self, rule: HornRule, intern):
        self.name = rule.name
        variables: dict = {}

        def slot(term):
            if is_var(term):
                return ("v", variables.setdefault(term, len(variables)))
            return ("c", intern(term))

        self.body = [_CompiledAtom(tuple(slot(t) for t in a.terms)) for a in rule.body]
        self.head = _CompiledAtom(tuple(slot(t) for t in rule.head.terms))
        self.n_vars = len(variables)
        self.orders = [self._order(i) for i in range(len(self.body))]

    def _order(self, first: int) -> list[int]:
        # greedy: atom with most bound positions (constants or bound variables) next
        bound = {v for kind, v in self.body[first].slots if kind == "v"}
        rest = [i for i in range(len(self.body)) if i != first]
        order = []
        while rest:
            def nbound(i):
                return -sum(1 for kind, v in self.body[i].slots if kind == "c" or v in bound), i

            best = min(rest, key=nbound)
            rest.remove(best)
            order.append(best)
            bound |= {v for kind, v in self.body[best].slots if kind == "v"}
        return order

    def fire(self, delta: Iterable[tuple], store: FactStore, out: set, deadline: float | None = None) -> None:
        """Add to ``out`` every new head derivable with one body atom matched in ``delta``."""
        empty = [None] * self.n_vars
        for i, atom in enumerate(self.body):
            order = self.orders[i]
            for n, fact in enumerate(delta):
                if deadline is not None and n % 256 == 0 and time.monotonic() > deadline:
                    raise ReasoningTimeout(f"rule {self.name} exceeded the time budget")
                b = atom.unify(fact, empty)
                if b is not None:
                    self._join(order, 0, b, store, out)

    def _join(self, order, k, binding, store, out):
        if k == len(order):
            f = self.head.pattern(binding)
            if f not in store.facts:
                out.add(f)
            return
        atom = self.body[order[k]]
        for fact in store.match(atom.pattern(binding)):
            b = atom.unify(fact, binding)
            if b is not None:
                self._join(order, k + 1, b, store, out)


def transitive_closure_edges(pairs: Iterable[tuple]) -> set[tuple]:
    """All ``(a, c)`` joined by a path of one or more edges."""
    succ: dict = defaultdict(set)
    for a, b in pairs:
        succ[a].add(b)
    out = set()
    for src in list(succ):
        seen = set()
        stack = list(succ[src])
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            stack.extend(succ.get(node, ()))
        out.update((src, c) for c in seen)
    return out


class TransitiveIndex:
    """Incrementally maintained transitive closure of one relation."""

    def __init__(self):
        self.succ: dict = defaultdict(set)
        self.pred: dict = defaultdict(set)

    def insert(self, a, b) -> list[tuple]:
        """Add edge ``a -> b``; return the newly implied ``(x, y)`` pairs."""
        if b in self.succ[a]:
            return []
        left = self.pred[a] | {a}
        right = self.succ[b] | {b}
        added = []
        for x in left:
            fresh = right - self.succ[x]
            if fresh:
                self.succ[x] |= fresh
                for y in fresh:
                    self.pred[y].add(x)
                added.extend((x, y) for y in fresh)
        return added


class Reasoner:
    """Forward chaining over hashable terms.

    Terms are interned to integers internally; rule constants share the same
    term space as the facts, so a variable bound in subject position can be
    reused in relation position (as RDFS rule 7 requires).
    """

    def __init__(self, rules: RuleSet, simplify: bool = True, max_seconds: float | None = None):
        self.rules = rules
        self.max_seconds = max_seconds
        if simplify:
            self.rules, self.plan = simplify_rules(rules)
        else:
            self.plan = ExecutionPlan(generic=tuple(r.name for r in rules), transitive={})
        self.rounds = 0

    def closure(self, facts: Iterable[tuple]) -> set[tuple]:
        """Fixpoint of the rules over ``facts`` (a superset of the input)."""
        terms: dict[Hashable, int] = {}
        names: list = []

        def intern(x):
            i = terms.get(x)
            if i is None:
                i = terms[x] = len(names)
                names.append(x)
            return i

        encoded = [tuple(intern(x) for x in f) for f in facts]
        store, _ = self._saturate(encoded, intern)
        return {tuple(names[i] for i in f) for f in store.facts}

    def _saturate(self, facts: list[tuple], intern) -> tuple[FactStore, int]:
        by_name = {r.name: r for r in self.rules}
        generic = [_CompiledRule(by_name[n], intern) for n in self.plan.generic]
        transitive = sorted({intern(p) for p in self.plan.transitive.values()})
        store = FactStore(facts)
        delta = list(store.all)
        closures = {p: TransitiveIndex() for p in transitive}
        deadline = None if self.max_seconds is None else time.monotonic() + self.max_seconds
        rounds = 0
        while delta:
            rounds += 1
            derived: set[tuple] = set()
            for rule in generic:
                rule.fire(delta, store, derived, deadline)
            for p, index in closures.items():
                for f in chain(delta, sorted(derived)):
                    if f[1] == p:
                        for x, y in index.insert(f[0], f[2]):
                            if (x, p, y) not in store.facts:
                                derived.add((x, p, y))
            delta = sorted(derived)
            for f in delta:
                store.add(f)
        self.rounds = rounds
        return store, rounds


def closure(facts: Iterable[tuple], rules: RuleSet, simplify: bool = True) -> set[tuple]:
    return Reasoner(rules, simplify).closure(facts)


def infer(
    X: KnowledgeGraph,
    ontology: KnowledgeGraph | None,
    rules: RuleSet,
    simplify: bool = True,
) -> KnowledgeGraph:
    """New triples entailed by ``X`` plus ``ontology`` under ``rules``.

    Returns ``closure(X ∪ ontology) \\ (X ∪ ontology)`` as a graph over the
    vocabularies of ``X``, with provenance ``reasoner``. Names that occur in a
    new position (e.g. a class term used as a relation) are added to the
    vocabularies.
    """
    base = set(X.labeled())
    if ontology is not None:
        base |= set(ontology.labeled())
    new = sorted(closure(base, rules, simplify) - base) if rules.rules and base else []
    ents, rels = X.entities, X.relations
    rows = [(ents.add(s), rels.add(r), ents.add(o)) for s, r, o in new]
    arr = np.array(rows, dtype=np.int64).reshape(-1, 3)
    return KnowledgeGraph(ents, rels, arr, np.full(len(arr), REASONER, dtype=np.int8))


def infer_labeled(
    facts: Iterable[tuple[str, str, str]], rules: RuleSet, ontology: Iterable = (), simplify: bool = True
) -> set[tuple]:
    base = set(facts) | set(ontology)
    return closure(base, rules, simplify) - base if rules.rules else set()
