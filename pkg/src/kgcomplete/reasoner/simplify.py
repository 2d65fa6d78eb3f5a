"""Rule simplification: route transitivity rules to a graph-traversal executor."""

from __future__ import annotations

from dataclasses import dataclass, field

from .rules import HornRule, RuleSet, is_var


@dataclass(frozen=True)
class ExecutionPlan:
    #: rule names evaluated by generic semi-naive joins
    generic: tuple[str, ...]
    #: rule name -> relation constant whose closure replaces the join
    transitive: dict = field(default_factory=dict)

    def describe(self) -> list[str]:
        lines = [f"{name}: transitive closure over {p}" for name, p in self.transitive.items()]
        lines += [f"{name}: semi-naive join" for name in self.generic]
        return lines


def transitive_relation(rule: HornRule):
    """The relation ``p`` if ``rule`` is ``(?a,p,?b), (?b,p,?c) -> (?a,p,?c)``."""
    if len(rule.body) != 2:
        return None
    head = rule.head
    p = head.relation
    if is_var(p) or not all(is_var(t) for t in (head.subject, head.object)):
        return None
    a, c = head.subject, head.object
    if a == c:
        return None
    for first, second in (rule.body, rule.body[::-1]):
        if first.relation != p or second.relation != p:
            continue
        b = first.object
        if (
            first.subject == a
            and is_var(b)
            and b not in (a, c)
            and second.subject == b
            and second.object == c
        ):
            return p
    return None


def simplify_rules(rules: RuleSet) -> tuple[RuleSet, ExecutionPlan]:
    """Tag bilinear transitivity rules; everything else passes through unchanged."""
    generic, transitive = [], {}
    for rule in rules:
        p = transitive_relation(rule)
        if p is None:
            generic.append(rule.name)
        else:
            transitive[rule.name] = p
    return rules, ExecutionPlan(tuple(generic), transitive)
