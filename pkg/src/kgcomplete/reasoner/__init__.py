"""Horn-rule forward chaining with RDFS presets."""

from .engine import FactStore, Reasoner, ReasoningTimeout, closure, infer, infer_labeled, transitive_closure_edges
from .rules import (
    Atom,
    HornRule,
    RuleSet,
    RuleSyntaxError,
    UnsafeRuleError,
    Var,
    load_rules,
    parse_rules,
    rdfs_preset,
    resolve_rules,
)
from .simplify import ExecutionPlan, simplify_rules

__all__ = [
    "Atom",
    "ExecutionPlan",
    "FactStore",
    "HornRule",
    "Reasoner",
    "ReasoningTimeout",
    "RuleSet",
    "RuleSyntaxError",
    "UnsafeRuleError",
    "Var",
    "closure",
    "infer",
    "infer_labeled",
    "load_rules",
    "parse_rules",
    "rdfs_preset",
    "resolve_rules",
    "simplify_rules",
    "transitive_closure_edges",
]
