"""Causal effect identification in semi-Markovian graphs, with do-calculus derivations."""

import json as _json

from . import _core
from ._core import Graph, InputError, StructuralError, c_components, d_separated, run_cli

__all__ = [
    "Graph",
    "InputError",
    "StructuralError",
    "c_components",
    "check",
    "d_separated",
    "derive",
    "identify",
    "rule_applicable",
    "run_cli",
    "verify",
    "witness",
]


def identify(graph, do, on):
    """P(on | do(do)) as an observational estimand.

    Returns a dict with "status" ("identifiable" or "not_identifiable"), the
    pretty-printed and JSON estimand, or the failing (c, t) pair.
    """
    return _json.loads(_core._identify(graph, list(do), list(on)))


def derive(graph, do, on):
    """Do-calculus derivation as a JSON-compatible dict, or None when not identifiable."""
    out = _core._derive(graph, list(do), list(on))
    return None if out is None else _json.loads(out)


def check(derivation, models=5, seed=0):
    """Verifies a derivation (dict or JSON text). Returns accepted / bad_step / reason."""
    text = derivation if isinstance(derivation, str) else _json.dumps(derivation)
    return _json.loads(_core._check(text, models, seed))


def rule_applicable(graph, rule, x=(), y=(), z=(), w=()):
    """Separation evidence for do-calculus rule 1, 2 or 3."""
    return _json.loads(_core._rule_applicable(graph, rule, list(x), list(y), list(z), list(w)))


def verify(graph, do, on, trials=100, seed=0):
    """Checks the identified estimand against exact interventional truth on random models."""
    return _json.loads(_core._verify(graph, list(do), list(on), trials, seed))


def witness(graph, do, on, budget=20, seed=0):
    """Two models that agree observationally but differ causally, or None."""
    out = _core._witness(graph, list(do), list(on), budget, seed)
    return None if out is None else _json.loads(out)
