"""CCS processes as innocent strategies, and interactive testing on them."""

from .syntax import GlobalProcess, check, parse
from .strategy import BasicMove, NodeRef, StrategySystem, evaluate
from .translate import translate, translate_approximant
from .world import GlobalStrategy, compose, compose_processes, explore
from .testing import check_fair, check_must, compare, run_test

__all__ = [
    "BasicMove",
    "GlobalProcess",
    "GlobalStrategy",
    "NodeRef",
    "StrategySystem",
    "check",
    "check_fair",
    "check_must",
    "compare",
    "compose",
    "compose_processes",
    "evaluate",
    "explore",
    "parse",
    "run_test",
    "translate",
    "translate_approximant",
]
