"""Translation of CCS processes into strategies.

Channel ``i`` of a player is the ``i``-th name of its context.  The table:

    0                 one state refusing everything
    P | Q             <forkL -> [P], forkR -> [Q]>
    new a. P          <nu -> [P]>           (a becomes the last channel)
    sum of a_k.P_k    <in:j -> sum of [P_k] over inputs on channel j,
                       out:j -> same over outputs, tick -> over tick prefixes>
    x(b_1..b_m)       the body of x with its parameters sent to b_1..b_m

Lazy mode builds this as a growing equation system, one node per
(definition, argument channels, arity, subterm).  A call that reaches itself
without passing a move denotes the empty strategy.  Approximant mode unfolds
the definitions a fixed number of times and sends the remaining calls to the
empty strategy.
"""

from __future__ import annotations

from typing import Mapping

from .strategy import FORK_L, FORK_R, NU, TICK, BasicMove, In, NodeRef, Out, StrategySystem
from .syntax import (
    Call,
    Definition,
    GlobalProcess,
    Input,
    Nu,
    Output,
    Par,
    Process,
    Sum,
    approximant,
    check,
)

Env = Mapping[str, int]


class _Translator:
    def __init__(self, defs: Mapping[str, Definition], lazy: bool, system: StrategySystem | None = None):
        self.defs = dict(defs)
        self.lazy = lazy
        self.system = system or StrategySystem()
        self._call_cache: dict[str, str] = {}

    def prefix_move(self, prefix, env: Env) -> BasicMove:
        if isinstance(prefix, Input):
            return In(env[prefix.name])
        if isinstance(prefix, Output):
            return Out(env[prefix.name])
        return TICK

    def node(self, term: Process, env: Env, n: int, node_id: str) -> str:
        """Register (lazily) the node for ``term`` and return its id."""
        if isinstance(term, Call):
            return self.call(term, env, n)
        if node_id not in self.system:
            self.system.defer(node_id, n, lambda: self.expand(term, dict(env), n, node_id))
        return node_id

    def call(self, term: Call, env: Env, n: int) -> str:
        if not self.lazy:
            return self.system.empty(n).node
        # follow call-to-call chains; a repeat means unguarded recursion
        seen = []
        while isinstance(term, Call):
            idxs = tuple(env[a] for a in term.args)
            key = f"{term.var}@{n}({','.join(map(str, idxs))})"
            if key in self._call_cache:
                target = self._call_cache[key]
                break
            if key in seen:
                target = self.system.empty(n).node
                break
            seen.append(key)
            d = self.defs[term.var]
            env = dict(zip(d.params, idxs))
            term = d.body
        else:
            target = self.node(term, env, n, seen[-1])
        for key in seen:
            self._call_cache[key] = target
        return target

    def expand(self, term: Process, env: Env, n: int, node_id: str) -> list[dict[BasicMove, str]]:
        if isinstance(term, Par):
            return [{
                FORK_L: self.node(term.left, env, n, f"{node_id}/L"),
                FORK_R: self.node(term.right, env, n, f"{node_id}/R"),
            }]
        if isinstance(term, Nu):
            inner = dict(env)
            inner[term.name] = n + 1
            return [{NU: self.node(term.body, inner, n + 1, f"{node_id}/nu")}]
        assert isinstance(term, Sum)
        groups: dict[BasicMove, list[int]] = {}
        for k, (prefix, _) in enumerate(term.branches):
            groups.setdefault(self.prefix_move(prefix, env), []).append(k)
        state = {}
        for move, ks in groups.items():
            children = [
                self.node(term.branches[k][1], env, n, f"{node_id}/{k}") for k in ks
            ]
            if len(children) == 1:
                state[move] = children[0]
            else:
                sum_id = f"{node_id}/{move}"
                self.system.defer(sum_id, n, lambda cs=tuple(children): self._concat(cs))
                state[move] = sum_id
        return [state]

    def _concat(self, children: tuple[str, ...]) -> list[dict[BasicMove, str]]:
        return [st for c in children for st in self.system.states(c)]


def translate_open(
    p: Process,
    gamma: tuple[str, ...],
    defs: Mapping[str, Definition] | tuple[Definition, ...] = (),
    lazy: bool = True,
    system: StrategySystem | None = None,
    node_id: str = "main",
) -> NodeRef:
    """Translate an open process typed under the ordered context ``gamma``."""
    if not isinstance(defs, Mapping):
        defs = {d.var: d for d in defs}
    tr = _Translator(defs, lazy, system)
    env = {a: i + 1 for i, a in enumerate(gamma)}
    return tr.system.ref(tr.node(p, env, len(gamma), node_id))


def translate(g: GlobalProcess) -> NodeRef:
    """Lazy translation of a global process."""
    g = check(g)
    return translate_open(g.main, g.names, g.defs(), lazy=True)


def approximant_index(k: int, i: int) -> int:
    """How many unfoldings make the approximant exact on views of <= i moves.

    ``k`` is the number of definitions.  Between two moves a call chain can
    visit each definition at most once without looping forever, so after
    ``k*(i+1)`` unfoldings any remaining call lies under at least ``i+1``
    moves.  ``(k+1)*i`` alone is too small when ``i < k``: with
    ``rec x(a) = a!.x(a) in x(a)`` and ``i = 0`` it would keep the bare call,
    whose translation has no state, while the process has one.
    """
    if k < 0 or i < 0:
        raise ValueError("k and i must be non-negative")
    return max((k + 1) * i, k * (i + 1))


def translate_approximant(g: GlobalProcess, depth: int) -> NodeRef:
    """Translate the approximant that is exact on views of at most ``depth`` moves."""
    g = check(g)
    j = approximant_index(len(g.definitions), depth)
    return translate_open(approximant(g, j), g.names, g.defs(), lazy=False)
