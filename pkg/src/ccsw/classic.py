"""Reference operational semantics: the usual labelled transition system.

A state is a multiset of sequential components (non-empty guarded sums).
Restrictions are opened into private names ``~k`` as soon as they are
reached, calls are unfolded, and a call that reaches itself without a
prefix in between contributes nothing.  Only internal steps are generated:
``tau`` for a synchronisation and ``tick`` for the success action.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Mapping, Sequence

from .syntax import (
    Definition,
    GlobalProcess,
    Input,
    Nu,
    Output,
    Par,
    Process,
    Sum,
    Tick,
    all_names,
    check,
    derive,
    rename_variables,
    substitute,
)
from .testing import DeadState, Outcome, StuckRun, UnfairLasso, Verdict, PASS

Component = Sum
State = tuple[Component, ...]


def _private_index(name: str) -> int | None:
    return int(name[1:]) if name.startswith("~") and name[1:].isdigit() else None


def _flatten(p: Process, defs: Mapping[str, Definition], used: set[str], out: list[Component],
             chain: frozenset[str] = frozenset()) -> None:
    if isinstance(p, Sum):
        if p.branches:
            out.append(p)
    elif isinstance(p, Par):
        _flatten(p.left, defs, used, out)
        _flatten(p.right, defs, used, out)
    elif isinstance(p, Nu):
        k = 1
        while f"~{k}" in used:
            k += 1
        fresh = f"~{k}"
        used.add(fresh)
        _flatten(substitute(p.body, {p.name: fresh}), defs, used, out)
    else:
        key = f"{p.var}({','.join(p.args)})"
        if key in chain:
            return  # unguarded recursion: behaves as 0
        _flatten(derive(p, defs), defs, used, out, chain | {key})


def _names_in(state: Sequence[Component]) -> set[str]:
    out: set[str] = set()
    for c in state:
        out |= all_names(c)
    return out


def _names_in_order(p: Process, out: list[str]) -> None:
    if isinstance(p, Sum):
        for prefix, cont in p.branches:
            if not isinstance(prefix, Tick) and prefix.name not in out:
                out.append(prefix.name)
            _names_in_order(cont, out)
    elif isinstance(p, Par):
        _names_in_order(p.left, out)
        _names_in_order(p.right, out)
    elif isinstance(p, Nu):
        _names_in_order(p.body, out)
    else:
        out.extend(a for a in p.args if a not in out)


def canonical(state: Sequence[Component]) -> State:
    """Sort components and rename private names by first appearance.

    This merges most but not necessarily all isomorphic states; it never
    merges states that are not isomorphic.
    """
    def mask(c: Component) -> str:
        return repr(substitute(c, {n: "~" for n in all_names(c) if _private_index(n)}))

    ordered = sorted(state, key=mask)
    seen: list[str] = []
    for c in ordered:
        _names_in_order(c, seen)
    private = [n for n in seen if _private_index(n) is not None]
    # two-phase renaming avoids collisions between old and new private names
    tmp = {n: f"~tmp{n[1:]}" for n in private}
    final = {f"~tmp{n[1:]}": f"~{k}" for k, n in enumerate(private, 1)}
    result = [substitute(substitute(c, tmp), final) for c in ordered]
    return tuple(sorted(result, key=repr))


@dataclass
class Lts:
    states: list[State]
    transitions: list[tuple[int, str, int]]  # src, label, dst
    initial: int
    expanded: list[bool]
    truncated: bool
    ticked: list[bool]

    def outgoing(self, s: int) -> list[int]:
        if not hasattr(self, "_out"):
            self._out = [[] for _ in self.states]
            for k, (src, _, _) in enumerate(self.transitions):
                self._out[src].append(k)
        return self._out[s]


def _steps(state: State, defs: Mapping[str, Definition]) -> list[tuple[str, State]]:
    out = []
    used = _names_in(state)
    for i, c in enumerate(state):
        for prefix, cont in c.branches:
            if isinstance(prefix, Tick):
                rest = list(state[:i] + state[i + 1:])
                _flatten(cont, defs, set(used), rest)
                out.append(("tick", canonical(rest)))
            elif isinstance(prefix, Output):
                for j, d in enumerate(state):
                    if j == i:
                        continue
                    for prefix2, cont2 in d.branches:
                        if isinstance(prefix2, Input) and prefix2.name == prefix.name:
                            rest = [x for k, x in enumerate(state) if k not in (i, j)]
                            u = set(used)
                            _flatten(cont, defs, u, rest)
                            _flatten(cont2, defs, u, rest)
                            out.append(("tau", canonical(rest)))
    return out


def _rename_apart(p: GlobalProcess, test: GlobalProcess, shared: Sequence[str]) -> tuple[Process, dict[str, Definition]]:
    taken = set(p.names) | {d.var for d in p.definitions}
    for d in p.definitions:
        taken |= set(d.params)
    names = {}
    for a in test.names:
        if a in shared:
            names[a] = a
        else:
            new = a
            while new in taken or new in names.values():
                new += "'"
            names[a] = new
    variables = {}
    for d in test.definitions:
        new = d.var
        while new in taken or new in variables.values():
            new += "'"
        variables[d.var] = new
    defs = dict(p.defs())
    for d in test.definitions:
        defs[variables[d.var]] = Definition(variables[d.var], d.params, rename_variables(d.body, variables))
    main = rename_variables(substitute(test.main, names), variables)
    return Par(p.main, main), defs


def classic_lts(p: GlobalProcess, test: GlobalProcess | None = None,
                shared: Sequence[str] | None = None, max_states: int = 20000) -> Lts:
    """Internal transition system of ``p`` running next to ``test``.

    States reached by a tick are kept but not expanded.
    """
    p = check(p)
    if test is None:
        system, defs = p.main, p.defs()
    else:
        test = check(test)
        if shared is None:
            shared = [a for a in p.names if a in test.names]
        system, defs = _rename_apart(p, test, shared)
    init: list[Component] = []
    _flatten(system, defs, set(), init)
    start = canonical(init)
    index = {(False, start): 0}
    states = [start]
    expanded = [False]
    ticked = [False]
    transitions = []
    truncated = False
    queue = deque([0])
    while queue:
        s = queue.popleft()
        if ticked[s]:
            expanded[s] = True
            continue
        complete = True
        for label, nxt in _steps(states[s], defs):
            key = (label == "tick", nxt)
            k = index.get(key)
            if k is None:
                if len(states) >= max_states:
                    complete = False
                    continue
                k = index[key] = len(states)
                states.append(nxt)
                expanded.append(False)
                ticked.append(label == "tick")
                queue.append(k)
            transitions.append((s, label, k))
        expanded[s] = complete
        truncated = truncated or not complete
    return Lts(states, transitions, 0, expanded, truncated, ticked)


def _tick_free_reach(l: Lts) -> dict[int, tuple[int, ...]]:
    prev = {l.initial: ()}
    queue = deque([l.initial])
    while queue:
        s = queue.popleft()
        for k in l.outgoing(s):
            _, label, d = l.transitions[k]
            if label != "tick" and d not in prev:
                prev[d] = prev[s] + (k,)
                queue.append(d)
    return prev


def classic_must(l: Lts) -> Verdict:
    """Fail iff some tick-free path gets stuck or loops forever."""
    reach = _tick_free_reach(l)
    out: dict[int, list[int]] = {s: [] for s in reach}
    for k, (src, label, d) in enumerate(l.transitions):
        if src in reach and label != "tick":
            out[src].append(k)
    for s in sorted(reach):
        if l.expanded[s] and not l.outgoing(s):
            return Verdict(Outcome.FAIL, StuckRun(l.initial, reach[s]), "stuck before tick")
    # a tau cycle among tick-free states (unfair scheduling is allowed)
    color = {s: 0 for s in reach}
    for root in sorted(reach):
        if color[root]:
            continue
        stack = [(root, iter(out[root]), None)]
        color[root] = 1
        while stack:
            s, it, _ = stack[-1]
            k = next(it, None)
            if k is None:
                color[s] = 2
                stack.pop()
                continue
            nxt = l.transitions[k][2]
            if color.get(nxt) == 1:
                edges = [e for _, _, e in stack if e is not None] + [k]
                start = next(i for i, (st, _, _) in enumerate(stack) if st == nxt)
                cycle = tuple(edges[start:])
                return Verdict(Outcome.FAIL, UnfairLasso(l.initial, reach[nxt], cycle, ()),
                               "tick-free cycle")
            if color.get(nxt) == 0:
                color[nxt] = 1
                stack.append((nxt, iter(out[nxt]), k))
    if l.truncated:
        return Verdict(Outcome.UNKNOWN, reason="exploration bound reached")
    return PASS


def classic_fair(l: Lts) -> Verdict:
    """Fail iff some reachable tick-free state cannot reach a tick."""
    reach = _tick_free_reach(l)
    good = {src for src, label, _ in l.transitions if label == "tick"}
    good |= {s for s in reach if not l.expanded[s]}
    changed = True
    while changed:
        changed = False
        for src, label, d in l.transitions:
            if d in good and src not in good and src in reach:
                good.add(src)
                changed = True
    for s in sorted(reach):
        if s not in good:
            return Verdict(Outcome.FAIL, DeadState(l.initial, reach[s], s), "tick unreachable")
    if l.truncated:
        return Verdict(Outcome.UNKNOWN, reason="exploration bound reached")
    return PASS
