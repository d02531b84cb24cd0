"""Fair and must verdicts on explored closed-world graphs.

Fair: from every reachable state before success, success stays reachable.

Must: every maximal play is successful.  A finite play is maximal when
nothing is enabled.  An infinite play is maximal when the players it
eventually leaves alone (the frozen ones) cannot jointly make a move: any
extension would have to start with such a move.  Within a strongly
connected component of the tick-free part, the players that no walk inside
the component ever touches form a greatest fixpoint; a walk that keeps
touching every other player realises exactly that frozen set, so the
component hosts an unsuccessful maximal play iff some state's fixpoint set
enables nothing.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import networkx as nx

from .syntax import GlobalProcess, check
from .world import GlobalState, TransitionGraph, compose_processes, explore


class Outcome(Enum):
    PASS = "pass"
    FAIL = "fail"
    UNKNOWN = "unknown"

    @property
    def exit_code(self) -> int:
        return {"pass": 0, "fail": 1, "unknown": 2}[self.value]


@dataclass(frozen=True)
class StuckRun:
    """A path from an initial state to a tick-free state where nothing is enabled."""

    initial: int
    path: tuple[int, ...]  # transition indices

    def to_json(self) -> dict:
        return {"kind": "stuck", "initial": self.initial, "path": list(self.path)}


@dataclass(frozen=True)
class UnfairLasso:
    """A stem and a cycle; the frozen slots of the cycle's base state enable nothing."""

    initial: int
    stem: tuple[int, ...]
    cycle: tuple[int, ...]
    frozen: tuple[int, ...]  # slots in the cycle's base state

    def to_json(self) -> dict:
        return {"kind": "lasso", "initial": self.initial, "stem": list(self.stem),
                "cycle": list(self.cycle), "frozen": list(self.frozen)}


@dataclass(frozen=True)
class DeadState:
    """A reachable tick-free state from which no tick is reachable."""

    initial: int
    path: tuple[int, ...]
    state: int

    def to_json(self) -> dict:
        return {"kind": "dead", "initial": self.initial, "path": list(self.path), "state": self.state}


Witness = StuckRun | UnfairLasso | DeadState


@dataclass(frozen=True)
class Verdict:
    outcome: Outcome
    witness: Witness | None = None
    reason: str = ""

    @property
    def passed(self) -> bool:
        return self.outcome is Outcome.PASS

    @property
    def failed(self) -> bool:
        return self.outcome is Outcome.FAIL

    @property
    def exit_code(self) -> int:
        return self.outcome.exit_code

    def __str__(self) -> str:
        return self.outcome.value.capitalize()


PASS = Verdict(Outcome.PASS)


def _unknown(reason: str) -> Verdict:
    return Verdict(Outcome.UNKNOWN, reason=reason)


def _paths_from_initial(g: TransitionGraph, allowed) -> dict[int, tuple[int, tuple[int, ...]]]:
    """Shortest transition paths to every state reachable through ``allowed`` states."""
    prev: dict[int, tuple[int, tuple[int, ...]]] = {}
    queue = deque()
    for k, _ in g.initial:
        if k not in prev and allowed(k):
            prev[k] = (k, ())
            queue.append(k)
    while queue:
        s = queue.popleft()
        init, path = prev[s]
        for idx in g.outgoing_indices(s):
            t = g.transitions[idx]
            if t.dst not in prev and allowed(t.dst):
                prev[t.dst] = (init, path + (idx,))
                queue.append(t.dst)
    return prev


def _tick_free(g: TransitionGraph):
    return lambda k: not g.states[k].ticked


def check_fair(g: TransitionGraph) -> Verdict:
    """Fail iff some reachable state before success cannot reach a tick."""
    reach = _paths_from_initial(g, _tick_free(g))
    # backward search from tick transitions and from unexplored states
    rev: dict[int, list[int]] = {}
    for t in g.transitions:
        rev.setdefault(t.dst, []).append(t.src)
    good = {t.src for t in g.transitions if t.success}
    good |= {k for k in range(len(g.states)) if not g.expanded[k] and not g.states[k].ticked}
    queue = deque(good)
    while queue:
        s = queue.popleft()
        for p in rev.get(s, ()):
            if p not in good and not g.states[p].ticked:
                good.add(p)
                queue.append(p)
    for s in sorted(reach):
        if s not in good:
            init, path = reach[s]
            return Verdict(Outcome.FAIL, DeadState(init, path, s), "no tick reachable")
    if g.truncated:
        return _unknown("exploration bound reached")
    return PASS


def frozen_fixpoint(g: TransitionGraph, component: set[int]) -> dict[int, frozenset[int]]:
    """For each state, the slots no walk inside ``component`` ever touches."""
    frozen = {s: frozenset(range(len(g.states[s].players))) for s in component}
    edges = {s: [t for t in g.outgoing(s) if t.dst in component] for s in component}
    changed = True
    while changed:
        changed = False
        for s in sorted(component):
            keep = set(frozen[s])
            for t in edges[s]:
                wit = dict(t.witness)
                keep -= set(t.players)
                keep = {p for p in keep if wit.get(p) in frozen[t.dst]}
            if keep != frozen[s]:
                frozen[s] = frozenset(keep)
                changed = True
    return frozen


def jointly_enabled(g: TransitionGraph, state: int, slots) -> list:
    """Closed-world moves involving only the given players of ``state``."""
    s = g.states[state]
    slots = sorted(slots)
    sub = GlobalState(tuple(s.players[k] for k in slots), s.ticked)
    return g.engine.enabled_moves(sub)


def _path_within(g: TransitionGraph, component: set[int], src: int, goal) -> tuple[int, ...] | None:
    """Shortest transition path inside ``component`` from ``src``; ``goal(idx)``
    marks acceptable final transitions."""
    prev: dict[int, tuple[int, ...]] = {src: ()}
    queue = deque([src])
    while queue:
        s = queue.popleft()
        for idx in g.outgoing_indices(s):
            t = g.transitions[idx]
            if t.dst not in component:
                continue
            path = prev[s] + (idx,)
            if goal(idx):
                return path
            if t.dst not in prev:
                prev[t.dst] = path
                queue.append(t.dst)
    return None


def _track(g: TransitionGraph, path: Sequence[int], slot: int | None) -> int | None:
    for idx in path:
        t = g.transitions[idx]
        if slot is None or slot in t.players:
            return None
        slot = dict(t.witness).get(slot)
    return slot


def _cycle_touching_all(g: TransitionGraph, component: set[int], base: int, frozen: frozenset[int]) -> tuple[int, ...]:
    """A closed walk at ``base`` that touches every avatar outside ``frozen``."""
    cycle: list[int] = []
    pending = [p for p in range(len(g.states[base].players)) if p not in frozen]
    for p in pending:
        cur = _track(g, cycle, p)
        if cur is None:
            continue  # already touched earlier in this cycle

        # search over (state, tracked slot) pairs for a transition touching it
        prev = {(base, cur): ()}
        queue = deque([(base, cur)])
        found = None
        while queue and found is None:
            s, slot = queue.popleft()
            for idx in g.outgoing_indices(s):
                t = g.transitions[idx]
                if t.dst not in component:
                    continue
                if slot in t.players:
                    found = prev[(s, slot)] + (idx,)
                    break
                nxt = (t.dst, dict(t.witness)[slot])
                if nxt not in prev:
                    prev[nxt] = prev[(s, slot)] + (idx,)
                    queue.append(nxt)
        assert found is not None, "fixpoint promised a touching walk"
        cycle.extend(found)
        end = g.transitions[found[-1]].dst
        back = _path_within(g, component, end, lambda idx: g.transitions[idx].dst == base) if end != base else ()
        cycle.extend(back)
    if not cycle:
        # everything is frozen: any closed walk will do
        cycle = list(_path_within(g, component, base, lambda idx: g.transitions[idx].dst == base))
    return tuple(cycle)


def check_must(g: TransitionGraph) -> Verdict:
    """Fail iff some unsuccessful play is maximal (stuck, or an unfair lasso)."""
    reach = _paths_from_initial(g, _tick_free(g))
    for s in sorted(reach):
        if g.expanded[s] and not g.outgoing(s):
            init, path = reach[s]
            return Verdict(Outcome.FAIL, StuckRun(init, path), "unsuccessful play with nothing enabled")
    dg = nx.DiGraph()
    dg.add_nodes_from(reach)
    for t in g.transitions:
        if t.src in reach and t.dst in reach:
            dg.add_edge(t.src, t.dst)
    components = sorted((sorted(c) for c in nx.strongly_connected_components(dg)), key=lambda c: c[0])
    for comp in components:
        cset = set(comp)
        if len(comp) == 1 and not dg.has_edge(comp[0], comp[0]):
            continue
        if not all(g.expanded[s] for s in comp):
            continue
        frozen = frozen_fixpoint(g, cset)
        for s in comp:
            if not jointly_enabled(g, s, frozen[s]):
                init, stem = reach[s]
                cycle = _cycle_touching_all(g, cset, s, frozen[s])
                lasso = UnfairLasso(init, stem, cycle, tuple(sorted(frozen[s])))
                return Verdict(Outcome.FAIL, lasso, "maximal unsuccessful infinite play")
    if g.truncated:
        return _unknown("exploration bound reached")
    return PASS


# -- witness replay ----------------------------------------------------------------


def replay_witness(g: TransitionGraph, w: Witness) -> bool:
    """Re-derive a failure by stepping the engine along the witness."""
    engine = g.engine
    if w.initial not in {k for k, _ in g.initial}:
        return False

    def walk(start: int, path: Sequence[int]) -> int | None:
        cur = start
        for idx in path:
            t = g.transitions[idx]
            if t.src != cur:
                return None
            steps = engine.successors(g.states[cur], t.move)
            if all(st.state != g.states[t.dst] for st in steps):
                return None
            cur = t.dst
        return cur

    if isinstance(w, StuckRun):
        end = walk(w.initial, w.path)
        return end is not None and not g.states[end].ticked and not engine.enabled_moves(g.states[end])
    if isinstance(w, DeadState):
        end = walk(w.initial, w.path)
        if end != w.state:
            return False
        seen, queue = {end}, deque([end])
        while queue:
            s = queue.popleft()
            if g.states[s].ticked:
                return False
            for m in engine.enabled_moves(g.states[s]):
                for st in engine.successors(g.states[s], m):
                    k = _lookup(g, st.state)
                    if k is None:
                        return False
                    if k not in seen:
                        seen.add(k)
                        queue.append(k)
        return True
    base = walk(w.initial, w.stem)
    if base is None or not w.cycle or walk(base, w.cycle) != base:
        return False
    if any(g.states[g.transitions[i].dst].ticked for i in w.cycle):
        return False
    # the frozen slots are untouched and return to themselves
    for p in range(len(g.states[base].players)):
        after = _track(g, w.cycle, p)
        if (p in w.frozen) != (after is not None):
            return False
        if after is not None and after not in w.frozen:
            return False
    return not jointly_enabled(g, base, w.frozen)


def _lookup(g: TransitionGraph, s: GlobalState) -> int | None:
    if not hasattr(g, "_index"):
        g._index = {st: k for k, st in enumerate(g.states)}
    return g._index.get(s)


# -- running tests -----------------------------------------------------------------


CRITERIA = ("fair", "must", "classic-fair", "classic-must")


@dataclass(frozen=True)
class Report:
    criterion: str
    verdict: Verdict
    states: int
    truncated: bool

    def to_json(self) -> dict:
        out = {
            "criterion": self.criterion,
            "verdict": self.verdict.outcome.value,
            "statesExplored": self.states,
            "truncated": self.truncated,
        }
        if self.verdict.witness is not None:
            out["witness"] = self.verdict.witness.to_json()
        if self.verdict.reason:
            out["reason"] = self.verdict.reason
        return out


def run_test(p: GlobalProcess, test: GlobalProcess, criterion: str = "must",
             shared: Sequence[str] | None = None, max_states: int = 20000,
             max_depth: int = 200, workers: int | None = None) -> Report:
    """Put ``p`` against ``test`` and decide ``criterion``."""
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    if criterion.startswith("classic"):
        from .classic import classic_fair, classic_lts, classic_must

        lts = classic_lts(p, test, shared, max_states=max_states)
        verdict = classic_must(lts) if criterion == "classic-must" else classic_fair(lts)
        return Report(criterion, verdict, len(lts.states), lts.truncated)
    g = explore(compose_processes(p, test, shared), max_states, max_depth, workers)
    verdict = check_must(g) if criterion == "must" else check_fair(g)
    return Report(criterion, verdict, len(g.states), g.truncated)


@dataclass(frozen=True)
class Comparison:
    criterion: str
    rows: tuple[tuple[str, Report, Report], ...]

    @property
    def distinguishing(self) -> tuple[str, ...]:
        return tuple(
            name for name, a, b in self.rows
            if {a.verdict.outcome, b.verdict.outcome} == {Outcome.PASS, Outcome.FAIL}
        )

    @property
    def undecided(self) -> tuple[str, ...]:
        return tuple(
            name for name, a, b in self.rows
            if Outcome.UNKNOWN in (a.verdict.outcome, b.verdict.outcome)
        )

    def to_json(self) -> dict:
        return {
            "criterion": self.criterion,
            "tests": [
                {"test": name, "left": a.to_json(), "right": b.to_json()} for name, a, b in self.rows
            ],
            "distinguishing": list(self.distinguishing),
            "undecided": list(self.undecided),
        }


def compare(p: GlobalProcess, q: GlobalProcess,
            tests: Sequence[tuple[str, GlobalProcess, Sequence[str] | None]],
            criterion: str = "must", **bounds) -> Comparison:
    """Run both processes against each named test."""
    p, q = check(p), check(q)
    if set(p.names) != set(q.names):
        raise ValueError(f"interfaces differ: {sorted(p.names)} vs {sorted(q.names)}")
    rows = []
    for name, test, shared in tests:
        rows.append((name, run_test(p, test, criterion, shared, **bounds),
                     run_test(q, test, criterion, shared, **bounds)))
    return Comparison(criterion, tuple(rows))
