"""Closed-world exploration of a position whose players run strategies.

A global state lists, for each live player, its strategy node, the index of
the state it committed to, and the channels it knows; plus a flag recording
whether a tick has happened.  Moves are forks, ticks, channel creations and
synchronisations.  Stepping a move branches over the root states of every
avatar it creates.

States are stored up to isomorphism of positions: players whose current
state offers nothing are dropped, and players and channels are relabelled
canonically.  Each transition carries a witness telling where every player
it did not touch went, which is what lasso analysis needs.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Hashable, Iterable, Mapping, Sequence

from .plays import Fork, Nu, Position, Sync, Tick, ClosedWorldMove
from .strategy import FORK_L, FORK_R, NU, TICK, BasicMove, In, NodeRef, Out, StrategySystem
from .syntax import GlobalProcess, check
from .translate import translate, translate_approximant


@dataclass(frozen=True)
class GlobalStrategy:
    """A position together with a strategy for each of its players."""

    position: Position
    strategies: tuple[tuple[Hashable, NodeRef], ...]

    def __post_init__(self):
        assign = dict(self.strategies)
        for p, tup in self.position.players:
            if p not in assign:
                raise ValueError(f"no strategy for player {p!r}")
            if assign[p].arity != len(tup):
                raise ValueError(
                    f"player {p!r} knows {len(tup)} channels, strategy has arity {assign[p].arity}"
                )
        if len(assign) != len(self.position.players):
            raise ValueError("strategies for unknown players")

    @classmethod
    def of(cls, position: Position, strategies: Mapping[Hashable, NodeRef]) -> "GlobalStrategy":
        return cls(position, tuple((p, strategies[p]) for p, _ in position.players))

    @classmethod
    def from_process(cls, g: GlobalProcess, player: Hashable = "P", ref: NodeRef | None = None) -> "GlobalStrategy":
        g = check(g)
        pos = Position(tuple(g.names), ((player, tuple(g.names)),))
        return cls(pos, ((player, ref if ref is not None else translate(g)),))

    @property
    def assignment(self) -> dict[Hashable, NodeRef]:
        return dict(self.strategies)

    def restrict(self, players: Iterable[Hashable]) -> "GlobalStrategy":
        keep = set(players)
        tuples = [(p, t) for p, t in self.position.players if p in keep]
        used = {c for _, t in tuples for c in t}
        pos = Position(tuple(c for c in self.position.channels if c in used), tuple(tuples))
        return GlobalStrategy(pos, tuple((p, s) for p, s in self.strategies if p in keep))


def compose(f: GlobalStrategy, g: GlobalStrategy, shared: Sequence[tuple[Hashable, Hashable]]) -> GlobalStrategy:
    """Glue ``g`` next to ``f`` identifying the channel pairs in ``shared``.

    Channels and players of ``g`` that clash with ``f`` are renamed apart.
    """
    fchans, gchans = set(f.position.channels), set(g.position.channels)
    for a, b in shared:
        if a not in fchans:
            raise KeyError(f"unknown channel {a!r} on the left")
        if b not in gchans:
            raise KeyError(f"unknown channel {b!r} on the right")
    rename = {b: a for a, b in shared}
    taken = set(fchans)
    for c in g.position.channels:
        if c in rename:
            continue
        new = c
        while new in taken:
            new = f"{new}'"
        rename[c] = new
        taken.add(new)
    fplayers = {p for p, _ in f.position.players}
    prename = {}
    for p, _ in g.position.players:
        new = p
        while new in fplayers or new in prename.values():
            new = f"{new}'"
        prename[p] = new
    channels = f.position.channels + tuple(
        rename[c] for c in g.position.channels if rename[c] not in fchans
    )
    players = f.position.players + tuple(
        (prename[p], tuple(rename[c] for c in t)) for p, t in g.position.players
    )
    strategies = f.strategies + tuple((prename[p], s) for p, s in g.strategies)
    return GlobalStrategy(Position(channels, players), strategies)


def compose_processes(p: GlobalProcess, test: GlobalProcess, shared: Sequence[str] | None = None,
                      mode: str = "lazy", depth: int = 6) -> GlobalStrategy:
    """Process ``P`` next to test ``T``, sharing names (default: common ones)."""
    def tr(g: GlobalProcess) -> NodeRef:
        return translate(g) if mode == "lazy" else translate_approximant(g, depth)

    p, test = check(p), check(test)
    if shared is None:
        shared = [a for a in p.names if a in test.names]
    f = GlobalStrategy.from_process(p, "P", tr(p))
    g = GlobalStrategy.from_process(test, "T", tr(test))
    return compose(f, g, [(a, a) for a in shared])


# -- global states ----------------------------------------------------------------

# (system index, node id, state index, channels)
Slot = tuple[int, str, int, tuple[int, ...]]


@dataclass(frozen=True)
class GlobalState:
    players: tuple[Slot, ...]
    ticked: bool = False

    def channels(self) -> list[int]:
        seen: dict[int, None] = {}
        for *_, tup in self.players:
            for c in tup:
                seen.setdefault(c, None)
        return list(seen)


def _move_sort_key(order: Sequence[str]):
    rank = {k: i for i, k in enumerate(order)}

    def key(m: ClosedWorldMove):
        if isinstance(m, Sync):
            return (rank["sync"], m.sender, m.out_index, m.receiver, m.in_index)
        return (rank[type(m).__name__.lower()], m.player)

    return key


DEFAULT_MOVE_ORDER = ("fork", "tick", "nu", "sync")


@dataclass(frozen=True)
class Created:
    role: str  # left, right, self, sender, receiver
    slot: int | None  # slot in the target state, None when the avatar is inert


@dataclass(frozen=True)
class Step:
    state: GlobalState  # canonical target
    witness: tuple[tuple[int, int], ...]  # untouched source slot -> target slot
    created: tuple[Created, ...]
    branch: tuple[int, ...]


class Engine:
    """Stepping and canonicalisation over a fixed set of strategy systems."""

    def __init__(self, systems: Sequence[StrategySystem], move_order: Sequence[str] = DEFAULT_MOVE_ORDER):
        self.systems = list(systems)
        if sorted(move_order) != sorted(DEFAULT_MOVE_ORDER):
            raise ValueError(f"move order must permute {DEFAULT_MOVE_ORDER}")
        self._key = _move_sort_key(move_order)

    def ref(self, slot: Slot) -> NodeRef:
        return NodeRef(self.systems[slot[0]], slot[1])

    def offers(self, slot: Slot, move: BasicMove) -> NodeRef | None:
        ref = self.ref(slot)
        if not move.valid_at(ref.arity):
            return None
        nxt = ref.successor(slot[2], move)
        return nxt if nxt.state_count() else None

    def inert(self, slot: Slot) -> bool:
        """True when the player can take part in no closed-world move, ever.

        A lone half-fork does not count: forking needs both halves.
        """
        ref = self.ref(slot)
        live = {m for m, t in ref.states()[slot[2]].items() if ref.system.states(t)}
        if FORK_L in live and FORK_R in live:
            return False
        return not (live - {FORK_L, FORK_R})

    def enabled_moves(self, s: GlobalState) -> list[ClosedWorldMove]:
        moves: list[ClosedWorldMove] = []
        outs, ins = [], []
        for p, slot in enumerate(s.players):
            if self.offers(slot, FORK_L) and self.offers(slot, FORK_R):
                moves.append(Fork(p))
            if self.offers(slot, TICK):
                moves.append(Tick(p))
            if self.offers(slot, NU):
                moves.append(Nu(p))
            for i, c in enumerate(slot[3], 1):
                if self.offers(slot, Out(i)):
                    outs.append((p, i, c))
                if self.offers(slot, In(i)):
                    ins.append((p, i, c))
        for p, i, c in outs:
            for q, j, d in ins:
                if p != q and c == d:
                    moves.append(Sync(p, i, q, j))
        moves.sort(key=self._key)
        return moves

    def successors(self, s: GlobalState, m: ClosedWorldMove) -> list[Step]:
        """All canonical successors of ``s`` by ``m``, one per branch."""
        players = list(s.players)
        ticked = s.ticked
        # (role, node ref, channels, slot it replaces or None to append)
        made: list[tuple[str, NodeRef, tuple[int, ...], int | None]] = []

        def need(slot: Slot, move: BasicMove) -> NodeRef:
            nxt = self.offers(slot, move)
            if nxt is None:
                raise ValueError(f"move {m} is not enabled")
            return nxt

        if isinstance(m, Fork):
            slot = players[m.player]
            made.append(("left", need(slot, FORK_L), slot[3], m.player))
            made.append(("right", need(slot, FORK_R), slot[3], None))
            touched = {m.player}
        elif isinstance(m, Tick):
            slot = players[m.player]
            made.append(("self", need(slot, TICK), slot[3], m.player))
            ticked = True
            touched = {m.player}
        elif isinstance(m, Nu):
            slot = players[m.player]
            fresh = max((c for sl in players for c in sl[3]), default=-1) + 1
            made.append(("self", need(slot, NU), slot[3] + (fresh,), m.player))
            touched = {m.player}
        elif isinstance(m, Sync):
            if m.sender == m.receiver:
                raise ValueError("a player cannot synchronise with itself")
            sp, rp = players[m.sender], players[m.receiver]
            if sp[3][m.out_index - 1] != rp[3][m.in_index - 1]:
                raise ValueError(f"move {m} is not enabled")
            made.append(("sender", need(sp, Out(m.out_index)), sp[3], m.sender))
            made.append(("receiver", need(rp, In(m.in_index)), rp[3], m.receiver))
            touched = {m.sender, m.receiver}
        else:
            raise TypeError(m)

        sysidx = {id(sys): k for k, sys in enumerate(self.systems)}
        out = []
        for branch in product(*(range(ref.state_count()) for _, ref, _, _ in made)):
            raw = list(players)
            origin: list[tuple[str, int]] = [("old", k) for k in range(len(raw))]
            for (role, ref, tup, at), b in zip(made, branch):
                new = (sysidx[id(ref.system)], ref.node, b, tup)
                if at is None:
                    raw.append(new)
                    origin.append(("new", len(raw) - 1))
                else:
                    raw[at] = new
            canon, where = self.canonicalize(GlobalState(tuple(raw), ticked))
            witness = tuple(
                (k, where[k]) for k in range(len(players)) if k not in touched
            )
            created = []
            for (role, _, _, at) in made:
                k = at if at is not None else len(players)
                created.append(Created(role, where[k]))
            out.append(Step(canon, witness, tuple(created), branch))
        return out

    # -- canonical forms -----------------------------------------------------------

    def canonicalize(self, s: GlobalState) -> tuple[GlobalState, dict[int, int | None]]:
        """Canonical representative of ``s`` and where each player went.

        Inert players map to None.  Two states get the same representative
        iff they are related by renaming players and channels.
        """
        live = [k for k, slot in enumerate(s.players) if not self.inert(slot)]
        entries = [s.players[k] for k in live]
        labels = [sl[:3] for sl in entries]
        tuples = [sl[3] for sl in entries]
        ranks = _canonical_channel_ranks(labels, tuples)
        keyed = sorted(
            range(len(entries)),
            key=lambda k: (labels[k], tuple(ranks[c] for c in tuples[k]), k),
        )
        players = tuple(
            labels[k] + (tuple(ranks[c] for c in tuples[k]),) for k in keyed
        )
        where: dict[int, int | None] = {k: None for k in range(len(s.players))}
        for pos, k in enumerate(keyed):
            where[live[k]] = pos
        return GlobalState(players, s.ticked), where

    def initial_states(self, g: GlobalStrategy) -> list[tuple[GlobalState, dict[Hashable, int | None]]]:
        """Canonical initial states, one per choice of root states, with the
        slot of every named player."""
        chan_index = {c: i for i, c in enumerate(g.position.channels)}
        refs = [(p, g.assignment[p], tuple(chan_index[c] for c in t)) for p, t in g.position.players]
        sysidx = {id(sys): k for k, sys in enumerate(self.systems)}
        out = []
        for branch in product(*(range(ref.state_count()) for _, ref, _ in refs)):
            raw = tuple(
                (sysidx[id(ref.system)], ref.node, b, tup) for (_, ref, tup), b in zip(refs, branch)
            )
            canon, where = self.canonicalize(GlobalState(raw))
            out.append((canon, {p: where[k] for k, (p, _, _) in enumerate(refs)}))
        return out


def _refine(labels, tuples, chan_color: dict[int, int]) -> dict[int, int]:
    """Colour refinement of channels by the players that know them."""
    while True:
        pcol = [(labels[k], tuple(chan_color[c] for c in tuples[k])) for k in range(len(labels))]
        sig: dict[int, list] = {c: [] for c in chan_color}
        for k, tup in enumerate(tuples):
            for pos, c in enumerate(tup):
                sig[c].append((pcol[k], pos))
        full = {c: (chan_color[c], tuple(sorted(sig[c]))) for c in chan_color}
        order = sorted(set(full.values()))
        rank = {v: i for i, v in enumerate(order)}
        new = {c: rank[full[c]] for c in chan_color}
        if len(order) == len(set(chan_color.values())):
            return new
        chan_color = new


def _certificate(labels, tuples, ranks: dict[int, int]) -> tuple:
    return tuple(sorted((labels[k], tuple(ranks[c] for c in tuples[k])) for k in range(len(labels))))


def _canonical_channel_ranks(labels, tuples) -> dict[int, int]:
    chans = sorted({c for t in tuples for c in t})
    if not chans:
        return {}
    best: list = [None, None]

    def search(color: dict[int, int]) -> None:
        color = _refine(labels, tuples, color)
        classes: dict[int, list[int]] = {}
        for c, col in color.items():
            classes.setdefault(col, []).append(c)
        ambiguous = [col for col, cs in classes.items() if len(cs) > 1]
        if not ambiguous:
            cert = _certificate(labels, tuples, color)
            if best[0] is None or cert < best[0]:
                best[0], best[1] = cert, color
            return
        target = min(ambiguous)
        # individualise each member of the first ambiguous class in turn
        for c in sorted(classes[target]):
            trial = {d: 2 * col + (1 if col > target or (d != c and col == target) else 0)
                     for d, col in color.items()}
            trial[c] = 2 * target
            search(trial)

    search({c: 0 for c in chans})
    return best[1]


# -- exploration ------------------------------------------------------------------


@dataclass(frozen=True)
class Transition:
    src: int
    dst: int
    move: ClosedWorldMove
    success: bool
    witness: tuple[tuple[int, int], ...]
    created: tuple[Created, ...]
    branch: tuple[int, ...]

    @property
    def players(self) -> tuple[int, ...]:
        m = self.move
        return (m.sender, m.receiver) if isinstance(m, Sync) else (m.player,)


@dataclass
class TransitionGraph:
    states: list[GlobalState]
    transitions: list[Transition]
    initial: list[tuple[int, dict[Hashable, int | None]]]
    expanded: list[bool]
    depth: list[int]
    truncated: bool
    engine: Engine = field(repr=False)
    _out: list[list[int]] | None = field(default=None, repr=False)

    def outgoing(self, s: int) -> list[Transition]:
        if self._out is None:
            out: list[list[int]] = [[] for _ in self.states]
            for k, t in enumerate(self.transitions):
                out[t.src].append(k)
            self._out = out
        return [self.transitions[k] for k in self._out[s]]

    def outgoing_indices(self, s: int) -> list[int]:
        self.outgoing(s)
        return self._out[s]

    def to_json(self) -> dict:
        return {
            "states": [_state_json(self.engine, s, k, self) for k, s in enumerate(self.states)],
            "initial": sorted({k for k, _ in self.initial}),
            "transitions": [_transition_json(t) for t in self.transitions],
            "truncated": self.truncated,
        }

    def to_dot(self) -> str:
        lines = ["digraph world {", "  rankdir=LR;", "  node [shape=record];"]
        init = {k for k, _ in self.initial}
        for k, s in enumerate(self.states):
            players = "|".join(
                f"{self.engine.systems[sl[0]] is not None and sl[1]}#{sl[2]} ({','.join(map(str, sl[3]))})"
                for sl in s.players
            ) or "(no players)"
            players = players.replace('"', "'").replace("{", "(").replace("}", ")").replace("<", "(").replace(">", ")")
            attrs = []
            if s.ticked:
                attrs.append("color=green")
            if k in init:
                attrs.append("penwidth=2")
            if not self.expanded[k]:
                attrs.append("style=dashed")
            extra = (", " + ", ".join(attrs)) if attrs else ""
            lines.append(f'  s{k} [label="{{s{k}|{players}}}"{extra}];')
        for t in self.transitions:
            style = ", color=green, penwidth=2" if t.success else ""
            lines.append(f'  s{t.src} -> s{t.dst} [label="{_move_str(t.move)}"{style}];')
        lines.append("}")
        return "\n".join(lines)


def _move_str(m: ClosedWorldMove) -> str:
    if isinstance(m, Sync):
        return f"sync({m.sender}.{m.out_index}->{m.receiver}.{m.in_index})"
    return f"{type(m).__name__.lower()}({m.player})"


def _move_json(m: ClosedWorldMove) -> dict:
    if isinstance(m, Sync):
        return {"kind": "sync", "sender": m.sender, "out": m.out_index,
                "receiver": m.receiver, "in": m.in_index}
    return {"kind": type(m).__name__.lower(), "player": m.player}


def _transition_json(t: Transition) -> dict:
    return {
        "src": t.src,
        "dst": t.dst,
        "move": _move_json(t.move),
        "players": list(t.players),
        "success": t.success,
        "witness": {str(a): b for a, b in t.witness},
        "created": [{"role": c.role, "slot": c.slot} for c in t.created],
        "branch": list(t.branch),
    }


def _state_json(engine: Engine, s: GlobalState, k: int, g: TransitionGraph) -> dict:
    return {
        "id": k,
        "ticked": s.ticked,
        "expanded": g.expanded[k],
        "players": [
            {"system": sl[0], "node": sl[1], "state": sl[2], "channels": list(sl[3])}
            for sl in s.players
        ],
    }


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("CCSW_THREADS", "1")))
    except ValueError:
        return 1


def explore(
    g: GlobalStrategy,
    max_states: int = 20000,
    max_depth: int = 200,
    workers: int | None = None,
    move_order: Sequence[str] = DEFAULT_MOVE_ORDER,
    stop_at_success: bool = True,
) -> TransitionGraph:
    """Breadth-first enumeration of the reachable canonical states.

    With ``stop_at_success`` the states reached after a tick are kept but
    not expanded further: nothing that happens there can change a verdict.

    Each level is expanded in parallel and merged in a fixed order, so the
    result does not depend on the number of workers.
    """
    if max_states < 1 or max_depth < 0:
        raise ValueError("bounds must be positive")
    systems: list[StrategySystem] = []
    for _, ref in g.strategies:
        if all(ref.system is not s for s in systems):
            systems.append(ref.system)
    engine = Engine(systems, move_order)
    workers = workers or worker_count()

    index: dict[GlobalState, int] = {}
    states: list[GlobalState] = []
    expanded: list[bool] = []
    depth: list[int] = []
    truncated = False

    def intern(s: GlobalState, d: int) -> tuple[int | None, bool]:
        k = index.get(s)
        if k is not None:
            return k, False
        if len(states) >= max_states:
            return None, False
        index[s] = len(states)
        states.append(s)
        expanded.append(False)
        depth.append(d)
        return len(states) - 1, True

    initial = []
    for s, where in engine.initial_states(g):
        k, _ = intern(s, 0)
        if k is None:
            truncated = True
            continue
        initial.append((k, where))
    transitions: list[Transition] = []
    frontier = sorted({k for k, _ in initial})

    def expand(k: int) -> list[tuple[ClosedWorldMove, list[Step]]]:
        s = states[k]
        if s.ticked and stop_at_success:
            return []
        return [(m, engine.successors(s, m)) for m in engine.enabled_moves(s)]

    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        level = 0
        while frontier:
            if level >= max_depth:
                truncated = True
                break
            if pool is None:
                results = [expand(k) for k in frontier]
            else:
                results = list(pool.map(expand, frontier))
            nxt = []
            for k, res in zip(frontier, results):
                complete = True
                for m, steps in res:
                    for st in steps:
                        d, new = intern(st.state, level + 1)
                        if d is None:
                            complete = False
                            continue
                        if new:
                            nxt.append(d)
                        transitions.append(Transition(
                            k, d, m, isinstance(m, Tick), st.witness, st.created, st.branch,
                        ))
                expanded[k] = complete
                truncated = truncated or not complete
            frontier = nxt
            level += 1
    finally:
        if pool is not None:
            pool.shutdown()
    return TransitionGraph(states, transitions, initial, expanded, depth, truncated, engine)
