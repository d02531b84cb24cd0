"""Plays as causal runs: positions, move events, views and Kan extension.

A run starts from a position and applies move events.  Each event consumes
the avatars it involves and creates new ones, named after their parent:

    Fork p        p.l, p.r          Sync p i q j   p.o (sender), q.i (receiver)
    Tick p        p.t               Nu p           p.n, knowing one fresh channel
    Open p m      one child of p for a single basic move m (forkL -> p.l, ...)

The view of an avatar is the chain of basic moves leading to it from its
initial player.  Because every avatar is consumed at most once, the views of
a run form a forest under the prefix order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence, Union

from .strategy import FORK_L, FORK_R, NU, TICK, BasicMove, In, NodeRef, Out, check_view


class RunError(ValueError):
    pass


class InconsistentRestriction(ValueError):
    pass


@dataclass(frozen=True)
class Position:
    channels: tuple[Hashable, ...]
    players: tuple[tuple[Hashable, tuple[Hashable, ...]], ...]

    def __post_init__(self):
        chans = set(self.channels)
        if len(chans) != len(self.channels):
            raise ValueError("repeated channel")
        names = [p for p, _ in self.players]
        if len(set(names)) != len(names):
            raise ValueError("repeated player")
        for p, tup in self.players:
            for c in tup:
                if c not in chans:
                    raise ValueError(f"player {p} knows unknown channel {c!r}")

    @classmethod
    def of(cls, players: Mapping[Hashable, Sequence[Hashable]], channels: Iterable[Hashable] | None = None) -> "Position":
        if channels is None:
            seen: dict = {}
            for tup in players.values():
                for c in tup:
                    seen.setdefault(c, None)
            channels = seen
        return cls(tuple(channels), tuple((p, tuple(t)) for p, t in players.items()))

    def arity(self, player: Hashable) -> int:
        return len(dict(self.players)[player])


# -- move events ---------------------------------------------------------------


@dataclass(frozen=True)
class Fork:
    player: Hashable


@dataclass(frozen=True)
class Tick:
    player: Hashable


@dataclass(frozen=True)
class Nu:
    player: Hashable


@dataclass(frozen=True)
class Sync:
    sender: Hashable
    out_index: int  # 1-based, in the sender's tuple
    receiver: Hashable
    in_index: int


@dataclass(frozen=True)
class Open:
    """A single basic move played against the environment."""

    player: Hashable
    move: BasicMove


ClosedWorldMove = Union[Fork, Tick, Nu, Sync]
Event = Union[Fork, Tick, Nu, Sync, Open]

_SUFFIX = {"forkL": "l", "forkR": "r", "tick": "t", "nu": "n", "in": "i", "out": "o"}


def view_decomposition(m: Event) -> list[tuple[BasicMove, str]]:
    """Basic moves the event contributes to the views of its participants."""
    if isinstance(m, Fork):
        return [(FORK_L, "left"), (FORK_R, "right")]
    if isinstance(m, Sync):
        return [(Out(m.out_index), "sender"), (In(m.in_index), "receiver")]
    if isinstance(m, Tick):
        return [(TICK, "self")]
    if isinstance(m, Nu):
        return [(NU, "self")]
    return [(m.move, "self")]


def participants(m: Event) -> tuple[Hashable, ...]:
    if isinstance(m, Sync):
        return (m.sender, m.receiver)
    return (m.player,)


def event_to_json(m: Event) -> dict:
    if isinstance(m, Sync):
        return {"kind": "sync", "sender": m.sender, "out": m.out_index,
                "receiver": m.receiver, "in": m.in_index}
    if isinstance(m, Open):
        return {"kind": "open", "player": m.player, "move": str(m.move)}
    return {"kind": type(m).__name__.lower(), "player": m.player}


def event_from_json(d: Mapping) -> Event:
    kind = d["kind"]
    if kind == "sync":
        return Sync(d["sender"], d["out"], d["receiver"], d["in"])
    if kind == "open":
        return Open(d["player"], BasicMove.parse(d["move"]))
    return {"fork": Fork, "tick": Tick, "nu": Nu}[kind](d["player"])


@dataclass(frozen=True)
class Avatar:
    name: str
    channels: tuple[Hashable, ...]
    parent: str | None
    root: str
    view: tuple[BasicMove, ...]


@dataclass(frozen=True)
class Run:
    """A finite play: an initial position and a sequence of events."""

    position: Position
    events: tuple[Event, ...] = ()
    _avatars: dict = field(default=None, compare=False, repr=False, hash=False)
    _alive: tuple = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        avatars: dict[str, Avatar] = {}
        alive: dict[str, None] = {}
        channels = list(self.position.channels)
        for p, tup in self.position.players:
            name = str(p)
            avatars[name] = Avatar(name, tup, None, name, ())
            alive[name] = None
        fresh = 0
        for k, e in enumerate(self.events):
            parts = [str(x) for x in participants(e)]
            for x in parts:
                if x not in alive:
                    raise RunError(f"event {k}: avatar {x!r} is not alive")
            if len(set(parts)) != len(parts):
                raise RunError(f"event {k}: an avatar cannot synchronise with itself")
            created = []
            if isinstance(e, Sync):
                s, r = avatars[parts[0]], avatars[parts[1]]
                if not (1 <= e.out_index <= len(s.channels) and 1 <= e.in_index <= len(r.channels)):
                    raise RunError(f"event {k}: channel index out of range")
                if s.channels[e.out_index - 1] != r.channels[e.in_index - 1]:
                    raise RunError(f"event {k}: sender and receiver use different channels")
                created = [(s, Out(e.out_index), s.channels), (r, In(e.in_index), r.channels)]
            else:
                a = avatars[parts[0]]
                for move, _ in view_decomposition(e):
                    if not move.valid_at(len(a.channels)):
                        raise RunError(f"event {k}: {move} not available to {a.name}")
                    tup = a.channels
                    if move == NU:
                        while f"#{fresh}" in channels:
                            fresh += 1
                        new = f"#{fresh}"
                        channels.append(new)
                        tup = tup + (new,)
                    created.append((a, move, tup))
            for x in parts:
                del alive[x]
            for parent, move, tup in created:
                name = f"{parent.name}.{_SUFFIX[move.kind]}"
                avatars[name] = Avatar(name, tup, parent.name, parent.root, parent.view + (move,))
                alive[name] = None
        object.__setattr__(self, "_avatars", avatars)
        object.__setattr__(self, "_alive", tuple(alive))

    def extend(self, *events: Event) -> "Run":
        return Run(self.position, self.events + tuple(events))

    @property
    def avatars(self) -> dict[str, Avatar]:
        return dict(self._avatars)

    @property
    def alive(self) -> tuple[str, ...]:
        return self._alive

    def to_json(self) -> dict:
        return {
            "channels": [str(c) for c in self.position.channels],
            "players": {str(p): [str(c) for c in t] for p, t in self.position.players},
            "events": [event_to_json(e) for e in self.events],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "Run":
        pos = Position.of(data["players"], data.get("channels"))
        return cls(pos, tuple(event_from_json(e) for e in data["events"]))


# -- views -------------------------------------------------------------------------


@dataclass(frozen=True)
class View:
    root: str
    arity: int
    moves: tuple[BasicMove, ...]

    def __post_init__(self):
        check_view(self.arity, self.moves)

    def __str__(self) -> str:
        return f"{self.root}[{', '.join(map(str, self.moves))}]"


@dataclass(frozen=True)
class PrefixForest:
    """Views of a run, one node per avatar, parent = causal predecessor."""

    nodes: tuple[tuple[str, View, str | None], ...]  # avatar, view, parent avatar
    alive: frozenset[str]

    def children(self) -> dict[str | None, list[str]]:
        out: dict[str | None, list[str]] = {}
        for a, _, parent in self.nodes:
            out.setdefault(parent, []).append(a)
        return out

    def view_of(self, avatar: str) -> View:
        return {a: v for a, v, _ in self.nodes}[avatar]

    def roots(self) -> list[str]:
        return [a for a, _, parent in self.nodes if parent is None]

    def leaves(self) -> list[str]:
        parents = {p for _, _, p in self.nodes}
        return [a for a, _, _ in self.nodes if a not in parents]

    def to_dot(self) -> str:
        lines = ["digraph views {", "  node [shape=box];"]
        for a, v, parent in self.nodes:
            style = "" if a in self.alive else ", style=dashed"
            label = " ".join(map(str, v.moves)) or "id"
            lines.append(f'  "{a}" [label="{a}\\n{label}"{style}];')
            if parent is not None:
                lines.append(f'  "{parent}" -> "{a}" [label="{v.moves[-1]}"];')
        lines.append("}")
        return "\n".join(lines)


def views_of(run: Run) -> PrefixForest:
    arities = {str(p): len(t) for p, t in run.position.players}
    nodes = tuple(
        (a.name, View(a.root, arities[a.root], a.view), a.parent) for a in run._avatars.values()
    )
    return PrefixForest(nodes, frozenset(run.alive))


# -- global states (Kan extension of concrete strategies) -----------------------


def global_states(assign: Mapping[Hashable, NodeRef], run: Run) -> int:
    """Number of compatible families of threads over the views of ``run``.

    A family picks, for every view, a thread of the owning player's strategy
    on it, each choice restricting to the choice made on the parent view.
    """
    forest = views_of(run)
    children = forest.children()
    moves = {a: v.moves[-1] for a, v, _ in forest.nodes if v.moves}
    for p, tup in run.position.players:
        if p not in assign:
            raise KeyError(f"no strategy for player {p!r}")
        if assign[p].arity != len(tup):
            raise ValueError(f"strategy of {p!r} has arity {assign[p].arity}, player has {len(tup)}")

    def count(avatar: str, ref: NodeRef, state: int) -> int:
        total = 1
        for child in children.get(avatar, ()):
            nxt = ref.successor(state, moves[child])
            total *= sum(count(child, nxt, j) for j in range(nxt.state_count()))
            if total == 0:
                return 0
        return total

    result = 1
    for p, _ in run.position.players:
        ref = assign[p]
        result *= sum(count(str(p), ref, i) for i in range(ref.state_count()))
    return result


# -- tabulated right Kan extension -------------------------------------------------


@dataclass(frozen=True)
class KanResult:
    values: dict[str, int]
    non_innocent: tuple[str, ...]


def _key(v: View) -> tuple:
    return (v.root, v.moves)


def kan_extend_tabulated(
    view_values: Mapping[View, int],
    plays: Mapping[str, Run],
    play_values: Mapping[str, int] | None = None,
    restrictions: Mapping[tuple[View, View], Sequence[int]] | None = None,
) -> KanResult:
    """Extend a presheaf given on views to the tabulated plays.

    ``view_values`` gives the ordinal at each view (missing views count as
    0).  ``restrictions[(v, w)]`` is the monotone map from the value at ``v``
    to the value at its one-move-shorter prefix ``w``; it may be omitted when
    ``w`` has value 1.  When ``play_values`` is given, every play whose value
    differs from the extension is reported as a witness of non-innocence.
    """
    vals = {_key(v): n for v, n in view_values.items()}
    rmaps = {(_key(v), _key(w)): tuple(m) for (v, w), m in (restrictions or {}).items()}
    for (v, w), m in rmaps.items():
        if v[0] != w[0] or v[1][:-1] != w[1]:
            raise InconsistentRestriction(f"{w} is not the immediate prefix of {v}")
        if len(m) != vals.get(v, 0):
            raise InconsistentRestriction(f"restriction from {v} has the wrong length")
        if any(not 0 <= x < vals.get(w, 0) for x in m) or list(m) != sorted(m):
            raise InconsistentRestriction(f"restriction from {v} is not monotone into {w}")

    def restriction(child: tuple, parent: tuple) -> tuple[int, ...]:
        m = rmaps.get((child, parent))
        if m is not None:
            return m
        n = vals.get(child, 0)
        if n == 0:
            return ()
        if vals.get(parent, 0) == 1:
            return (0,) * n
        raise InconsistentRestriction(f"no restriction map from {child} to {parent}")

    values = {}
    for name, run in plays.items():
        forest = views_of(run)
        children = forest.children()
        keys = {a: _key(v) for a, v, _ in forest.nodes}

        def count(avatar: str, element: int) -> int:
            total = 1
            for child in children.get(avatar, ()):
                r = restriction(keys[child], keys[avatar])
                total *= sum(count(child, e) for e, image in enumerate(r) if image == element)
                if total == 0:
                    return 0
            return total

        result = 1
        for root in forest.roots():
            result *= sum(count(root, e) for e in range(vals.get(keys[root], 0)))
        values[name] = result
    flagged = tuple(
        name for name in plays if play_values is not None and name in play_values
        and play_values[name] != values[name]
    )
    return KanResult(values, flagged)
