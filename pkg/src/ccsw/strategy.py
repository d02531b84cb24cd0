"""Innocent strategies as finite equation systems.

A strategy at arity ``n`` is a node carrying an ordered list of states.  Each
state maps every basic move of arity ``n`` to a successor node of the move's
target arity.  Moves missing from a state's table lead to the empty strategy.
Unfolding a node gives a presheaf of finite ordinals on views: the value at a
view is the number of threads (root state, then one state per move).

Nodes can be deferred: their states are produced on first access by an
expander callback, which is how recursive processes get an infinite unfolding
out of finitely many equations.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

KINDS = ("forkL", "forkR", "tick", "nu", "in", "out")


class ArityError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class BasicMove:
    kind: str
    index: int = 0  # channel index for in/out, 1-based

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown move kind {self.kind!r}")
        if (self.kind in ("in", "out")) != (self.index > 0):
            raise ValueError(f"bad index {self.index} for {self.kind}")

    def __str__(self) -> str:
        return f"{self.kind}:{self.index}" if self.index else self.kind

    @classmethod
    def parse(cls, text: str) -> "BasicMove":
        if ":" in text:
            kind, idx = text.split(":", 1)
            return cls(kind, int(idx))
        return cls(text)

    def valid_at(self, n: int) -> bool:
        return self.index <= n

    def target_arity(self, n: int) -> int:
        return n + 1 if self.kind == "nu" else n


FORK_L = BasicMove("forkL")
FORK_R = BasicMove("forkR")
TICK = BasicMove("tick")
NU = BasicMove("nu")


def In(i: int) -> BasicMove:
    return BasicMove("in", i)


def Out(i: int) -> BasicMove:
    return BasicMove("out", i)


def basic_moves(n: int) -> list[BasicMove]:
    """The move alphabet at arity ``n``: forkL, forkR, tick, nu, in:1..n, out:1..n."""
    if n < 0:
        raise ValueError("arity must be non-negative")
    return [FORK_L, FORK_R, TICK, NU] + [In(i) for i in range(1, n + 1)] + [
        Out(i) for i in range(1, n + 1)
    ]


def target_arity(move: BasicMove, n: int) -> int:
    return move.target_arity(n)


def check_view(n: int, view: Sequence[BasicMove]) -> int:
    """Return the final arity of ``view`` played from arity ``n``."""
    for m in view:
        if not m.valid_at(n):
            raise ArityError(f"move {m} not available at arity {n}")
        n = m.target_arity(n)
    return n


State = Mapping[BasicMove, str]


@dataclass
class _Node:
    arity: int
    states: tuple[dict[BasicMove, str], ...] | None
    expander: Callable[[], Iterable[Mapping[BasicMove, str]]] | None = None
    hole: bool = False


class StrategySystem:
    """A finite (possibly lazily grown) set of strategy equations.

    Node identifiers are strings.  ``empty@n`` always exists implicitly.
    Systems only ever grow, and a node's states never change once computed,
    so references can be shared freely between threads.
    """

    def __init__(self):
        self._nodes: dict[str, _Node] = {}
        self._lock = threading.RLock()
        self._expanding: set[str] = set()

    # -- construction -----------------------------------------------------

    def _register(self, node_id: str, node: _Node) -> "NodeRef":
        with self._lock:
            old = self._nodes.get(node_id)
            if old is not None:
                if old.arity != node.arity:
                    raise ArityError(f"node {node_id} redefined with another arity")
                return NodeRef(self, node_id)
            self._nodes[node_id] = node
        return NodeRef(self, node_id)

    def add_node(self, node_id: str, arity: int, states: Iterable[Mapping[BasicMove, str]]) -> "NodeRef":
        states = tuple(self._validate_state(arity, s) for s in states)
        return self._register(node_id, _Node(arity, states))

    def defer(self, node_id: str, arity: int, expander: Callable[[], Iterable[Mapping[BasicMove, str]]]) -> "NodeRef":
        """Declare ``node_id`` whose states are computed on first use."""
        return self._register(node_id, _Node(arity, None, expander))

    def hole(self, n: int) -> "NodeRef":
        return self._register(f"hole@{n}", _Node(n, (), hole=True))

    def empty(self, n: int) -> "NodeRef":
        return self._register(f"empty@{n}", _Node(n, ()))

    def singleton(self, n: int, table: Mapping[BasicMove, "NodeRef | str"], node_id: str | None = None) -> "NodeRef":
        """The one-state strategy ``<M -> F_M, _ -> empty>``."""
        state = {m: self._own(r) for m, r in table.items()}
        node_id = node_id or self._fresh_id("s")
        return self.add_node(node_id, n, [state])

    def sum(self, refs: Sequence["NodeRef | str"], arity: int | None = None, node_id: str | None = None) -> "NodeRef":
        """Concatenate the state lists of ``refs`` in order."""
        ids = [self._own(r) for r in refs]
        arities = {self.arity(i) for i in ids}
        if arity is not None:
            arities.add(arity)
        if len(arities) != 1:
            if not arities:
                raise ArityError("empty sum needs an explicit arity")
            raise ArityError(f"sum of strategies of arities {sorted(arities)}")
        n = arities.pop()
        if not ids:
            return self.empty(n)
        states = [s for i in ids for s in self.states(i)]
        return self.add_node(node_id or self._fresh_id("sum"), n, states)

    def _own(self, r: "NodeRef | str") -> str:
        if isinstance(r, NodeRef):
            if r.system is not self:
                raise ValueError("node belongs to another system")
            return r.node
        if r not in self._nodes and not r.startswith(("empty@", "hole@")):
            raise KeyError(r)
        if r.startswith("empty@"):
            self.empty(int(r[6:]))
        elif r.startswith("hole@"):
            self.hole(int(r[5:]))
        return r

    def _fresh_id(self, prefix: str) -> str:
        with self._lock:
            k = len(self._nodes)
            while f"{prefix}{k}" in self._nodes:
                k += 1
            return f"{prefix}{k}"

    def _validate_state(self, n: int, state: Mapping[BasicMove, str]) -> dict[BasicMove, str]:
        out = {}
        for m, target in state.items():
            if not m.valid_at(n):
                raise ArityError(f"move {m} not available at arity {n}")
            target = self._own(target)
            if self.arity(target) != m.target_arity(n):
                raise ArityError(
                    f"successor {target} of {m} has arity {self.arity(target)}, "
                    f"expected {m.target_arity(n)}"
                )
            if not target.startswith("empty@"):
                out[m] = target
        return out

    # -- access -------------------------------------------------------------

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._nodes

    def node_ids(self) -> list[str]:
        with self._lock:
            return list(self._nodes)

    def _node(self, node_id: str) -> _Node:
        node = self._nodes.get(node_id)
        if node is None:
            if node_id.startswith("empty@"):
                return self.empty(int(node_id[6:])).system._nodes[node_id]
            raise KeyError(node_id)
        return node

    def arity(self, node_id: str) -> int:
        return self._node(node_id).arity

    def is_hole(self, node_id: str) -> bool:
        return self._node(node_id).hole

    def states(self, node_id: str) -> tuple[dict[BasicMove, str], ...]:
        node = self._node(node_id)
        if node.states is not None:
            return node.states
        with self._lock:
            if node.states is not None:
                return node.states
            if node_id in self._expanding:
                # reached again without an intervening move: unguarded recursion
                return ()
            self._expanding.add(node_id)
            try:
                raw = list(node.expander())
            finally:
                self._expanding.discard(node_id)
            node.states = tuple(self._validate_state(node.arity, s) for s in raw)
            node.expander = None
            return node.states

    def successor(self, node_id: str, state: int, move: BasicMove) -> str:
        return self.states(node_id)[state].get(move, f"empty@{move.target_arity(self.arity(node_id))}")

    def ref(self, node_id: str) -> "NodeRef":
        self._node(node_id)
        return NodeRef(self, node_id)


@dataclass(frozen=True)
class NodeRef:
    system: StrategySystem
    node: str

    @property
    def arity(self) -> int:
        return self.system.arity(self.node)

    def states(self) -> tuple[dict[BasicMove, str], ...]:
        return self.system.states(self.node)

    def state_count(self) -> int:
        return len(self.states())

    def successor(self, state: int, move: BasicMove) -> "NodeRef":
        return NodeRef(self.system, self.system.successor(self.node, state, move))

    def is_empty(self) -> bool:
        return not self.states()

    def is_hole(self) -> bool:
        return self.system.is_hole(self.node)

    def __hash__(self):
        return hash((id(self.system), self.node))

    def __eq__(self, other):
        return isinstance(other, NodeRef) and other.system is self.system and other.node == self.node

    def __repr__(self) -> str:
        return f"NodeRef({self.node!r})"


# ---------------------------------------------------------------------------
# Module-level constructors on fresh systems
# ---------------------------------------------------------------------------


def empty_strategy(n: int, system: StrategySystem | None = None) -> NodeRef:
    return (system or StrategySystem()).empty(n)


def singleton(n: int, table: Mapping[BasicMove, NodeRef], system: StrategySystem | None = None) -> NodeRef:
    if system is None:
        systems = {id(r.system): r.system for r in table.values()}
        if len(systems) > 1:
            raise ValueError("table mixes strategy systems")
        system = next(iter(systems.values()), None) or StrategySystem()
    return system.singleton(n, table)


def sum_strategies(refs: Sequence[NodeRef], arity: int | None = None) -> NodeRef:
    if not refs:
        if arity is None:
            raise ArityError("empty sum needs an explicit arity")
        return empty_strategy(arity)
    system = refs[0].system
    return system.sum(refs, arity)


def zero(n: int, system: StrategySystem | None = None) -> NodeRef:
    """The strategy ``0``: one state refusing every move."""
    system = system or StrategySystem()
    return system.add_node(f"zero@{n}", n, [{}])


# ---------------------------------------------------------------------------
# Evaluation, truncation, comparison
# ---------------------------------------------------------------------------


def evaluate(s: NodeRef, view: Sequence[BasicMove]) -> int:
    """Number of threads of ``s`` along ``view``: the presheaf value there."""
    check_view(s.arity, view)
    system = s.system
    weights = {s.node: 1}
    for move in view:
        nxt: dict[str, int] = {}
        for node, w in weights.items():
            for st in system.states(node):
                target = st.get(move)
                if target is not None:
                    nxt[target] = nxt.get(target, 0) + w
        weights = nxt
        if not weights:
            return 0
    return sum(w * len(system.states(node)) for node, w in weights.items())


def truncate(s: NodeRef, depth: int) -> NodeRef:
    """A finite copy of ``s`` exact on views of at most ``depth`` moves.

    Below that depth successors are holes, which compare equal to anything.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    src = s.system
    out = StrategySystem()

    def key(node: str, k: int) -> str:
        return f"{node}#{k}"

    todo = [(s.node, depth)]
    seen = {(s.node, depth)}
    while todo:
        node, k = todo.pop()
        n = src.arity(node)
        if src.is_hole(node):
            continue
        states = []
        for st in src.states(node):
            table = {}
            for m in basic_moves(n):
                if k == 0:
                    table[m] = out.hole(m.target_arity(n)).node
                    continue
                target = st.get(m)
                if target is None:
                    continue
                if src.is_hole(target):
                    table[m] = out.hole(src.arity(target)).node
                    continue
                table[m] = key(target, k - 1)
                if (target, k - 1) not in seen:
                    seen.add((target, k - 1))
                    todo.append((target, k - 1))
            states.append(table)
        out._nodes[key(node, k)] = _Node(n, None, None)
        out._nodes[key(node, k)].states = tuple(states)
    if src.is_hole(s.node):
        return out.hole(s.arity)
    # validate arities now that every node exists
    for nid, nd in list(out._nodes.items()):
        if not nd.hole:
            nd.states = tuple(out._validate_state(nd.arity, st) for st in nd.states)
    return NodeRef(out, key(s.node, depth))


def _check_same_arity(a: NodeRef, b: NodeRef) -> None:
    if a.arity != b.arity:
        raise ArityError(f"arities {a.arity} and {b.arity} differ")


def equal_up_to_depth(a: NodeRef, b: NodeRef, depth: int) -> bool:
    """Equality of the two presheaves on every view of at most ``depth`` moves."""
    _check_same_arity(a, b)
    memo: dict[tuple[str, str, int], bool] = {}
    sa, sb = a.system, b.system

    def eq(x: str, y: str, k: int) -> bool:
        if sa.is_hole(x) or sb.is_hole(y):
            return True
        key = (x, y, k)
        if key in memo:
            return memo[key]
        xs, ys = sa.states(x), sb.states(y)
        result = len(xs) == len(ys)
        if result and k > 0:
            n = sa.arity(x)
            for stx, sty in zip(xs, ys):
                for m in basic_moves(n):
                    tx, ty = stx.get(m), sty.get(m)
                    if tx is None and ty is None:
                        continue
                    tx = tx or sa.empty(m.target_arity(n)).node
                    ty = ty or sb.empty(m.target_arity(n)).node
                    if not eq(tx, ty, k - 1):
                        result = False
                        break
                if not result:
                    break
        memo[key] = result
        return result

    return eq(a.node, b.node, depth)


def reachable(s: NodeRef, limit: int | None = None) -> list[str]:
    """Node ids reachable from ``s`` in breadth-first order."""
    system = s.system
    order = [s.node]
    seen = {s.node}
    queue = deque(order)
    while queue:
        node = queue.popleft()
        n = system.arity(node)
        for st in system.states(node):
            for m in basic_moves(n):
                t = st.get(m)
                if t is not None and t not in seen:
                    seen.add(t)
                    order.append(t)
                    queue.append(t)
                    if limit is not None and len(order) > limit:
                        raise OverflowError(f"more than {limit} reachable nodes")
    return order


def regular_equal(a: NodeRef, b: NodeRef, limit: int = 100_000) -> bool:
    """Equality of the infinite unfoldings, by partition refinement.

    Only meaningful for systems with finitely many reachable nodes; raises
    OverflowError past ``limit`` nodes.
    """
    _check_same_arity(a, b)
    items = [(a.system, n) for n in reachable(a, limit)] + [
        (b.system, n) for n in reachable(b, limit)
    ]
    index = {(id(sys), n): k for k, (sys, n) in enumerate(items)}
    succ = []
    for sys, n in items:
        ar = sys.arity(n)
        rows = []
        for st in sys.states(n):
            row = []
            for m in basic_moves(ar):
                t = st.get(m)
                row.append(-1 if t is None else index[(id(sys), t)])
            rows.append(row)
        succ.append(rows)
    holes = [sys.is_hole(n) for sys, n in items]
    if any(holes):
        raise ValueError("regular_equal is undefined on truncated strategies")
    cls = [(sys.arity(n), len(succ[k])) for k, (sys, n) in enumerate(items)]
    cls = _renumber(cls)
    while True:
        sigs = [
            (cls[k], tuple(tuple(-1 if t < 0 else cls[t] for t in row) for row in succ[k]))
            for k in range(len(items))
        ]
        new = _renumber(sigs)
        if len(set(new)) == len(set(cls)):
            break
        cls = new
    return cls[index[(id(a.system), a.node)]] == cls[index[(id(b.system), b.node)]]


def _renumber(keys: list) -> list[int]:
    table: dict = {}
    return [table.setdefault(k, len(table)) for k in keys]


def state_tree(s: NodeRef, depth: int) -> dict:
    """Nested dict of state counts along every supported view up to ``depth``."""
    def go(node: str, k: int) -> dict:
        system = s.system
        states = system.states(node)
        out: dict = {"states": len(states)}
        if k == 0 or system.is_hole(node):
            return out
        moves = {}
        n = system.arity(node)
        for i, st in enumerate(states):
            for m in basic_moves(n):
                if m in st:
                    moves.setdefault(str(m), []).append(go(st[m], k - 1))
        if moves:
            out["moves"] = moves
        return out

    return go(s.node, depth)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def to_json(s: NodeRef, limit: int = 100_000) -> dict:
    """Stable JSON form; node ids are renumbered in breadth-first order."""
    system = s.system
    order = reachable(s, limit)
    names = {}
    for node in order:
        if system.is_hole(node):
            names[node] = f"hole{system.arity(node)}"
        else:
            names[node] = f"n{len(names)}"
    nodes = {}
    for node in order:
        entry: dict = {"arity": system.arity(node)}
        if system.is_hole(node):
            entry["hole"] = True
        else:
            n = system.arity(node)
            entry["states"] = [
                {str(m): names[st[m]] for m in basic_moves(n) if m in st}
                for st in system.states(node)
            ]
        nodes[names[node]] = entry
    return {"root": names[s.node], "nodes": nodes}


def from_json(data: Mapping) -> NodeRef:
    system = StrategySystem()
    nodes = data["nodes"]
    for nid, entry in nodes.items():
        node = _Node(entry["arity"], None, hole=bool(entry.get("hole")))
        if node.hole:
            node.states = ()
        system._nodes[nid] = node
    for nid, entry in nodes.items():
        node = system._nodes[nid]
        if not node.hole:
            node.states = tuple(
                system._validate_state(node.arity, {BasicMove.parse(m): t for m, t in st.items()})
                for st in entry["states"]
            )
    return NodeRef(system, data["root"])
