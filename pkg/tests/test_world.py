import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccsw.plays import Fork, Nu, Position, Sync, Tick
from ccsw.sources import corpus
from ccsw.strategy import FORK_L, TICK, StrategySystem, zero
from ccsw.syntax import parse
from ccsw.translate import translate
from ccsw.world import (
    DEFAULT_MOVE_ORDER,
    Engine,
    GlobalState,
    GlobalStrategy,
    compose,
    compose_processes,
    explore,
    worker_count,
)

from oracles import isomorphic

TEST = parse("names a. a?.tick")


def graph(name, **kw):
    return explore(compose_processes(corpus(name), TEST), **kw)


class TestCompose:
    def test_from_process(self):
        g = GlobalStrategy.from_process(parse("names a, b. a!.0"))
        assert g.position.players == (("P", ("a", "b")),)
        assert g.assignment["P"].arity == 2

    def test_shared_default_is_common_names(self):
        g = compose_processes(parse("names a, b. a!.0"), parse("names a, c. a?.tick"))
        assert dict(g.position.players) == {"P": ("a", "b"), "T": ("a", "c")}

    def test_unshared_names_renamed_apart(self):
        g = compose_processes(parse("names a. a!.0"), parse("names a. a?.tick"), shared=[])
        tuples = dict(g.position.players)
        assert tuples["P"] != tuples["T"]
        assert len(g.position.channels) == 2

    def test_players_renamed_apart(self):
        f = GlobalStrategy.from_process(parse("names a. a!.0"))
        g = compose(f, f, [("a", "a")])
        assert [p for p, _ in g.position.players] == ["P", "P'"]

    def test_unknown_shared_channel(self):
        f = GlobalStrategy.from_process(parse("names a. a!.0"))
        with pytest.raises(KeyError):
            compose(f, f, [("z", "a")])

    def test_arity_mismatch(self):
        with pytest.raises(ValueError):
            GlobalStrategy.of(Position.of({"p": ["a"]}), {"p": translate(parse("tick"))})

    def test_restrict(self):
        g = compose_processes(parse("names a, b. a!.0"), TEST).restrict(["T"])
        assert g.position.channels == ("a",)


def _engine_for(src_by_player, chans):
    refs = {p: translate(parse(src)) for p, (src, _) in src_by_player.items()}
    pos = Position.of({p: t for p, (_, t) in src_by_player.items()}, chans)
    g = GlobalStrategy.of(pos, refs)
    systems = []
    for r in refs.values():
        if all(r.system is not s for s in systems):
            systems.append(r.system)
    return Engine(systems), g


class TestEngine:
    def test_inert_players_dropped(self):
        eng, g = _engine_for({"p": ("names a. 0", ["a"]), "q": ("names a. a?.0", ["a"])}, ["a"])
        ((s, where),) = eng.initial_states(g)
        assert len(s.players) == 1
        assert where["p"] is None and where["q"] == 0

    def test_lone_half_fork_is_inert(self):
        s = StrategySystem()
        half = s.singleton(0, {FORK_L: zero(0, s)})
        eng = Engine([s])
        assert eng.inert((0, half.node, 0, ()))

    def test_enabled_moves(self):
        eng, g = _engine_for({
            "p": ("names a, b. a!.0 + b!.0", ["a", "b"]),
            "q": ("names a. a?.0 | tick", ["a"]),
        }, ["a", "b"])
        ((s, where),) = eng.initial_states(g)
        moves = eng.enabled_moves(s)
        assert any(isinstance(m, Fork) for m in moves)
        assert not any(isinstance(m, Sync) for m in moves)

    def test_sync_needs_same_channel(self):
        eng, g = _engine_for({"p": ("names a. a!.0", ["a"]), "q": ("names a. a?.0", ["b"])}, ["a", "b"])
        ((s, _),) = eng.initial_states(g)
        assert eng.enabled_moves(s) == []

    def test_sync_step(self):
        eng, g = _engine_for({"p": ("names a. a!.tick", ["a"]), "q": ("names a. a?.0", ["a"])}, ["a"])
        ((s, where),) = eng.initial_states(g)
        (m,) = eng.enabled_moves(s)
        assert isinstance(m, Sync)
        (step,) = eng.successors(s, m)
        roles = {c.role: c.slot for c in step.created}
        assert roles["receiver"] is None  # received into 0, dropped
        assert len(step.state.players) == 1

    def test_branching_over_root_states(self):
        eng, g = _engine_for({
            "p": ("names a. a!.0 + a!.tick + a!.tick", ["a"]),
            "q": ("names a. a?.tick + a?.0", ["a"]),
        }, ["a"])
        ((s, _),) = eng.initial_states(g)
        (m,) = eng.enabled_moves(s)
        assert len(eng.successors(s, m)) == 3 * 2

    def test_nu_adds_fresh_channel(self):
        eng, g = _engine_for({"p": ("names a. new b. (b!.0 | a?.0)", ["a"])}, ["a"])
        ((s, _),) = eng.initial_states(g)
        (m,) = eng.enabled_moves(s)
        assert isinstance(m, Nu)
        (step,) = eng.successors(s, m)
        assert len(step.state.players[0][3]) == 2
        assert len(set(step.state.players[0][3])) == 2

    def test_tick_sets_flag(self):
        eng, g = _engine_for({"p": ("tick.tick", [])}, [])
        ((s, _),) = eng.initial_states(g)
        (m,) = eng.enabled_moves(s)
        assert isinstance(m, Tick)
        assert eng.successors(s, m)[0].state.ticked

    def test_disabled_move_rejected(self):
        eng, g = _engine_for({"p": ("names a. a!.0", ["a"])}, ["a"])
        ((s, _),) = eng.initial_states(g)
        with pytest.raises(ValueError):
            eng.successors(s, Tick(0))

    def test_move_order_must_be_permutation(self):
        with pytest.raises(ValueError):
            Engine([], ("fork", "tick"))


# -- canonical forms against brute force -----------------------------------------

_LABEL_SYSTEM = StrategySystem()
for _n in range(4):
    for _tag in "ab":
        _LABEL_SYSTEM.add_node(f"{_tag}{_n}", _n, [{TICK: zero(_n, _LABEL_SYSTEM)}] * 2)
_ENGINE = Engine([_LABEL_SYSTEM])


@st.composite
def raw_states(draw):
    k = draw(st.integers(0, 4))
    chans = list(range(draw(st.integers(1, 4))))
    players = []
    for _ in range(k):
        n = draw(st.integers(0, 3))
        tag = draw(st.sampled_from("ab"))
        tup = tuple(draw(st.permutations(chans))[:n]) if n <= len(chans) else ()
        n = len(tup)
        players.append((0, f"{tag}{n}", draw(st.integers(0, 1)), tup))
    return GlobalState(tuple(players), draw(st.booleans()))


def _shuffle(s: GlobalState, rng: random.Random) -> GlobalState:
    chans = s.channels()
    perm = dict(zip(chans, rng.sample(range(100, 100 + len(chans)), len(chans))))
    players = [sl[:3] + (tuple(perm[c] for c in sl[3]),) for sl in s.players]
    rng.shuffle(players)
    return GlobalState(tuple(players), s.ticked)


class TestCanonical:
    @settings(max_examples=300, deadline=None)
    @given(raw_states(), st.randoms(use_true_random=False))
    def test_invariant_under_relabelling(self, s, rng):
        a, _ = _ENGINE.canonicalize(s)
        b, _ = _ENGINE.canonicalize(_shuffle(s, rng))
        assert a == b
        assert isomorphic(a, s)

    @settings(max_examples=300, deadline=None)
    @given(raw_states(), raw_states())
    def test_equal_iff_isomorphic(self, s, t):
        a, _ = _ENGINE.canonicalize(s)
        b, _ = _ENGINE.canonicalize(t)
        assert (a == b) == isomorphic(s, t)

    def test_where_tracks_players(self):
        s = GlobalState(((0, "b1", 0, (5,)), (0, "a1", 1, (7,))))
        canon, where = _ENGINE.canonicalize(s)
        for k, slot in enumerate(s.players):
            assert canon.players[where[k]][:3] == slot[:3]

    def test_symmetric_channels(self):
        # a 4-cycle of players on 4 channels needs individualisation
        s = GlobalState(tuple((0, "a2", 0, (i, (i + 1) % 4)) for i in range(4)))
        t = GlobalState(tuple((0, "a2", 0, ((i + 1) % 4, i)) for i in range(4)))
        assert (_ENGINE.canonicalize(s)[0] == _ENGINE.canonicalize(t)[0]) == isomorphic(s, t)


class TestExplore:
    def test_omega(self):
        g = graph("omega")
        assert len(g.states) <= 50
        assert not g.truncated
        assert not any(t.success for t in g.transitions)

    def test_omega_round_returns(self):
        # a fork then a sync gives back the state we started from
        g = explore(GlobalStrategy.from_process(corpus("omega")))
        assert any(t.dst <= t.src for t in g.transitions)
        assert len(g.states) <= 5

    def test_omega_with_output(self):
        g = graph("omega_out")
        assert len(g.states) <= 50
        assert any(t.success for t in g.transitions)

    def test_choice_loop(self):
        g = graph("choice_loop")
        assert len(g.states) <= 50
        assert any(t.success for t in g.transitions)

    def test_stop_at_success(self):
        g = graph("omega_out")
        for k, s in enumerate(g.states):
            if s.ticked:
                assert g.outgoing(k) == []
        full = graph("omega_out", stop_at_success=False)
        assert len(full.states) >= len(g.states)

    def test_truncation(self):
        g = graph("omega_out", max_states=2)
        assert g.truncated and len(g.states) == 2
        g = graph("omega_out", max_depth=1)
        assert g.truncated

    def test_bounds_validated(self):
        with pytest.raises(ValueError):
            graph("omega", max_states=0)

    def test_json_and_dot(self):
        g = graph("choice_loop")
        data = json.loads(json.dumps(g.to_json()))
        assert len(data["states"]) == len(g.states)
        assert g.to_dot().startswith("digraph")

    def test_witness_is_injective(self):
        g = graph("ping_pong")
        for t in g.transitions:
            targets = [b for _, b in t.witness] + [c.slot for c in t.created if c.slot is not None]
            assert len(targets) == len(set(targets))
            assert all(b < len(g.states[t.dst].players) for b in targets)

    @pytest.mark.parametrize("name", ["omega_out", "choice_loop", "ping_pong", "relay", "respawn"])
    def test_workers_do_not_change_output(self, name):
        outs = [graph(name, workers=w).to_json() for w in (1, 2, 8)]
        assert outs[0] == outs[1] == outs[2]

    def test_worker_env(self, monkeypatch):
        monkeypatch.setenv("CCSW_THREADS", "4")
        assert worker_count() == 4
        monkeypatch.setenv("CCSW_THREADS", "nonsense")
        assert worker_count() == 1

    def test_default_order(self):
        assert set(DEFAULT_MOVE_ORDER) == {"fork", "tick", "nu", "sync"}
