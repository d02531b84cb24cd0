"""Acceptance checks, one group per criterion.

Run with pytest; the terminal summary prints one PASS/FAIL line per
criterion.  Running this file directly does the same.
"""

import itertools
import random
import time

import pytest

from ccsw.classic import classic_fair, classic_lts, classic_must
from ccsw.plays import Position, global_states, kan_extend_tabulated
from ccsw.sources import corpus, corpus_names
from ccsw.strategy import In, basic_moves, equal_up_to_depth, evaluate
from ccsw.syntax import check, parse
from ccsw.testing import Outcome, UnfairLasso, check_fair, check_must, replay_witness
from ccsw.translate import translate, translate_approximant
from ccsw.world import DEFAULT_MOVE_ORDER, GlobalStrategy, compose_processes, explore

from oracles import all_views, count_realisations, random_paths, random_system, run_of_path
from worked import ran_plays, ran_presheaf, ran_views

TEST = parse("names a. a?.tick")


def criterion(n, title):
    return pytest.mark.criterion(n, title)


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def world(name, **kw):
    return explore(compose_processes(corpus(name), TEST), **kw)


# -- 1 ---------------------------------------------------------------------------

@criterion(1, "Kan extension flags S_xy and S_xz and completes both to 1")
def test_c1_kan_extension():
    res, secs = timed(lambda: kan_extend_tabulated(ran_views(), ran_plays(), ran_presheaf()))
    assert res.values["S_xy"] == 1
    assert res.values["S_xz"] == 1
    assert sorted(res.non_innocent) == ["S_xy", "S_xz"]
    assert secs < 1.0


@criterion(1, "Kan extension flags S_xy and S_xz and completes both to 1")
def test_c1_global_states_match():
    x, y = translate(parse("names a. a?.0")), translate(parse("names a. a!.0"))
    assign = {"x": x, "y": y, "z": y}
    plays = ran_plays()
    assert global_states(assign, plays["S_xy"]) == 1
    assert global_states(assign, plays["S_xz"]) == 1


# -- 2 ---------------------------------------------------------------------------

@criterion(2, "must separates Omega from Omega|a!, classic must does not, classic fair does")
def test_c2_must_separation():
    def go():
        g1, g2 = world("omega"), world("omega_out")
        return g1, g2, check_must(g1), check_must(g2)

    (g1, g2, m1, m2), secs = timed(go)
    assert m1.outcome is Outcome.FAIL
    assert m2.outcome is Outcome.PASS
    assert replay_witness(g1, m1.witness)
    assert len(g1.states) <= 50 and len(g2.states) <= 50
    assert secs < 5.0


@criterion(2, "must separates Omega from Omega|a!, classic must does not, classic fair does")
def test_c2_classic():
    l1 = classic_lts(corpus("omega"), TEST)
    l2 = classic_lts(corpus("omega_out"), TEST)
    assert classic_must(l1).failed and classic_must(l2).failed
    assert classic_fair(l1).failed and classic_fair(l2).passed


# -- 3 ---------------------------------------------------------------------------

@criterion(3, "fair separates P from Omega; must fails both, P's lasso freezes only the test")
def test_c3_fair_and_must():
    def go():
        gp, go_ = world("choice_loop"), world("omega")
        return gp, go_, check_fair(gp), check_fair(go_), check_must(gp), check_must(go_)

    (gp, _, fp, fo, mp, mo), secs = timed(go)
    assert fp.outcome is Outcome.PASS
    assert fo.outcome is Outcome.FAIL
    assert mp.outcome is Outcome.FAIL and mo.outcome is Outcome.FAIL
    assert isinstance(mp.witness, UnfairLasso)
    assert replay_witness(gp, mp.witness)
    base = gp.transitions[mp.witness.cycle[0]].src
    (init, where), = gp.initial
    test_system = gp.states[init].players[where["T"]][0]
    frozen_systems = [gp.states[base].players[k][0] for k in mp.witness.frozen]
    assert frozen_systems == [test_system]
    assert secs < 5.0


@criterion(3, "fair separates P from Omega; must fails both, P's lasso freezes only the test")
def test_c3_source_matches():
    assert check(corpus("choice_loop")) == check(parse(
        "names a. new b. rec x(a,b) = b!.0 | (b?.x(a,b) + a!.0) in x(a,b)"))


# -- 4 ---------------------------------------------------------------------------

@criterion(4, "coffee machines evaluate to 1 and 2 after In(a)")
def test_c4_coffee():
    good = translate(parse("names a, b, c. a?.(b?.0 + c?.0)"))
    bad = translate(parse("names a, b, c. a?.b?.0 + a?.c?.0"))
    assert evaluate(good, [In(1)]) == 1
    assert evaluate(bad, [In(1)]) == 2


# -- 5 ---------------------------------------------------------------------------

@criterion(5, "coalgebra law on 200 random systems, all views up to length 3")
def test_c5_coalgebra_law():
    rng = random.Random(20261016)
    checked = violations = 0
    for _ in range(200):
        system, ids = random_system(rng, max_nodes=5, max_arity=3)
        for node in ids:
            x = system.ref(node)
            for m in basic_moves(x.arity):
                for v in all_views(m.target_arity(x.arity), 2):
                    lhs = evaluate(x, (m,) + v)
                    rhs = sum(evaluate(x.successor(i, m), v) for i in range(x.state_count()))
                    checked += 1
                    violations += lhs != rhs
    assert checked > 0
    assert violations == 0


# -- 6 ---------------------------------------------------------------------------

@criterion(6, "lazy and approximant translations agree up to depth i for i <= 6")
@pytest.mark.parametrize("name", corpus_names())
def test_c6_translation(name):
    g = corpus(name)
    lazy = translate(g)
    for i in range(7):
        assert equal_up_to_depth(lazy, translate_approximant(g, i), i), i


# -- 7 ---------------------------------------------------------------------------

COMPOSITES = [
    (p, t)
    for p in ("omega", "omega_out", "choice_loop", "coffee_good", "coffee_bad", "ping_pong", "relay",
              "diamond", "swap", "mixed", "dup_args", "respawn", "stream")
    for t in ("test_a_tick", "omega_out", "choice_loop")
]


@criterion(7, "explore-path counts equal global_states on 100+ sampled runs")
def test_c7_oracle_equivalence():
    rng = random.Random(7)
    checked = set()
    for p, t in COMPOSITES:
        gs = compose_processes(corpus(p), corpus(t))
        graph = explore(gs, max_depth=5, stop_at_success=False)
        assign = gs.assignment
        for k, path in random_paths(graph, rng, 60, 4):
            run = run_of_path(gs.position, graph, k, path)
            key = (p, t, repr(run.events))
            if key in checked:
                continue
            checked.add(key)
            assert count_realisations(graph, run) == global_states(assign, run), (p, t, run.events)
    assert len(checked) >= 100


# -- 8 ---------------------------------------------------------------------------

DETERMINISM = ["omega", "omega_out", "choice_loop", "ping_pong", "relay", "respawn", "diamond"]


@criterion(8, "exploration is worker-independent; verdicts invariant under relabelling and move order")
@pytest.mark.parametrize("name", DETERMINISM)
def test_c8_workers(name):
    outs = [world(name, workers=w).to_json() for w in (1, 2, 8)]
    assert outs[0] == outs[1] == outs[2]


def _relabelled(gs: GlobalStrategy, rng: random.Random) -> GlobalStrategy:
    chans = list(gs.position.channels)
    fresh = [f"k{i}" for i in range(len(chans))]
    rng.shuffle(fresh)
    ren = dict(zip(chans, fresh))
    players = list(gs.position.players)
    rng.shuffle(players)
    pos = Position(tuple(sorted(fresh)), tuple((f"{p}-{rng.randrange(100)}", tuple(ren[c] for c in t))
                                                for p, t in players))
    assign = gs.assignment
    strategies = {new: assign[old] for (new, _), (old, _) in zip(pos.players, players)}
    return GlobalStrategy.of(pos, strategies)


def _verdicts(g):
    return check_must(g).outcome, check_fair(g).outcome, len(g.states)


@criterion(8, "exploration is worker-independent; verdicts invariant under relabelling and move order")
@pytest.mark.parametrize("name", DETERMINISM)
def test_c8_relabelling(name):
    rng = random.Random(name)
    gs = compose_processes(corpus(name), TEST)
    ref = _verdicts(explore(gs))
    for _ in range(4):
        assert _verdicts(explore(_relabelled(gs, rng))) == ref


@criterion(8, "exploration is worker-independent; verdicts invariant under relabelling and move order")
@pytest.mark.parametrize("name", DETERMINISM)
def test_c8_move_order(name):
    gs = compose_processes(corpus(name), TEST)
    ref = _verdicts(explore(gs))
    for order in itertools.permutations(DEFAULT_MOVE_ORDER):
        assert _verdicts(explore(gs, move_order=order)) == ref


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
