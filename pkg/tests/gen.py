"""Hypothesis strategies for CCS terms."""

from __future__ import annotations

from hypothesis import strategies as st

from ccsw.syntax import (
    TICK,
    Call,
    Definition,
    GlobalProcess,
    Input,
    Nu,
    Output,
    Par,
    Sum,
    ZERO,
)


def processes(gamma: tuple[str, ...], defs: dict[str, int], depth: int = 3, allow_nu: bool = True):
    """Well-scoped open processes under ``gamma`` calling ``defs`` (var -> arity)."""
    def prefixes(g):
        options = [st.just(TICK)]
        if g:
            options.append(st.sampled_from(g).map(Input))
            options.append(st.sampled_from(g).map(Output))
        return st.one_of(options)

    def go(g: tuple[str, ...], d: int):
        leaves = [st.just(ZERO)]
        calls = [
            st.tuples(*[st.sampled_from(g)] * n).map(lambda args, v=v: Call(v, args))
            for v, n in defs.items() if g or n == 0
        ]
        leaves += calls
        if d == 0:
            return st.one_of(leaves)
        fresh = f"n{len(g)}"
        sub = st.deferred(lambda: go(g, d - 1))
        options = leaves + [
            st.lists(st.tuples(prefixes(g), sub), min_size=1, max_size=3).map(
                lambda bs: Sum(tuple(bs))),
            st.tuples(sub, sub).map(lambda lr: Par(*lr)),
        ]
        if allow_nu and len(g) < 3:
            options.append(go(g + (fresh,), d - 1).map(lambda body, a=fresh: Nu(a, body)))
        return st.one_of(options)

    return go(gamma, depth)


@st.composite
def global_processes(draw, max_defs: int = 2, depth: int = 3, allow_nu: bool = True):
    names = draw(st.sampled_from([(), ("a",), ("a", "b")]))
    k = draw(st.integers(0, max_defs))
    arities = {f"x{i}": draw(st.integers(0, 2)) for i in range(k)}
    defs = []
    for var, n in arities.items():
        params = tuple(f"p{j}" for j in range(n))
        body = draw(processes(params, arities, depth - 1, allow_nu))
        defs.append(Definition(var, params, body))
    main = draw(processes(names, arities, depth, allow_nu))
    return GlobalProcess(names, tuple(defs), main)
