"""Command-line front end.

    ccsw parse FILE
    ccsw translate FILE [--depth N] [--mode lazy|approximant]
    ccsw explore FILE [--test FILE] [--shared a,b] [--dot OUT]
    ccsw check PROC TEST [--shared a,b] [--criterion fair|must|classic-fair|classic-must]
    ccsw compare P Q (--tests DIR | --test FILE ...) [--criterion ...]

FILE may be ``corpus:NAME`` to use a bundled example.  ``check`` exits with
0 on pass, 1 on fail and 2 when the exploration bounds were hit.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

from . import strategy as st
from .sources import load, read_source
from .syntax import CCSError, check, global_to_json, parse, pretty_global, scopes
from .testing import CRITERIA, compare, run_test
from .translate import translate, translate_approximant
from .world import GlobalStrategy, compose_processes, explore


@dataclass
class Config:
    maxStates: int = 20000
    maxDepth: int = 200
    cycleBound: int = 12
    dumpDepth: int = 6
    format: str = "json"

    def __post_init__(self):
        for f in ("maxStates", "maxDepth", "cycleBound", "dumpDepth"):
            if getattr(self, f) <= 0:
                raise ValueError(f"{f} must be positive")
        if self.format not in ("json", "dot", "text"):
            raise ValueError(f"unknown format {self.format!r}")

    @classmethod
    def load(cls, path: str | None, **overrides) -> "Config":
        data = {}
        if path:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
            known = {f.name for f in fields(cls)}
            unknown = set(data) - known
            if unknown:
                raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)


def _shared(text: str | None) -> list[str] | None:
    if text is None:
        return None
    return [a.strip() for a in text.split(",") if a.strip()]


def _emit(obj, cfg: Config, text: str | None = None) -> None:
    if cfg.format == "text" and text is not None:
        print(text)
    else:
        print(json.dumps(obj, indent=2, sort_keys=False))


def _strategy_dot(ref: st.NodeRef) -> str:
    data = st.to_json(ref)
    lines = ["digraph strategy {", "  node [shape=record];"]
    for nid, entry in data["nodes"].items():
        if entry.get("hole"):
            lines.append(f'  {nid} [label="...", style=dashed];')
            continue
        cells = "|".join(f"<s{k}> {k}" for k in range(len(entry["states"]))) or "empty"
        lines.append(f'  {nid} [label="{{{nid}|{cells}}}"];')
        for k, state in enumerate(entry["states"]):
            for move, target in state.items():
                lines.append(f'  {nid}:s{k} -> {target} [label="{move}"];')
    lines.append("}")
    return "\n".join(lines)


def cmd_parse(args, cfg: Config) -> int:
    g = check(parse(read_source(args.file)))
    contexts = {
        (s.owner, ".".join(map(str, s.path)) or "root"): list(s.gamma)
        for s in scopes(g) if not s.path
    }
    out = global_to_json(g)
    out["contexts"] = {f"{o}": c for (o, _), c in contexts.items()}
    _emit(out, cfg, pretty_global(g))
    return 0


def cmd_translate(args, cfg: Config) -> int:
    g = load(args.file)
    depth = args.depth if args.depth is not None else cfg.dumpDepth
    ref = translate(g) if args.mode == "lazy" else translate_approximant(g, depth)
    cut = st.truncate(ref, depth)
    if cfg.format == "dot":
        print(_strategy_dot(cut))
    else:
        _emit({"mode": args.mode, "depth": depth, "strategy": st.to_json(cut)}, cfg,
              json.dumps(st.state_tree(ref, depth), indent=1))
    return 0


def _graph(args, cfg: Config):
    p = load(args.file)
    if args.test:
        gs = compose_processes(p, load(args.test), _shared(args.shared))
    else:
        gs = GlobalStrategy.from_process(p)
    return explore(gs, cfg.maxStates, cfg.maxDepth)


def cmd_explore(args, cfg: Config) -> int:
    g = _graph(args, cfg)
    if args.dot:
        Path(args.dot).write_text(g.to_dot() + "\n", encoding="utf-8")
    if cfg.format == "dot":
        print(g.to_dot())
    else:
        summary = (f"{len(g.states)} states, {len(g.transitions)} transitions, "
                   f"{sum(t.success for t in g.transitions)} successful"
                   + (", truncated" if g.truncated else ""))
        _emit(g.to_json(), cfg, summary)
    return 0


def cmd_check(args, cfg: Config) -> int:
    report = run_test(load(args.process), load(args.test), args.criterion,
                      _shared(args.shared), cfg.maxStates, cfg.maxDepth)
    _emit(report.to_json(), cfg, f"{args.criterion}: {report.verdict}"
          + (f" ({report.verdict.reason})" if report.verdict.reason else ""))
    return report.verdict.exit_code


def cmd_compare(args, cfg: Config) -> int:
    tests = []
    if args.tests:
        for path in sorted(Path(args.tests).glob("*.ccs")):
            tests.append((path.stem, load(str(path)), _shared(args.shared)))
    for spec in args.test or ():
        tests.append((Path(spec).stem if not spec.startswith("corpus:") else spec[7:],
                      load(spec), _shared(args.shared)))
    if not tests:
        raise ValueError("no tests given")
    result = compare(load(args.left), load(args.right), tests, args.criterion,
                     max_states=cfg.maxStates, max_depth=cfg.maxDepth)
    rows = [f"{'test':<20} {'left':<8} {'right':<8}"]
    for name, a, b in result.rows:
        mark = "  distinguishes" if name in result.distinguishing else ""
        rows.append(f"{name:<20} {str(a.verdict):<8} {str(b.verdict):<8}{mark}")
    _emit(result.to_json(), cfg, "\n".join(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with maxStates, maxDepth, cycleBound, dumpDepth, format")
    common.add_argument("--format", choices=("json", "dot", "text"))
    common.add_argument("--max-states", type=int, dest="maxStates")
    common.add_argument("--max-depth", type=int, dest="maxDepth")

    parser = argparse.ArgumentParser(prog="ccsw", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", parents=[common], help="parse and scope-check a process")
    p.add_argument("file")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("translate", parents=[common], help="dump the strategy of a process")
    p.add_argument("file")
    p.add_argument("--depth", type=int)
    p.add_argument("--mode", choices=("lazy", "approximant"), default="lazy")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("explore", parents=[common], help="closed-world state graph")
    p.add_argument("file")
    p.add_argument("--test")
    p.add_argument("--shared")
    p.add_argument("--dot", help="also write DOT to this file")
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("check", parents=[common], help="run a process against a test")
    p.add_argument("process")
    p.add_argument("test")
    p.add_argument("--shared")
    p.add_argument("--criterion", choices=CRITERIA, default="must")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("compare", parents=[common], help="compare two processes on tests")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("--tests", help="directory of .ccs tests")
    p.add_argument("--test", action="append", help="a single test; may be repeated")
    p.add_argument("--shared")
    p.add_argument("--criterion", choices=CRITERIA, default="must")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = Config.load(args.config, format=args.format, maxStates=args.maxStates,
                          maxDepth=args.maxDepth)
        return args.func(args, cfg)
    except CCSError as e:
        source = getattr(args, "file", None) or getattr(args, "process", "")
        print(f"{source}:{e}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
