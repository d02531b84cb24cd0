"""Loading processes from files and from the bundled corpus."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .syntax import GlobalProcess, check, parse


def corpus_names() -> list[str]:
    root = resources.files("ccsw") / "corpus"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ccs"))


def corpus_text(name: str) -> str:
    return (resources.files("ccsw") / "corpus" / f"{name}.ccs").read_text(encoding="utf-8")


def corpus(name: str) -> GlobalProcess:
    """A checked process from the bundled corpus, by file stem."""
    return check(parse(corpus_text(name)))


def read_source(spec: str) -> str:
    """Text of ``spec``: a file path, or ``corpus:NAME`` for a bundled file."""
    if spec.startswith("corpus:"):
        return corpus_text(spec[7:])
    return Path(spec).read_text(encoding="utf-8")


def load(spec: str) -> GlobalProcess:
    return check(parse(read_source(spec)))
