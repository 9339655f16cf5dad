"""Bundled example domains used by the test suite and the CLI.

Each entry is a ``.dom`` file in the package's ``corpus/`` directory;
``corpus_path`` resolves a short name to a real filesystem path and
``load_corpus`` parses it.
"""

from __future__ import annotations

from importlib import resources

from .dsl import DomainSpec, parse_domain


def corpus_names() -> list:
    """Sorted short names of all bundled domains."""
    root = resources.files(__package__) / "corpus"
    return sorted(p.name[: -len(".dom")] for p in root.iterdir() if p.name.endswith(".dom"))


def corpus_path(name: str):
    """Filesystem path of a bundled domain by short name."""
    path = resources.files(__package__) / "corpus" / f"{name}.dom"
    if not path.is_file():
        raise FileNotFoundError(
            f"no bundled domain {name!r}; available: {', '.join(corpus_names())}"
        )
    return path


def load_corpus(name: str) -> DomainSpec:
    """Parse a bundled domain by short name."""
    return parse_domain(corpus_path(name).read_text())
