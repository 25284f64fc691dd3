"""Bundled rule programs for the Kandinsky patterns and CLEVR-Hans."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .logic import Atom, Clause, Language, parse_atom, parse_facts, parse_language, parse_rules

KANDINSKY_PATTERNS = ("twopairs", "threepairs", "closeby", "red-triangle", "online-pair", "nine-circles")
CLEVR_PROGRAMS = {3: "clevr-hans3", 7: "clevr-hans7"}
PROGRAMS = (*KANDINSKY_PATTERNS, *CLEVR_PROGRAMS.values())

_ATOM = re.compile(r"[a-z][\w]*\([^()]*\)|[a-z][\w]*")


@dataclass(frozen=True)
class Program:
    name: str
    lang: Language
    clauses: tuple[Clause, ...]
    background: tuple[Atom, ...]
    targets: tuple[Atom, ...]

    @property
    def layout(self) -> str:
        return "clevr19" if self.name.startswith("clevr") else "kandinsky11"

    @property
    def dataset(self) -> str:
        return "clevr" if self.name.startswith("clevr") else "kandinsky"

    @property
    def n_objects(self) -> int:
        return len(self.lang.constants_of_kind("object"))


def parse_targets(text: str, lang: Language) -> list[Atom]:
    """Comma- or newline-separated ground atoms."""
    body = " ".join(line.split("%", 1)[0] for line in text.splitlines())
    return [parse_atom(m.group(0), lang) for m in _ATOM.finditer(body)]


def load_program_dir(path, name: str | None = None) -> Program:
    """Read ``language.txt``, ``rules.pl`` and optional ``background.pl``/``targets.txt``."""
    path = Path(path)
    lang = parse_language((path / "language.txt").read_text())
    clauses = parse_rules((path / "rules.pl").read_text(), lang)
    bk_file, tg_file = path / "background.pl", path / "targets.txt"
    bk = parse_facts(bk_file.read_text(), lang) if bk_file.exists() else []
    targets = parse_targets(tg_file.read_text(), lang) if tg_file.exists() else []
    return Program(name or path.name, lang, tuple(clauses), tuple(bk), tuple(targets))


def load_program(name: str) -> Program:
    if name not in PROGRAMS:
        raise KeyError(f"unknown program {name!r}; choose from {', '.join(PROGRAMS)}")
    root = resources.files("softchain") / "data" / name
    with resources.as_file(root) as p:
        return load_program_dir(p, name)
