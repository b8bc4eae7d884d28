"""Access to the bundled test networks."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .caseio import RawCase, parse_matpower

BUNDLED = ("case5", "case14", "case118")


def case_path(name: str) -> Path:
    """Filesystem path of a bundled case file, e.g. case_path("case14")."""
    if name not in BUNDLED:
        raise KeyError(f"unknown bundled case {name!r}; have {', '.join(BUNDLED)}")
    with resources.as_file(resources.files("gridrank.data") / f"{name}.m") as p:
        return Path(p)


def load_case(name: str) -> RawCase:
    if name not in BUNDLED:
        raise KeyError(f"unknown bundled case {name!r}; have {', '.join(BUNDLED)}")
    text = (resources.files("gridrank.data") / f"{name}.m").read_text()
    return parse_matpower(text, name=name)
