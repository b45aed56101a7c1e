"""Small example graphs shipped with the package."""
from __future__ import annotations

from importlib import resources

from ..graph import DirectedGraph, LabelledGraph, parse_graph


def fixture_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files(__name__).iterdir() if p.name.endswith(".json"))


def fixture_path(name: str):
    return resources.files(__name__) / f"{name}.json"


def load_fixture(name: str) -> DirectedGraph | LabelledGraph:
    if name not in fixture_names():
        raise KeyError(f"no fixture named {name!r}; available: {', '.join(fixture_names())}")
    return parse_graph(fixture_path(name).read_text())
