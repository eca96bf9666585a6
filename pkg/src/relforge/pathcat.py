"""Hierarchical category paths: parsing, depth-marker injection, leaf extraction.

Category paths arrive as separator-joined level names
("Electronics,Audio,Headphones"). Depth markers make the hierarchy explicit
for a sequence model: "[L1] Electronics [L2] Audio [L3] Headphones".
Markers are injected after any text normalization of the level names so
they are never lowercased away.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import MalformedPathError


@dataclass(frozen=True)
class CategoryPath:
    levels: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.levels:
            raise MalformedPathError("category path must have at least one level")
        for level in self.levels:
            if not level.strip():
                raise MalformedPathError("category path contains an empty level")

    @property
    def depth(self) -> int:
        return len(self.levels)


def parse_path(raw: str, separator: str = ",") -> CategoryPath:
    """Split raw on separator, trimming each segment. Empty segments are malformed."""
    if not raw or not raw.strip():
        raise MalformedPathError("empty category path")
    levels = []
    for segment in raw.split(separator):
        segment = segment.strip()
        if not segment:
            raise MalformedPathError(f"empty segment in category path {raw!r}")
        levels.append(segment)
    return CategoryPath(tuple(levels))


def inject_levels(path: CategoryPath) -> str:
    """Render the path as "[L1] name1 [L2] name2 ..." with unbounded depth."""
    return " ".join(f"[L{i}] {name}" for i, name in enumerate(path.levels, start=1))


def leaf_of(path: CategoryPath) -> str:
    """The final level name; depth-1 paths are their own leaf."""
    return path.levels[-1]
