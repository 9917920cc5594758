"""Score document container shared by all score loaders."""

from __future__ import annotations

from typing import Iterator, NamedTuple, Optional

from .exceptions import ParseError
from .model import Part, PartGroup


class LoadWarning(NamedTuple):
    location: str
    message: str

    def __str__(self):
        return f"{self.location}: {self.message}" if self.location else self.message


class ScoreDocument:
    """A loaded score: a tree of parts plus non-fatal loader warnings."""

    def __init__(self, parts: PartGroup, source_format: str,
                 warnings: Optional[list[LoadWarning]] = None):
        self.parts = parts
        self.source_format = source_format
        self.warnings: list[LoadWarning] = list(warnings or [])

    def iter_parts(self) -> Iterator[Part]:
        return self.parts.iter_parts()

    def part_list(self) -> list[Part]:
        return list(self.parts.iter_parts())

    def part_by_id(self, part_id: str) -> Optional[Part]:
        for part in self.iter_parts():
            if part.id == part_id:
                return part
        return None

    def __repr__(self):
        n = len(self.part_list())
        return f"ScoreDocument(format={self.source_format}, parts={n})"


class WarningSink:
    """Collects loader warnings; raises instead when strict."""

    def __init__(self, strict: bool = False, source: str = ""):
        self.strict = strict
        self.source = source
        self.items: list[LoadWarning] = []

    def warn(self, location: str, message: str):
        if self.strict:
            raise ParseError(f"{message} (at {location})", source=self.source)
        self.items.append(LoadWarning(location, message))
