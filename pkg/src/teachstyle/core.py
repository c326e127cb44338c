"""Pleasure-arousal coordinates, the adjective lexicon and nearest-adjective lookup."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

CATEGORIES = ("vivid", "amiable", "rigorous", "flat")


@dataclass(frozen=True)
class PACoordinate:
    pleasure: float
    arousal: float

    def __post_init__(self):
        if not (math.isfinite(self.pleasure) and math.isfinite(self.arousal)):
            raise ValueError(f"non-finite coordinate ({self.pleasure}, {self.arousal})")

    def distance(self, other: "PACoordinate") -> float:
        return math.hypot(self.pleasure - other.pleasure, self.arousal - other.arousal)

    def as_tuple(self) -> tuple[float, float]:
        return (self.pleasure, self.arousal)


@dataclass(frozen=True)
class AdjectiveEntry:
    id: int
    label: str
    major_category: str
    coord: PACoordinate

    def __post_init__(self):
        if not self.label:
            raise ValueError(f"adjective {self.id} has an empty label")
        if self.major_category not in CATEGORIES:
            raise ValueError(f"unknown category {self.major_category!r} for adjective {self.id}")


class AdjectiveLexicon:
    """Ordered, immutable collection of adjectives placed in the PA plane."""

    _FIELDS = {"id", "label", "category", "pleasure", "arousal"}

    def __init__(self, entries: Iterable[AdjectiveEntry]):
        entries = tuple(entries)
        if not entries:
            raise ValueError("empty lexicon")
        ids = [e.id for e in entries]
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise ValueError("lexicon ids must be strictly increasing")
        self._entries = entries

    @property
    def entries(self) -> tuple[AdjectiveEntry, ...]:
        return self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def __getitem__(self, adjective_id: int) -> AdjectiveEntry:
        for e in self._entries:
            if e.id == adjective_id:
                return e
        raise KeyError(adjective_id)

    def __eq__(self, other) -> bool:
        return isinstance(other, AdjectiveLexicon) and self._entries == other._entries

    def to_json(self) -> list[dict]:
        return [
            {
                "id": e.id,
                "label": e.label,
                "category": e.major_category,
                "pleasure": e.coord.pleasure,
                "arousal": e.coord.arousal,
            }
            for e in self._entries
        ]

    @classmethod
    def from_json(cls, items: list) -> "AdjectiveLexicon":
        if not isinstance(items, list):
            raise ValueError("lexicon file must hold a JSON array")
        entries = []
        for item in items:
            if not isinstance(item, dict):
                raise ValueError(f"lexicon item is not an object: {item!r}")
            keys = set(item)
            if keys != cls._FIELDS:
                extra, missing = keys - cls._FIELDS, cls._FIELDS - keys
                raise ValueError(f"bad lexicon item fields (unknown={sorted(extra)}, missing={sorted(missing)})")
            if not isinstance(item["id"], int) or isinstance(item["id"], bool):
                raise ValueError(f"adjective id must be an integer, got {item['id']!r}")
            entries.append(
                AdjectiveEntry(
                    id=item["id"],
                    label=str(item["label"]),
                    major_category=item["category"],
                    coord=PACoordinate(float(item["pleasure"]), float(item["arousal"])),
                )
            )
        return cls(entries)

    @classmethod
    def load(cls, path: str | Path) -> "AdjectiveLexicon":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, ensure_ascii=False, indent=1)
            fh.write("\n")


def default_lexicon() -> AdjectiveLexicon:
    """The shipped 41-adjective lexicon (placeholder coordinates)."""
    text = resources.files("teachstyle").joinpath("data/lexicon_default.json").read_text(encoding="utf-8")
    return AdjectiveLexicon.from_json(json.loads(text))


def nearest_adjectives(
    coord: PACoordinate, lexicon: AdjectiveLexicon | Sequence[AdjectiveEntry], k: int = 3
) -> list[tuple[AdjectiveEntry, float]]:
    """Return the ``k`` adjectives closest to ``coord``, ascending by distance.

    Equal distances are ordered by ascending adjective id.
    """
    entries = list(lexicon.entries if isinstance(lexicon, AdjectiveLexicon) else lexicon)
    if not entries:
        raise ValueError("empty lexicon")
    if k < 1 or k > len(entries):
        raise ValueError(f"k must be in [1, {len(entries)}], got {k}")
    scored = sorted(((coord.distance(e.coord), e.id, e) for e in entries), key=lambda t: (t[0], t[1]))
    return [(e, d) for d, _, e in scored[:k]]


def centroid(coords: Sequence[PACoordinate]) -> PACoordinate:
    if not coords:
        raise ValueError("centroid of an empty set")
    n = len(coords)
    return PACoordinate(
        math.fsum(c.pleasure for c in coords) / n,
        math.fsum(c.arousal for c in coords) / n,
    )
