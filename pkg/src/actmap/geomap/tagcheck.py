"""Tag-based versus content-based mapping."""
from __future__ import annotations

from dataclasses import dataclass, field

from .records import assign_class


@dataclass(frozen=True)
class Located:
    id: str
    lat: float
    lon: float


@dataclass
class TagReport:
    keyword: str
    class_id: int
    false_positives: list[Located] = field(default_factory=list)  # tagged, content differs
    missed: list[Located] = field(default_factory=list)  # content matches, tag silent

    def to_dict(self) -> dict:
        return {"keyword": self.keyword, "class_id": self.class_id,
                "false_positives": [vars(x) for x in self.false_positives],
                "missed": [vars(x) for x in self.missed]}


def tag_vs_content(records, keyword: str, class_id: int, threshold: float = 0.5) -> TagReport:
    """Compare case-insensitive keyword matches in tags with content classification."""
    kw = keyword.lower()
    report = TagReport(keyword, class_id)
    for r in records:
        tagged = r.tag is not None and kw in r.tag.lower()
        is_class = assign_class(r, threshold) == class_id
        if tagged and not is_class:
            report.false_positives.append(Located(r.id, r.lat, r.lon))
        elif is_class and not tagged:
            report.missed.append(Located(r.id, r.lat, r.lon))
    return report
