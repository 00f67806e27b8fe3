"""Location-based recommendation pipeline.

Given a point on the floor: find nearby shelf ranges, pull in-range print
candidates, keep the most-circulated ones, merge in e-books that would shelve
nearby, then append journal/database suggestions derived from the subject of
each range.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from . import lccn, stacksmap
from .corpus import BibRecord, CorpusStore
from .lccn import CallNumber, CallNumberRange, ClassificationOutline, Unclassified
from .locate import PatronLocation
from .stacksmap import Point, StackMap

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Recommendation:
    kind: str                       # "print" | "ebook" | "database"
    title: str
    score: float
    bib_id: str | None = None
    call_number: CallNumber | None = None
    name: str | None = None         # database kind only

    def __post_init__(self):
        if self.kind in ("print", "ebook") and (self.bib_id is None or self.call_number is None):
            raise ValueError(f"{self.kind} recommendation requires bib_id and call_number")

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind, "title": self.title, "score": self.score}
        if self.bib_id is not None:
            d["bib_id"] = self.bib_id
        if self.call_number is not None:
            d["call_number"] = lccn.canonical_format(self.call_number)
        if self.name is not None:
            d["name"] = self.name
        return d


@dataclass
class RecommendationSet:
    location: PatronLocation
    ranges_used: list[CallNumberRange]
    items: list[Recommendation]

    @property
    def bib_ids(self) -> list[str]:
        return [item.bib_id for item in self.items if item.bib_id is not None]

    def to_dict(self) -> dict:
        return {
            "v": SCHEMA_VERSION,
            "location": {"x": self.location.x, "y": self.location.y},
            "ranges": [
                {"start": lccn.canonical_format(r.start), "end": lccn.canonical_format(r.end)}
                for r in self.ranges_used
            ],
            "items": [item.to_dict() for item in self.items],
        }


def subject_query_from_range(r: CallNumberRange, outline: ClassificationOutline) -> str | None:
    """Head term of the range's subject label, or None when unclassified.

    "Philosophy (General)" -> "Philosophy"; "English literature: Provincial,
    local, etc." -> "English literature".
    """
    try:
        label = outline.classify(r.start)
    except Unclassified:
        return None
    head = label
    for stop in (".", ":", "("):
        idx = head.find(stop)
        if idx != -1:
            head = head[:idx]
    head = head.strip()
    return head or None


class Recommender:
    def __init__(
        self,
        stackmap_: StackMap,
        corpus_: CorpusStore,
        outline: ClassificationOutline,
        radius: float | None = None,
        max_items: int = 5,
        max_ebooks: int = 3,
        majority_threshold: float = 0.5,
    ):
        self.stackmap = stackmap_
        self.corpus = corpus_
        self.outline = outline
        self.radius = radius if radius is not None else stacksmap.default_radius(stackmap_)
        self.max_items = max_items
        self.max_ebooks = max_ebooks
        self.majority_threshold = majority_threshold

    def recommend_near(self, p: Point) -> RecommendationSet:
        """Full pipeline for one point; empty ranges/items is a normal outcome."""
        ranges = stacksmap.ranges_for_location(p, self.stackmap, self.radius)
        location = PatronLocation(p[0], p[1])
        if not ranges:
            return RecommendationSet(location, [], [])
        candidates: list[BibRecord] = []
        for r in ranges:
            candidates.extend(self.corpus.books_in_range(r))
        items = self.popular_books(candidates)
        items.extend(self.ebook_suggestions(ranges))
        items.extend(self.database_suggestions(ranges))
        return RecommendationSet(location, ranges, items)

    def popular_books(self, candidates: list[BibRecord]) -> list[Recommendation]:
        """Print candidates by descending circulation; zero-count items drop out."""
        prints = [
            (rec, self.corpus.circulation_count(rec.bib_id))
            for rec in candidates
            if rec.format == "print"
        ]
        prints = [(rec, n) for rec, n in prints if n > 0]
        prints.sort(key=lambda pair: (-pair[1], pair[0].bib_id))
        return [
            Recommendation(
                kind="print",
                title=rec.title,
                score=float(n),
                bib_id=rec.bib_id,
                call_number=rec.call_number,
            )
            for rec, n in prints[: self.max_items]
        ]

    def ebook_suggestions(self, ranges: list[CallNumberRange]) -> list[Recommendation]:
        """E-books that would shelve in the nearby ranges, call-number order."""
        found: dict[str, BibRecord] = {}
        for r in ranges:
            for rec in self.corpus.books_in_range(r, fmt="ebook"):
                found.setdefault(rec.bib_id, rec)
        ordered = sorted(found.values(), key=lambda rec: (rec.call_number.sort_key(), rec.bib_id))
        return [
            Recommendation(
                kind="ebook",
                title=rec.title,
                score=float(self.corpus.circulation_count(rec.bib_id)),
                bib_id=rec.bib_id,
                call_number=rec.call_number,
            )
            for rec in ordered[: self.max_ebooks]
        ]

    def database_suggestions(self, ranges: list[CallNumberRange]) -> list[Recommendation]:
        """Journal titles that dominate a subject search, plus curated databases.

        A journal is suggested only when it holds a strict majority of the
        article results for the range's subject query; its score is that
        share.  Curated database entries whose subject ranges intersect any
        nearby range are always included.
        """
        out: list[Recommendation] = []
        seen: set[str] = set()
        for r in ranges:
            query = subject_query_from_range(r, self.outline)
            if query is None:
                continue
            results = self.corpus.article_search(query)
            if not results:
                continue
            shares = Counter(a.journal_title for a in results)
            journal, hits = max(shares.items(), key=lambda kv: (kv[1], kv[0]))
            share = hits / len(results)
            if share > self.majority_threshold and journal not in seen:
                seen.add(journal)
                out.append(Recommendation(kind="database", title=journal, score=share, name=journal))
        for entry in self.corpus.databases:
            if entry.name in seen:
                continue
            if any(
                lccn.ranges_overlap(r, sr) for r in ranges for sr in entry.subject_ranges
            ):
                seen.add(entry.name)
                out.append(
                    Recommendation(kind="database", title=entry.name, score=1.0, name=entry.name)
                )
        return out
