"""File-backed catalog, circulation, article, and database stores.

These stand in for the live catalog, ILS circulation reports, and the article
search service: CSV files loaded once into an immutable indexed store.
"""

from __future__ import annotations

import csv
import logging
import re
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from . import lccn
from .lccn import CallNumber, CallNumberRange

log = logging.getLogger(__name__)

BIB_ID_RE = re.compile(r"[a-z]+_[0-9]+")
FORMATS = ("print", "ebook")


class CorpusLoadError(ValueError):
    pass


@dataclass(frozen=True)
class BibRecord:
    bib_id: str
    title: str
    call_number: CallNumber
    format: str  # "print" | "ebook"

    def __post_init__(self):
        if not BIB_ID_RE.fullmatch(self.bib_id):
            raise ValueError(f"bib_id must match prefix_digits: {self.bib_id!r}")
        if self.format not in FORMATS:
            raise ValueError(f"format must be one of {FORMATS}: {self.format!r}")


@dataclass(frozen=True)
class ArticleResult:
    journal_title: str
    article_title: str


@dataclass(frozen=True)
class DatabaseEntry:
    name: str
    subject_ranges: tuple[CallNumberRange, ...]


@dataclass
class CorpusStore:
    records: dict[str, BibRecord]
    charges: Counter
    articles: list[tuple[str, str, str]]        # (journal_title, article_title, subject)
    databases: list[DatabaseEntry]
    diagnostics: list[str] = field(default_factory=list)
    _sorted: list[BibRecord] = field(default_factory=list, repr=False)
    _keys: list[tuple] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self._sorted = sorted(
            self.records.values(), key=lambda r: (r.call_number.sort_key(), r.bib_id)
        )
        self._keys = [r.call_number.sort_key() for r in self._sorted]

    def books_in_range(self, r: CallNumberRange, fmt: str | None = None) -> list[BibRecord]:
        """All records whose call number falls in r, in call-number order.

        fmt filters to "print" or "ebook"; None keeps both.
        """
        lo = bisect_left(self._keys, r.start.sort_key())
        out = []
        for rec in self._sorted[lo:]:
            if not lccn.in_range(rec.call_number, r):
                break
            if fmt is None or rec.format == fmt:
                out.append(rec)
        return out

    def circulation_count(self, bib_id: str) -> int:
        return self.charges.get(bib_id, 0)

    def article_search(self, subject_query: str) -> list[ArticleResult]:
        """Case-insensitive whole-word match on the subject column."""
        if not subject_query.strip():
            return []
        pattern = re.compile(rf"\b{re.escape(subject_query)}\b", re.IGNORECASE)
        hits = [
            ArticleResult(journal, article)
            for journal, article, subject in self.articles
            if pattern.search(subject)
        ]
        hits.sort(key=lambda a: (a.journal_title, a.article_title))
        return hits


def _read_csv(path: str | Path, required: list[str]):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(required) <= {f.strip() for f in reader.fieldnames}:
            raise CorpusLoadError(f"{path}: expected columns {required}")
        yield from enumerate(reader, start=2)


def load_corpus(
    catalog_path: str | Path,
    circulation_path: str | Path | None = None,
    articles_path: str | Path | None = None,
    databases_path: str | Path | None = None,
) -> CorpusStore:
    """Load the catalog plus optional circulation, article, and database files.

    Rows with unparseable call numbers are skipped and reported; a duplicate
    bib_id is fatal.  Circulation is aggregated to per-bib charge counts at
    load; a bib with no charge rows counts 0.
    """
    diagnostics: list[str] = []
    records: dict[str, BibRecord] = {}
    for row_no, row in _read_csv(catalog_path, ["bib_id", "title", "call_number", "format"]):
        bib_id = row["bib_id"].strip()
        if bib_id in records:
            raise CorpusLoadError(f"{catalog_path} row {row_no}: duplicate bib_id {bib_id!r}")
        try:
            records[bib_id] = BibRecord(
                bib_id=bib_id,
                title=row["title"].strip(),
                call_number=lccn.parse(row["call_number"].strip()),
                format=row["format"].strip(),
            )
        except (ValueError, lccn.ParseError) as exc:
            diagnostics.append(f"{catalog_path} row {row_no}: {exc}")

    charges: Counter = Counter()
    if circulation_path is not None:
        for row_no, row in _read_csv(circulation_path, ["bib_id", "charge_date"]):
            charges[row["bib_id"].strip()] += 1

    articles: list[tuple[str, str, str]] = []
    if articles_path is not None:
        for row_no, row in _read_csv(articles_path, ["journal_title", "article_title", "subject"]):
            articles.append(
                (row["journal_title"].strip(), row["article_title"].strip(), row["subject"].strip())
            )

    databases: list[DatabaseEntry] = []
    if databases_path is not None:
        by_name: dict[str, list[CallNumberRange]] = {}
        order: list[str] = []
        for row_no, row in _read_csv(databases_path, ["name", "range_start", "range_end"]):
            name = row["name"].strip()
            try:
                rng = lccn.parse_range(row["range_start"], row["range_end"])
            except (ValueError, lccn.ParseError) as exc:
                diagnostics.append(f"{databases_path} row {row_no}: {exc}")
                continue
            if name not in by_name:
                by_name[name] = []
                order.append(name)
            by_name[name].append(rng)
        databases = [DatabaseEntry(name, tuple(by_name[name])) for name in order]

    for msg in diagnostics:
        log.warning("corpus: %s", msg)
    log.info(
        "corpus loaded: %d records (%d rejected), %d charged bibs, %d articles, %d databases",
        len(records), len(diagnostics), len(charges), len(articles), len(databases),
    )
    return CorpusStore(
        records=records,
        charges=charges,
        articles=articles,
        databases=databases,
        diagnostics=diagnostics,
    )
