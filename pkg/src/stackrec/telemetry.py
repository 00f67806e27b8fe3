"""Batch analytics over the gateway's transaction logs.

Parse the JSON-lines logs, join recommended/wayfound bib ids to call numbers
and subjects, then aggregate: floor heat maps, subject rank-frequency
distributions with a power-law fit, per-module identifier traces, query text
mining, and monthly request series.
"""

from __future__ import annotations

import logging
import math
import string
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from . import lccn, stacksmap
from .corpus import CorpusStore
from .gateway import MODULES, ApiLogEntry
from .lccn import ClassificationOutline, Unclassified
from .stacksmap import StackMap

log = logging.getLogger(__name__)

UNKNOWN = "unknown"


class TooFewRanks(ValueError):
    pass


@dataclass
class ParsedLogs:
    entries: list[ApiLogEntry]
    malformed: list[tuple[str, int, str]] = field(default_factory=list)  # (path, line_no, reason)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


def parse_logs(paths: list[str | Path]) -> ParsedLogs:
    """Parse one or more log files; malformed lines are counted, not dropped silently.

    Entries are ordered by (timestamp, file, line) so multi-file input is a
    stable merge.
    """
    keyed: list[tuple[tuple, ApiLogEntry]] = []
    malformed: list[tuple[str, int, str]] = []
    for file_idx, path in enumerate(paths):
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    entry = ApiLogEntry.from_json(line)
                except (ValueError, KeyError) as exc:
                    malformed.append((str(path), line_no, str(exc)))
                    continue
                keyed.append(((entry.timestamp, file_idx, line_no), entry))
    keyed.sort(key=lambda pair: pair[0])
    result = ParsedLogs([entry for _, entry in keyed], malformed)
    if malformed:
        log.warning("parse_logs: %d malformed line(s)", len(malformed))
    return result


@dataclass(frozen=True)
class BibAnnotation:
    bib_id: str
    call_number: str | None     # canonical text, None when the bib is unknown
    subject: str                # UNKNOWN when unresolvable


@dataclass(frozen=True)
class AnnotatedEntry:
    entry: ApiLogEntry
    annotations: tuple[BibAnnotation, ...]
    x: float | None = None
    y: float | None = None
    shelf_number: int | None = None


def annotate(
    entries: list[ApiLogEntry],
    corpus_: CorpusStore,
    outline: ClassificationOutline,
    stackmap_: StackMap | None = None,
) -> list[AnnotatedEntry]:
    """Join each entry's bib ids to call numbers and subject labels.

    x/y come from the request params when present (recommendation requests);
    otherwise, when a stack map is given, from the shelf target of the first
    bib id (wayfinding requests).  Unknown bib ids annotate as "unknown" and
    never fail the batch.
    """
    out: list[AnnotatedEntry] = []
    unknown_bibs = 0
    for entry in entries:
        annotations = []
        for bib_id in entry.bib_ids:
            record = corpus_.records.get(bib_id)
            if record is None:
                unknown_bibs += 1
                annotations.append(BibAnnotation(bib_id, None, UNKNOWN))
                continue
            try:
                subject = outline.classify(record.call_number)
            except Unclassified:
                subject = UNKNOWN
            annotations.append(
                BibAnnotation(bib_id, lccn.canonical_format(record.call_number), subject)
            )
        x = y = None
        shelf_number = None
        if "x" in entry.params and "y" in entry.params:
            try:
                x, y = float(entry.params["x"]), float(entry.params["y"])
            except ValueError:
                pass
        elif stackmap_ is not None and entry.bib_ids:
            record = corpus_.records.get(entry.bib_ids[0])
            if record is not None:
                shelf = stacksmap.shelf_for_call(record.call_number, stackmap_)
                if shelf is not None:
                    cx, cy = shelf.bounds.center
                    x, y = cx, cy
                    shelf_number = shelf.shelf_number
        out.append(AnnotatedEntry(entry, tuple(annotations), x, y, shelf_number))
    if unknown_bibs:
        log.warning("annotate: %d bib id occurrence(s) not in catalog", unknown_bibs)
    return out


@dataclass(frozen=True)
class GridSpec:
    origin_x: float
    origin_y: float
    cell_size: float
    width: int
    height: int

    def __post_init__(self):
        if self.cell_size <= 0 or self.width < 1 or self.height < 1:
            raise ValueError("grid must have positive cell size and dimensions")

    @classmethod
    def covering(cls, extent: stacksmap.Rect, cell_size: float, margin: float = 0.0) -> "GridSpec":
        x0, y0 = extent.x_min - margin, extent.y_min - margin
        width = max(1, math.ceil((extent.x_max + margin - x0) / cell_size))
        height = max(1, math.ceil((extent.y_max + margin - y0) / cell_size))
        return cls(x0, y0, cell_size, width, height)


@dataclass
class DensityGrid:
    spec: GridSpec
    values: np.ndarray              # shape (height, width), row 0 at origin_y
    out_of_extent: int = 0

    @property
    def total_mass(self) -> float:
        return float(self.values.sum())


def _cell_of(spec: GridSpec, x: float, y: float) -> tuple[int, int] | None:
    col = math.floor((x - spec.origin_x) / spec.cell_size)
    row = math.floor((y - spec.origin_y) / spec.cell_size)
    # points on the far edge fold into the last cell
    if col == spec.width and x == spec.origin_x + spec.width * spec.cell_size:
        col -= 1
    if row == spec.height and y == spec.origin_y + spec.height * spec.cell_size:
        row -= 1
    if 0 <= col < spec.width and 0 <= row < spec.height:
        return row, col
    return None


def heatmap_points(
    points: list[tuple[float, float]],
    spec: GridSpec,
    mode: str = "bin",
    sigma: float | None = None,
) -> DensityGrid:
    """Density grid from raw points.

    bin mode: each point increments its cell.  gaussian mode: each point
    spreads a kernel truncated at 3 sigma, renormalized over in-grid cells so
    every in-extent point contributes exactly mass 1.
    """
    values = np.zeros((spec.height, spec.width))
    out_of_extent = 0
    if mode == "bin":
        for x, y in points:
            cell = _cell_of(spec, x, y)
            if cell is None:
                out_of_extent += 1
            else:
                values[cell] += 1.0
    elif mode == "gaussian":
        if sigma is None or sigma <= 0:
            raise ValueError("gaussian mode requires sigma > 0")
        reach = int(math.ceil(3.0 * sigma / spec.cell_size))
        for x, y in points:
            cell = _cell_of(spec, x, y)
            if cell is None:
                out_of_extent += 1
                continue
            row, col = cell
            r0, r1 = max(0, row - reach), min(spec.height - 1, row + reach)
            c0, c1 = max(0, col - reach), min(spec.width - 1, col + reach)
            rows = np.arange(r0, r1 + 1)
            cols = np.arange(c0, c1 + 1)
            cy = spec.origin_y + (rows + 0.5) * spec.cell_size
            cx = spec.origin_x + (cols + 0.5) * spec.cell_size
            d2 = (cx[None, :] - x) ** 2 + (cy[:, None] - y) ** 2
            kernel = np.exp(-d2 / (2.0 * sigma * sigma))
            kernel[d2 > (3.0 * sigma) ** 2] = 0.0
            total = kernel.sum()
            if total <= 0.0:
                values[row, col] += 1.0
            else:
                values[r0 : r1 + 1, c0 : c1 + 1] += kernel / total
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if out_of_extent:
        log.warning("heatmap: %d point(s) outside the grid extent", out_of_extent)
    return DensityGrid(spec, values, out_of_extent)


def heatmap(
    entries: list[AnnotatedEntry],
    spec: GridSpec,
    mode: str = "bin",
    sigma: float | None = None,
) -> DensityGrid:
    points = [(e.x, e.y) for e in entries if e.x is not None and e.y is not None]
    return heatmap_points(points, spec, mode, sigma)


@dataclass
class SubjectDistribution:
    items: list[tuple[str, int]]        # descending count, ties alphabetical
    unknown: int = 0

    @property
    def total(self) -> int:
        return sum(count for _, count in self.items)

    def counts(self) -> list[int]:
        return [count for _, count in self.items]


def subject_distribution(
    annotated: list[AnnotatedEntry], per_request: bool = False
) -> SubjectDistribution:
    """Counts per subject over all annotated bib id occurrences.

    per_request counts each subject at most once per log entry instead of
    once per recommended item.
    """
    counter: Counter = Counter()
    unknown = 0
    for e in annotated:
        subjects = [a.subject for a in e.annotations]
        if per_request:
            subjects = sorted(set(subjects))
        for subject in subjects:
            if subject == UNKNOWN:
                unknown += 1
            else:
                counter[subject] += 1
    items = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
    return SubjectDistribution(items, unknown)


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    r_squared: float


def fit_power_law(dist: SubjectDistribution | list[int] | list[float]) -> PowerLawFit:
    """Least-squares line on (log rank, log count); slope is the exponent.

    Counts are taken in rank order (largest first); zero counts are dropped.
    Needs at least 3 nonzero ranks.
    """
    counts = dist.counts() if isinstance(dist, SubjectDistribution) else list(dist)
    counts = sorted((c for c in counts if c > 0), reverse=True)
    if len(counts) < 3:
        raise TooFewRanks(f"need >= 3 nonzero ranks, got {len(counts)}")
    ranks = np.arange(1, len(counts) + 1, dtype=float)
    log_r = np.log(ranks)
    log_c = np.log(np.asarray(counts, dtype=float))
    slope, intercept = np.polyfit(log_r, log_c, 1)
    predicted = slope * log_r + intercept
    ss_res = float(np.sum((log_c - predicted) ** 2))
    ss_tot = float(np.sum((log_c - log_c.mean()) ** 2))
    r_squared = 1.0 if ss_tot < 1e-30 else 1.0 - ss_res / ss_tot
    return PowerLawFit(float(slope), r_squared)


def trace_identifier(bib_id: str, entries: list[ApiLogEntry]) -> dict[str, int]:
    """Per-module count of entries whose bib id list contains the target."""
    counts = {module: 0 for module in MODULES}
    for entry in entries:
        if bib_id in entry.bib_ids:
            counts[entry.module] += 1
    return counts


@dataclass
class TextStats:
    total_words: int
    unique_forms: int
    top: list[tuple[str, int]]


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip punctuation from token edges."""
    tokens = []
    for raw in text.lower().split():
        token = raw.strip(string.punctuation)
        if token:
            tokens.append(token)
    return tokens


def mine_queries(entries: list[ApiLogEntry], module: str, top_n: int = 5) -> TextStats:
    """Word stats over the `q` params of one module's entries.

    total_words sums every occurrence of every word; unique_forms counts
    distinct tokens once.  Top list is count-descending, ties alphabetical.
    """
    counter: Counter = Counter()
    for entry in entries:
        if entry.module != module:
            continue
        query = entry.params.get("q")
        if query:
            counter.update(tokenize(query))
    top = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]
    return TextStats(sum(counter.values()), len(counter), top)


def _month_of(timestamp: str) -> tuple[int, int]:
    dt = datetime.fromisoformat(timestamp)
    return dt.year, dt.month


def _next_month(ym: tuple[int, int]) -> tuple[int, int]:
    year, month = ym
    return (year + 1, 1) if month == 12 else (year, month + 1)


def time_series(entries: list[ApiLogEntry], module: str | None = None) -> list[tuple[str, int]]:
    """Per-calendar-month request counts, zero-filled over the entries' span."""
    selected = [e for e in entries if module is None or e.module == module]
    if not selected:
        return []
    months = [_month_of(e.timestamp) for e in selected]
    counter = Counter(months)
    series = []
    ym = min(months)
    last = max(months)
    while True:
        series.append((f"{ym[0]:04d}-{ym[1]:02d}", counter.get(ym, 0)))
        if ym == last:
            break
        ym = _next_month(ym)
    return series


# --- report output helpers -------------------------------------------------

def write_grid_csv(grid: DensityGrid, path: str | Path) -> None:
    header = (
        f"# origin={grid.spec.origin_x},{grid.spec.origin_y}"
        f" cell_size={grid.spec.cell_size}"
        f" out_of_extent={grid.out_of_extent}\n"
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header)
        for row in grid.values:
            fh.write(",".join(f"{v:.9g}" for v in row) + "\n")


def write_grid_pgm(grid: DensityGrid, path: str | Path) -> None:
    """8-bit grayscale PGM, brightest cell = highest density."""
    peak = grid.values.max()
    scaled = np.zeros_like(grid.values, dtype=int) if peak <= 0 else np.rint(
        grid.values / peak * 255
    ).astype(int)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"P2\n{grid.spec.width} {grid.spec.height}\n255\n")
        for row in scaled[::-1]:  # row 0 of the grid is the bottom of the image
            fh.write(" ".join(str(v) for v in row) + "\n")


def write_wayfinder_table(annotated: list[AnnotatedEntry], path: str | Path) -> None:
    """Wayfinding table: uri, hit count, shelf target, call number (one row per uri)."""
    groups: dict[str, list[AnnotatedEntry]] = {}
    order: list[str] = []
    for e in annotated:
        if e.entry.module != "wayfinder" or not e.entry.uri.startswith("/api/wayfinder/map_data/"):
            continue
        if e.entry.uri not in groups:
            groups[e.entry.uri] = []
            order.append(e.entry.uri)
        groups[e.entry.uri].append(e)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("uri,sum-records,X,Y,shelf-number,call-number\n")
        for uri in order:
            entries = groups[uri]
            hit = next((e for e in entries if e.x is not None), entries[0])
            call = next((a.call_number for a in hit.annotations if a.call_number), "")
            x = "" if hit.x is None else str(round(hit.x))
            y = "" if hit.y is None else str(round(hit.y))
            shelf = "" if hit.shelf_number is None else str(hit.shelf_number)
            fh.write(f'"{uri}",{len(entries)},{x},{y},{shelf},"{call}"\n')


def write_recommend_table(annotated: list[AnnotatedEntry], path: str | Path) -> None:
    """Recommendation table: uri plus one bib-id column per returned item."""
    rows = [
        e for e in annotated
        if e.entry.module == "recommend" and 200 <= e.entry.status < 300
    ]
    max_ids = max((len(e.entry.bib_ids) for e in rows), default=0)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("uri" + ",bib-id" * max_ids + "\n")
        for e in rows:
            ids = list(e.entry.bib_ids) + [""] * (max_ids - len(e.entry.bib_ids))
            fh.write('"' + e.entry.uri + '"' + "".join(f",{i}" for i in ids) + "\n")


def write_distribution_csv(dist: SubjectDistribution, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("subject,count\n")
        for subject, count in dist.items:
            fh.write(f'"{subject}",{count}\n')
        if dist.unknown:
            fh.write(f'"{UNKNOWN}",{dist.unknown}\n')
