"""Synthetic-world generator and end-to-end report driver.

Builds a desk-scale library (catalog, circulation skew, shelves, beacons),
simulates patron walks against a live gateway, then runs the whole analytics
suite over the resulting logs.  Everything is deterministic per seed; walk
timestamps come from a simulated clock, so a year-long study window replays
in seconds.
"""

from __future__ import annotations

import json
import logging
import random
import shutil
import urllib.parse
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from datetime import datetime, timedelta
from importlib import resources
from pathlib import Path

from . import corpus, lccn, locate, stacksmap, telemetry
from .gateway import ApiLogEntry, Gateway, GatewayServer, TransactionLog
from .recommend import Recommender
from .telemetry import GridSpec

log = logging.getLogger(__name__)

STUDY_START = datetime(2016, 9, 1)
STUDY_END = datetime(2017, 8, 31, 23, 59)

# (class letters, low class number, high class number, draw weight, is ebook class share)
CLASS_SPECS = [
    ("PS", 1, 3626, 100),
    ("PR", 1, 8308, 55),
    ("PZ", 5, 90, 30),
    ("PN", 1, 1990, 30),
    ("HD", 28, 9999, 25),
    ("ML", 1, 3930, 24),
    ("QA", 1, 939, 24),
    ("QH", 1, 705, 23),
    ("ND", 25, 3416, 23),
    ("GV", 1, 1860, 17),
    ("SF", 1, 1100, 13),
    ("E", 151, 889, 12),
    ("TX", 1, 1110, 12),
    ("B", 1, 5802, 9),
    ("BF", 1, 990, 6),
]

_TITLE_WORDS = [
    "studies", "history", "introduction", "reader", "companion", "essays",
    "survey", "perspectives", "handbook", "anthology", "notes", "guide",
]

_QUERY_WORDS = [
    "fish", "google", "math", "test", "hiv", "history", "poetry", "novel",
    "physics", "music", "film", "statistics", "shakespeare", "chemistry",
    "economics", "biology", "painting", "cooking", "psychology", "games",
]


def packaged_outline_path() -> Path:
    return Path(str(resources.files("stackrec").joinpath("data/lcc_outline.tsv")))


@dataclass
class SkewProfile:
    """Circulation skew: Zipf(alpha) charge counts, head ranks in head_classes."""

    alpha: float = 1.0
    head_classes: tuple[str, ...] = ("PS", "PR")
    charge_scale: int = 4000        # charges of the rank-1 item
    ebook_share: float = 0.12

    def __post_init__(self):
        if self.alpha <= 0 or self.charge_scale < 1:
            raise ValueError("skew profile requires alpha > 0 and charge_scale >= 1")
        if not 0.0 <= self.ebook_share < 1.0:
            raise ValueError("ebook_share must be in [0, 1)")


@dataclass
class FixtureSet:
    root: Path

    @property
    def catalog(self) -> Path:
        return self.root / "catalog.csv"

    @property
    def circulation(self) -> Path:
        return self.root / "circulation.csv"

    @property
    def articles(self) -> Path:
        return self.root / "articles.csv"

    @property
    def databases(self) -> Path:
        return self.root / "databases.csv"

    @property
    def stackmap(self) -> Path:
        return self.root / "stackmap.csv"

    @property
    def beacons(self) -> Path:
        return self.root / "beacons.csv"

    @property
    def outline(self) -> Path:
        return self.root / "outline.tsv"


def _random_call_number(rng: random.Random, letters: str, lo: int, hi: int) -> lccn.CallNumber:
    number = rng.randint(lo, hi)
    frac = ""
    if rng.random() < 0.25:
        frac = str(rng.randint(1, 99)).rstrip("0") or "5"
    cutter_letter = chr(ord("A") + rng.randrange(26))
    digits = str(rng.randint(1, 9999)).rstrip("0") or "5"
    cutters = [lccn.Cutter(cutter_letter, digits)]
    if rng.random() < 0.3:
        second = chr(ord("A") + rng.randrange(26))
        second_digits = str(rng.randint(1, 999)).rstrip("0") or "5"
        cutters.append(lccn.Cutter(second, second_digits))
    year = rng.randint(1950, 2017) if rng.random() < 0.6 else None
    return lccn.CallNumber(letters, number, frac, tuple(cutters), year)


def gen_corpus(
    seed: int,
    n_records: int,
    profile: SkewProfile | None = None,
    out_dir: str | Path = "fixtures",
    n_shelves: int = 40,
    n_beacons: int = 12,
) -> FixtureSet:
    """Write a deterministic synthetic fixture set under out_dir.

    The catalog spreads over the configured classes; circulation follows a
    Zipf(alpha) rank-frequency law with the head ranks concentrated in the
    profile's head classes.
    """
    if n_records < 10:
        raise ValueError("n_records must be >= 10")
    profile = profile or SkewProfile()
    rng = random.Random(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fixtures = FixtureSet(out)

    letters_pool = [spec[0] for spec in CLASS_SPECS]
    weights = [spec[3] for spec in CLASS_SPECS]
    spans = {spec[0]: (spec[1], spec[2]) for spec in CLASS_SPECS}

    seen: set[str] = set()
    records = []  # (bib_id, title, call_number, format, class_letters)
    while len(records) < n_records:
        letters = rng.choices(letters_pool, weights=weights)[0]
        lo, hi = spans[letters]
        cn = _random_call_number(rng, letters, lo, hi)
        canonical = lccn.canonical_format(cn)
        if canonical in seen:
            continue
        seen.add(canonical)
        idx = len(records) + 1
        fmt = "ebook" if rng.random() < profile.ebook_share else "print"
        prefix = "hat" if fmt == "ebook" else "uiu"
        title = f"{letters} {rng.choice(_TITLE_WORDS)} {idx}"
        records.append((f"{prefix}_{1000000 + idx}", title, cn, fmt, letters))

    with open(fixtures.catalog, "w", encoding="utf-8", newline="") as fh:
        fh.write("bib_id,title,call_number,format\n")
        for bib_id, title, cn, fmt, _ in records:
            fh.write(f'{bib_id},"{title}","{lccn.canonical_format(cn)}",{fmt}\n')

    # Popularity ranks: head classes first (shuffled within), then the rest.
    prints = [r for r in records if r[3] == "print"]
    head = [r for r in prints if r[4] in profile.head_classes]
    tail = [r for r in prints if r[4] not in profile.head_classes]
    rng.shuffle(head)
    rng.shuffle(tail)
    ranked = head + tail
    window_minutes = int((STUDY_END - STUDY_START).total_seconds() // 60)
    with open(fixtures.circulation, "w", encoding="utf-8", newline="") as fh:
        fh.write("bib_id,charge_date\n")
        for rank, (bib_id, *_rest) in enumerate(ranked, start=1):
            count = max(1, round(profile.charge_scale / rank ** profile.alpha))
            for _ in range(count):
                at = STUDY_START + timedelta(minutes=rng.randrange(window_minutes))
                fh.write(f"{bib_id},{at.isoformat()}\n")

    # One dominant journal per class subject plus minor noise journals.
    outline = lccn.load_outline(packaged_outline_path())
    with open(fixtures.articles, "w", encoding="utf-8", newline="") as fh:
        fh.write("journal_title,article_title,subject\n")
        for letters, lo, _hi, _w in CLASS_SPECS:
            label = outline.classify(lccn.parse(f"{letters}{lo}"))
            fh.write(f'"Journal of {label}","Survey article {letters} 1","{label}"\n')
            for i in range(2, 6):
                fh.write(f'"Journal of {label}","Topical article {letters} {i}","{label}"\n')
            fh.write(f'"Annals of {letters}","Minor note {letters}","{label}"\n')

    with open(fixtures.databases, "w", encoding="utf-8", newline="") as fh:
        fh.write("name,range_start,range_end\n")
        fh.write("Literature Online,PR1,PS3626\n")
        fh.write("America: History and Life,E151,E889\n")

    # Shelves: contiguous slices of the shelf-ordered catalog, laid out on a
    # grid of stack ranges with aisles between columns.
    ordered = sorted(records, key=lambda r: (r[2].sort_key(), r[0]))
    n_shelves = min(n_shelves, len(ordered))
    per_shelf = len(ordered) / n_shelves
    cols = 8
    rows = (n_shelves + cols - 1) // cols
    shelf_w, shelf_h, aisle = 80.0, 30.0, 40.0
    with open(fixtures.stackmap, "w", encoding="utf-8", newline="") as fh:
        fh.write("shelf_number,x_min,y_min,x_max,y_max,range_start,range_end\n")
        for i in range(n_shelves):
            lo_idx = round(i * per_shelf)
            hi_idx = min(len(ordered), round((i + 1) * per_shelf)) - 1
            if hi_idx < lo_idx:
                continue
            start = lccn.canonical_format(ordered[lo_idx][2])
            end = lccn.canonical_format(ordered[hi_idx][2])
            col, row = i % cols, i // cols
            x0 = 60.0 + col * (shelf_w + aisle)
            y0 = 120.0 + row * (shelf_h + aisle)
            fh.write(f"{i + 1},{x0},{y0},{x0 + shelf_w},{y0 + shelf_h},\"{start}\",\"{end}\"\n")

    with open(fixtures.beacons, "w", encoding="utf-8", newline="") as fh:
        fh.write("beacon_id,x,y,tx_power\n")
        bcols = 4
        brows = (n_beacons + bcols - 1) // bcols
        for i in range(n_beacons):
            bx = 80.0 + (i % bcols) * 260.0
            by = 100.0 + (i // bcols) * (320.0 / max(1, brows - 1) if brows > 1 else 1)
            fh.write(f"b{i + 1:02d},{bx},{by},{locate.DEFAULT_TX_POWER}\n")

    shutil.copyfile(packaged_outline_path(), fixtures.outline)
    return fixtures


@dataclass
class WalkWeights:
    near_shelf: float = 0.62
    aisle: float = 0.18
    entrance: float = 0.20
    idle: float = 0.10              # extra idle steps, fraction of requests
    wayfind_share: float = 1 / 3    # remaining requests are recommendations


@dataclass(frozen=True)
class WalkStep:
    x: float
    y: float
    action: str                     # "wayfind" | "recommend" | "idle"
    dwell: float                    # simulated seconds
    bib_id: str | None = None


@dataclass
class WalkScript:
    seed: int
    steps: list[WalkStep]

    @property
    def request_count(self) -> int:
        return sum(1 for s in self.steps if s.action != "idle")

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "steps": [
                    {"x": s.x, "y": s.y, "action": s.action, "dwell": s.dwell,
                     **({"bib_id": s.bib_id} if s.bib_id else {})}
                    for s in self.steps
                ],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "WalkScript":
        raw = json.loads(text)
        return cls(
            raw["seed"],
            [
                WalkStep(s["x"], s["y"], s["action"], s["dwell"], s.get("bib_id"))
                for s in raw["steps"]
            ],
        )


def gen_walk(
    seed: int,
    stackmap_: stacksmap.StackMap,
    n_requests: int,
    corpus_: corpus.CorpusStore | None = None,
    weights: WalkWeights | None = None,
) -> WalkScript:
    """A deterministic patron walk: near-shelf, aisle, and entrance-zone points.

    Near-shelf points pick a class by the configured draw weights (topical
    interest), then a point just outside that class's stack; wayfinding steps
    target circulation-weighted items when a corpus is supplied.
    """
    weights = weights or WalkWeights()
    rng = random.Random(seed)
    extent = stackmap_.map_extent
    margin = 25.0

    by_class: dict[str, list[stacksmap.Shelf]] = {}
    for shelf in stackmap_.shelves:
        by_class.setdefault(shelf.range.start.class_letters, []).append(shelf)
    class_pool = [spec[0] for spec in CLASS_SPECS if spec[0] in by_class]
    class_weights = [spec[3] for spec in CLASS_SPECS if spec[0] in by_class]

    wayfind_bibs: list[str] = []
    wayfind_weights: list[int] = []
    if corpus_ is not None:
        for rec in corpus_.records.values():
            if rec.format == "print":
                wayfind_bibs.append(rec.bib_id)
                wayfind_weights.append(corpus_.circulation_count(rec.bib_id) + 1)

    def clamp(x: float, y: float) -> tuple[float, float]:
        return (
            min(max(x, extent.x_min), extent.x_max),
            min(max(y, extent.y_min), extent.y_max),
        )

    def sample_point() -> tuple[float, float]:
        zone = rng.choices(
            ("near_shelf", "aisle", "entrance"),
            weights=(weights.near_shelf, weights.aisle, weights.entrance),
        )[0]
        if zone == "near_shelf" and class_pool:
            letters = rng.choices(class_pool, weights=class_weights)[0]
            shelf = rng.choice(by_class[letters])
            b = shelf.bounds
            return clamp(
                rng.uniform(b.x_min - 15.0, b.x_max + 15.0),
                rng.uniform(b.y_min - 15.0, b.y_max + 15.0),
            )
        if zone == "aisle":
            return (rng.uniform(extent.x_min, extent.x_max),
                    rng.uniform(extent.y_min, extent.y_max))
        # entrance zone: a strip along the bottom edge of the map
        return clamp(
            rng.uniform(extent.x_min, extent.x_min + 0.3 * extent.width),
            rng.uniform(extent.y_min, extent.y_min + 10.0),
        )

    total_seconds = (STUDY_END - STUDY_START).total_seconds()
    n_idle = round(n_requests * weights.idle)
    n_steps = n_requests + n_idle
    mean_dwell = total_seconds / max(1, n_steps)

    actions = ["idle"] * n_idle
    n_wayfind = round(n_requests * weights.wayfind_share) if wayfind_bibs else 0
    actions += ["wayfind"] * n_wayfind + ["recommend"] * (n_requests - n_wayfind)
    rng.shuffle(actions)

    steps: list[WalkStep] = []
    for action in actions:
        x, y = sample_point()
        dwell = rng.uniform(0.2, 1.8) * mean_dwell
        bib_id = None
        if action == "wayfind":
            bib_id = rng.choices(wayfind_bibs, weights=wayfind_weights)[0]
        steps.append(WalkStep(x, y, action, dwell, bib_id))
    return WalkScript(seed, steps)


@dataclass
class ReportConfig:
    out_dir: str = "report"
    seed: int = 7
    records: int = 500
    recommend_requests: int = 400
    wayfind_requests: int = 200
    alpha: float = 1.0
    cell_size: float = 20.0
    gaussian_sigma: float = 30.0
    collection: str = "uiu_undergrad"
    catalog_searches: int = 600
    journal_searches: int = 200
    parallel: int = 1

    @classmethod
    def from_json(cls, path: str | Path) -> "ReportConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"{path}: unknown report config keys {sorted(unknown)}")
        return cls(**raw)


class ReportError(RuntimeError):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


def _synthesize_module_log(
    rng: random.Random,
    path: Path,
    walked_bibs: list[str],
    n_catalog: int,
    n_journal: int,
) -> None:
    """Fixture logs for the surrounding app modules (search, display, reserves...).

    These exercise identifier tracing, query mining, and monthly series; only
    the wayfinder/recommend modules are actually served.
    """
    window_minutes = int((STUDY_END - STUDY_START).total_seconds() // 60)
    zipf_weights = [1.0 / (i + 1) for i in range(len(_QUERY_WORDS))]
    entries: list[ApiLogEntry] = []

    def stamp() -> str:
        return (STUDY_START + timedelta(minutes=rng.randrange(window_minutes))).isoformat()

    for module, count in (("catalog", n_catalog), ("journal", n_journal)):
        for _ in range(count):
            n_words = rng.choices((1, 2, 3), weights=(5, 3, 1))[0]
            q = " ".join(rng.choices(_QUERY_WORDS, weights=zipf_weights, k=n_words))
            entries.append(
                ApiLogEntry(
                    timestamp=stamp(),
                    module=module,
                    uri=f"/api/{module}/search?q={urllib.parse.quote_plus(q)}",
                    params={"q": q},
                    status=200,
                )
            )
    if walked_bibs:
        for module, count in (
            ("display", 120), ("hoot", 25), ("account", 30), ("topicspace", 20), ("citation", 15)
        ):
            for _ in range(count):
                bib = rng.choice(walked_bibs)
                entries.append(
                    ApiLogEntry(
                        timestamp=stamp(),
                        module=module,
                        uri=f"/api/{module}/item/{bib}",
                        params={"bib_id": bib},
                        status=200,
                        bib_ids=(bib,),
                    )
                )
    entries.sort(key=lambda e: e.timestamp)
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(entry.to_json() + "\n")


def run_report(config: ReportConfig) -> dict:
    """Generate fixtures, replay a walk against a live gateway, run analytics.

    Returns a summary dict (also written to summary.json); raises ReportError
    naming the failing stage.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    try:
        fixtures = gen_corpus(
            config.seed, config.records, SkewProfile(alpha=config.alpha), out / "fixtures"
        )
    except Exception as exc:
        raise ReportError("gen_corpus", str(exc)) from exc

    try:
        store = corpus.load_corpus(
            fixtures.catalog, fixtures.circulation, fixtures.articles, fixtures.databases
        )
        stack = stacksmap.load_stackmap(fixtures.stackmap)
        outline = lccn.load_outline(fixtures.outline)
        beacons = locate.load_beacons(fixtures.beacons)
    except Exception as exc:
        raise ReportError("load", str(exc)) from exc

    walk = gen_walk(
        config.seed + 1, stack, config.recommend_requests + config.wayfind_requests,
        corpus_=store,
        weights=WalkWeights(
            wayfind_share=config.wayfind_requests
            / max(1, config.recommend_requests + config.wayfind_requests)
        ),
    )
    (out / "walk.json").write_text(walk.to_json(), encoding="utf-8")

    sim = {"now": STUDY_START}
    log_path = out / "gateway.jsonl"
    log_path.unlink(missing_ok=True)
    txn_log = TransactionLog(log_path)
    gw = Gateway(
        stack, store, outline, txn_log, beacons=beacons,
        recommender=Recommender(stack, store, outline),
        clock=lambda: sim["now"],
    )

    def step_url(server, step) -> str:
        if step.action == "wayfind":
            return f"{server.base_url}/api/wayfinder/map_data/{config.collection}/{step.bib_id}"
        return f"{server.base_url}/api/recommend/popularnear?x={step.x:.6f}&y={step.y:.6f}"

    def fetch(url: str) -> None:
        with urllib.request.urlopen(url, timeout=10) as resp:
            resp.read()

    try:
        with GatewayServer(gw) as server:
            if config.parallel <= 1:
                for step in walk.steps:
                    sim["now"] = sim["now"] + timedelta(seconds=step.dwell)
                    if step.action == "idle":
                        continue
                    fetch(step_url(server, step))
            else:
                # requests within a batch share the batch-end clock reading;
                # line atomicity under concurrency is the log's contract
                with ThreadPoolExecutor(max_workers=config.parallel) as pool:
                    batch: list[str] = []
                    for step in walk.steps:
                        sim["now"] = sim["now"] + timedelta(seconds=step.dwell)
                        if step.action != "idle":
                            batch.append(step_url(server, step))
                        if len(batch) >= config.parallel:
                            list(pool.map(fetch, batch))
                            batch.clear()
                    if batch:
                        list(pool.map(fetch, batch))
    except Exception as exc:
        raise ReportError("replay", str(exc)) from exc
    finally:
        txn_log.close()

    try:
        parsed = telemetry.parse_logs([log_path])
        if parsed.malformed:
            raise ReportError("parse_logs", f"{len(parsed.malformed)} malformed lines")
        if len(parsed.entries) != walk.request_count:
            raise ReportError(
                "parse_logs",
                f"{len(parsed.entries)} logged entries != {walk.request_count} requests",
            )

        walked_bibs = sorted({b for e in parsed.entries for b in e.bib_ids})
        modules_log = out / "modules.jsonl"
        _synthesize_module_log(
            random.Random(config.seed + 2), modules_log, walked_bibs,
            config.catalog_searches, config.journal_searches,
        )
        all_entries = telemetry.parse_logs([log_path, modules_log]).entries

        annotated = telemetry.annotate(parsed.entries, store, outline, stack)
        telemetry.write_wayfinder_table(annotated, out / "wayfinder_table.csv")
        telemetry.write_recommend_table(annotated, out / "recommend_table.csv")

        rec_annotated = [a for a in annotated if a.entry.module == "recommend"]
        spec = GridSpec.covering(stack.map_extent, config.cell_size, margin=config.cell_size)
        grid = telemetry.heatmap(rec_annotated, spec, mode="bin")
        telemetry.write_grid_csv(grid, out / "heatmap_grid.csv")
        telemetry.write_grid_pgm(grid, out / "heatmap.pgm")
        smooth = telemetry.heatmap(rec_annotated, spec, mode="gaussian", sigma=config.gaussian_sigma)
        telemetry.write_grid_csv(smooth, out / "heatmap_smooth.csv")

        n_recommend = sum(1 for e in parsed.entries if e.module == "recommend")
        if grid.out_of_extent != 0:
            raise ReportError("heatmap", f"{grid.out_of_extent} points fell outside the grid")
        if abs(grid.total_mass - n_recommend) > 1e-9:
            raise ReportError(
                "heatmap", f"grid mass {grid.total_mass} != {n_recommend} recommend requests"
            )

        dist = telemetry.subject_distribution(rec_annotated)
        telemetry.write_distribution_csv(dist, out / "subject_distribution.csv")
        occurrences = sum(len(a.annotations) for a in rec_annotated)
        if dist.total + dist.unknown != occurrences:
            raise ReportError("subjects", "distribution counts do not conserve occurrences")
        fit = telemetry.fit_power_law(dist)

        traces = {
            bib: telemetry.trace_identifier(bib, all_entries) for bib in walked_bibs[:20]
        }
        mining = {
            module: telemetry.mine_queries(all_entries, module)
            for module in ("catalog", "journal")
        }
        monthly = {
            module: telemetry.time_series(all_entries, module)
            for module in ("catalog", "journal", "recommend", "wayfinder")
        }
        for module, series in monthly.items():
            with open(out / f"monthly_{module}.csv", "w", encoding="utf-8") as fh:
                fh.write("month,count\n")
                for month, count in series:
                    fh.write(f"{month},{count}\n")
    except ReportError:
        raise
    except Exception as exc:
        raise ReportError("telemetry", str(exc)) from exc

    summary = {
        "requests": walk.request_count,
        "recommend_requests": n_recommend,
        "wayfind_requests": walk.request_count - n_recommend,
        "heatmap_mass": grid.total_mass,
        "heatmap_out_of_extent": grid.out_of_extent,
        "subject_distribution": dist.items,
        "subject_unknown": dist.unknown,
        "power_law": {"exponent": fit.exponent, "r_squared": fit.r_squared},
        "traces": traces,
        "text_mining": {
            module: {
                "total_words": stats.total_words,
                "unique_forms": stats.unique_forms,
                "top": stats.top,
            }
            for module, stats in mining.items()
        },
        "monthly": monthly,
    }
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True), encoding="utf-8"
    )
    log.info("report written to %s", out)
    return summary
