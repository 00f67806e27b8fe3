import json
import random

import pytest

from stackrec import lccn, stacksmap
from stackrec.corpus import CorpusStore, load_corpus
from stackrec.recommend import Recommender, subject_query_from_range
from stackrec.stacksmap import Rect, Shelf, StackMap

from conftest import REFERENCE

HOTSPOT = (4362.047852, 3160.110596)
HOTSPOT_BIBS = ["uiu_8378456", "uiu_7072382", "hat_817483", "uiu_7277188", "uiu_8375583"]


def test_far_from_all_shelves_is_empty(ref_recommender):
    result = ref_recommender.recommend_near((2000.0, 2000.0))
    assert result.items == []
    assert result.ranges_used == []


def test_hotspot_row_reproduced(ref_recommender):
    result = ref_recommender.recommend_near(HOTSPOT)
    prints = [i for i in result.items if i.kind == "print"]
    assert [i.bib_id for i in prints] == HOTSPOT_BIBS
    # descending circulation scores
    scores = [i.score for i in prints]
    assert scores == sorted(scores, reverse=True)


def test_print_items_capped_at_five(ref_recommender):
    result = ref_recommender.recommend_near(HOTSPOT)
    prints = [i for i in result.items if i.kind == "print"]
    assert len(prints) == 5
    # uiu_9000001 (count 2) is in range but displaced by the cap
    assert "uiu_9000001" not in [i.bib_id for i in prints]


def test_range_soundness(ref_recommender):
    result = ref_recommender.recommend_near(HOTSPOT)
    for item in result.items:
        if item.call_number is not None:
            assert any(lccn.in_range(item.call_number, r) for r in result.ranges_used)


def test_database_suggestions_appended_after_books(ref_recommender):
    result = ref_recommender.recommend_near(HOTSPOT)
    kinds = [i.kind for i in result.items]
    assert kinds == sorted(kinds, key=lambda k: {"print": 0, "ebook": 1, "database": 2}[k])
    names = {i.name for i in result.items if i.kind == "database"}
    # majority journal for "American literature" plus the curated PS-range database
    assert "American Literary History" in names
    assert "Literature Online" in names


def test_majority_journal_share_scores(ref_recommender):
    result = ref_recommender.recommend_near(HOTSPOT)
    journal = next(i for i in result.items if i.name == "American Literary History")
    assert journal.score == pytest.approx(6 / 8)


def test_exact_half_share_is_not_a_majority(ref_recommender, ref_outline):
    # Philosophy articles split 5/10, 3/10, 2/10 across journals
    ranges = [lccn.parse_range("B100", "B110")]
    items = ref_recommender.database_suggestions(ranges)
    assert [i for i in items if i.name not in ("Literature Online", "America: History and Life")] == []


def test_unanimous_journal_scores_one(ref_stackmap, ref_outline, tmp_path):
    articles = tmp_path / "articles.csv"
    articles.write_text(
        "journal_title,article_title,subject\n"
        'Only Journal,"A","American literature"\n'
        'Only Journal,"B","American literature"\n',
        encoding="utf-8",
    )
    store = load_corpus(REFERENCE / "catalog.csv", articles_path=articles)
    rec = Recommender(ref_stackmap, store, ref_outline, radius=25.0)
    items = rec.database_suggestions([lccn.parse_range("PS3500", "PS3540")])
    journal = next(i for i in items if i.name == "Only Journal")
    assert journal.score == 1.0


def test_ebook_shelved_nearby_is_suggested(ref_recommender):
    # PR85.C45 e-book surfaces for a patron at the PR shelf
    result = ref_recommender.recommend_near((155.0, 50.0))
    ebooks = [i for i in result.items if i.kind == "ebook"]
    assert "hat_606736" in [i.bib_id for i in ebooks]


def test_no_ebooks_in_range_is_empty(ref_recommender):
    assert ref_recommender.ebook_suggestions([lccn.parse_range("PZ5", "PZ90")]) == []


def test_popular_books_tie_break_and_zero_exclusion(ref_recommender, ref_corpus):
    recs = {r.bib_id: r for r in ref_corpus.records.values()}
    # counts: uiu_9000001=2, hat_615138 is ebook, hat_606736 count 0
    candidates = [recs["uiu_9000001"], recs["hat_606736"], recs["uiu_8127460"]]
    items = ref_recommender.popular_books(candidates)
    assert [i.bib_id for i in items] == ["uiu_8127460", "uiu_9000001"]


def test_subject_query_head_term_reduction(ref_outline):
    assert subject_query_from_range(lccn.parse_range("B105", "B200"), ref_outline) == "Philosophy"
    assert (
        subject_query_from_range(lccn.parse_range("PR85", "PR90"), ref_outline)
        == "English literature"
    )
    assert (
        subject_query_from_range(lccn.parse_range("GV1469.15", "GV1469.62"), ref_outline)
        == "Computer games"
    )
    assert subject_query_from_range(lccn.parse_range("ZZ1", "ZZ9"), ref_outline) is None


def test_determinism_identical_bytes(ref_recommender):
    a = json.dumps(ref_recommender.recommend_near(HOTSPOT).to_dict(), sort_keys=True)
    b = json.dumps(ref_recommender.recommend_near(HOTSPOT).to_dict(), sort_keys=True)
    assert a == b


def test_wire_schema_shape(ref_recommender):
    payload = ref_recommender.recommend_near(HOTSPOT).to_dict()
    assert payload["v"] == 1
    assert set(payload["location"]) == {"x", "y"}
    assert all(set(r) == {"start", "end"} for r in payload["ranges"])
    for item in payload["items"]:
        assert item["kind"] in ("print", "ebook", "database")
        if item["kind"] in ("print", "ebook"):
            assert "bib_id" in item and "call_number" in item


# --- synthetic-store oracle equivalence ------------------------------------

def _synthetic_world(tmp_path, seed=17, n_records=500, n_shelves=25):
    from conftest import random_call_number

    rng = random.Random(seed)
    rows = ["bib_id,title,call_number,format"]
    records = []
    seen = set()
    while len(records) < n_records:
        cn = random_call_number(rng)
        if cn.suffix:
            continue
        text = lccn.canonical_format(cn)
        if text in seen:
            continue
        seen.add(text)
        idx = len(records) + 1
        fmt = "ebook" if rng.random() < 0.15 else "print"
        records.append((f"uiu_{idx}", cn, fmt))
        rows.append(f'uiu_{idx},"Title {idx}","{text}",{fmt}')
    catalog = tmp_path / "catalog.csv"
    catalog.write_text("\n".join(rows) + "\n", encoding="utf-8")

    circ_rows = ["bib_id,charge_date"]
    counts = {}
    for bib_id, _cn, fmt in records:
        if fmt == "print" and rng.random() < 0.7:
            n = rng.randint(1, 30)
            counts[bib_id] = n
            circ_rows += [f"{bib_id},2017-01-01T00:00:00"] * n
    circulation = tmp_path / "circulation.csv"
    circulation.write_text("\n".join(circ_rows) + "\n", encoding="utf-8")
    store = load_corpus(catalog, circulation)

    ordered = sorted(records, key=lambda r: r[1].sort_key())
    per = len(ordered) // n_shelves
    shelves = []
    for i in range(n_shelves):
        chunk = ordered[i * per : (i + 1) * per]
        if not chunk:
            continue
        x0 = (i % 5) * 60.0
        y0 = (i // 5) * 40.0
        shelves.append(
            Shelf(
                shelf_number=i + 1,
                bounds=Rect(x0, y0, x0 + 30.0, y0 + 15.0),
                range=lccn.CallNumberRange(chunk[0][1], chunk[-1][1]),
            )
        )
    return store, StackMap(shelves=shelves)


def test_recommend_near_matches_brute_force_pipeline(tmp_path, ref_outline):
    store, stack = _synthetic_world(tmp_path)
    radius = 35.0
    rec = Recommender(stack, store, ref_outline, radius=radius, max_items=5, max_ebooks=3)
    rng = random.Random(3)

    for _ in range(50):
        p = (rng.uniform(-30, 330), rng.uniform(-30, 230))
        result = rec.recommend_near(p)

        # independent pipeline: brute-force distances, full catalog scan,
        # count sort, cap
        near = sorted(
            (s for s in stack.shelves if s.bounds.distance_to(p) <= radius),
            key=lambda s: (s.bounds.distance_to(p), s.shelf_number),
        )
        ranges = [s.range for s in near]
        assert result.ranges_used == ranges

        in_any = [
            r
            for r in store.records.values()
            if any(lccn.in_range(r.call_number, rr) for rr in ranges)
        ]
        prints = [
            (r, store.circulation_count(r.bib_id))
            for r in in_any
            if r.format == "print" and store.circulation_count(r.bib_id) > 0
        ]
        prints.sort(key=lambda pair: (-pair[1], pair[0].bib_id))
        expected_prints = [r.bib_id for r, _ in prints[:5]]

        ebooks = sorted(
            (r for r in in_any if r.format == "ebook"),
            key=lambda r: (r.call_number.sort_key(), r.bib_id),
        )
        expected_ebooks = [r.bib_id for r in ebooks[:3]]

        got_prints = [i.bib_id for i in result.items if i.kind == "print"]
        got_ebooks = [i.bib_id for i in result.items if i.kind == "ebook"]
        assert got_prints == expected_prints
        assert got_ebooks == expected_ebooks


def test_monotone_popularity(tmp_path, ref_outline):
    store, stack = _synthetic_world(tmp_path, seed=23)
    rec = Recommender(stack, store, ref_outline, radius=35.0)
    rng = random.Random(8)
    for _ in range(20):
        p = (rng.uniform(0, 300), rng.uniform(0, 200))
        before = rec.recommend_near(p)
        prints = [i for i in before.items if i.kind == "print"]
        if not prints:
            continue
        target = prints[-1]
        boosted = CorpusStore(
            records=store.records,
            charges=store.charges + type(store.charges)({target.bib_id: 100}),
            articles=store.articles,
            databases=store.databases,
        )
        rec2 = Recommender(stack, boosted, ref_outline, radius=35.0)
        after = rec2.recommend_near(p)
        after_prints = [i.bib_id for i in after.items if i.kind == "print"]
        assert target.bib_id in after_prints
        assert after_prints.index(target.bib_id) <= [
            i.bib_id for i in prints
        ].index(target.bib_id)
