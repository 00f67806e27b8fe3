import random

import pytest

from stackrec import corpus, lccn
from stackrec.corpus import ArticleResult, CorpusLoadError, load_corpus

from conftest import REFERENCE, random_call_number


def test_basic_load(tmp_path):
    path = tmp_path / "catalog.csv"
    path.write_text(
        "bib_id,title,call_number,format\n"
        'uiu_1,"One","PS100 .A1",print\n'
        'uiu_2,"Two","PS200 .B2",print\n'
        'hat_3,"Three","PS300 .C3",ebook\n',
        encoding="utf-8",
    )
    store = load_corpus(path)
    assert len(store.records) == 3
    assert store.records["hat_3"].format == "ebook"


def test_bad_call_number_skipped_and_reported(tmp_path):
    path = tmp_path / "catalog.csv"
    path.write_text(
        "bib_id,title,call_number,format\n"
        'uiu_1,"One","PS100 .A1",print\n'
        'uiu_2,"Two","???",print\n',
        encoding="utf-8",
    )
    store = load_corpus(path)
    assert len(store.records) == 1
    assert len(store.diagnostics) == 1


def test_duplicate_bib_id_fatal(tmp_path):
    path = tmp_path / "catalog.csv"
    path.write_text(
        "bib_id,title,call_number,format\n"
        'uiu_1,"One","PS100 .A1",print\n'
        'uiu_1,"One again","PS101 .A1",print\n',
        encoding="utf-8",
    )
    with pytest.raises(CorpusLoadError, match="duplicate"):
        load_corpus(path)


def test_known_ids_resolve_to_call_numbers(ref_corpus):
    assert (
        lccn.canonical_format(ref_corpus.records["uiu_8127460"].call_number)
        == "PN1995 .C655 2015"
    )
    assert (
        lccn.canonical_format(ref_corpus.records["uiu_7419985"].call_number)
        == "SF446 .C763 2014"
    )


def test_known_subjects_resolve_through_classify(ref_corpus, ref_outline):
    expectations = {
        "uiu_7734446": "Computer games. Video games. Fantasy games",
        "uiu_5180498": "English literature: Provincial, local, etc.",
        "uiu_4168504": "Fiction and juvenile belles lettres",
        "uiu_7878848": "Radio broadcasts",
        "hat_606736": "English literature",
        "hat_615138": "American literature",
        "hat_345695": "History of the Americas. United States",
        "hat_659370": "History of the Americas. United States",
    }
    for bib_id, label in expectations.items():
        record = ref_corpus.records[bib_id]
        assert ref_outline.classify(record.call_number) == label


def test_books_in_range_includes_known_ebook(ref_corpus):
    records = ref_corpus.books_in_range(lccn.parse_range("PR1", "PR9999"))
    assert "hat_606736" in [r.bib_id for r in records]


def test_books_in_range_empty_intersection(ref_corpus):
    assert ref_corpus.books_in_range(lccn.parse_range("QA1", "QA939")) == []


def test_books_in_range_format_filter(ref_corpus):
    r = lccn.parse_range("PS1", "PS3626")
    ebooks = ref_corpus.books_in_range(r, fmt="ebook")
    assert [rec.bib_id for rec in ebooks] == ["hat_615138"]
    prints = ref_corpus.books_in_range(r, fmt="print")
    assert all(rec.format == "print" for rec in prints)


def test_books_in_range_matches_linear_scan(tmp_path):
    rng = random.Random(99)
    rows = ["bib_id,title,call_number,format"]
    seen = set()
    i = 0
    while i < 500:
        cn = random_call_number(rng)
        text = lccn.canonical_format(cn)
        if text in seen or cn.suffix:
            continue
        seen.add(text)
        i += 1
        fmt = "ebook" if rng.random() < 0.2 else "print"
        rows.append(f'uiu_{i},"Title {i}","{text}",{fmt}')
    path = tmp_path / "catalog.csv"
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    store = load_corpus(path)
    assert len(store.records) == 500

    for _ in range(40):
        a, b = random_call_number(rng), random_call_number(rng)
        if lccn.compare(a, b) > 0:
            a, b = b, a
        r = lccn.CallNumberRange(a, b)
        expected = sorted(
            (rec for rec in store.records.values() if lccn.in_range(rec.call_number, r)),
            key=lambda rec: (rec.call_number.sort_key(), rec.bib_id),
        )
        assert store.books_in_range(r) == expected


def test_circulation_counts(ref_corpus):
    assert ref_corpus.circulation_count("uiu_8378456") == 12
    assert ref_corpus.circulation_count("uiu_9000001") == 2
    assert ref_corpus.circulation_count("uiu_404") == 0
    # never-charged known bib
    assert ref_corpus.circulation_count("hat_606736") == 0


def test_circulation_matches_hand_sum(ref_corpus):
    with open(REFERENCE / "circulation.csv", encoding="utf-8") as fh:
        next(fh)
        lines = [line.split(",")[0] for line in fh if line.strip()]
    for bib_id in set(lines):
        assert ref_corpus.circulation_count(bib_id) == lines.count(bib_id)


def test_article_search_no_match(ref_corpus):
    assert ref_corpus.article_search("Astrophysics") == []


def test_article_search_whole_word_case_insensitive(ref_corpus):
    results = ref_corpus.article_search("philosophy")
    assert len(results) == 10
    # substring is not a word match
    assert ref_corpus.article_search("philo") == []


def test_article_search_matches_scan_oracle(ref_corpus):
    import re

    query = "American literature"
    pattern = re.compile(rf"\b{re.escape(query)}\b", re.IGNORECASE)
    expected = sorted(
        (
            ArticleResult(j, a)
            for j, a, s in ref_corpus.articles
            if pattern.search(s)
        ),
        key=lambda r: (r.journal_title, r.article_title),
    )
    assert ref_corpus.article_search(query) == expected
    assert len(expected) == 8


def test_load_is_idempotent():
    kwargs = dict(
        catalog_path=REFERENCE / "catalog.csv",
        circulation_path=REFERENCE / "circulation.csv",
        articles_path=REFERENCE / "articles.csv",
        databases_path=REFERENCE / "databases.csv",
    )
    a, b = load_corpus(**kwargs), load_corpus(**kwargs)
    assert a.records == b.records
    assert a.charges == b.charges
    assert a.articles == b.articles
    assert a.databases == b.databases


def test_database_entries_group_repeated_names(ref_corpus):
    by_name = {d.name: d for d in ref_corpus.databases}
    assert len(by_name["Literature Online"].subject_ranges) == 2
    assert len(by_name["America: History and Life"].subject_ranges) == 1
