import random
from pathlib import Path

import pytest

from stackrec import corpus, lccn, locate, stacksmap
from stackrec.recommend import Recommender

FIXTURES = Path(__file__).parent / "fixtures"
REFERENCE = FIXTURES / "reference"

# Hand-verified call numbers in expected shelf order.
KNOWN_SORT_ORDER = [
    "B105.E9 G63 1974",
    "E154.N38",
    "E669.F37",
    "GV1469.62.D84",
    "PN1991.75 A24",
    "PN1995 .C655 2015",
    "PR85.C45",
    "PR9619.4.Z87",
    "PS94.B5",
    "PZ7.R79835",
    "SF446 .C763 2014",
]

# call number text -> expected subject label (PZ7 appears in two textual forms)
KNOWN_SUBJECTS = [
    ("B105.E9 G63 1974", "Philosophy (General)"),
    ("GV1469.62.D84", "Computer games. Video games. Fantasy games"),
    ("PR9619.4.Z87", "English literature: Provincial, local, etc."),
    ("PZ7.R79835", "Fiction and juvenile belles lettres"),
    ("PZ7 .R79835", "Fiction and juvenile belles lettres"),
    ("PN1991.75 A24", "Radio broadcasts"),
    ("PR85.C45", "English literature"),
    ("PS94.B5", "American literature"),
    ("E669.F37", "History of the Americas. United States"),
    ("E154.N38", "History of the Americas. United States"),
]


@pytest.fixture(scope="session")
def ref_outline():
    return lccn.load_outline(REFERENCE / "outline.tsv")


@pytest.fixture(scope="session")
def ref_stackmap():
    return stacksmap.load_stackmap(REFERENCE / "stackmap.csv")


@pytest.fixture(scope="session")
def ref_corpus():
    return corpus.load_corpus(
        REFERENCE / "catalog.csv",
        REFERENCE / "circulation.csv",
        REFERENCE / "articles.csv",
        REFERENCE / "databases.csv",
    )


@pytest.fixture(scope="session")
def ref_beacons():
    return locate.load_beacons(REFERENCE / "beacons.csv")


@pytest.fixture(scope="session")
def ref_recommender(ref_stackmap, ref_corpus, ref_outline):
    return Recommender(ref_stackmap, ref_corpus, ref_outline, radius=25.0)


def oracle_call_number_key(cn: lccn.CallNumber):
    """Component-tuple comparison oracle, independent of the Fraction-based key.

    Decimal fractions compare as right-zero-padded digit strings.
    """

    def pad(digits: str) -> str:
        return (digits + "0" * 30)[:30]

    return (
        cn.class_letters,
        cn.class_int,
        pad(cn.class_frac),
        [(c.letter, pad(c.digits)) for c in cn.cutters],
        (0, 0) if cn.year is None else (1, cn.year),
        cn.suffix or "",
    )


def random_call_number(rng: random.Random) -> lccn.CallNumber:
    letters = "".join(
        rng.choice("ABCDEFGHIJKLMNOPQRSTUVWXYZ") for _ in range(rng.randint(1, 3))
    )
    frac = ""
    if rng.random() < 0.4:
        frac = str(rng.randint(1, 999)).rstrip("0") or "5"
    cutters = []
    for _ in range(rng.randint(0, 3)):
        digits = str(rng.randint(1, 99999)).rstrip("0") or "5"
        cutters.append(lccn.Cutter(rng.choice("ABCDEFGHIJKLMNOPQRSTUVWXYZ"), digits))
    year = rng.randint(1500, 2025) if rng.random() < 0.5 else None
    suffix = rng.choice([None, None, None, "v.2", "c.3", "suppl"])
    return lccn.CallNumber(
        letters, rng.randint(0, 9999), frac, tuple(cutters), year, suffix
    )
