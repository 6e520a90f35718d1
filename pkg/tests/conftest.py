import io
from pathlib import Path

import pytest

from mapsin import RdfStore, Term, TriplePattern, Variable

DATA = Path(__file__).parent / "data"


def iri(x):
    return Term.iri(x)


def lit(x):
    return Term.literal(x)


def V(name):
    return Variable(name)


def tp(s, p, o):
    return TriplePattern(s, p, o)


@pytest.fixture
def articles_text():
    return (DATA / "articles.nt").read_text()


@pytest.fixture
def articles(articles_text):
    store = RdfStore()
    store.load_ntriples(io.StringIO(articles_text))
    return store


@pytest.fixture
def article_query_text():
    return (DATA / "article_query.rq").read_text()


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
