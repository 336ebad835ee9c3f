import random

import pytest

from tritrain.conllu import Corpus, Sentence
from tritrain.synthetic import make_treebank

LABELS = ("nsubj", "obj", "amod", "det", "obl")


def random_heads(rng: random.Random, n: int) -> list[int]:
    """Uniform-ish random tree: attach tokens in random order to placed ones."""
    order = list(range(1, n + 1))
    rng.shuffle(order)
    heads = [0] * n
    placed = [order[0]]
    for dep in order[1:]:
        heads[dep - 1] = rng.choice(placed)
        placed.append(dep)
    return heads


def random_tree(rng: random.Random, n: int, forms=None, labels=LABELS) -> Sentence:
    heads = random_heads(rng, n)
    forms = forms or [f"w{i}" for i in range(1, n + 1)]
    rels = ["root" if h == 0 else rng.choice(labels) for h in heads]
    return Sentence(forms, upos=[rng.choice(["NOUN", "VERB"]) for _ in range(n)],
                    heads=heads, deprels=rels)


@pytest.fixture(scope="session")
def small_treebank():
    return make_treebank(seed=2, n_train=80, n_dev=40, n_pool=600)


@pytest.fixture
def rng():
    return random.Random(12345)


def corpus_of(*sents) -> Corpus:
    return Corpus(list(sents))


# acceptance summary: one PASS/FAIL line per criterion ----------------------

_ACCEPTANCE: dict[str, str] = {}


def pytest_runtest_logreport(report):
    marker = "test_acceptance.py::test_criterion_"
    if marker in report.nodeid and (report.when == "call" or report.outcome != "passed"):
        name = report.nodeid.split("::")[-1][len("test_"):]
        if report.when == "call" or name not in _ACCEPTANCE:
            _ACCEPTANCE[name] = report.outcome.upper()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda n: int(n.split("_")[1])):
        status = "PASS" if _ACCEPTANCE[name] == "PASSED" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}")
