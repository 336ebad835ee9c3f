"""Linear tree combination of several predicted parses.

The combiner grows a tree top-down from the artificial root. At each step it
considers every arc whose head is already attached and whose dependent is
not, takes those with the most votes and picks one uniformly at random. Only
one token may attach to the root.
"""
from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .conllu import Corpus, Sentence
from .learner.seeds import fnv1a_64
from .metrics import AlignmentError, evaluate

TAG_COLUMNS = ("lemma", "upos", "xpos", "feats")


@dataclass
class ArcVote:
    dependent: int
    head: int
    deprel: str
    votes: int
    proposers: frozenset


@dataclass
class CombinerConfig:
    repeats: int = 21
    base_seed: int = 0
    head_only_votes: bool = False

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


def collect_votes(trees: Sequence[Sentence], head_only: bool = False) -> list[list[ArcVote]]:
    """Candidate arcs per dependent (index 0 is token 1).

    With ``head_only`` an arc's votes count every system choosing that head and
    its label is the plurality label among them (first proposer on ties).
    """
    n = len(trees[0])
    out = []
    for dep in range(n):
        proposals: dict[tuple, list[int]] = {}
        for k, t in enumerate(trees):
            key = (t.heads[dep],) if head_only else (t.heads[dep], t.deprels[dep])
            proposals.setdefault(key, []).append(k)
        arcs = []
        for key, systems in proposals.items():
            if head_only:
                labels = Counter(trees[k].deprels[dep] for k in systems)
                best = max(labels.values())
                label = next(trees[k].deprels[dep] for k in systems
                             if labels[trees[k].deprels[dep]] == best)
            else:
                label = key[1]
            arcs.append(ArcVote(dep + 1, key[0], label, len(systems), frozenset(systems)))
        out.append(arcs)
    return out


def _check_aligned(trees: Sequence[Sentence]) -> None:
    if len(trees) < 2:
        raise ValueError("need at least two trees to combine")
    forms = trees[0].forms
    for t in trees[1:]:
        if t.forms != forms:
            raise AlignmentError("trees to combine are not token-aligned")


def combine_trees(trees: Sequence[Sentence], rng: random.Random,
                  head_only_votes: bool = False) -> Sentence:
    _check_aligned(trees)
    votes = collect_votes(trees, head_only_votes)
    n = len(trees[0])
    heads = [0] * n
    rels = [""] * n
    attached = [False] * (n + 1)
    attached[0] = True
    root_used = False
    for _ in range(n):
        best = 0
        tied: list[ArcVote] = []
        for dep_arcs in votes:
            if attached[dep_arcs[0].dependent]:
                continue
            for arc in dep_arcs:
                if not attached[arc.head] or (arc.head == 0 and root_used):
                    continue
                if arc.votes > best:
                    best = arc.votes
                    tied = [arc]
                elif arc.votes == best:
                    tied.append(arc)
        # an attachable arc always exists: the input tree that supplied the
        # root arc reaches every remaining token from attached real tokens
        arc = tied[0] if len(tied) == 1 else tied[rng.randrange(len(tied))]
        heads[arc.dependent - 1] = arc.head
        rels[arc.dependent - 1] = arc.deprel
        attached[arc.dependent] = True
        if arc.head == 0:
            root_used = True
    tags = {col: _majority_column(trees, col, rng) for col in TAG_COLUMNS}
    first = trees[0]
    return Sentence(first.forms, lemmas=tags["lemma"], upos=tags["upos"], xpos=tags["xpos"],
                    feats=tags["feats"], heads=heads, deprels=rels, deps=first.deps,
                    misc=first.misc, comments=first.comments, extra=first.extra)


def _majority_column(trees: Sequence[Sentence], column: str, rng: random.Random) -> list[str]:
    cols = [t.column(column) for t in trees]
    out = []
    for values in zip(*cols):
        counts = Counter(values)
        top = max(counts.values())
        winners = [v for v in dict.fromkeys(values) if counts[v] == top]
        out.append(winners[0] if len(winners) == 1 else winners[rng.randrange(len(winners))])
    return out


def sentence_seed(base_seed: int, repeat: int, sentence_index: int) -> int:
    return fnv1a_64(f"combine;base={base_seed};repeat={repeat};sentence={sentence_index}"
                    .encode("utf-8"))


def combine_corpora(corpora: Sequence[Corpus], config: CombinerConfig | None = None) -> list[Corpus]:
    """One combined corpus per repeat; each sentence draws from its own stream."""
    config = config or CombinerConfig()
    if len(corpora) < 2:
        raise ValueError("need at least two corpora to combine")
    n = len(corpora[0])
    if any(len(c) != n for c in corpora):
        raise AlignmentError("corpora to combine differ in sentence count")
    out = []
    for r in range(config.repeats):
        sents = []
        for k, trees in enumerate(zip(*corpora)):
            rng = random.Random(sentence_seed(config.base_seed, r, k))
            sents.append(combine_trees(trees, rng, config.head_only_votes))
        out.append(Corpus(sents, origin="predicted"))
    return out


@dataclass
class EnsembleScore:
    mean: float
    min: float
    max: float
    scores: list[float]


def averaged_ensemble_las(corpora: Sequence[Corpus], gold: Corpus,
                          config: CombinerConfig | None = None) -> EnsembleScore:
    scores = [evaluate(gold, c).las for c in combine_corpora(corpora, config)]
    return EnsembleScore(float(np.mean(scores)), min(scores), max(scores), scores)


class LinearTreeCombiner(BaseEstimator):
    """Estimator-style wrapper: ``transform`` maps aligned predictions to combined ones."""

    def __init__(self, repeats=21, base_seed=0, head_only_votes=False):
        self.repeats = repeats
        self.base_seed = base_seed
        self.head_only_votes = head_only_votes

    def _config(self) -> CombinerConfig:
        return CombinerConfig(self.repeats, self.base_seed, self.head_only_votes)

    def fit(self, corpora=None, y=None):
        return self

    def transform(self, corpora: Sequence[Corpus]) -> list[Corpus]:
        return combine_corpora(corpora, self._config())

    def score(self, corpora: Sequence[Corpus], gold: Corpus) -> float:
        return averaged_ensemble_las(corpora, gold, self._config()).mean
