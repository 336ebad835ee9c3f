"""Template-grammar treebank for controlled experiments.

The grammar generates English-like clauses over a randomly spelled lexicon.
Attachment is lexical: a prepositional phrase attaches to the closest noun to
its left if that noun is *relational*, otherwise to the verb, and verbs carry
a fixed valency. The tree is therefore a function of the word sequence, which
makes gold annotation of the unlabelled pool recoverable by lookup.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from .conllu import Corpus, Sentence

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
           "br", "dr", "gl", "kr", "pl", "st", "tr", "sk"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ou"]


def _stem(rng: random.Random, syllables: int) -> str:
    return "".join(rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(syllables))


@dataclass
class Lexicon:
    det: list[str]
    adp: list[str]
    aux: list[str]
    adj: list[str]
    adv: list[str]
    nouns: list[str]
    relational: set[str]
    propn: list[str]
    verbs: dict[str, list[str]] = field(default_factory=dict)  # valency -> verbs

    @classmethod
    def generate(cls, seed: int, n_nouns=1500, n_verbs=300, n_adj=200, n_adv=60, n_propn=150):
        rng = random.Random(seed)
        det = ["the", "a", "this", "every", "some", "no"]
        adp = ["of", "in", "with", "from", "near", "under"]
        aux = ["will", "can", "must"]
        used: set[str] = set(det + adp + aux + ["and", "."])

        def fresh(suffix="", syllables=(1, 3), capital=False):
            while True:
                w = _stem(rng, rng.randint(*syllables)) + suffix
                if capital:
                    w = w.capitalize()
                if w not in used:
                    used.add(w)
                    return w

        # only some adjectives/adverbs carry a telltale suffix
        adj = [fresh(rng.choice(["ic", "ous", "al"]) if rng.random() < 0.5 else "")
               for _ in range(n_adj)]
        adv = [fresh("ly" if rng.random() < 0.7 else "") for _ in range(n_adv)]
        nouns = [fresh(rng.choice(["et", "on", "ar", "", "", ""])) for _ in range(n_nouns)]
        relational = set(rng.sample(nouns, n_nouns // 2))
        verbs: dict[str, list[str]] = {"intr": [], "tr": [], "ditr": []}
        for _ in range(n_verbs):
            kind = rng.choices(["intr", "tr", "ditr"], weights=[3, 5, 2])[0]
            verbs[kind].append(fresh(rng.choice(["ed", "es", "", ""])))
        return cls(
            det=det, adp=adp, aux=aux,
            adj=adj, adv=adv, nouns=nouns, relational=relational,
            propn=[fresh(syllables=(2, 3), capital=True) for _ in range(n_propn)],
            verbs=verbs,
        )


def _zipf_choice(rng: random.Random, items: list[str], s: float = 0.9) -> str:
    # rank-frequency sampling; weights cached per list length
    weights = _zipf_weights(len(items), s)
    return rng.choices(items, cum_weights=weights)[0]


_ZIPF_CACHE: dict = {}


def _zipf_weights(n: int, s: float):
    key = (n, s)
    if key not in _ZIPF_CACHE:
        total = 0.0
        cum = []
        for r in range(1, n + 1):
            total += 1.0 / r ** s
            cum.append(total)
        _ZIPF_CACHE[key] = cum
    return _ZIPF_CACHE[key]


class TemplateGrammar:
    """Samples annotated sentences from the template grammar."""

    def __init__(self, lexicon: Lexicon):
        self.lex = lexicon

    # builders append [form, upos, head_row, deprel] rows; head_row indexes
    # into the same list and stays None until the caller attaches the phrase

    def _np(self, rng, rows, allow_pp: bool) -> int:
        """Append a noun phrase; returns the row index of its head noun."""
        lex = self.lex
        if rng.random() < 0.15:
            rows.append([rng.choice(lex.propn), "PROPN", None, None])
            return len(rows) - 1
        det = len(rows)
        rows.append([rng.choice(lex.det), "DET", None, "det"])
        adjs = []
        for _ in range(rng.choices([0, 1, 2], weights=[5, 3, 1])[0]):
            adjs.append(len(rows))
            rows.append([_zipf_choice(rng, lex.adj), "ADJ", None, "amod"])
        noun = len(rows)
        rows.append([_zipf_choice(rng, lex.nouns), "NOUN", None, None])
        rows[det][2] = noun
        for a in adjs:
            rows[a][2] = noun
        if rng.random() < 0.15:
            # noun-noun compound: the first noun modifies the second
            modifier, noun = noun, noun + 1
            rows.append([_zipf_choice(rng, lex.nouns), "NOUN", None, None])
            rows[modifier][2:] = [noun, "compound"]
            rows[det][2] = noun
            for a in adjs:
                rows[a][2] = noun
        if allow_pp and rows[noun][0] in lex.relational and rng.random() < 0.5:
            self._pp(rng, rows, allow_pp=False)
        return noun

    def _pp(self, rng, rows, allow_pp: bool) -> int:
        case = len(rows)
        rows.append([rng.choice(self.lex.adp), "ADP", None, "case"])
        noun = self._np(rng, rows, allow_pp)
        rows[case][2] = noun
        rows[noun][3] = "pp"  # resolved by the attachment rule
        return noun

    def sample(self, rng: random.Random) -> Sentence:
        lex = self.lex
        rows: list[list] = []
        front_adv = None
        if rng.random() < 0.15:
            front_adv = len(rows)
            rows.append([_zipf_choice(rng, lex.adv), "ADV", None, "advmod"])
        subj = self._np(rng, rows, allow_pp=True)
        conj_subj = None
        if rng.random() < 0.1:
            cc = len(rows)
            rows.append(["and", "CCONJ", None, "cc"])
            conj_subj = self._np(rng, rows, allow_pp=False)
            rows[cc][2] = conj_subj
            rows[conj_subj][2] = subj
            rows[conj_subj][3] = "conj"
        aux = None
        if rng.random() < 0.25:
            aux = len(rows)
            rows.append([rng.choice(lex.aux), "AUX", None, "aux"])
        kind = rng.choices(["intr", "tr", "ditr"], weights=[3, 5, 2])[0]
        verb = len(rows)
        rows.append([_zipf_choice(rng, lex.verbs[kind]), "VERB", None, "root"])
        rows[subj][2], rows[subj][3] = verb, "nsubj"
        if front_adv is not None:
            rows[front_adv][2] = verb
        if aux is not None:
            rows[aux][2] = verb
        if kind == "ditr":
            iobj = self._np(rng, rows, allow_pp=False)
            rows[iobj][2], rows[iobj][3] = verb, "iobj"
        if kind in ("tr", "ditr"):
            obj = self._np(rng, rows, allow_pp=True)
            rows[obj][2], rows[obj][3] = verb, "obj"
        for _ in range(rng.choices([0, 1, 2, 3], weights=[2, 4, 3, 1])[0]):
            self._pp(rng, rows, allow_pp=True)
        if rng.random() < 0.25:
            rows.append([_zipf_choice(rng, lex.adv), "ADV", verb, "advmod"])
        rows.append([".", "PUNCT", verb, "punct"])
        self._resolve_pps(rows, verb)
        heads = [0 if r[2] is None and r[3] == "root" else r[2] + 1 for r in rows]
        return Sentence([r[0] for r in rows], upos=[r[1] for r in rows], heads=heads,
                        deprels=[r[3] for r in rows])

    def _resolve_pps(self, rows, verb: int) -> None:
        """Attach every PP noun by the lexical rule, scanning left to right."""
        last_noun = None
        for k, row in enumerate(rows):
            if row[3] == "pp":
                if last_noun is not None and rows[last_noun][0] in self.lex.relational:
                    row[2], row[3] = last_noun, "nmod"
                else:
                    row[2], row[3] = verb, "obl"
            if row[1] in ("NOUN", "PROPN") and row[3] != "compound":
                last_noun = k
            elif row[1] == "VERB":
                last_noun = None


@dataclass
class SyntheticTreebank:
    train: Corpus
    dev: Corpus
    pool_lines: list[str]
    gold: dict[str, Sentence]

    def gold_for(self, corpus: Corpus) -> Corpus:
        return Corpus([self.gold[s.key()] for s in corpus], origin="labelled")


def make_treebank(seed: int = 1, n_train: int = 300, n_dev: int = 500,
                  n_pool: int = 20000) -> SyntheticTreebank:
    """Train/dev treebanks plus a raw unlabelled pool from one grammar."""
    grammar = TemplateGrammar(Lexicon.generate(seed))
    rng = random.Random(seed * 7919 + 17)
    gold: dict[str, Sentence] = {}

    def draw(n):
        out = []
        for _ in range(n):
            s = grammar.sample(rng)
            known = gold.setdefault(s.key(), s)
            if known != s:
                raise AssertionError(f"grammar produced two trees for {s.key()!r}")
            out.append(s)
        return out

    train = Corpus(draw(n_train), origin="labelled")
    dev = Corpus(draw(n_dev), origin="labelled")
    pool_lines = [s.key() for s in draw(n_pool)]
    return SyntheticTreebank(train, dev, pool_lines, gold)
