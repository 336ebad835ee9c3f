"""Averaged-perceptron tagger and greedy arc-standard parser."""
from __future__ import annotations

import random
from collections import Counter, defaultdict

import numpy as np
from sklearn.base import BaseEstimator

from ..conllu import Corpus, Sentence, is_projective, tree_errors
from .transition import LEFT, RIGHT, ROOT, SHIFT, NonProjectiveError, State, oracle_step

PREDICTABLE_COLUMNS = ("lemma", "upos", "xpos", "feats", "head", "deprel")


class AveragedPerceptron:
    """Multi-class perceptron over string features with weight averaging.

    Features are mapped to rows of a dense weight matrix in first-seen order,
    which keeps training deterministic without relying on ``hash()``.
    """

    def __init__(self, n_classes: int):
        self.n_classes = n_classes
        self.index: dict[str, int] = {}
        self.weights = np.zeros((1024, n_classes))
        self._acc = np.zeros((1024, n_classes))
        self.instances = 1

    def rows(self, features, grow: bool = False) -> np.ndarray:
        index = self.index
        if grow:
            out = []
            for f in features:
                r = index.get(f)
                if r is None:
                    r = index[f] = len(index)
                out.append(r)
            if len(index) > self.weights.shape[0]:
                extra = max(len(index), 2 * self.weights.shape[0]) - self.weights.shape[0]
                pad = np.zeros((extra, self.n_classes))
                self.weights = np.vstack([self.weights, pad])
                self._acc = np.vstack([self._acc, pad])
            return np.array(out, dtype=np.intp)
        return np.array([r for r in map(index.get, features) if r is not None], dtype=np.intp)

    def scores(self, rows: np.ndarray) -> np.ndarray:
        return self.weights[rows].sum(axis=0)

    def update(self, rows: np.ndarray, truth: int, guess: int) -> None:
        if truth == guess:
            return
        c = self.instances
        self.weights[rows, truth] += 1.0
        self.weights[rows, guess] -= 1.0
        self._acc[rows, truth] += c
        self._acc[rows, guess] -= c

    def finalize(self) -> None:
        n = len(self.index)
        self.weights = self.weights[:n] - self._acc[:n] / self.instances
        self._acc = np.zeros((0, self.n_classes))


def _suffix(w: str, k: int) -> str:
    return w[-k:]


def _shape(w: str) -> str:
    out = []
    for ch in w[:6]:
        if ch.isupper():
            kind = "X"
        elif ch.islower():
            kind = "x"
        elif ch.isdigit():
            kind = "d"
        else:
            kind = ch
        if not out or out[-1] != kind:
            out.append(kind)
    return "".join(out)


class SequenceTagger:
    """Greedy left-to-right tagger for one token-level column."""

    def __init__(self, column: str = "upos"):
        self.column = column
        self.classes: list[str] = []
        self.model: AveragedPerceptron | None = None
        self.tagdict: dict[str, str] = {}

    @staticmethod
    def features(forms, i, prev, prev2) -> list[str]:
        w = forms[i]
        low = w.lower()
        pw = forms[i - 1].lower() if i > 0 else "<s>"
        nw = forms[i + 1].lower() if i + 1 < len(forms) else "</s>"
        return [
            "b",
            "w=" + low,
            "s1=" + low[-1:],
            "s2=" + low[-2:],
            "s3=" + low[-3:],
            "p1=" + low[:1],
            "sh=" + _shape(w),
            "t1=" + prev,
            "t2=" + prev2,
            "t12=" + prev + "|" + prev2,
            "t1w=" + prev + "|" + low,
            "pw=" + pw,
            "nw=" + nw,
            "ps3=" + pw[-3:],
            "ns3=" + nw[-3:],
        ]

    def fit(self, sentences: list[Sentence], epochs: int, rng: random.Random) -> None:
        counts: dict[str, Counter] = defaultdict(Counter)
        for s in sentences:
            for w, t in zip(s.forms, s.column(self.column)):
                counts[w][t] += 1
        self.classes = sorted({t for c in counts.values() for t in c})
        # unambiguous frequent words are tagged by lookup
        self.tagdict = {}
        for w, c in counts.items():
            tag, freq = c.most_common(1)[0]
            total = sum(c.values())
            if total >= 20 and freq / total >= 0.97:
                self.tagdict[w] = tag
        cls_index = {t: k for k, t in enumerate(self.classes)}
        self.model = model = AveragedPerceptron(len(self.classes))
        order = list(range(len(sentences)))
        for _ in range(epochs):
            rng.shuffle(order)
            for idx in order:
                s = sentences[idx]
                gold = s.column(self.column)
                prev, prev2 = "<s>", "<s2>"
                for i, w in enumerate(s.forms):
                    tag = self.tagdict.get(w)
                    if tag is None:
                        rows = model.rows(self.features(s.forms, i, prev, prev2), grow=True)
                        guess = int(np.argmax(model.scores(rows)))
                        model.update(rows, cls_index[gold[i]], guess)
                        model.instances += 1
                        tag = self.classes[guess]
                    prev2, prev = prev, tag
        model.finalize()

    def tag(self, forms) -> list[str]:
        model = self.model
        out = []
        prev, prev2 = "<s>", "<s2>"
        for i, w in enumerate(forms):
            tag = self.tagdict.get(w)
            if tag is None:
                rows = model.rows(self.features(forms, i, prev, prev2))
                tag = self.classes[int(np.argmax(model.scores(rows)))]
            out.append(tag)
            prev2, prev = prev, tag
        return out


class LookupLemmatizer:
    """Most frequent lemma per form, falling back to the form itself."""

    def fit(self, sentences: list[Sentence]) -> None:
        counts: dict[str, Counter] = defaultdict(Counter)
        for s in sentences:
            for w, lem in zip(s.forms, s.lemmas):
                counts[w][lem] += 1
        self.table = {w: c.most_common(1)[0][0] for w, c in sorted(counts.items())}

    def lemmatize(self, forms) -> list[str]:
        return [self.table.get(w, w) for w in forms]


def _distance(a: int, b: int) -> str:
    d = abs(a - b)
    return str(d) if d < 5 else ("5-9" if d < 10 else "10+")


class TransitionParser:
    """Arc-standard parser scoring (transition, label) pairs jointly."""

    def __init__(self, root_label: str = "root"):
        self.root_label = root_label
        self.moves: list[tuple[str, str]] = []
        self.model: AveragedPerceptron | None = None

    @staticmethod
    def features(state: State, forms, tags) -> list[str]:
        stack = state.stack
        n = state.n

        def word(i):
            return forms[i - 1].lower() if i > 0 else "<root>"

        def pos(i):
            return tags[i - 1] if i > 0 else "<root>"

        s0 = stack[-1] if len(stack) >= 1 else -1
        s1 = stack[-2] if len(stack) >= 2 else -1
        s2 = stack[-3] if len(stack) >= 3 else -1
        b0 = state.b if state.b <= n else -1
        b1 = state.b + 1 if state.b + 1 <= n else -1
        b2 = state.b + 2 if state.b + 2 <= n else -1
        w = {k: (word(v) if v >= 0 else "<none>") for k, v in
             (("s0", s0), ("s1", s1), ("b0", b0), ("b1", b1))}
        p = {k: (pos(v) if v >= 0 else "<none>") for k, v in
             (("s0", s0), ("s1", s1), ("s2", s2), ("b0", b0), ("b1", b1), ("b2", b2))}

        def child(node, side, attr):
            if node < 1:
                return "<none>"
            kids = state.lefts[node] if side == "l" else state.rights[node]
            if not kids:
                return "<none>"
            k = min(kids) if side == "l" else max(kids)
            return pos(k) if attr == "p" else state.deprels[k]

        s0lp, s0ll = child(s0, "l", "p"), child(s0, "l", "l")
        s0rp, s0rl = child(s0, "r", "p"), child(s0, "r", "l")
        s1lp, s1ll = child(s1, "l", "p"), child(s1, "l", "l")
        s1rp, s1rl = child(s1, "r", "p"), child(s1, "r", "l")
        dist = _distance(s0, s1) if s0 > 0 and s1 >= 0 else "<none>"
        s0val = f"{len(state.lefts[s0])},{len(state.rights[s0])}" if s0 > 0 else "<none>"
        s1val = f"{len(state.lefts[s1])},{len(state.rights[s1])}" if s1 > 0 else "<none>"
        return [
            "bias",
            "s0w=" + w["s0"], "s0p=" + p["s0"], "s0wp=" + w["s0"] + "|" + p["s0"],
            "s1w=" + w["s1"], "s1p=" + p["s1"], "s1wp=" + w["s1"] + "|" + p["s1"],
            "s2p=" + p["s2"],
            "b0w=" + w["b0"], "b0p=" + p["b0"], "b0wp=" + w["b0"] + "|" + p["b0"],
            "b1w=" + w["b1"], "b1p=" + p["b1"], "b2p=" + p["b2"],
            "s0s3=" + w["s0"][-3:], "s1s3=" + w["s1"][-3:], "b0s3=" + w["b0"][-3:],
            "s0p,s1p=" + p["s0"] + "|" + p["s1"],
            "s0w,s1w=" + w["s0"] + "|" + w["s1"],
            "s0w,s1p=" + w["s0"] + "|" + p["s1"],
            "s0p,s1w=" + p["s0"] + "|" + w["s1"],
            "s0p,b0p=" + p["s0"] + "|" + p["b0"],
            "s0w,b0w=" + w["s0"] + "|" + w["b0"],
            "s1p,s0p,b0p=" + p["s1"] + "|" + p["s0"] + "|" + p["b0"],
            "s2p,s1p,s0p=" + p["s2"] + "|" + p["s1"] + "|" + p["s0"],
            "s0p,b0p,b1p=" + p["s0"] + "|" + p["b0"] + "|" + p["b1"],
            "s0lp=" + s0lp, "s0ll=" + s0ll, "s0rp=" + s0rp, "s0rl=" + s0rl,
            "s1lp=" + s1lp, "s1ll=" + s1ll, "s1rp=" + s1rp, "s1rl=" + s1rl,
            "s1p,s0p,s0ll=" + p["s1"] + "|" + p["s0"] + "|" + s0ll,
            "s1p,s0p,s1rl=" + p["s1"] + "|" + p["s0"] + "|" + s1rl,
            "s1p,s0p,s0rl=" + p["s1"] + "|" + p["s0"] + "|" + s0rl,
            "d=" + dist, "s0p,s1p,d=" + p["s0"] + "|" + p["s1"] + "|" + dist,
            "s0w,d=" + w["s0"] + "|" + dist,
            "s0v=" + p["s0"] + "|" + s0val, "s1v=" + p["s1"] + "|" + s1val,
        ]

    def _valid_mask(self, state: State) -> np.ndarray:
        mask = np.zeros(len(self.moves), dtype=bool)
        mask[self._move_slices["SHIFT"]] = state.can_shift()
        mask[self._move_slices["LEFT"]] = state.can_left()
        mask[self._move_slices["RIGHT"]] = state.can_right()
        mask[self._move_slices["ROOT"]] = state.can_root()
        return mask

    def _build_moves(self, labels) -> None:
        labels = sorted(set(labels))
        self.moves = ([(SHIFT, ""), (ROOT, self.root_label)]
                      + [(LEFT, lab) for lab in labels] + [(RIGHT, lab) for lab in labels])
        nl = len(labels)
        self._move_slices = {
            "SHIFT": slice(0, 1),
            "ROOT": slice(1, 2),
            "LEFT": slice(2, 2 + nl),
            "RIGHT": slice(2 + nl, 2 + 2 * nl),
        }
        self._move_index = {m: k for k, m in enumerate(self.moves)}

    def fit(self, sentences: list[Sentence], epochs: int, rng: random.Random) -> None:
        labels = {rel for s in sentences for rel, h in zip(s.deprels, s.heads) if h != 0}
        self._build_moves(labels)
        self.model = model = AveragedPerceptron(len(self.moves))
        order = list(range(len(sentences)))
        for _ in range(epochs):
            rng.shuffle(order)
            for idx in order:
                s = sentences[idx]
                heads, rels = s.heads, s.deprels
                pending = [0] * (len(heads) + 1)
                for h in heads:
                    pending[h] += 1
                state = State(len(heads))
                while not state.terminal:
                    move, label = oracle_step(state, heads, rels, pending, self.root_label)
                    if move == ROOT:
                        label = self.root_label
                    truth = self._move_index[(move, label)]
                    rows = model.rows(self.features(state, s.forms, s.upos), grow=True)
                    scores = model.scores(rows)
                    scores[~self._valid_mask(state)] = -np.inf
                    guess = int(np.argmax(scores))
                    model.update(rows, truth, guess)
                    model.instances += 1
                    if move != SHIFT:
                        dep = state.stack[-2] if move == LEFT else state.stack[-1]
                        pending[heads[dep - 1]] -= 1
                    state.apply(move, label)
        model.finalize()

    def parse(self, forms, tags, beam: int = 1) -> tuple[list[int], list[str]]:
        if beam > 1:
            return self._parse_beam(forms, tags, beam)
        model = self.model
        state = State(len(forms))
        while not state.terminal:
            scores = model.scores(model.rows(self.features(state, forms, tags)))
            scores[~self._valid_mask(state)] = -np.inf
            move, label = self.moves[int(np.argmax(scores))]
            state.apply(move, label)
        return state.heads[1:], state.deprels[1:]

    def _parse_beam(self, forms, tags, beam: int):
        model = self.model
        agenda = [(0.0, State(len(forms)))]
        while not all(st.terminal for _, st in agenda):
            candidates = []
            for k, (total, st) in enumerate(agenda):
                if st.terminal:
                    candidates.append((total, k, -1, st))
                    continue
                scores = model.scores(model.rows(self.features(st, forms, tags)))
                valid = self._valid_mask(st)
                for m in np.flatnonzero(valid):
                    candidates.append((total + float(scores[m]), k, int(m), st))
            # stable ordering: score desc, then agenda position, then move index
            candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
            agenda = []
            for total, _, m, st in candidates[:beam]:
                if m >= 0:
                    st = st.copy()
                    st.apply(*self.moves[m])
                agenda.append((total, st))
        best = agenda[0][1]
        return best.heads[1:], best.deprels[1:]


class PerceptronParser(BaseEstimator):
    """Built-in learner: averaged-perceptron tagger plus arc-standard parser.

    Parameters
    ----------
    epochs : int
        Passes over the training data for every component.
    beam : int
        Beam width at prediction time; 1 is greedy decoding.
    predicted_columns : tuple of str
        Columns written by :meth:`predict`; ``head`` and ``deprel`` are always
        written, everything else not listed becomes ``"_"``.
    seed : int
        Seeds the per-epoch shuffling of training sentences.
    root_label : str
        Label of the arc from the artificial root.
    """

    def __init__(self, epochs=10, beam=1, predicted_columns=("upos", "head", "deprel"),
                 seed=0, root_label="root"):
        self.epochs = epochs
        self.beam = beam
        self.predicted_columns = predicted_columns
        self.seed = seed
        self.root_label = root_label

    def _check_params(self):
        cols = set(self.predicted_columns)
        unknown = cols - set(PREDICTABLE_COLUMNS)
        if unknown:
            raise ValueError(f"cannot predict columns {sorted(unknown)}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.beam < 1:
            raise ValueError("beam must be >= 1")

    def fit(self, corpus: Corpus, y=None):
        self._check_params()
        sentences = list(corpus)
        if not sentences:
            raise ValueError("cannot train on an empty corpus")
        for k, s in enumerate(sentences):
            err = tree_errors(s.heads)
            if err:
                raise ValueError(f"training sentence {k} is not a valid tree: {err}")
        rng = random.Random(self.seed)
        self.tagger_ = SequenceTagger("upos")
        self.tagger_.fit(sentences, self.epochs, rng)
        self.extra_taggers_ = {}
        for col in ("xpos", "feats"):
            if col in self.predicted_columns:
                tagger = SequenceTagger(col)
                tagger.fit(sentences, self.epochs, rng)
                self.extra_taggers_[col] = tagger
        self.lemmatizer_ = None
        if "lemma" in self.predicted_columns:
            self.lemmatizer_ = LookupLemmatizer()
            self.lemmatizer_.fit(sentences)
        projective = [s for s in sentences if is_projective(s.heads)]
        self.n_nonprojective_ = len(sentences) - len(projective)
        if not projective:
            raise NonProjectiveError("no projective sentences to train the parser on")
        self.parser_ = TransitionParser(self.root_label)
        self.parser_.fit(projective, self.epochs, rng)
        self.training_report_ = {
            "sentences": len(sentences),
            "tokens": sum(len(s) for s in sentences),
            "nonprojective_excluded": self.n_nonprojective_,
            "features": len(self.parser_.model.index),
        }
        return self

    def predict_sentence(self, sent: Sentence) -> Sentence:
        forms = sent.forms
        tags = self.tagger_.tag(forms)
        heads, rels = self.parser_.parse(forms, tags, self.beam)
        cols = {"head": heads, "deprel": rels}
        cols["upos"] = tags if "upos" in self.predicted_columns else None
        for col in ("xpos", "feats"):
            tagger = self.extra_taggers_.get(col)
            cols[col] = tagger.tag(forms) if tagger else None
        cols["lemma"] = self.lemmatizer_.lemmatize(forms) if self.lemmatizer_ else None
        return Sentence(forms, lemmas=cols["lemma"], upos=cols["upos"], xpos=cols["xpos"],
                        feats=cols["feats"], heads=heads, deprels=rels,
                        comments=sent.comments, extra=sent.extra)

    def predict(self, corpus: Corpus) -> Corpus:
        if not hasattr(self, "parser_"):
            raise RuntimeError("PerceptronParser is not fitted")
        return Corpus([self.predict_sentence(s) for s in corpus], origin="predicted")

    def score(self, corpus: Corpus, y=None) -> float:
        from ..metrics import evaluate

        return evaluate(corpus, self.predict(corpus.strip())).las
