"""CoNLL-U data model, reading/writing, and unlabelled-pool ingestion.

Sentences are stored column-wise (one tuple per CoNLL-U column) which keeps
agreement checks cheap and lets pools of millions of unannotated sentences
share their placeholder columns.
"""
from __future__ import annotations

import io
import random
from dataclasses import dataclass, field
from functools import lru_cache
from typing import IO, Iterable, Iterator, NamedTuple, Sequence

COLUMNS = ("id", "form", "lemma", "upos", "xpos", "feats", "head", "deprel", "deps", "misc")

# Sentence attribute holding each annotation column.
COLUMN_ATTRS = {
    "form": "forms",
    "lemma": "lemmas",
    "upos": "upos",
    "xpos": "xpos",
    "feats": "feats",
    "head": "heads",
    "deprel": "deprels",
    "deps": "deps",
    "misc": "misc",
}

ORIGINS = ("labelled", "unlabelled", "predicted", "mixed")


class ConlluError(ValueError):
    """Malformed CoNLL-U input; carries the 1-based line number."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class TreeValidationError(ConlluError):
    """Heads out of range or otherwise not forming a valid dependency structure."""


class Token(NamedTuple):
    id: int
    form: str
    lemma: str = "_"
    upos: str = "_"
    xpos: str = "_"
    feats: str = "_"
    head: int = 0
    deprel: str = "_"
    deps: str = "_"
    misc: str = "_"


@lru_cache(maxsize=512)
def _placeholder(n: int, value) -> tuple:
    return (value,) * n


class Sentence:
    """One sentence; annotation columns are parallel tuples.

    ``extra`` holds multiword-token and empty-node lines verbatim as
    ``(n_plain_tokens_before, raw_line)`` so they survive a round trip while
    staying invisible to lengths, agreement and evaluation.
    """

    __slots__ = ("forms", "lemmas", "upos", "xpos", "feats", "heads", "deprels",
                 "deps", "misc", "comments", "extra")

    def __init__(self, forms, lemmas=None, upos=None, xpos=None, feats=None, heads=None,
                 deprels=None, deps=None, misc=None, comments=(), extra=()):
        n = len(forms)
        self.forms = tuple(forms)
        self.lemmas = tuple(lemmas) if lemmas is not None else _placeholder(n, "_")
        self.upos = tuple(upos) if upos is not None else _placeholder(n, "_")
        self.xpos = tuple(xpos) if xpos is not None else _placeholder(n, "_")
        self.feats = tuple(feats) if feats is not None else _placeholder(n, "_")
        self.heads = tuple(heads) if heads is not None else _placeholder(n, 0)
        self.deprels = tuple(deprels) if deprels is not None else _placeholder(n, "_")
        self.deps = tuple(deps) if deps is not None else _placeholder(n, "_")
        self.misc = tuple(misc) if misc is not None else _placeholder(n, "_")
        self.comments = tuple(comments)
        self.extra = tuple(extra)
        for name in ("lemmas", "upos", "xpos", "feats", "heads", "deprels", "deps", "misc"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name!r} has {len(getattr(self, name))} values, expected {n}")

    @classmethod
    def from_tokens(cls, tokens: Sequence[Token], comments=(), extra=()) -> "Sentence":
        cols = list(zip(*tokens)) if tokens else [()] * 10
        return cls(cols[1], cols[2], cols[3], cols[4], cols[5], cols[6], cols[7], cols[8],
                   cols[9], comments=comments, extra=extra)

    def __len__(self) -> int:
        return len(self.forms)

    @property
    def token_count(self) -> int:
        return len(self.forms)

    @property
    def tokens(self) -> list[Token]:
        return [Token(i + 1, *row) for i, row in enumerate(zip(
            self.forms, self.lemmas, self.upos, self.xpos, self.feats, self.heads,
            self.deprels, self.deps, self.misc))]

    def column(self, name: str) -> tuple:
        return getattr(self, COLUMN_ATTRS[name])

    def replace(self, **columns) -> "Sentence":
        """Copy with some columns swapped, keyed by CoNLL-U column name."""
        kwargs = {attr: getattr(self, attr) for attr in COLUMN_ATTRS.values()}
        for name, values in columns.items():
            kwargs[COLUMN_ATTRS[name]] = values
        return Sentence(comments=self.comments, extra=self.extra, **kwargs)

    def key(self) -> str:
        """Duplicate-detection key: forms joined by single spaces."""
        return " ".join(self.forms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Sentence):
            return NotImplemented
        return all(getattr(self, s) == getattr(other, s) for s in self.__slots__)

    def __hash__(self):
        return hash((self.forms, self.heads, self.deprels))

    def __repr__(self) -> str:
        return f"Sentence({self.key()!r}, heads={self.heads})"

    # tree checks -----------------------------------------------------------

    def check_heads(self) -> None:
        n = len(self.forms)
        for i, h in enumerate(self.heads, start=1):
            if not 0 <= h <= n:
                raise TreeValidationError(f"token {i}: head {h} out of range [0, {n}]")
            if h == i:
                raise TreeValidationError(f"token {i}: head points to itself")

    def is_tree(self) -> bool:
        """True iff exactly one root and every token reaches it."""
        return tree_errors(self.heads) is None

    def is_projective(self) -> bool:
        return is_projective(self.heads)


def tree_errors(heads: Sequence[int]) -> str | None:
    """Describe why ``heads`` is not a single-rooted tree, or None if it is."""
    n = len(heads)
    if n == 0:
        return "empty sentence"
    if any(not 0 <= h <= n for h in heads):
        return "head out of range"
    roots = sum(1 for h in heads if h == 0)
    if roots != 1:
        return f"{roots} roots"
    state = [0] * (n + 1)  # 0 unvisited, 1 on path, 2 reaches root
    state[0] = 2
    for start in range(1, n + 1):
        path = []
        node = start
        while state[node] == 0:
            state[node] = 1
            path.append(node)
            node = heads[node - 1]
        if state[node] == 1:
            return f"cycle through token {node}"
        for p in path:
            state[p] = 2
    return None


def is_projective(heads: Sequence[int]) -> bool:
    """No two arcs cross (root arc included, root at position 0)."""
    arcs = [(min(h, d), max(h, d)) for d, h in enumerate(heads, start=1)]
    arcs.sort()
    for a, (l1, r1) in enumerate(arcs):
        for l2, r2 in arcs[a + 1:]:
            if l2 >= r1:
                break
            if l1 < l2 < r1 < r2:
                return False
    return True


@dataclass
class Corpus:
    sentences: list[Sentence] = field(default_factory=list)
    origin: str = "labelled"

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[Sentence]:
        return iter(self.sentences)

    def __getitem__(self, idx):
        return self.sentences[idx]

    @property
    def token_total(self) -> int:
        return sum(len(s.forms) for s in self.sentences)

    def strip(self) -> "Corpus":
        """Forms only, every other column reset to placeholders."""
        return Corpus([Sentence(s.forms, comments=s.comments, extra=s.extra)
                       for s in self.sentences], origin="unlabelled")


@dataclass
class PoolFilterSpec:
    min_len: int = 5
    max_len: int = 40
    max_token_bytes: int = 200
    dedup: bool = True
    shuffle_seed: int = 0
    fraction: float = 1.0

    def __post_init__(self):
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError(f"need 1 <= min_len <= max_len, got {self.min_len}, {self.max_len}")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError(f"fraction must be in (0, 1], got {self.fraction}")


# reading -------------------------------------------------------------------

def _parse_token_line(fields: list[str], line_no: int, expected_id: int):
    try:
        tid = int(fields[0])
    except ValueError:
        raise ConlluError(f"bad token id {fields[0]!r}", line_no) from None
    if tid != expected_id:
        raise ConlluError(f"token id {tid} out of sequence, expected {expected_id}", line_no)
    try:
        head = int(fields[6])
    except ValueError:
        raise ConlluError(f"non-numeric head {fields[6]!r}", line_no) from None
    if not fields[1]:
        raise ConlluError("empty form", line_no)
    return head


def _finish(rows, comments, extra, first_line) -> Sentence:
    cols = list(zip(*rows)) if rows else [()] * 9
    sent = Sentence(*cols, comments=comments, extra=extra)
    if not rows:
        raise ConlluError("sentence without tokens", first_line)
    n = len(rows)
    for i, h in enumerate(sent.heads, start=1):
        if not 0 <= h <= n:
            raise TreeValidationError(f"token {i}: head {h} out of range [0, {n}]", first_line)
        if h == i:
            raise TreeValidationError(f"token {i}: head points to itself", first_line)
    return sent


def iter_conllu(lines: Iterable[str]) -> Iterator[Sentence]:
    """Yield sentences from an iterable of text lines."""
    rows: list = []
    comments: list[str] = []
    extra: list = []
    first = None
    for line_no, line in enumerate(lines, start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            if rows or comments or extra:
                yield _finish(rows, comments, extra, first)
                rows, comments, extra, first = [], [], [], None
            continue
        if first is None:
            first = line_no
        if line.startswith("#"):
            if rows:
                raise ConlluError("comment inside sentence", line_no)
            comments.append(line)
            continue
        fields = line.split("\t")
        if len(fields) != 10:
            raise ConlluError(f"expected 10 tab-separated columns, found {len(fields)}", line_no)
        if "-" in fields[0] or "." in fields[0]:
            extra.append((len(rows), line))
            continue
        head = _parse_token_line(fields, line_no, len(rows) + 1)
        rows.append((fields[1], fields[2], fields[3], fields[4], fields[5], head,
                     fields[7], fields[8], fields[9]))
    if rows or comments or extra:
        yield _finish(rows, comments, extra, first)


def parse_conllu(data: bytes | str, origin: str = "labelled") -> Corpus:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return Corpus(list(iter_conllu(io.StringIO(data))), origin=origin)


def read_conllu(path, origin: str = "labelled") -> Corpus:
    with open(path, encoding="utf-8") as f:
        return Corpus(list(iter_conllu(f)), origin=origin)


# writing -------------------------------------------------------------------

def _cell(value) -> str:
    value = str(value)
    return value if value else "_"


def format_sentence(sent: Sentence) -> str:
    out = list(sent.comments)
    extra = list(sent.extra)
    e = 0
    for i, row in enumerate(zip(sent.forms, sent.lemmas, sent.upos, sent.xpos, sent.feats,
                                sent.heads, sent.deprels, sent.deps, sent.misc)):
        while e < len(extra) and extra[e][0] <= i:
            out.append(extra[e][1])
            e += 1
        out.append(f"{i + 1}\t" + "\t".join(_cell(v) for v in row))
    out.extend(line for _, line in extra[e:])
    return "\n".join(out) + "\n\n"


def write_conllu(corpus: Iterable[Sentence], stream: IO[str] | None = None) -> bytes | None:
    """Serialise sentences; returns UTF-8 bytes unless a text stream is given."""
    if stream is not None:
        for sent in corpus:
            stream.write(format_sentence(sent))
        return None
    return "".join(format_sentence(s) for s in corpus).encode("utf-8")


def save_conllu(corpus: Iterable[Sentence], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        write_conllu(corpus, f)


# unlabelled data -----------------------------------------------------------

def ingest_unlabelled(lines: Iterable[str], spec: PoolFilterSpec | None = None) -> Corpus:
    """Filter, de-duplicate and shuffle pre-tokenised text (one sentence per line).

    Only accepted sentences are retained, so memory grows with the pool rather
    than with the input.
    """
    spec = spec or PoolFilterSpec()
    rng = random.Random(spec.shuffle_seed)
    min_len, max_len, max_bytes = spec.min_len, spec.max_len, spec.max_token_bytes
    seen: set[str] = set()
    kept: list[tuple[str, ...]] = []
    subsample = spec.fraction < 1.0
    for line in lines:
        forms = line.split()
        n = len(forms)
        if n < min_len or n > max_len:
            continue
        # a line of at most max_bytes/4 characters cannot hold an oversized token
        if len(line) * 4 > max_bytes and any(len(f.encode("utf-8")) > max_bytes for f in forms):
            continue
        if spec.dedup:
            key = " ".join(forms)
            if key in seen:
                continue
            seen.add(key)
        if subsample and rng.random() >= spec.fraction:
            continue
        kept.append(tuple(forms))
    seen.clear()
    rng.shuffle(kept)
    return Corpus([Sentence(f) for f in kept], origin="unlabelled")


def sample_corpus(corpus: Corpus, budget: int, seed: int,
                  reject_duplicates: bool = False) -> Corpus:
    """Greedy whole-sentence sample under a token budget, in seeded random order.

    Drawing stops before the first sentence that would overflow the budget.
    """
    if budget <= 0:
        raise ValueError(f"budget must be positive, got {budget}")
    order = list(range(len(corpus.sentences)))
    random.Random(seed).shuffle(order)
    picked = []
    total = 0
    seen: set[str] = set()
    for idx in order:
        sent = corpus.sentences[idx]
        if reject_duplicates:
            key = sent.key()
            if key in seen:
                continue
            seen.add(key)
        if total + len(sent.forms) > budget:
            break
        picked.append(sent)
        total += len(sent.forms)
    return Corpus(picked, origin=corpus.origin)
