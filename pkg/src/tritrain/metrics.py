"""Attachment scores, error breakdowns and McNemar significance."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import stats

from .conllu import Corpus

LENGTH_BINS = ("<=9", "10-19", "20-39", ">=40")
STAR_THRESHOLDS = (0.05, 0.01, 0.001, 0.0001, 0.00001)
MIN_LABEL_COUNT = 20


class AlignmentError(ValueError):
    pass


@dataclass
class EvalReport:
    las: float
    uas: float
    total_tokens: int
    correct_flags: np.ndarray = field(repr=False)
    sentence_lengths: list[int] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"las": self.las, "uas": self.uas, "total_tokens": self.total_tokens}


@dataclass
class BreakdownReport:
    total_tokens: int
    by_oov: dict[str, tuple[int, float]]
    by_length: dict[str, tuple[int, float]]
    by_deprel: dict[str, tuple[int, float]]
    rare_labels: list[str]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_tsv(self) -> str:
        lines = ["table\tgroup\ttokens\tlas\tnote"]
        for name, table in (("oov", self.by_oov), ("length", self.by_length),
                            ("deprel", self.by_deprel)):
            for group, (count, las) in table.items():
                note = "below-threshold" if name == "deprel" and group in self.rare_labels else ""
                lines.append(f"{name}\t{group}\t{count}\t{las:.2f}\t{note}")
        return "\n".join(lines) + "\n"


@dataclass
class SignificanceResult:
    b: int
    c: int
    p_value: float
    stars: int
    degenerate: bool = False

    @property
    def star_string(self) -> str:
        return "*" * self.stars


def _label(deprel: str, universal_only: bool) -> str:
    return deprel.split(":", 1)[0] if universal_only else deprel


def check_alignment(gold: Corpus, pred: Corpus) -> None:
    if len(gold) != len(pred):
        raise AlignmentError(f"sentence count differs: gold {len(gold)}, pred {len(pred)}")
    for idx, (g, p) in enumerate(zip(gold, pred)):
        if g.forms != p.forms:
            raise AlignmentError(f"sentence {idx}: tokens differ between gold and prediction")


def evaluate(gold: Corpus, pred: Corpus, universal_labels: bool = False) -> EvalReport:
    """Token-aligned LAS/UAS (percentages)."""
    check_alignment(gold, pred)
    flags: list[bool] = []
    heads_ok = 0
    for g, p in zip(gold, pred):
        for gh, gl, ph, pl in zip(g.heads, g.deprels, p.heads, p.deprels):
            if gh == ph:
                heads_ok += 1
                flags.append(_label(gl, universal_labels) == _label(pl, universal_labels))
            else:
                flags.append(False)
    total = len(flags)
    arr = np.array(flags, dtype=bool)
    if total == 0:
        return EvalReport(0.0, 0.0, 0, arr, [])
    return EvalReport(100.0 * int(arr.sum()) / total, 100.0 * heads_ok / total, total, arr,
                      [len(s) for s in gold])


def las(gold: Corpus, pred: Corpus) -> float:
    return evaluate(gold, pred).las


def length_bin(n: int) -> str:
    if n <= 9:
        return "<=9"
    if n <= 19:
        return "10-19"
    if n <= 39:
        return "20-39"
    return ">=40"


def breakdown(gold: Corpus, pred: Corpus, train_vocab: set[str],
              universal_labels: bool = False) -> BreakdownReport:
    """LAS by OOV status, sentence-length bin and gold dependency label."""
    report = evaluate(gold, pred, universal_labels)
    flags = report.correct_flags
    oov: dict[str, list[int]] = {"OOV": [0, 0], "IV": [0, 0]}
    by_len: dict[str, list[int]] = {b: [0, 0] for b in LENGTH_BINS}
    by_rel: dict[str, list[int]] = {}
    k = 0
    for sent in gold:
        bin_ = by_len[length_bin(len(sent))]
        for form, rel in zip(sent.forms, sent.deprels):
            ok = int(flags[k])
            k += 1
            cls = oov["IV" if form in train_vocab else "OOV"]
            cls[0] += 1
            cls[1] += ok
            bin_[0] += 1
            bin_[1] += ok
            slot = by_rel.setdefault(_label(rel, universal_labels), [0, 0])
            slot[0] += 1
            slot[1] += ok

    def table(d):
        return {key: (n, 100.0 * c / n if n else 0.0) for key, (n, c) in d.items()}

    return BreakdownReport(
        total_tokens=report.total_tokens,
        by_oov=table(oov),
        by_length=table(by_len),
        by_deprel=table(dict(sorted(by_rel.items()))),
        rare_labels=sorted(r for r, (n, _) in by_rel.items() if n < MIN_LABEL_COUNT),
    )


def column_accuracy(gold: Corpus, pred: Corpus,
                    columns=("lemma", "upos", "xpos", "feats")) -> dict[str, float]:
    check_alignment(gold, pred)
    out = {}
    for col in columns:
        hits = total = 0
        for g, p in zip(gold, pred):
            gv, pv = g.column(col), p.column(col)
            hits += sum(a == b for a, b in zip(gv, pv))
            total += len(gv)
        out[col] = 100.0 * hits / total if total else 0.0
    return out


def stars_for(p_value: float) -> int:
    return sum(1 for threshold in STAR_THRESHOLDS if p_value <= threshold)


def exact_binomial_p(b: int, c: int) -> float:
    """Two-sided exact McNemar p-value, computed in exact rationals."""
    n = b + c
    if n == 0:
        return 1.0
    tail = sum(math.comb(n, k) for k in range(min(b, c) + 1))
    p = Fraction(2 * tail, 2 ** n)
    return float(min(Fraction(1), p))


def chi2_p(b: int, c: int, correction: bool = True) -> float:
    if b + c == 0:
        return 1.0
    diff = abs(b - c) - (1 if correction else 0)
    stat = max(diff, 0) ** 2 / (b + c)
    return float(stats.chi2.sf(stat, df=1))


def discordant_counts(flags1: Sequence[bool], flags2: Sequence[bool]) -> tuple[int, int]:
    f1 = np.asarray(flags1, dtype=bool)
    f2 = np.asarray(flags2, dtype=bool)
    if f1.shape != f2.shape:
        raise ValueError(f"flag vectors differ in length: {f1.size} vs {f2.size}")
    return int(np.sum(f1 & ~f2)), int(np.sum(~f1 & f2))


def mcnemar(flags1: Sequence[bool], flags2: Sequence[bool], method: str = "exact") -> SignificanceResult:
    """McNemar test on paired correctness flags.

    ``method`` is "exact" (binomial) or "chi2" (with continuity correction).
    """
    b, c = discordant_counts(flags1, flags2)
    if method == "exact":
        p = exact_binomial_p(b, c)
    elif method == "chi2":
        p = chi2_p(b, c)
    else:
        raise ValueError(f"unknown McNemar method {method!r}")
    degenerate = b == 0 and c == 0
    return SignificanceResult(b, c, p, 0 if degenerate else stars_for(p), degenerate)


def sentence_flags(report: EvalReport) -> np.ndarray:
    """Per-sentence correctness: all tokens of the sentence correct."""
    out = []
    k = 0
    for n in report.sentence_lengths:
        out.append(bool(report.correct_flags[k:k + n].all()))
        k += n
    return np.array(out, dtype=bool)


def compare_systems(gold: Corpus, pred1: Corpus, pred2: Corpus, unit: str = "token",
                    method: str = "exact") -> SignificanceResult:
    """Significance of pred2 vs pred1, by token (default) or whole sentence."""
    r1, r2 = evaluate(gold, pred1), evaluate(gold, pred2)
    if unit == "token":
        return mcnemar(r1.correct_flags, r2.correct_flags, method)
    if unit == "sentence":
        return mcnemar(sentence_flags(r1), sentence_flags(r2), method)
    raise ValueError(f"unknown unit {unit!r}")


def write_report(path, **sections) -> None:
    """Structured report: a JSON object whose top-level keys name the sections."""
    def convert(obj):
        if hasattr(obj, "to_dict"):
            return obj.to_dict()
        if isinstance(obj, np.generic):
            return obj.item()
        raise TypeError(type(obj))

    with open(path, "w", encoding="utf-8") as f:
        json.dump(sections, f, indent=2, sort_keys=True, default=convert)
        f.write("\n")
