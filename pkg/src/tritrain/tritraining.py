"""Tri-training orchestration.

Three learners start from differently sampled copies of the labelled data.
Each iteration they parse a fresh sample of unlabelled text; a sentence on
which two learners agree in every compared column becomes training data for
the third (a random one when all three agree). New data is capped at ``A``
tokens per learner, older iterations' data is reused with exponentially
decaying caps ``A * d**age``, and all learners are retrained unconditionally.
The final model is the iteration whose ensemble scores best on dev.
"""
from __future__ import annotations

import json
import logging
import math
import os
import random
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

from joblib import Parallel, delayed
from sklearn.base import BaseEstimator

from . import learner as learner_mod
from .conllu import Corpus, Sentence, sample_corpus, save_conllu, tree_errors
from .ensemble import CombinerConfig, averaged_ensemble_las, combine_corpora
from .learner import LearnerSpec, ModelHandle, SeedCoordinates, derive_seed, params_id, stream_seed
from .learner.seeds import fnv1a_64
from .metrics import evaluate

logger = logging.getLogger(__name__)

SEED_MODES = ("with_replacement", "full_copy", "two_and_a_half")
AGREEMENT_COLUMNS = ("lemma", "upos", "xpos", "feats", "head", "deprel")
PAIRS = ((0, 1), (0, 2), (1, 2))


@dataclass
class TriConfig:
    A: int = 40_000
    T: int = 12
    d: float = 1.0
    oversample: bool = False
    seed_mode: str = "two_and_a_half"
    agreement_columns: tuple | None = None
    master_seed: int = 0
    unlabelled_multiplier: int = 16
    learner: LearnerSpec = field(default_factory=LearnerSpec)
    is_repeat: bool = False
    combiner_repeats: int = 21

    def __post_init__(self):
        if isinstance(self.learner, dict):
            self.learner = LearnerSpec(**self.learner)
        if self.agreement_columns is None:
            self.agreement_columns = tuple(self.learner.predicted_columns)
        self.agreement_columns = tuple(self.agreement_columns)
        if self.A <= 0:
            raise ValueError("A must be positive")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not 0.0 <= self.d <= 1.0:
            raise ValueError("d must lie in [0, 1]")
        if self.seed_mode not in SEED_MODES:
            raise ValueError(f"seed_mode must be one of {SEED_MODES}")
        if not {"head", "deprel"} <= set(self.agreement_columns):
            raise ValueError("agreement_columns must include head and deprel")
        unknown = set(self.agreement_columns) - set(AGREEMENT_COLUMNS)
        if unknown:
            raise ValueError(f"unknown agreement columns {sorted(unknown)}")
        if self.unlabelled_multiplier <= 0:
            raise ValueError("unlabelled_multiplier must be positive")
        if self.combiner_repeats < 1:
            raise ValueError("combiner_repeats must be >= 1")

    @property
    def params_id(self) -> str:
        return params_id(self.A, self.T, self.d, self.oversample, self.seed_mode)

    def coords(self, learner_index: int, iteration: int) -> SeedCoordinates:
        return SeedCoordinates(self.master_seed, self.params_id, self.is_repeat,
                               learner_index, iteration)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["learner"] = self.learner.to_dict()
        d["agreement_columns"] = list(self.agreement_columns)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "TriConfig":
        data = dict(data)
        if "learner" in data and isinstance(data["learner"], dict):
            data["learner"] = LearnerSpec(**data["learner"])
        if data.get("agreement_columns") is not None:
            data["agreement_columns"] = tuple(data["agreement_columns"])
        return cls(**data)


# presets -------------------------------------------------------------------

def preset_grid(variant: str = "default") -> dict[str, dict]:
    """The twelve-run comparison grid, keyed by preset name.

    ``variant="mbert"`` swaps the d=1 runs for d=0.71.
    """
    full = {"default": 1.0, "mbert": 0.71}[variant]
    dtag = "1" if full == 1.0 else "0.71"
    base = [
        (f"A40-T12-d{dtag}", dict(A=40_000, T=12, d=full), False),
        (f"A80-T8-d{dtag}", dict(A=80_000, T=8, d=full), False),
        ("A80-T8-d0.5", dict(A=80_000, T=8, d=0.5), False),
        ("A80-T8-d0.5-repeat", dict(A=80_000, T=8, d=0.5), True),
        ("A160-T4-d0.5", dict(A=160_000, T=4, d=0.5), False),
        ("A160-T4-d0.5-repeat", dict(A=160_000, T=4, d=0.5), True),
    ]
    grid = {}
    for name, params, repeat in base:
        for o in (False, True):
            key = name.replace("-repeat", "-o-repeat") if o and repeat else (
                name + "-o" if o else name)
            grid[key] = dict(params, oversample=o, is_repeat=repeat)
    return grid


PRESETS: dict[str, dict] = {}
PRESETS.update(preset_grid("default"))
PRESETS.update({k: v for k, v in preset_grid("mbert").items() if k not in PRESETS})
PRESETS["synthetic"] = dict(A=5_000, T=4, d=0.5, oversample=False, seed_mode="two_and_a_half")
PRESET_GROUPS = {
    "default": list(preset_grid("default")),
    "mbert-variant": list(preset_grid("mbert")),
}


# seed data -----------------------------------------------------------------

@dataclass
class SeedSample:
    learner_index: int
    sentences: Corpus


def _learner_rng(seed: int, i: int) -> random.Random:
    return random.Random(fnv1a_64(f"{seed};learner={i}".encode("utf-8")))


def sample_seed_data(L: Corpus, mode: str, seed: int) -> list[SeedSample]:
    """Seed sets B_1..B_3, drawn independently per learner.

    ``two_and_a_half`` draws from an urn that is refilled when empty: two full
    shuffled passes plus the first half of a third, so floor(n/2) sentences
    occur three times and the other ceil(n/2) twice.
    """
    if len(L) == 0:
        raise ValueError("labelled data is empty")
    n = len(L)
    out = []
    for i in (1, 2, 3):
        if mode == "full_copy":
            sents = list(L.sentences)
        else:
            rng = _learner_rng(seed, i)
            if mode == "with_replacement":
                idx = [rng.randrange(n) for _ in range(n)]
            elif mode == "two_and_a_half":
                passes = []
                for _ in range(3):
                    perm = list(range(n))
                    rng.shuffle(perm)
                    passes.append(perm)
                idx = passes[0] + passes[1] + passes[2][: n // 2]
            else:
                raise ValueError(f"unknown seed mode {mode!r}")
            sents = [L.sentences[k] for k in idx]
        out.append(SeedSample(i, Corpus(sents, origin="labelled")))
    return out


# agreement -----------------------------------------------------------------

@dataclass
class IterationData:
    t: int
    sets: list[Corpus]
    provenance: list[list[tuple[int, int]]]  # teacher pair (1-based) per sentence
    stats: dict

    def token_totals(self) -> list[int]:
        return [c.token_total for c in self.sets]


def _signature(sent: Sentence, columns: Sequence[str]) -> tuple:
    return tuple(sent.column(c) for c in columns)


def agreement_filter(preds: Sequence[Corpus], columns: Sequence[str], rng: random.Random,
                     t: int = 0) -> IterationData:
    """Route sentences two learners agree on to the third learner.

    ``rng.randrange(3)`` is called once per sentence on which all three agree
    and nowhere else.
    """
    if len(preds) != 3:
        raise ValueError("agreement filter needs exactly three predictions")
    n = len(preds[0])
    if any(len(p) != n for p in preds):
        raise ValueError("predictions differ in sentence count")
    sets: list[list[Sentence]] = [[], [], []]
    prov: list[list[tuple[int, int]]] = [[], [], []]
    stats = {"sentences": n, "all_agreed": 0, "pairwise_agreed": 0, "discarded": 0}
    for k in range(n):
        sents = [p[k] for p in preds]
        if not (sents[0].forms == sents[1].forms == sents[2].forms):
            raise ValueError(f"predictions misaligned at sentence {k}")
        sig = [_signature(s, columns) for s in sents]
        agree = [sig[j] == sig[m] for j, m in PAIRS]
        if all(agree):
            stats["all_agreed"] += 1
            receiver = rng.randrange(3)
            teachers = tuple(x for x in (0, 1, 2) if x != receiver)
        elif any(agree):
            stats["pairwise_agreed"] += 1
            teachers = PAIRS[agree.index(True)]
            receiver = 3 - sum(teachers)
        else:
            stats["discarded"] += 1
            continue
        sets[receiver].append(sents[teachers[0]])
        prov[receiver].append((teachers[0] + 1, teachers[1] + 1))
    return IterationData(t, [Corpus(s, origin="predicted") for s in sets], prov, stats)


# budgets and decay ---------------------------------------------------------

def cap_to_budget(corpus: Corpus, A: int, seed: int) -> Corpus:
    if corpus.token_total <= A:
        return corpus
    return sample_corpus(corpus, A, seed)


def decay_cap(A: int, d: float, age: int) -> int:
    """Token cap A * d**age, floored, evaluated in exact decimal arithmetic."""
    if age < 0:
        raise ValueError("age must be >= 0")
    frac = d if isinstance(d, Fraction) else Fraction(repr(float(d)))
    return math.floor(Fraction(int(A)) * frac ** age)


def oversample_to(seed_data: Corpus, target_tokens: int, rng: random.Random) -> Corpus:
    """Repeat whole seed sentences in shuffled passes until ``target_tokens`` is met.

    Never shrinks: seed data already at or above the target is returned as is.
    """
    total = seed_data.token_total
    if total >= target_tokens or len(seed_data) == 0:
        return seed_data
    out: list[Sentence] = []
    total = 0
    while total < target_tokens:
        perm = list(seed_data.sentences)
        rng.shuffle(perm)
        for s in perm:
            out.append(s)
            total += len(s)
            if total >= target_tokens:
                break
    return Corpus(out, origin="labelled")


@dataclass
class AssembledSet:
    corpus: Corpus
    seed_tokens: int
    auto_tokens: int
    contributions: list[dict]


def assemble_training_set(seed_data: Corpus, history: Sequence[Corpus], A: int, d: float,
                          t: int, oversample: bool, seed: int) -> AssembledSet:
    """B_i followed by R, the decay-capped concatenation of L_{1,i}..L_{t,i}.

    ``history[k]`` holds the data of iteration k + 1. Concatenation keeps
    duplicates.
    """
    if len(history) != t:
        raise ValueError(f"history has {len(history)} entries, expected {t}")
    auto: list[Sentence] = []
    contributions = []
    for t_prime, data in enumerate(history, start=1):
        cap = decay_cap(A, d, t - t_prime)
        size = data.token_total
        if size <= cap:
            part = data
        elif cap <= 0:
            part = Corpus([])
        else:
            part = sample_corpus(data, cap, fnv1a_64(f"{seed};history={t_prime}".encode("utf-8")))
        auto.extend(part.sentences)
        contributions.append({"t_prime": t_prime, "cap": cap, "available": size,
                              "tokens": part.token_total, "sentences": len(part)})
    auto_tokens = sum(len(s) for s in auto)
    base = seed_data
    if oversample:
        base = oversample_to(seed_data, auto_tokens,
                             random.Random(fnv1a_64(f"{seed};oversample".encode("utf-8"))))
    corpus = Corpus(list(base.sentences) + auto, origin="mixed")
    return AssembledSet(corpus, base.token_total, auto_tokens, contributions)


# run -----------------------------------------------------------------------

@dataclass
class IterationRecord:
    t: int
    learner_las: list[float]
    ensemble_mean: float
    ensemble_min: float
    ensemble_max: float
    new_tokens: list[int] = field(default_factory=lambda: [0, 0, 0])
    new_sentences: list[int] = field(default_factory=lambda: [0, 0, 0])
    auto_tokens: list[int] = field(default_factory=lambda: [0, 0, 0])
    train_tokens: list[int] = field(default_factory=lambda: [0, 0, 0])
    agreement: dict = field(default_factory=dict)
    seconds: float = 0.0


LOG_COLUMNS = (
    ["iteration"] + [f"las_{i}" for i in (1, 2, 3)]
    + ["ensemble_mean", "ensemble_min", "ensemble_max"]
    + [f"new_tokens_{i}" for i in (1, 2, 3)] + [f"new_sentences_{i}" for i in (1, 2, 3)]
    + [f"r_tokens_{i}" for i in (1, 2, 3)] + [f"train_tokens_{i}" for i in (1, 2, 3)]
    + ["u_sentences", "all_agreed", "pairwise_agreed", "discarded"]
)


@dataclass
class RunLog:
    records: list[IterationRecord] = field(default_factory=list)
    contributions: list[dict] = field(default_factory=list)

    @property
    def selected_iteration(self) -> int:
        """Best ensemble dev LAS; ties go to the earliest iteration."""
        if not self.records:
            raise ValueError("empty run log")
        best = max(r.ensemble_mean for r in self.records)
        return next(r.t for r in self.records if r.ensemble_mean == best)

    def to_tsv(self) -> str:
        lines = ["\t".join(LOG_COLUMNS)]
        for r in self.records:
            a = r.agreement
            row = ([r.t] + [f"{x:.6f}" for x in r.learner_las]
                   + [f"{r.ensemble_mean:.6f}", f"{r.ensemble_min:.6f}", f"{r.ensemble_max:.6f}"]
                   + r.new_tokens + r.new_sentences + r.auto_tokens + r.train_tokens
                   + [a.get("sentences", 0), a.get("all_agreed", 0),
                      a.get("pairwise_agreed", 0), a.get("discarded", 0)])
            lines.append("\t".join(str(x) for x in row))
        return "\n".join(lines) + "\n"

    def history_tsv(self) -> str:
        lines = ["iteration\tlearner\tt_prime\tcap\tavailable\ttokens\tsentences"]
        for c in self.contributions:
            lines.append("\t".join(str(c[k]) for k in (
                "t", "learner", "t_prime", "cap", "available", "tokens", "sentences")))
        return "\n".join(lines) + "\n"

    def timings_tsv(self) -> str:
        return "iteration\tseconds\n" + "".join(f"{r.t}\t{r.seconds:.3f}\n" for r in self.records)

    @classmethod
    def from_tsv(cls, text: str) -> "RunLog":
        rows = [line.split("\t") for line in text.strip().splitlines()]
        header, body = rows[0], rows[1:]
        log = cls()
        for row in body:
            v = dict(zip(header, row))
            log.records.append(IterationRecord(
                t=int(v["iteration"]),
                learner_las=[float(v[f"las_{i}"]) for i in (1, 2, 3)],
                ensemble_mean=float(v["ensemble_mean"]),
                ensemble_min=float(v["ensemble_min"]),
                ensemble_max=float(v["ensemble_max"]),
                new_tokens=[int(v[f"new_tokens_{i}"]) for i in (1, 2, 3)],
                new_sentences=[int(v[f"new_sentences_{i}"]) for i in (1, 2, 3)],
                auto_tokens=[int(v[f"r_tokens_{i}"]) for i in (1, 2, 3)],
                train_tokens=[int(v[f"train_tokens_{i}"]) for i in (1, 2, 3)],
                agreement={k: int(v[k]) for k in ("all_agreed", "pairwise_agreed", "discarded")}
                | {"sentences": int(v["u_sentences"])},
            ))
        return log


@dataclass
class RunResult:
    log: RunLog
    models: list[list[ModelHandle]]  # per iteration, three handles
    iteration_data: list[IterationData]
    dev_predictions: list[list[Corpus]]

    @property
    def selected_models(self) -> list[ModelHandle]:
        return self.models[self.log.selected_iteration]


def _train_task(spec, corpus, seed, model_dir, coords):
    return learner_mod.train(spec, corpus, seed, model_dir, coords)


def _predict_task(handle, corpus):
    return learner_mod.predict(handle, corpus)


class _Runner:
    def __init__(self, config: TriConfig, output_dir, workers: int):
        self.config = config
        self.output_dir = output_dir
        self.workers = workers

    def parallel(self, tasks):
        if self.workers <= 1:
            return [fn(*args) for fn, *args in tasks]
        return Parallel(n_jobs=self.workers)(delayed(fn)(*args) for fn, *args in tasks)

    def path(self, *parts) -> str:
        p = os.path.join(self.output_dir, *parts)
        os.makedirs(os.path.dirname(p), exist_ok=True)
        return p

    def directory(self, *parts) -> str:
        p = os.path.join(self.output_dir, *parts)
        os.makedirs(p, exist_ok=True)
        return p

    def train_all(self, t: int, train_sets: Sequence[Corpus]) -> list[ModelHandle]:
        cfg = self.config
        tasks = []
        for i, corpus in enumerate(train_sets, start=1):
            save_conllu(corpus, self.path(f"iter-{t}", f"learner-{i}", "train.conllu"))
            coords = cfg.coords(i, t)
            tasks.append((_train_task, cfg.learner, corpus, derive_seed(coords),
                           self.directory(f"iter-{t}", f"learner-{i}", "model"), coords))
        return self.parallel(tasks)

    def predict_all(self, models: Sequence[ModelHandle], corpus: Corpus) -> list[Corpus]:
        return self.parallel([(_predict_task, m, corpus) for m in models])

    def evaluate_dev(self, t: int, models, dev: Corpus) -> tuple[list[float], object, list[Corpus]]:
        preds = self.predict_all(models, dev.strip())
        scores = []
        for i, (m, p) in enumerate(zip(models, preds), start=1):
            save_conllu(p, self.path(f"iter-{t}", f"learner-{i}", "pred-dev.conllu"))
            m.dev_las = evaluate(dev, p).las
            scores.append(m.dev_las)
        combo = CombinerConfig(self.config.combiner_repeats,
                               stream_seed(self.config.coords(0, t), "combine"))
        ens = averaged_ensemble_las(preds, dev, combo)
        return scores, ens, preds

    def write_log(self, log: RunLog) -> None:
        with open(self.path("run-log.tsv"), "w", encoding="utf-8") as f:
            f.write(log.to_tsv())
        with open(self.path("history.tsv"), "w", encoding="utf-8") as f:
            f.write(log.history_tsv())
        with open(self.path("timings.tsv"), "w", encoding="utf-8") as f:
            f.write(log.timings_tsv())


def run(config: TriConfig, L: Corpus, U: Corpus, dev: Corpus, output_dir,
        workers: int = 1) -> RunResult:
    """Full tri-training run; artifacts and logs are written under ``output_dir``."""
    for name, corpus in (("labelled", L), ("dev", dev)):
        if len(corpus) == 0:
            raise ValueError(f"{name} data is empty")
        for k, s in enumerate(corpus):
            err = tree_errors(s.heads)
            if err:
                raise ValueError(f"{name} sentence {k} is not a valid tree: {err}")
    os.makedirs(output_dir, exist_ok=True)
    with open(os.path.join(output_dir, "config.json"), "w", encoding="utf-8") as f:
        json.dump(config.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    runner = _Runner(config, output_dir, workers)
    cfg = config
    log = RunLog()
    all_models: list[list[ModelHandle]] = []
    iteration_data: list[IterationData] = []
    dev_preds: list[list[Corpus]] = []

    start = time.perf_counter()
    seeds = sample_seed_data(L, cfg.seed_mode, stream_seed(cfg.coords(0, 0), "seed-data"))
    seed_sets = [s.sentences for s in seeds]
    models = runner.train_all(0, seed_sets)
    scores, ens, preds = runner.evaluate_dev(0, models, dev)
    log.records.append(IterationRecord(
        0, scores, ens.mean, ens.min, ens.max,
        train_tokens=[c.token_total for c in seed_sets],
        seconds=time.perf_counter() - start))
    all_models.append(models)
    dev_preds.append(preds)
    runner.write_log(log)
    logger.info("iteration 0: learner LAS %s, ensemble %.2f", scores, ens.mean)

    history: list[list[Corpus]] = [[], [], []]
    for t in range(1, cfg.T + 1):
        start = time.perf_counter()
        pool = sample_corpus(U, cfg.unlabelled_multiplier * cfg.A,
                             stream_seed(cfg.coords(0, t), "unlabelled"), reject_duplicates=True)
        u_preds = runner.predict_all(models, pool)
        data = agreement_filter(u_preds, cfg.agreement_columns,
                                random.Random(stream_seed(cfg.coords(0, t), "agreement")), t)
        capped, provenance = [], []
        for i in range(3):
            new = cap_to_budget(data.sets[i], cfg.A, stream_seed(cfg.coords(i + 1, t), "cap"))
            teachers = {id(s): p for s, p in zip(data.sets[i], data.provenance[i])}
            capped.append(new)
            provenance.append([teachers[id(s)] for s in new])
            history[i].append(new)
            save_conllu(new, runner.path(f"iter-{t}", f"new-data-{i + 1}.conllu"))
        data.sets, data.provenance = capped, provenance
        iteration_data.append(data)
        train_sets, auto_tokens = [], []
        for i in range(3):
            assembled = assemble_training_set(
                seed_sets[i], history[i], cfg.A, cfg.d, t, cfg.oversample,
                stream_seed(cfg.coords(i + 1, t), "assemble"))
            train_sets.append(assembled.corpus)
            auto_tokens.append(assembled.auto_tokens)
            for c in assembled.contributions:
                log.contributions.append(dict(c, t=t, learner=i + 1))
        models = runner.train_all(t, train_sets)
        scores, ens, preds = runner.evaluate_dev(t, models, dev)
        log.records.append(IterationRecord(
            t, scores, ens.mean, ens.min, ens.max,
            new_tokens=[c.token_total for c in capped],
            new_sentences=[len(c) for c in capped],
            auto_tokens=auto_tokens,
            train_tokens=[c.token_total for c in train_sets],
            agreement=dict(data.stats),
            seconds=time.perf_counter() - start))
        all_models.append(models)
        dev_preds.append(preds)
        runner.write_log(log)
        logger.info("iteration %d: learner LAS %s, ensemble %.2f, new tokens %s",
                    t, scores, ens.mean, [c.token_total for c in capped])

    with open(os.path.join(output_dir, "selected.json"), "w", encoding="utf-8") as f:
        sel = log.selected_iteration
        json.dump({"iteration": sel, "ensemble_dev_las": log.records[sel].ensemble_mean,
                   "models": [m.path for m in all_models[sel]]}, f, indent=2, sort_keys=True)
        f.write("\n")
    return RunResult(log, all_models, iteration_data, dev_preds)


class TriTrainingParser(BaseEstimator):
    """Tri-training as an estimator.

    ``fit(labelled, unlabelled=..., dev=...)`` runs the full procedure and keeps
    the three models of the best iteration; ``predict`` parses with them and
    combines the three trees (first combiner repeat).
    """

    def __init__(self, A=40_000, T=12, d=1.0, oversample=False, seed_mode="two_and_a_half",
                 agreement_columns=None, master_seed=0, unlabelled_multiplier=16,
                 learner=None, is_repeat=False, combiner_repeats=21, output_dir="tritrain-run",
                 n_jobs=1):
        self.A = A
        self.T = T
        self.d = d
        self.oversample = oversample
        self.seed_mode = seed_mode
        self.agreement_columns = agreement_columns
        self.master_seed = master_seed
        self.unlabelled_multiplier = unlabelled_multiplier
        self.learner = learner
        self.is_repeat = is_repeat
        self.combiner_repeats = combiner_repeats
        self.output_dir = output_dir
        self.n_jobs = n_jobs

    def to_config(self) -> TriConfig:
        return TriConfig(A=self.A, T=self.T, d=self.d, oversample=self.oversample,
                         seed_mode=self.seed_mode, agreement_columns=self.agreement_columns,
                         master_seed=self.master_seed,
                         unlabelled_multiplier=self.unlabelled_multiplier,
                         learner=self.learner if self.learner is not None else LearnerSpec(),
                         is_repeat=self.is_repeat, combiner_repeats=self.combiner_repeats)

    def fit(self, labelled: Corpus, y=None, *, unlabelled: Corpus, dev: Corpus):
        result = run(self.to_config(), labelled, unlabelled, dev, self.output_dir, self.n_jobs)
        self.result_ = result
        self.run_log_ = result.log
        self.selected_iteration_ = result.log.selected_iteration
        self.models_ = result.selected_models
        return self

    def predict(self, corpus: Corpus) -> Corpus:
        if not hasattr(self, "models_"):
            raise RuntimeError("TriTrainingParser is not fitted")
        preds = [learner_mod.predict(m, corpus) for m in self.models_]
        base = stream_seed(self.to_config().coords(0, self.selected_iteration_), "combine")
        return combine_corpora(preds, CombinerConfig(1, base))[0]

    def score(self, corpus: Corpus, y=None) -> float:
        return evaluate(corpus, self.predict(corpus.strip())).las
