"""Learner abstraction: train/predict over CoNLL-U corpora."""
from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field

import joblib

from ..conllu import Corpus, format_sentence
from .external import LearnerError, external_predict, external_train
from .perceptron import PREDICTABLE_COLUMNS, PerceptronParser
from .seeds import SeedCoordinates, derive_seed, params_id, stream_seed
from .transition import NonProjectiveError, replay, static_oracle

LEARNER_KINDS = ("builtin_perceptron", "external")
MOCK_LEARNER_CMD = f"{sys.executable} -m tritrain.learner.mock"


@dataclass
class LearnerSpec:
    kind: str = "builtin_perceptron"
    epochs: int = 10
    beam: int = 1
    external_cmd: str = ""
    predicted_columns: tuple = ("upos", "head", "deprel")

    def __post_init__(self):
        self.predicted_columns = tuple(self.predicted_columns)
        if self.kind not in LEARNER_KINDS:
            raise ValueError(f"unknown learner kind {self.kind!r}")
        if not {"head", "deprel"} <= set(self.predicted_columns):
            raise ValueError("predicted_columns must include head and deprel")
        unknown = set(self.predicted_columns) - set(PREDICTABLE_COLUMNS)
        if unknown:
            raise ValueError(f"unknown columns {sorted(unknown)}")
        if self.kind == "external" and not self.external_cmd:
            raise ValueError("external learner needs external_cmd")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["predicted_columns"] = list(self.predicted_columns)
        return d


def corpus_hash(corpus: Corpus) -> str:
    h = hashlib.sha256()
    for s in corpus:
        h.update(format_sentence(s).encode("utf-8"))
    return h.hexdigest()


@dataclass
class ModelHandle:
    path: str
    manifest: dict
    dev_las: float | None = None
    _model: object = field(default=None, repr=False, compare=False)

    @property
    def spec(self) -> LearnerSpec:
        return LearnerSpec(**self.manifest["learner"])

    def load(self):
        if self._model is None and self.spec.kind == "builtin_perceptron":
            artifact = os.path.join(self.path, "model.joblib")
            if not os.path.exists(artifact):
                raise LearnerError(f"model artifact {artifact} is missing")
            try:
                self._model = joblib.load(artifact)
            except Exception as exc:  # corrupt pickle surfaces as many types
                raise LearnerError(f"cannot load model {artifact}: {exc}") from exc
        return self._model


MANIFEST_NAME = "manifest.json"


def train(spec: LearnerSpec, corpus: Corpus, seed: int, model_dir,
          coords: SeedCoordinates | None = None) -> ModelHandle:
    """Train one learner; the artifact and its manifest go to ``model_dir``."""
    if len(corpus) == 0:
        raise ValueError("cannot train on an empty corpus")
    os.makedirs(model_dir, exist_ok=True)
    manifest = {
        "learner": spec.to_dict(),
        "corpus_sha256": corpus_hash(corpus),
        "seed": int(seed),
        "iteration": coords.iteration if coords else None,
        "learner_index": coords.learner_index if coords else None,
        "coordinates": coords.canonical() if coords else None,
    }
    model = None
    if spec.kind == "builtin_perceptron":
        model = PerceptronParser(epochs=spec.epochs, beam=spec.beam,
                                 predicted_columns=spec.predicted_columns,
                                 seed=seed % 2**32).fit(corpus)
        joblib.dump(model, os.path.join(model_dir, "model.joblib"))
        manifest["report"] = model.training_report_
    else:
        external_train(spec.external_cmd, corpus, seed, model_dir)
    with open(os.path.join(model_dir, MANIFEST_NAME), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return ModelHandle(str(model_dir), manifest, _model=model)


def load_handle(model_dir) -> ModelHandle:
    with open(os.path.join(model_dir, MANIFEST_NAME), encoding="utf-8") as f:
        return ModelHandle(str(model_dir), json.load(f))


def predict(model: ModelHandle, corpus: Corpus) -> Corpus:
    spec = model.spec
    if spec.kind == "builtin_perceptron":
        return model.load().predict(corpus)
    return external_predict(spec.external_cmd, model.path, corpus)


__all__ = [
    "LearnerError", "LearnerSpec", "ModelHandle", "MOCK_LEARNER_CMD", "NonProjectiveError",
    "PerceptronParser", "SeedCoordinates", "derive_seed", "load_handle", "params_id",
    "predict", "replay", "static_oracle", "stream_seed", "train",
]
