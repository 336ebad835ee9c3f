"""Subprocess adapter for external parsers.

An external learner is any command honouring::

    <cmd> train --train <file.conllu> --seed <n> --model <dir>
    <cmd> predict --model <dir> --input <file.conllu> --output <file.conllu>

Input to ``predict`` carries forms only (other columns "_", heads 0); the
output must be token-aligned with it.
"""
from __future__ import annotations

import os
import shlex
import subprocess
import tempfile

from ..conllu import Corpus, read_conllu, save_conllu, tree_errors


class LearnerError(RuntimeError):
    """External learner failed; ``diagnostics`` holds its captured output."""

    def __init__(self, message: str, diagnostics: str = ""):
        super().__init__(message + (f"\n{diagnostics}" if diagnostics else ""))
        self.diagnostics = diagnostics


def _run(argv: list[str]) -> None:
    proc = subprocess.run(argv, capture_output=True, text=True)
    if proc.returncode != 0:
        raise LearnerError(f"command {shlex.join(argv)} exited with status {proc.returncode}",
                           (proc.stdout + proc.stderr).strip())


def external_train(cmd: str, corpus: Corpus, seed: int, model_dir) -> None:
    os.makedirs(model_dir, exist_ok=True)
    train_file = os.path.join(model_dir, "train-input.conllu")
    save_conllu(corpus, train_file)
    _run(shlex.split(cmd) + ["train", "--train", train_file, "--seed", str(seed),
                             "--model", str(model_dir)])


def external_predict(cmd: str, model_dir, corpus: Corpus) -> Corpus:
    if not os.path.isdir(model_dir):
        raise LearnerError(f"model directory {model_dir} does not exist")
    with tempfile.TemporaryDirectory(prefix="tritrain-") as tmp:
        inp = os.path.join(tmp, "input.conllu")
        out = os.path.join(tmp, "output.conllu")
        save_conllu(corpus.strip(), inp)
        _run(shlex.split(cmd) + ["predict", "--model", str(model_dir), "--input", inp,
                                 "--output", out])
        if not os.path.exists(out):
            raise LearnerError(f"external learner wrote no output file {out}")
        pred = read_conllu(out, origin="predicted")
    if len(pred) != len(corpus):
        raise LearnerError(f"external learner returned {len(pred)} sentences for {len(corpus)}")
    for k, (a, b) in enumerate(zip(corpus, pred)):
        if a.forms != b.forms:
            raise LearnerError(f"external learner output misaligned at sentence {k}")
        err = tree_errors(b.heads)
        if err:
            raise LearnerError(f"external learner output sentence {k} is not a tree: {err}")
    return pred
