"""Mock external learner for protocol checks.

Predicts a right-branching chain (token 1 is the root, every other token
depends on its left neighbour) labelled with the most frequent non-root label
of the training data. Usage follows the external-learner contract::

    python -m tritrain.learner.mock train --train f --seed n --model dir
    python -m tritrain.learner.mock predict --model dir --input f --output f
"""
import argparse
import json
import os
import sys
from collections import Counter

from ..conllu import Corpus, Sentence, read_conllu, save_conllu


def train(args):
    corpus = read_conllu(args.train)
    labels = Counter(rel for s in corpus for rel, h in zip(s.deprels, s.heads) if h != 0)
    os.makedirs(args.model, exist_ok=True)
    with open(os.path.join(args.model, "mock-model.json"), "w", encoding="utf-8") as f:
        json.dump({"label": labels.most_common(1)[0][0] if labels else "dep",
                   "seed": args.seed, "sentences": len(corpus)}, f, sort_keys=True)


def predict(args):
    with open(os.path.join(args.model, "mock-model.json"), encoding="utf-8") as f:
        model = json.load(f)
    out = []
    for s in read_conllu(args.input, origin="unlabelled"):
        n = len(s)
        out.append(Sentence(s.forms, heads=list(range(n)),
                            deprels=["root"] + [model["label"]] * (n - 1),
                            comments=s.comments, extra=s.extra))
    save_conllu(Corpus(out), args.output)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="tritrain-mock-learner")
    sub = parser.add_subparsers(dest="mode", required=True)
    p = sub.add_parser("train")
    p.add_argument("--train", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--model", required=True)
    p = sub.add_parser("predict")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    args = parser.parse_args(argv)
    {"train": train, "predict": predict}[args.mode](args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
