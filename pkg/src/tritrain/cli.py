"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 learner
failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile

from . import analysis, metrics
from .conllu import ConlluError, Corpus, PoolFilterSpec, ingest_unlabelled, read_conllu, save_conllu
from .ensemble import CombinerConfig, combine_corpora
from .learner import MOCK_LEARNER_CMD, LearnerError, LearnerSpec
from .learner import predict as learner_predict
from .learner import train as learner_train
from .tritraining import PRESET_GROUPS, PRESETS, SEED_MODES, TriConfig, run

logger = logging.getLogger("tritrain")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_LEARNER = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _columns(text: str) -> tuple:
    return tuple(c.strip() for c in text.split(",") if c.strip())


# tritrain ------------------------------------------------------------------

# flag dest -> TriConfig / LearnerSpec key
CONFIG_FLAGS = {
    "A": "A", "T": "T", "d": "d", "oversample": "oversample", "seed_mode": "seed_mode",
    "agreement_columns": "agreement_columns", "seed": "master_seed",
    "unlabelled_multiplier": "unlabelled_multiplier", "repeat": "is_repeat",
    "combiner_repeats": "combiner_repeats",
}
LEARNER_FLAGS = {
    "learner": "kind", "epochs": "epochs", "beam": "beam", "external_cmd": "external_cmd",
    "predicted_columns": "predicted_columns",
}


def _add_tritrain(sub):
    p = sub.add_parser("tritrain", help="run tri-training",
                       description="Run tri-training. Values come from --manifest, then "
                                   "--config, then --preset, then individual flags (later wins).")
    p.add_argument("--manifest", help="JSON manifest with keys config, data, preset, output")
    p.add_argument("--config", help="JSON file whose keys mirror TriConfig field names")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named parameter set (A, T, d, o)")
    p.add_argument("--list-presets", action="store_true",
                   help="print the preset groups and their parameters, then exit")
    p.add_argument("--train", help="labelled training data, CoNLL-U (data key: train)")
    p.add_argument("--dev", help="development data, CoNLL-U (data key: dev)")
    p.add_argument("--test", help="optional test data, CoNLL-U (data key: test)")
    p.add_argument("--unlabelled", help="unlabelled pool: CoNLL-U, or text with one tokenised "
                                        "sentence per line (data key: unlabelled)")
    p.add_argument("--output", help="run directory (manifest key: output)")
    p.add_argument("--A", type=int, help="token budget per learner and iteration (config key: A)")
    p.add_argument("--T", type=int, help="number of iterations (config key: T)")
    p.add_argument("--d", type=float, help="decay for earlier iterations' data (config key: d)")
    p.add_argument("--oversample", action="store_true", default=None,
                   help="oversample seed data to the size of R (config key: oversample)")
    p.add_argument("--seed-mode", choices=SEED_MODES, help="seed sampling (config key: seed_mode)")
    p.add_argument("--agreement-columns", type=_columns,
                   help="comma-separated columns compared (config key: agreement_columns)")
    p.add_argument("--seed", type=int, help="master seed (config key: master_seed)")
    p.add_argument("--unlabelled-multiplier", type=int,
                   help="U' size as a multiple of A (config key: unlabelled_multiplier)")
    p.add_argument("--repeat", action="store_true", default=None,
                   help="mark as a repeat run (config key: is_repeat)")
    p.add_argument("--combiner-repeats", type=int,
                   help="combiner runs averaged for ensemble LAS (config key: combiner_repeats)")
    p.add_argument("--learner", choices=("builtin_perceptron", "external"),
                   help="learner kind (config key: learner.kind)")
    p.add_argument("--epochs", type=int, help="built-in learner epochs (config key: learner.epochs)")
    p.add_argument("--beam", type=int, help="built-in learner beam (config key: learner.beam)")
    p.add_argument("--external-cmd", help="external learner command (config key: learner.external_cmd)")
    p.add_argument("--predicted-columns", type=_columns,
                   help="comma-separated columns the learner predicts "
                        "(config key: learner.predicted_columns)")
    p.add_argument("--min-len", type=int, default=5, help="text pool: minimum sentence length")
    p.add_argument("--max-len", type=int, default=40, help="text pool: maximum sentence length")
    p.add_argument("--workers", type=int, default=1,
                   help="parallel learner jobs; results do not depend on it")
    p.set_defaults(func=cmd_tritrain)


def build_manifest(args) -> dict:
    manifest = {"config": {}, "data": {}, "preset": None, "output": None}
    if args.manifest:
        with open(args.manifest, encoding="utf-8") as f:
            loaded = json.load(f)
        unknown = set(loaded) - set(manifest)
        if unknown:
            raise UsageError(f"unknown manifest keys {sorted(unknown)}")
        manifest.update(loaded)
        manifest["config"] = dict(manifest.get("config") or {})
        manifest["data"] = dict(manifest.get("data") or {})
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            manifest["config"].update(json.load(f))
    if args.preset:
        manifest["preset"] = args.preset
    config = manifest["config"]
    if manifest["preset"]:
        if manifest["preset"] not in PRESETS:
            raise UsageError(f"unknown preset {manifest['preset']!r}")
        config.update(PRESETS[manifest["preset"]])
    for flag, key in CONFIG_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            config[key] = value
    learner = dict(config.get("learner") or {})
    for flag, key in LEARNER_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            learner[key] = value
    config["learner"] = learner
    for key in ("train", "dev", "test", "unlabelled"):
        if getattr(args, key):
            manifest["data"][key] = getattr(args, key)
    if args.output:
        manifest["output"] = args.output
    for key in ("train", "dev", "unlabelled"):
        if not manifest["data"].get(key):
            raise UsageError(f"missing data path: {key}")
    if not manifest["output"]:
        raise UsageError("missing output directory")
    for key, path in manifest["data"].items():
        if path and not os.path.exists(path):
            raise FileNotFoundError(f"{key} file {path} does not exist")
    return manifest


def load_unlabelled(path: str, spec: PoolFilterSpec) -> Corpus:
    if path.endswith(".conllu"):
        return read_conllu(path, origin="unlabelled").strip()
    with open(path, encoding="utf-8") as f:
        return ingest_unlabelled(f, spec)


def list_presets() -> None:
    for group, names in PRESET_GROUPS.items():
        print(f"[{group}]")
        for name in names:
            p = PRESETS[name]
            print(f"{name}\tA={p['A']}\tT={p['T']}\td={p['d']}\to={int(p['oversample'])}")


def cmd_tritrain(args) -> int:
    if args.list_presets:
        list_presets()
        return EXIT_OK
    manifest = build_manifest(args)
    try:
        config = TriConfig.from_dict(manifest["config"])
    except TypeError as exc:
        raise UsageError(str(exc)) from exc
    data = manifest["data"]
    L = read_conllu(data["train"])
    dev = read_conllu(data["dev"])
    U = load_unlabelled(data["unlabelled"], PoolFilterSpec(
        min_len=args.min_len, max_len=args.max_len, shuffle_seed=config.master_seed))
    result = run(config, L, U, dev, manifest["output"], workers=args.workers)
    with open(os.path.join(manifest["output"], "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(dict(manifest, config=config.to_dict()), f, indent=2, sort_keys=True)
        f.write("\n")
    sel = result.log.selected_iteration
    print(f"selected iteration {sel} ensemble dev LAS {result.log.records[sel].ensemble_mean:.2f}")
    if data.get("test"):
        test = read_conllu(data["test"])
        preds = [learner_predict(m, test.strip()) for m in result.selected_models]
        combined = combine_corpora(preds, CombinerConfig(config.combiner_repeats, config.master_seed))
        scores = [metrics.evaluate(test, c).las for c in combined]
        save_conllu(combined[0], os.path.join(manifest["output"], "pred-test.conllu"))
        print(f"test LAS {sum(scores) / len(scores):.2f}")
    return EXIT_OK


# eval ----------------------------------------------------------------------

def _add_eval(sub):
    p = sub.add_parser("eval", help="score predictions against gold")
    p.add_argument("--gold", required=True, help="gold CoNLL-U")
    p.add_argument("--pred", required=True, help="predicted CoNLL-U")
    p.add_argument("--train-vocab", help="labelled training CoNLL-U; enables the breakdown tables")
    p.add_argument("--pred2", help="second system; enables McNemar test of pred2 against pred")
    p.add_argument("--universal-labels", action="store_true",
                   help="compare labels without language-specific subtypes")
    p.add_argument("--mcnemar-unit", choices=("token", "sentence"), default="token",
                   help="unit of the McNemar test")
    p.add_argument("--mcnemar-method", choices=("exact", "chi2"), default="exact",
                   help="exact binomial or chi-square with continuity correction")
    p.add_argument("--report", help="write a JSON report here")
    p.set_defaults(func=cmd_eval)


def cmd_eval(args) -> int:
    gold = read_conllu(args.gold)
    pred = read_conllu(args.pred)
    report = metrics.evaluate(gold, pred, args.universal_labels)
    print(f"LAS {report.las:.2f}")
    print(f"UAS {report.uas:.2f}")
    sections = {"eval": report}
    if args.train_vocab:
        vocab = {w for s in read_conllu(args.train_vocab) for w in s.forms}
        bd = metrics.breakdown(gold, pred, vocab, args.universal_labels)
        print(bd.to_tsv(), end="")
        sections["breakdown"] = bd
    if args.pred2:
        pred2 = read_conllu(args.pred2)
        sig = metrics.compare_systems(gold, pred, pred2, args.mcnemar_unit, args.mcnemar_method)
        print(f"McNemar b={sig.b} c={sig.c} p={sig.p_value:.6g} {sig.star_string}".rstrip())
        sections["mcnemar"] = {"b": sig.b, "c": sig.c, "p_value": sig.p_value,
                               "stars": sig.stars, "degenerate": sig.degenerate}
    if args.report:
        metrics.write_report(args.report, **sections)
    return EXIT_OK


# combine -------------------------------------------------------------------

def _add_combine(sub):
    p = sub.add_parser("combine", help="linear tree combination of parser outputs")
    p.add_argument("inputs", nargs="+", help="aligned CoNLL-U predictions (at least two)")
    p.add_argument("--output", required=True, help="combined CoNLL-U (repeat 0)")
    p.add_argument("--repeats", type=int, default=21, help="combiner runs with different seeds")
    p.add_argument("--seed", type=int, default=0, help="base seed of the tie breaker")
    p.add_argument("--all-repeats", action="store_true",
                   help="also write every repeat as <output>.r<k>.conllu")
    p.add_argument("--head-only-votes", action="store_true",
                   help="vote on heads, then take the plurality label")
    p.add_argument("--gold", help="gold CoNLL-U; prints mean/min/max LAS over repeats")
    p.set_defaults(func=cmd_combine)


def cmd_combine(args) -> int:
    if len(args.inputs) < 2:
        raise UsageError("combine needs at least two input files")
    corpora = [read_conllu(p, origin="predicted") for p in args.inputs]
    outs = combine_corpora(corpora, CombinerConfig(args.repeats, args.seed, args.head_only_votes))
    save_conllu(outs[0], args.output)
    if args.all_repeats:
        stem = args.output[:-7] if args.output.endswith(".conllu") else args.output
        for k, c in enumerate(outs):
            save_conllu(c, f"{stem}.r{k}.conllu")
    if args.gold:
        gold = read_conllu(args.gold)
        scores = [metrics.evaluate(gold, c).las for c in outs]
        print(f"LAS mean {sum(scores) / len(scores):.2f} min {min(scores):.2f} "
              f"max {max(scores):.2f} repeats {len(scores)}")
    return EXIT_OK


# simulate ------------------------------------------------------------------

def _add_simulate(sub):
    p = sub.add_parser("simulate", help="best-of-k baseline distributions")
    p.add_argument("--scores", help="TSV: model id, dev LAS, optional test LAS")
    p.add_argument("--k", type=int, help="scores drawn per repetition (T + 1)")
    p.add_argument("--reps", type=int, default=250_000, help="repetitions")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--with-replacement", action="store_true", help="draw with replacement")
    p.add_argument("--bins", type=int, default=50, help="histogram bins")
    p.add_argument("--output", help="write summary and histogram TSV here")
    p.add_argument("--learner-scores", nargs="+",
                   help="per-learner score TSVs; writes bucket-ensemble model tuples instead")
    p.add_argument("--buckets", type=int, default=16, help="buckets per learner")
    p.set_defaults(func=cmd_simulate)


def cmd_simulate(args) -> int:
    if args.learner_scores:
        pool = analysis.ScoredModelPool(
            [list(zip(*analysis.read_score_table(p)[:2])) for p in args.learner_scores],
            args.buckets)
        triples = analysis.enumerate_bucket_ensembles(pool, args.seed)
        out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
        try:
            for t in triples:
                out.write("\t".join(str(m) for m in t) + "\n")
        finally:
            if args.output:
                out.close()
        print(f"{len(triples)} ensembles", file=sys.stderr)
        return EXIT_OK
    if not args.scores or args.k is None:
        raise UsageError("simulate needs --scores and --k (or --learner-scores)")
    _, dev, test = analysis.read_score_table(args.scores)
    dist = analysis.simulate_best_of(dev, args.k, args.reps, args.seed, args.with_replacement)
    print("\t".join(dist.summary))
    print("\t".join(f"{v:.4f}" if isinstance(v, float) else str(v) for v in dist.summary.values()))
    if test is not None:
        exp = analysis.expected_test_best_of(dev, test, args.k, args.reps, args.seed,
                                             args.with_replacement)
        print(f"expected test LAS of dev-best {exp:.4f}")
    if args.output:
        analysis.write_distribution(dist, args.output, args.bins)
    return EXIT_OK


# ingest --------------------------------------------------------------------

def _add_ingest(sub):
    p = sub.add_parser("ingest", help="filter, de-duplicate and shuffle unlabelled text")
    p.add_argument("input", help="text file, one tokenised sentence per line ('-' for stdin)")
    p.add_argument("--output", required=True, help="pool file (.conllu or text)")
    p.add_argument("--min-len", type=int, default=5, help="minimum tokens per sentence")
    p.add_argument("--max-len", type=int, default=40, help="maximum tokens per sentence")
    p.add_argument("--max-token-bytes", type=int, default=200, help="longest token in UTF-8 bytes")
    p.add_argument("--no-dedup", action="store_true", help="keep duplicate sentences")
    p.add_argument("--fraction", type=float, default=1.0, help="keep this fraction of sentences")
    p.add_argument("--seed", type=int, default=0, help="shuffle seed")
    p.set_defaults(func=cmd_ingest)


def cmd_ingest(args) -> int:
    spec = PoolFilterSpec(args.min_len, args.max_len, args.max_token_bytes, not args.no_dedup,
                          args.seed, args.fraction)
    if args.input == "-":
        pool = ingest_unlabelled(sys.stdin, spec)
    else:
        with open(args.input, encoding="utf-8") as f:
            pool = ingest_unlabelled(f, spec)
    if args.output.endswith(".conllu"):
        save_conllu(pool, args.output)
    else:
        with open(args.output, "w", encoding="utf-8") as f:
            for s in pool:
                f.write(s.key() + "\n")
    print(f"{len(pool)} sentences, {pool.token_total} tokens")
    return EXIT_OK


# learner-check -------------------------------------------------------------

def _add_learner_check(sub):
    p = sub.add_parser("learner-check",
                       help="validate an external learner against the subprocess contract")
    p.add_argument("--cmd", default=MOCK_LEARNER_CMD, help="learner command (default: bundled mock)")
    p.add_argument("--seed", type=int, default=0, help="seed passed to training")
    p.set_defaults(func=cmd_learner_check)


def cmd_learner_check(args) -> int:
    from .synthetic import make_treebank

    tb = make_treebank(seed=3, n_train=40, n_dev=20, n_pool=0)
    spec = LearnerSpec(kind="external", external_cmd=args.cmd)
    with tempfile.TemporaryDirectory(prefix="learner-check-") as tmp:
        handle = learner_train(spec, tb.train, args.seed, os.path.join(tmp, "model"))
        pred = learner_predict(handle, tb.dev.strip())
    report = metrics.evaluate(tb.dev, pred)
    print(f"OK: {len(pred)} sentences aligned, all valid trees, LAS {report.las:.2f}")
    return EXIT_OK


# synthetic -----------------------------------------------------------------

def _add_synthetic(sub):
    p = sub.add_parser("synthetic", help="write the template-grammar treebank")
    p.add_argument("--output", required=True, help="directory for train/dev/unlabelled files")
    p.add_argument("--seed", type=int, default=1, help="grammar and sampling seed")
    p.add_argument("--train-size", type=int, default=300, help="training sentences")
    p.add_argument("--dev-size", type=int, default=500, help="development sentences")
    p.add_argument("--pool-size", type=int, default=20_000, help="unlabelled sentences")
    p.set_defaults(func=cmd_synthetic)


def cmd_synthetic(args) -> int:
    from .synthetic import make_treebank

    tb = make_treebank(args.seed, args.train_size, args.dev_size, args.pool_size)
    os.makedirs(args.output, exist_ok=True)
    save_conllu(tb.train, os.path.join(args.output, "train.conllu"))
    save_conllu(tb.dev, os.path.join(args.output, "dev.conllu"))
    with open(os.path.join(args.output, "unlabelled.txt"), "w", encoding="utf-8") as f:
        f.writelines(line + "\n" for line in tb.pool_lines)
    print(f"wrote {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tritrain", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for add in (_add_tritrain, _add_eval, _add_combine, _add_simulate, _add_ingest,
                _add_learner_check, _add_synthetic):
        add(sub)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"tritrain: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LearnerError as exc:
        print(f"tritrain: learner failure: {exc}", file=sys.stderr)
        return EXIT_LEARNER
    except (ConlluError, ValueError, OSError) as exc:
        print(f"tritrain: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
