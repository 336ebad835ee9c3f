import dataclasses
import json

import pytest

from tritrain import cli
from tritrain.conllu import Corpus, Sentence, read_conllu, save_conllu
from tritrain.learner import LearnerSpec
from tritrain.tritraining import TriConfig


def subparsers(parser):
    action = next(a for a in parser._actions if a.dest == "command")
    return action.choices


def test_help_lists_every_flag(capsys):
    parser = cli.build_parser()
    for name, sub in subparsers(parser).items():
        with pytest.raises(SystemExit) as info:
            cli.main([name, "--help"])
        assert info.value.code == 0
        text = capsys.readouterr().out
        for action in sub._actions:
            for flag in action.option_strings:
                assert flag in text, f"{name} {flag}"
            if action.option_strings and action.dest != "help":
                assert action.help, f"{name} {action.dest} has no help text"
    assert set(subparsers(parser)) >= {"tritrain", "eval", "combine", "simulate", "ingest",
                                       "learner-check"}


def test_config_flags_map_to_one_documented_key():
    config_fields = {f.name for f in dataclasses.fields(TriConfig)}
    learner_fields = {f.name for f in dataclasses.fields(LearnerSpec)}
    assert set(cli.CONFIG_FLAGS.values()) <= config_fields
    assert set(cli.LEARNER_FLAGS.values()) <= learner_fields
    keys = list(cli.CONFIG_FLAGS.values()) + [f"learner.{k}" for k in cli.LEARNER_FLAGS.values()]
    assert len(keys) == len(set(keys))
    tritrain = subparsers(cli.build_parser())["tritrain"]
    helps = {a.dest: a.help for a in tritrain._actions}
    for dest, key in cli.CONFIG_FLAGS.items():
        assert f"(config key: {key})" in helps[dest]
    for dest, key in cli.LEARNER_FLAGS.items():
        assert f"(config key: learner.{key})" in helps[dest]


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["eval", "--gold", "x"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        cli.main([])
    assert info.value.code == 1
    assert cli.main(["simulate"]) == 1
    assert cli.main(["tritrain", "--A", "10"]) == 1


def test_missing_file_exits_2(tmp_path):
    assert cli.main(["eval", "--gold", str(tmp_path / "no"), "--pred", str(tmp_path / "no")]) == 2


def write(path, sents):
    save_conllu(Corpus(sents), path)
    return str(path)


def tree(heads, forms=None):
    forms = forms or [f"w{i}" for i in range(len(heads))]
    return Sentence(forms, heads=heads, deprels=["root" if h == 0 else "dep" for h in heads])


def test_eval_perfect_and_breakdown(tmp_path, capsys):
    gold = write(tmp_path / "g.conllu", [tree([2, 0, 2]), tree([0, 1])])
    assert cli.main(["eval", "--gold", gold, "--pred", gold, "--train-vocab", gold,
                     "--report", str(tmp_path / "r.json")]) == 0
    out = capsys.readouterr().out
    assert "LAS 100.00" in out
    for label in ("<=9", "10-19", "20-39", ">=40"):
        assert f"length\t{label}\t" in out
    assert json.loads((tmp_path / "r.json").read_text())["eval"]["las"] == 100.0


def test_eval_mcnemar_one_star(tmp_path, capsys):
    # 12 one-token-wrong sentences: system 2 fixes 10 of system 1's errors, breaks 2
    gold_s = [tree([0, 1]) for _ in range(20)]
    wrong = tree([2, 0])
    p1 = [wrong] * 10 + gold_s[10:12] + gold_s[12:]
    p2 = gold_s[:10] + [wrong] * 2 + gold_s[12:]
    g = write(tmp_path / "g.conllu", gold_s)
    a = write(tmp_path / "a.conllu", p1)
    b = write(tmp_path / "b.conllu", p2)
    assert cli.main(["eval", "--gold", g, "--pred", b, "--pred2", a, "--mcnemar-unit",
                     "sentence"]) == 0
    line = [l for l in capsys.readouterr().out.splitlines() if l.startswith("McNemar")][0]
    assert "b=10 c=2" in line and line.endswith(" *")


def test_eval_alignment_error_verbatim(tmp_path, capsys):
    g = write(tmp_path / "g.conllu", [tree([0, 1])])
    p = write(tmp_path / "p.conllu", [tree([0, 1], ["x", "y"])])
    assert cli.main(["eval", "--gold", g, "--pred", p]) == 2
    assert "tokens differ" in capsys.readouterr().err


def test_combine_summary(tmp_path, capsys):
    g = write(tmp_path / "g.conllu", [tree([2, 0, 2])])
    w = write(tmp_path / "w.conllu", [tree([0, 1, 2])])
    out = tmp_path / "c.conllu"
    assert cli.main(["combine", g, g, w, "--output", str(out), "--repeats", "21", "--gold", g,
                     "--all-repeats"]) == 0
    assert "LAS mean 100.00 min 100.00 max 100.00 repeats 21" in capsys.readouterr().out
    assert read_conllu(out)[0].heads == (2, 0, 2)
    assert (tmp_path / "c.r20.conllu").exists()
    assert cli.main(["combine", g, "--output", str(out)]) == 1


def test_simulate_table(tmp_path, capsys):
    table = tmp_path / "s.tsv"
    table.write_text("".join(f"m{k}\t{70 + k * 0.1:.1f}\t{69 + k * 0.1:.1f}\n" for k in range(20)))
    dist = tmp_path / "d.tsv"
    assert cli.main(["simulate", "--scores", str(table), "--k", "9", "--reps", "2000",
                     "--output", str(dist)]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("n\tmean")
    assert "expected test LAS of dev-best" in out
    assert "bin_low\tbin_high\tcount" in dist.read_text()
    assert cli.main(["simulate", "--scores", str(table), "--k", "30", "--reps", "10"]) == 2


def test_simulate_bucket_enumeration(tmp_path, capsys):
    tables = []
    for l in range(3):
        p = tmp_path / f"l{l}.tsv"
        p.write_text("".join(f"l{l}m{k}\t{k}\n" for k in range(32)))
        tables.append(str(p))
    out = tmp_path / "triples.tsv"
    assert cli.main(["simulate", "--learner-scores", *tables, "--output", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 4096


def test_ingest(tmp_path, capsys):
    src = tmp_path / "raw.txt"
    src.write_text("a b c d e\na b c d e\nshort\n" + " ".join(["x"] * 41) + "\nf g h i j k\n")
    out = tmp_path / "pool.txt"
    assert cli.main(["ingest", str(src), "--output", str(out), "--min-len", "5",
                     "--max-len", "40"]) == 0
    assert sorted(out.read_text().splitlines()) == ["a b c d e", "f g h i j k"]
    conllu = tmp_path / "pool.conllu"
    assert cli.main(["ingest", str(src), "--output", str(conllu)]) == 0
    assert len(read_conllu(conllu)) == 2


def test_learner_check_mock_and_failure(capsys):
    assert cli.main(["learner-check"]) == 0
    assert capsys.readouterr().out.startswith("OK")
    assert cli.main(["learner-check", "--cmd", "python3 -c 'import sys; sys.exit(1)'"]) == 3


def test_list_presets(capsys):
    assert cli.main(["tritrain", "--list-presets"]) == 0
    out = capsys.readouterr().out
    assert "A80-T8-d0.5\tA=80000\tT=8\td=0.5\to=0" in out
    assert "[mbert-variant]" in out and "d=0.71" in out


def test_tritrain_manifest_and_preset(tmp_path, small_treebank, capsys):
    data = tmp_path / "data"
    data.mkdir()
    save_conllu(small_treebank.train, data / "train.conllu")
    save_conllu(small_treebank.dev, data / "dev.conllu")
    save_conllu(small_treebank.dev, data / "test.conllu")
    (data / "pool.txt").write_text("\n".join(small_treebank.pool_lines[:300]) + "\n")
    manifest = {
        "config": {"learner": {"epochs": 1}, "combiner_repeats": 1},
        "data": {k: str(data / f) for k, f in (("train", "train.conllu"), ("dev", "dev.conllu"),
                                               ("test", "test.conllu"),
                                               ("unlabelled", "pool.txt"))},
        "preset": "A80-T8-d0.5",
        "output": str(tmp_path / "run"),
    }
    (tmp_path / "m.json").write_text(json.dumps(manifest))
    # flags override the preset
    assert cli.main(["tritrain", "--manifest", str(tmp_path / "m.json"), "--A", "300", "--T", "1",
                     "--seed", "2"]) == 0
    out = capsys.readouterr().out
    assert "selected iteration" in out and "test LAS" in out
    saved = json.loads((tmp_path / "run" / "config.json").read_text())
    assert (saved["A"], saved["T"], saved["d"], saved["master_seed"]) == (300, 1, 0.5, 2)
    assert (tmp_path / "run" / "pred-test.conllu").exists()


def test_tritrain_bad_manifest(tmp_path):
    (tmp_path / "m.json").write_text(json.dumps({"bogus": 1}))
    assert cli.main(["tritrain", "--manifest", str(tmp_path / "m.json")]) == 1
    g = write(tmp_path / "g.conllu", [tree([0, 1])])
    paths = {"train": g, "dev": g, "unlabelled": g}
    (tmp_path / "m.json").write_text(json.dumps({"config": {"nope": 1}, "output": "x",
                                                 "data": paths}))
    assert cli.main(["tritrain", "--manifest", str(tmp_path / "m.json")]) == 1
    (tmp_path / "m.json").write_text(json.dumps({"config": {"A": -5}, "output": "x",
                                                 "data": paths}))
    assert cli.main(["tritrain", "--manifest", str(tmp_path / "m.json")]) == 2
    missing = dict(paths, dev=str(tmp_path / "missing.conllu"))
    (tmp_path / "m.json").write_text(json.dumps({"output": "x", "data": missing}))
    assert cli.main(["tritrain", "--manifest", str(tmp_path / "m.json")]) == 2
