import random

import pytest

from tritrain.conllu import (ConlluError, Corpus, PoolFilterSpec, Sentence, TreeValidationError,
                             ingest_unlabelled, is_projective, parse_conllu, read_conllu,
                             sample_corpus, save_conllu, tree_errors, write_conllu)

DOC = """# sent_id = 1
# text = The dog barks .
1\tThe\tthe\tDET\tDT\tDefinite=Def\t2\tdet\t_\t_
2\tdog\tdog\tNOUN\tNN\tNumber=Sing\t3\tnsubj\t_\t_
3\tbarks\tbark\tVERB\tVBZ\t_\t0\troot\t_\tSpaceAfter=No
4\t.\t.\tPUNCT\t.\t_\t3\tpunct\t_\t_

1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_
1\tdo\tdo\tAUX\t_\t_\t3\taux\t_\t_
2\tn't\tnot\tPART\t_\t_\t3\tadvmod\t_\t_
3\tgo\tgo\tVERB\t_\t_\t0\troot\t_\t_
3.1\tgone\t_\t_\t_\t_\t_\t_\t_\t_

"""


def test_round_trip_is_byte_identical():
    corpus = parse_conllu(DOC)
    assert len(corpus) == 2
    assert write_conllu(corpus) == DOC.encode("utf-8")


def test_multiword_lines_do_not_count_as_tokens():
    sent = parse_conllu(DOC)[1]
    assert sent.forms == ("do", "n't", "go")
    assert sent.token_count == 3


def test_columns_and_tokens():
    sent = parse_conllu(DOC)[0]
    assert sent.column("head") == (2, 3, 0, 3)
    assert sent.column("deprel")[2] == "root"
    assert sent.tokens[1].form == "dog"
    assert sent.key() == "The dog barks ."


def test_file_round_trip(tmp_path):
    path = tmp_path / "x.conllu"
    corpus = parse_conllu(DOC)
    save_conllu(corpus, path)
    assert read_conllu(path).sentences == corpus.sentences


@pytest.mark.parametrize("bad, message", [
    ("1\ta\t_\t_\t_\t_\t0\troot\t_\n\n", "10 tab-separated"),
    ("1\ta\t_\t_\t_\t_\tx\troot\t_\t_\n\n", "non-numeric head"),
    ("2\ta\t_\t_\t_\t_\t0\troot\t_\t_\n\n", "out of sequence"),
])
def test_malformed_lines_report_line_number(bad, message):
    with pytest.raises(ConlluError) as info:
        parse_conllu(bad)
    assert message in str(info.value)
    assert info.value.line_no == 1


def test_head_out_of_range_and_self_loop():
    with pytest.raises(TreeValidationError):
        parse_conllu("1\ta\t_\t_\t_\t_\t5\troot\t_\t_\n\n")
    with pytest.raises(TreeValidationError):
        parse_conllu("1\ta\t_\t_\t_\t_\t1\troot\t_\t_\n\n")


def test_tree_errors():
    assert tree_errors([0, 1, 2]) is None
    assert tree_errors([0, 0]) == "2 roots"
    assert tree_errors([2, 3, 2, 0]).startswith("cycle")
    assert tree_errors([]) == "empty sentence"


def test_projectivity():
    assert is_projective([2, 0, 2])
    # 1 -> 3 and 2 -> 4 cross
    assert not is_projective([3, 4, 0, 3])


def test_strip_keeps_forms_only():
    stripped = parse_conllu(DOC).strip()
    s = stripped[0]
    assert s.forms == ("The", "dog", "barks", ".")
    assert set(s.heads) == {0}
    assert set(s.upos) == {"_"}
    assert stripped.origin == "unlabelled"


def test_replace_swaps_named_columns():
    s = parse_conllu(DOC)[0]
    r = s.replace(head=[0, 1, 2, 3])
    assert r.heads == (0, 1, 2, 3)
    assert r.forms == s.forms and r.comments == s.comments


def test_sentence_rejects_ragged_columns():
    with pytest.raises(ValueError):
        Sentence(["a", "b"], heads=[0])


def _lines(rng, n):
    out = []
    for _ in range(n):
        k = rng.randint(1, 50)
        out.append(" ".join(f"t{rng.randint(0, 30)}" for _ in range(k)))
    return out


def test_ingest_filters_length_and_dedups(rng):
    lines = _lines(rng, 3000)
    pool = ingest_unlabelled(lines, PoolFilterSpec(min_len=5, max_len=40, shuffle_seed=1))
    keys = [s.key() for s in pool]
    assert len(keys) == len(set(keys))
    assert all(5 <= len(s) <= 40 for s in pool)
    expected = {" ".join(l.split()) for l in lines if 5 <= len(l.split()) <= 40}
    assert set(keys) == expected


def test_ingest_keeps_duplicates_when_asked():
    lines = ["a b c d e"] * 3
    assert len(ingest_unlabelled(lines, PoolFilterSpec(dedup=False))) == 3
    assert len(ingest_unlabelled(lines)) == 1


def test_ingest_drops_oversized_tokens():
    long_token = "x" * 201
    lines = [f"a b c d {long_token}", "a b c d " + "é" * 100, "a b c d " + "é" * 101]
    kept = {s.key() for s in ingest_unlabelled(lines)}
    assert kept == {"a b c d " + "é" * 100}


def test_ingest_shuffle_depends_only_on_seed(rng):
    lines = _lines(rng, 500)
    a = ingest_unlabelled(lines, PoolFilterSpec(shuffle_seed=7))
    b = ingest_unlabelled(lines, PoolFilterSpec(shuffle_seed=7))
    c = ingest_unlabelled(lines, PoolFilterSpec(shuffle_seed=8))
    assert [s.key() for s in a] == [s.key() for s in b]
    assert [s.key() for s in a] != [s.key() for s in c]


def test_ingest_fraction(rng):
    lines = [f"s{k} b c d e" for k in range(2000)]
    pool = ingest_unlabelled(lines, PoolFilterSpec(fraction=0.25, shuffle_seed=3))
    assert 400 < len(pool) < 600


def test_pool_filter_spec_validation():
    with pytest.raises(ValueError):
        PoolFilterSpec(min_len=10, max_len=5)
    with pytest.raises(ValueError):
        PoolFilterSpec(fraction=0.0)


def test_sample_corpus_budget_and_determinism():
    corpus = Corpus([Sentence([f"w{k}"] * (k % 7 + 1)) for k in range(200)])
    a = sample_corpus(corpus, 100, seed=5)
    assert a.token_total <= 100
    assert [s.key() for s in a] == [s.key() for s in sample_corpus(corpus, 100, seed=5)]
    # greedy: stops before the first overflowing sentence
    order = list(range(200))
    random.Random(5).shuffle(order)
    total, expected = 0, []
    for k in order:
        if total + len(corpus[k]) > 100:
            break
        expected.append(corpus[k])
        total += len(corpus[k])
    assert a.sentences == expected


def test_sample_corpus_rejects_duplicates():
    corpus = Corpus([Sentence(["a", "b"]) for _ in range(10)] + [Sentence(["c"])])
    picked = sample_corpus(corpus, 100, seed=0, reject_duplicates=True)
    assert sorted(s.key() for s in picked) == ["a b", "c"]


def test_sample_corpus_rejects_bad_budget():
    with pytest.raises(ValueError):
        sample_corpus(Corpus([]), 0, seed=0)
