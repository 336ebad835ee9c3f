import random

from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_tree
from tritrain.analysis import ScoredModelPool, exact_best_of_mean
from tritrain.conllu import Corpus, Sentence, parse_conllu, write_conllu
from tritrain.ensemble import combine_trees
from tritrain.learner import replay, static_oracle
from tritrain.metrics import exact_binomial_p
from tritrain.tritraining import decay_cap

form = st.text(alphabet=st.characters(blacklist_categories=("Cs", "Cc", "Zs", "Zl", "Zp")),
               min_size=1, max_size=6).filter(lambda f: f.strip() == f and f != "_")


@st.composite
def trees(draw, max_len=8):
    n = draw(st.integers(1, max_len))
    rng = random.Random(draw(st.integers(0, 2**32)))
    forms = draw(st.lists(form, min_size=n, max_size=n))
    return random_tree(rng, n, forms)


@given(st.lists(trees(), min_size=1, max_size=4))
def test_conllu_round_trip(sents):
    data = write_conllu(Corpus(sents))
    again = parse_conllu(data)
    assert again.sentences == sents
    assert write_conllu(again) == data


@given(st.integers(2, 9), st.integers(0, 2**32))
def test_combination_always_a_tree(n, seed):
    rng = random.Random(seed)
    forms = [f"w{i}" for i in range(n)]
    ts = [random_tree(rng, n, forms) for _ in range(rng.choice([2, 3, 5]))]
    assert combine_trees(ts, rng).is_tree()


@given(trees(max_len=9))
def test_projective_trees_replay(sent):
    if sent.is_projective():
        assert replay(len(sent), static_oracle(sent.heads, sent.deprels)) == \
            (list(sent.heads), list(sent.deprels))


@given(st.integers(0, 40), st.integers(0, 40))
def test_exact_p_symmetric_and_bounded(b, c):
    p = exact_binomial_p(b, c)
    assert p == exact_binomial_p(c, b)
    assert 0 < p <= 1


@given(st.integers(1, 10**6), st.sampled_from([0.0, 0.1, 0.5, 0.71, 0.9, 1.0]), st.integers(0, 12))
def test_decay_cap_bounds(A, d, age):
    cap = decay_cap(A, d, age)
    assert 0 <= cap <= A
    if age:
        assert cap <= decay_cap(A, d, age - 1)


@given(st.lists(st.floats(0, 100), min_size=1, max_size=60), st.integers(1, 16))
def test_bucket_partition_preserves_models(scores, k):
    models = [(i, s) for i, s in enumerate(scores)]
    buckets = ScoredModelPool([models], k).buckets(0)
    flat = [m for b in buckets for m in b]
    assert sorted(flat) == sorted(models)
    sizes = [len(b) for b in buckets]
    assert max(sizes) - min(sizes) <= 1


@settings(max_examples=50)
@given(st.lists(st.floats(0, 100), min_size=1, max_size=8))
def test_best_of_monotone_in_k(pool):
    means = [exact_best_of_mean(pool, k) for k in range(1, len(pool) + 1)]
    assert all(a <= b + 1e-9 for a, b in zip(means, means[1:]))
