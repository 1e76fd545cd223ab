import math
import random

import numpy as np
import pytest

from jobstd.features import NUM_FEATURES, FeatureVector, MarketStats, SentenceEncoder
from jobstd.ranker import (
    DegenerateData,
    GbdtModel,
    LinearModel,
    QuestionClassifier,
    SchemaMismatch,
    TrainingExample,
    TreeNode,
    classify_sentence,
    evaluate,
    linear_loss_and_grad,
    load_model,
    model_from_dict,
    model_to_dict,
    rank,
    save_model,
    score_gbdt,
    score_linear,
    suggest_questions,
    train_gbdt,
    train_linear,
    train_question_classifier,
    training_log_loss,
)
from jobstd.sampledata import generate_labeled_sentences
from jobstd.tagger import EntityType, JobPosting


def fv(**kw):
    return FeatureVector(**kw)


def random_fv(rng):
    return FeatureVector.from_list([rng.uniform(-2, 2) for _ in range(NUM_FEATURES)])


def make_examples(rng, n=200, sep_feature="ngram_sim"):
    """Linearly separable toy data on one feature."""
    out = []
    for _ in range(n):
        label = rng.randint(0, 1)
        value = rng.uniform(0.6, 1.0) if label else rng.uniform(0.0, 0.4)
        out.append(TrainingExample(features=fv(**{sep_feature: value}), label=label))
    return out


# --- score_linear ------------------------------------------------------------


def test_score_linear_zero_model():
    m = LinearModel(weights=np.zeros(NUM_FEATURES), bias=0.0)
    assert score_linear(m, fv(ngram_sim=0.3)) == 0.5


def test_score_linear_single_weight():
    w = np.zeros(NUM_FEATURES)
    w[0] = 1.0  # ngram_sim
    m = LinearModel(weights=w, bias=0.0)
    assert score_linear(m, fv(ngram_sim=0.0, acceptance_rate_smoothed=0.9)) == 0.5


def test_score_linear_random_oracle():
    rng = random.Random(3)
    for _ in range(20):
        w = np.array([rng.uniform(-1, 1) for _ in range(NUM_FEATURES)])
        b = rng.uniform(-1, 1)
        x = random_fv(rng)
        m = LinearModel(weights=w, bias=b)
        expected = 1.0 / (1.0 + math.exp(-(sum(wi * xi for wi, xi in zip(w, x.to_list())) + b)))
        assert abs(score_linear(m, x) - expected) < 1e-12


def test_score_linear_schema_mismatch():
    m = LinearModel(weights=np.zeros(NUM_FEATURES), bias=0.0, schema_version=99)
    with pytest.raises(SchemaMismatch):
        score_linear(m, fv())


# --- train_linear ------------------------------------------------------------


def test_train_linear_separable():
    rng = random.Random(7)
    data = make_examples(rng)
    model = train_linear(data, epochs=500)
    acc = evaluate(model, data)["accuracy"]
    assert acc == 1.0


def test_train_linear_degenerate():
    with pytest.raises(DegenerateData):
        train_linear([TrainingExample(features=fv(), label=1)] * 5)


def test_linear_gradient_matches_finite_differences():
    rng = random.Random(12)
    data = make_examples(rng, n=40)
    x = np.array([ex.features.to_list() for ex in data])
    y = np.array([ex.label for ex in data], dtype=float)
    w_arr = np.array([ex.weight for ex in data])
    eps = 1e-5
    for _ in range(20):
        weights = np.array([rng.uniform(-1, 1) for _ in range(NUM_FEATURES)])
        bias = rng.uniform(-1, 1)
        _, gw, gb = linear_loss_and_grad(weights, bias, x, y, w_arr, l2=1e-3)
        for idx in rng.sample(range(NUM_FEATURES), 4):
            wp, wm = weights.copy(), weights.copy()
            wp[idx] += eps
            wm[idx] -= eps
            lp, _, _ = linear_loss_and_grad(wp, bias, x, y, w_arr, l2=1e-3)
            lm, _, _ = linear_loss_and_grad(wm, bias, x, y, w_arr, l2=1e-3)
            numeric = (lp - lm) / (2 * eps)
            assert abs(gw[idx] - numeric) / max(1.0, abs(numeric)) < 1e-6
        lp, _, _ = linear_loss_and_grad(weights, bias + eps, x, y, w_arr, l2=1e-3)
        lm, _, _ = linear_loss_and_grad(weights, bias - eps, x, y, w_arr, l2=1e-3)
        assert abs(gb - (lp - lm) / (2 * eps)) / max(1.0, abs(gb)) < 1e-6


def test_train_linear_loss_never_exceeds_init(seed_corpus):
    _, examples = seed_corpus
    data = examples[EntityType.SKILL]
    x = np.array([ex.features.to_list() for ex in data])
    y = np.array([ex.label for ex in data], dtype=float)
    w = np.array([ex.weight for ex in data])
    init_loss, _, _ = linear_loss_and_grad(np.zeros(NUM_FEATURES), 0.0, x, y, w, 1e-4)
    model = train_linear(data)
    final_loss, _, _ = linear_loss_and_grad(model.weights, model.bias, x, y, w, 1e-4)
    assert final_loss <= init_loss


def test_train_linear_deterministic(seed_corpus):
    _, examples = seed_corpus
    a = train_linear(examples[EntityType.COMPANY])
    b = train_linear(examples[EntityType.COMPANY])
    assert np.array_equal(a.weights, b.weights) and a.bias == b.bias


# --- score_gbdt --------------------------------------------------------------


def test_score_gbdt_zero_trees():
    m = GbdtModel(trees=[], learning_rate=0.1, base_score=0.4)
    assert abs(score_gbdt(m, fv()) - 1 / (1 + math.exp(-0.4))) < 1e-12


def test_score_gbdt_single_stump():
    stump = TreeNode(feature=0, threshold=0.5, left=TreeNode(value=-1.0), right=TreeNode(value=2.0))
    m = GbdtModel(trees=[stump], learning_rate=0.5, base_score=0.0)
    # ngram_sim=0.3 goes left: margin = 0 + 0.5*(-1)
    assert abs(score_gbdt(m, fv(ngram_sim=0.3)) - 1 / (1 + math.exp(0.5))) < 1e-12
    assert abs(score_gbdt(m, fv(ngram_sim=0.9)) - 1 / (1 + math.exp(-1.0))) < 1e-12


def random_tree(rng, depth):
    if depth == 0 or rng.random() < 0.3:
        return TreeNode(value=rng.uniform(-2, 2))
    return TreeNode(
        feature=rng.randrange(NUM_FEATURES),
        threshold=rng.uniform(-1, 1),
        left=random_tree(rng, depth - 1),
        right=random_tree(rng, depth - 1),
    )


def walk_tree_oracle(node, xs):
    while not node.is_leaf:
        node = node.left if xs[node.feature] < node.threshold else node.right
    return node.value


def test_score_gbdt_random_tree_walk_oracle():
    rng = random.Random(21)
    trees = [random_tree(rng, 3) for _ in range(10)]
    m = GbdtModel(trees=trees, learning_rate=0.1, base_score=-0.2)
    for _ in range(50):
        x = random_fv(rng)
        xs = x.to_list()
        margin = -0.2 + 0.1 * sum(walk_tree_oracle(t, xs) for t in trees)
        expected = 1 / (1 + math.exp(-margin))
        assert abs(score_gbdt(m, x) - expected) < 1e-12


# --- train_gbdt --------------------------------------------------------------


def test_train_gbdt_perfect_split_first_tree():
    rng = random.Random(2)
    data = make_examples(rng, n=100)
    model = train_gbdt(data, num_trees=1, max_depth=2, min_leaf=5)
    preds = [score_gbdt(model, ex.features) >= 0.5 for ex in data]
    assert all(p == bool(ex.label) for p, ex in zip(preds, data))


def test_train_gbdt_zero_trees_prior():
    rng = random.Random(2)
    data = make_examples(rng, n=50)
    model = train_gbdt(data, num_trees=0)
    p = sum(ex.label for ex in data) / len(data)
    assert abs(score_gbdt(model, random_fv(rng)) - p) < 1e-9


def test_train_gbdt_loss_monotone_and_beats_constant(seed_corpus):
    _, examples = seed_corpus
    data = examples[EntityType.SKILL][:500]
    model = train_gbdt(data, num_trees=50)
    losses = [training_log_loss(model, data, upto=i) for i in range(51)]
    for a, b in zip(losses, losses[1:]):
        assert b <= a + 1e-12
    # best constant predictor baseline
    y = np.array([ex.label for ex in data], dtype=float)
    w = np.array([ex.weight for ex in data])
    p = np.clip(np.sum(w * y) / np.sum(w), 1e-15, 1 - 1e-15)
    constant_loss = float(np.sum(-w * (y * np.log(p) + (1 - y) * np.log(1 - p))) / np.sum(w))
    assert losses[-1] < constant_loss


def test_train_gbdt_max_depth_respected(seed_corpus):
    _, examples = seed_corpus
    model = train_gbdt(examples[EntityType.COMPANY], num_trees=10, max_depth=3)
    assert all(t.depth() <= 3 for t in model.trees)


def test_train_gbdt_deterministic(seed_corpus):
    _, examples = seed_corpus
    data = examples[EntityType.COMPANY]
    a = train_gbdt(data, num_trees=10)
    b = train_gbdt(data, num_trees=10)
    assert model_to_dict(a) == model_to_dict(b)


# --- rank --------------------------------------------------------------------


def test_rank_single_candidate():
    m = LinearModel(weights=np.zeros(NUM_FEATURES), bias=0.0)
    out = rank(m, [((EntityType.SKILL, "a"), fv())], k=5)
    assert len(out) == 1 and out[0].rank == 1 and out[0].entity_id == "a"


def test_rank_tie_breaks_by_entity_id():
    m = LinearModel(weights=np.zeros(NUM_FEATURES), bias=0.0)
    cands = [((EntityType.SKILL, eid), fv()) for eid in ["c", "a", "b"]]
    out = rank(m, cands, k=3)
    assert [s.entity_id for s in out] == ["a", "b", "c"]
    assert [s.rank for s in out] == [1, 2, 3]


def test_rank_sort_then_truncate_oracle():
    rng = random.Random(4)
    w = np.array([rng.uniform(-1, 1) for _ in range(NUM_FEATURES)])
    m = LinearModel(weights=w, bias=0.1)
    cands = [((EntityType.SKILL, f"e{i:02d}"), random_fv(rng)) for i in range(20)]
    out = rank(m, cands, k=7)
    oracle = sorted(
        ((eid, score_linear(m, x)) for (_, eid), x in cands), key=lambda t: (-t[1], t[0])
    )[:7]
    assert [(s.entity_id, s.score) for s in out] == oracle
    scores = [s.score for s in out]
    assert scores == sorted(scores, reverse=True)


def test_rank_empty():
    m = LinearModel(weights=np.zeros(NUM_FEATURES), bias=0.0)
    assert rank(m, [], k=3) == []


def test_rank_argmax_invariance_under_increasing_transform():
    # scale margins via 2*margin + 1: double weights/bias then add 1 to bias
    rng = random.Random(8)
    for trial in range(10):
        w = np.array([rng.uniform(-1, 1) for _ in range(NUM_FEATURES)])
        b = rng.uniform(-1, 1)
        base = LinearModel(weights=w, bias=b)
        transformed = LinearModel(weights=2 * w, bias=2 * b + 1)
        cands = [((EntityType.SKILL, f"e{i:02d}"), random_fv(rng)) for i in range(15)]
        a = [s.entity_id for s in rank(base, cands, k=15)]
        bb = [s.entity_id for s in rank(transformed, cands, k=15)]
        assert a == bb


# --- question classifier -----------------------------------------------------


def test_classifier_uniform_tie_rule():
    clf = QuestionClassifier(classes=["NONE", "q_a", "q_b"], class_weights=np.zeros((3, 4)), trained=True)
    t_table = __import__("jobstd.features", fromlist=["EmbeddingTable"]).EmbeddingTable(4)
    t_table.add_word("x", [1, 0, 0, 0])
    enc = SentenceEncoder(t_table)
    cls, prob = classify_sentence(clf, enc, "x")
    assert cls == "NONE"  # lexicographically first among sorted classes
    assert abs(prob - 1 / 3) < 1e-9


def test_classifier_probabilities_sum_to_one(taxonomy, table):
    sentences, labels = generate_labeled_sentences(taxonomy, 150, seed=5)
    clf, enc = train_question_classifier(sentences[:100], labels[:100], table, epochs=100)
    for s in sentences[100:]:
        p = clf.probabilities(enc.encode(s))
        assert abs(float(np.sum(p)) - 1.0) < 1e-9


def test_classifier_held_out_accuracy(taxonomy, table):
    sentences, labels = generate_labeled_sentences(taxonomy, 400, seed=3)
    clf, enc = train_question_classifier(sentences[:300], labels[:300], table)
    correct = sum(
        classify_sentence(clf, enc, s)[0] == l for s, l in zip(sentences[300:], labels[300:])
    )
    assert correct / 100 > 0.8


def test_classifier_untrained():
    clf = QuestionClassifier(classes=["NONE", "q"])
    with pytest.raises(Exception):
        clf.probabilities(np.zeros(4))


# --- suggest_questions -------------------------------------------------------


@pytest.fixture(scope="module")
def question_setup(taxonomy, table, seed_corpus):
    sentences, labels = generate_labeled_sentences(taxonomy, 300, seed=3)
    clf, enc = train_question_classifier(sentences, labels, table)
    _, examples = seed_corpus
    model = train_gbdt(examples[EntityType.QUESTION_TYPE], num_trees=30)
    return clf, enc, model


def test_suggest_questions_empty_description(taxonomy, question_setup):
    clf, enc, model = question_setup
    p = JobPosting(posting_id="p", raw_title="Engineer", description="")
    assert suggest_questions(p, clf, enc, model, MarketStats(), taxonomy) == []


def test_suggest_questions_single_template(taxonomy, question_setup):
    clf, enc, model = question_setup
    p = JobPosting(
        posting_id="p",
        raw_title="Engineer",
        description="How many years of work experience do you have with java?",
    )
    out = suggest_questions(p, clf, enc, model, MarketStats(), taxonomy)
    assert [s.entity_id for s in out] == ["q_years_experience"]
    assert out[0].rank == 1


def test_suggest_questions_cap_at_three(taxonomy, question_setup):
    clf, enc, model = question_setup
    templates = [e.attributes["template"].replace("{skill}", "java") for e in taxonomy.of_type(EntityType.QUESTION_TYPE)]
    p = JobPosting(posting_id="p", raw_title="Engineer", description=" ".join(templates))
    out = suggest_questions(p, clf, enc, model, MarketStats(), taxonomy)
    assert len(out) <= 3


# --- serialization -----------------------------------------------------------


def test_model_json_round_trip(tmp_path, seed_corpus):
    _, examples = seed_corpus
    for model in (train_linear(examples[EntityType.COMPANY]), train_gbdt(examples[EntityType.COMPANY], num_trees=5)):
        path = tmp_path / "m.json"
        save_model(model, path)
        again = load_model(path)
        x = examples[EntityType.COMPANY][0].features
        from jobstd.ranker import score_model

        assert score_model(again, x) == score_model(model, x)
        assert model_to_dict(model_from_dict(model_to_dict(model))) == model_to_dict(model)


def test_evaluate_metrics_sane(seed_corpus):
    _, examples = seed_corpus
    data = examples[EntityType.SKILL]
    model = train_linear(data)
    metrics = evaluate(model, data)
    assert set(metrics) == {"log_loss", "accuracy", "auc", "precision_at_k"}
    assert 0 <= metrics["accuracy"] <= 1
    assert 0 <= metrics["auc"] <= 1
