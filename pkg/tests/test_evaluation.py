import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ttest_ind

import oracles
from xmembed.embedders import LINE, SDNE
from xmembed.evaluation import (
    ABLATION_CONFIGS, EvalReport, LinkClassifier, ablation, auc, compare_link_prediction,
    edge_feature_matrix, edge_features, fold_seeds, make_split, norm_distribution,
    reports_to_csv, run_link_prediction, standard_error, train_link_classifier, welch_t,
)
from xmembed.graph import Graph, complete_graph, karate, path_graph, star_graph

rng = np.random.default_rng(5)


# AUC


def test_auc_examples():
    assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auc([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5
    assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [1, 1])


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.booleans()), min_size=2, max_size=20).filter(
    lambda xs: 0 < sum(y for _, y in xs) < len(xs)))
def test_auc_matches_pair_counting(pairs):
    scores = [s / 5 for s, _ in pairs]
    labels = [y for _, y in pairs]
    assert auc(scores, labels) == pytest.approx(oracles.auc_pairs(scores, labels), abs=1e-12)


# splits


def test_karate_split_sizes_and_invariants():
    g = karate()
    s = make_split(g, 0.6, seed=3)
    assert len(s.train_pos) in (46, 47)
    assert len(s.train_pos) + len(s.test_pos) == 78
    assert len(s.train_neg) == len(s.train_pos) and len(s.test_neg) == len(s.test_pos)
    train = {tuple(e) for e in s.train_pos.tolist()}
    test = {tuple(e) for e in s.test_pos.tolist()}
    assert not train & test
    assert {tuple(e) for e in s.train_graph.edges().tolist()} == train
    negs = np.vstack([s.train_neg, s.test_neg])
    assert not any(g.has_edge(u, v) for u, v in negs)
    assert len({tuple(e) for e in negs.tolist()}) == len(negs)
    assert np.all(s.train_graph.degree > 0)


def test_split_reproducible():
    a, b = make_split(karate(), 0.6, 11), make_split(karate(), 0.6, 11)
    for f in ("train_pos", "train_neg", "test_pos", "test_neg"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    c = make_split(karate(), 0.6, 12)
    assert not np.array_equal(a.train_pos, c.train_pos)


def test_split_errors():
    with pytest.raises(ValueError, match="dense"):
        make_split(complete_graph(5), 0.6, 0)
    with pytest.raises(ValueError):
        make_split(karate(), 1.0, 0)


def test_split_repair_and_impossible_cover():
    # ten pendant leaves on a 10-cycle: all pendant edges must land in training
    edges = [(i, (i + 1) % 10) for i in range(10)] + [(i, 10 + i) for i in range(10)]
    g = Graph.from_edges(20, edges)
    repaired = []
    for seed in range(20):
        s = make_split(g, 0.8, seed=seed, max_resample=0)
        assert np.all(s.train_graph.degree > 0)
        assert len(s.train_pos) == 16 and len(s.test_pos) == 4
        repaired.append(s.repaired)
    assert sum(repaired) >= 10
    # a star cannot lose any edge
    with pytest.raises(ValueError, match="isolated"):
        make_split(star_graph(12), 0.7, seed=0, max_resample=3)


# edge features and classifier


def test_edge_feature_examples():
    Y = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    assert edge_features(Y, 0, 1, "hadamard").tolist() == [3, 8]
    assert edge_features(Y, 2, 2, "average").tolist() == [5, 6]
    assert np.array_equal(edge_features(Y, 0, 2), edge_features(Y, 2, 0))
    assert edge_features(Y, 2, 0).tolist() == [1, 2, 5, 6]
    with pytest.raises(ValueError):
        edge_feature_matrix(Y, [[0, 1]], "max")


def test_classifier_separable():
    X = np.vstack([rng.normal(-2, 0.5, (40, 3)), rng.normal(2, 0.5, (40, 3))])
    y = np.r_[np.zeros(40), np.ones(40)]
    clf = train_link_classifier(X, y, epochs=500)
    assert (clf.predict(X) == y).mean() == 1.0
    assert np.allclose(clf.predict_proba(X).sum(axis=1), 1)


def test_classifier_shuffled_labels_near_chance():
    X = rng.normal(size=(4000, 8))
    y = rng.permutation(np.r_[np.zeros(2000), np.ones(2000)])
    clf = LinkClassifier(random_state=0).fit(X[:2000], y[:2000])
    assert abs(auc(clf.decision_function(X[2000:]), y[2000:]) - 0.5) <= 0.05


def test_classifier_deterministic_and_errors():
    X, y = rng.normal(size=(20, 2)), np.r_[np.zeros(10), np.ones(10)]
    a = LinkClassifier(random_state=4).fit(X, y)
    b = LinkClassifier(random_state=4).fit(X, y)
    assert all(np.array_equal(p, q) for p, q in zip(a.coefs_, b.coefs_))
    with pytest.raises(ValueError):
        LinkClassifier().fit(X, np.zeros(20))
    with pytest.raises(ValueError):
        LinkClassifier().fit(X[:11], np.r_[np.zeros(10), np.ones(1)])


# statistics


def test_welch_examples():
    a = rng.normal(size=10)
    assert welch_t(a, a.copy()) == pytest.approx(1.0, abs=1e-9)
    far = welch_t(rng.normal(0, 1, 30), rng.normal(10, 1, 30))
    assert far < 1e-10
    assert welch_t([1, 2, 3, 4, 5], [2, 3, 4, 5, 6]) == pytest.approx(0.347, abs=1e-3)
    assert welch_t([2, 2, 2], [2, 2, 2]) == 1.0
    with pytest.raises(ValueError):
        welch_t([1], [1, 2])


def test_welch_matches_scipy_and_is_symmetric():
    for _ in range(200):
        a = rng.normal(rng.normal(), rng.uniform(0.1, 3), int(rng.integers(2, 30)))
        b = rng.normal(rng.normal(), rng.uniform(0.1, 3), int(rng.integers(2, 30)))
        ref = ttest_ind(a, b, equal_var=False).pvalue
        assert welch_t(a, b) == pytest.approx(ref, rel=1e-8, abs=1e-300)
        assert welch_t(a, b) == welch_t(b, a)


def test_standard_error():
    assert standard_error([1.0, 2.0, 3.0]) == pytest.approx(1 / np.sqrt(3))
    assert standard_error([5.0]) == 0.0


# norm reporting


def test_norm_distribution_shape_and_degenerate():
    Y = np.tile([1.0, 2.0, 0.5], (10, 1))
    F = np.tile([0.2, 0.9], (10, 1))
    nd = norm_distribution(Y, F)
    assert nd.norms.shape == (10,) and nd.degenerate
    nd = norm_distribution(rng.normal(size=(10, 3)), rng.random((10, 2)))
    assert not nd.degenerate and nd.se > 0


# full protocol


def test_karate_link_prediction_line():
    r = run_link_prediction(karate(), LINE(dim=16, order="second", epochs=5), folds=3, seed=0)
    assert len(r.aucs) == 3 and all(a > 0.5 for a in r.aucs)
    assert all(0 <= a <= 1 for a in r.aucs)
    assert r.auc_se == pytest.approx(np.std(r.aucs, ddof=1) / np.sqrt(3))
    assert len(r.epoch_seconds) == 15


def test_link_prediction_deterministic():
    est = LINE(dim=8, epochs=2)
    a = run_link_prediction(karate(), est, folds=2, seed=4)
    b = run_link_prediction(karate(), est, folds=2, seed=4)
    assert a.to_json() == b.to_json()
    assert "epoch_seconds" not in json.loads(a.to_json())
    assert "seconds_per_epoch" in json.loads(a.to_json(timings=True))


def test_compare_reports_p_value():
    base = SDNE(dim=8, hidden=(32,), epochs=50, learning_rate=0.005)
    xm = SDNE(dim=8, hidden=(32,), epochs=50, learning_rate=0.005, gamma=0.2, delta=0.2)
    r0, r1 = compare_link_prediction(karate(), [base, xm], folds=3, seed=1)
    assert r0.p_value is None and 0 <= r1.p_value <= 1
    assert r1.method == "sdne+xm" and r0.method == "sdne"
    text = reports_to_csv([r0, r1])
    assert text.splitlines()[0].split(",") == list(EvalReport.CSV_FIELDS)
    assert len(text.splitlines()) == 3


def test_link_prediction_errors():
    with pytest.raises(ValueError):
        run_link_prediction(karate(), LINE(), folds=1)
    with pytest.raises(ValueError):
        run_link_prediction(complete_graph(5), LINE(), folds=2)


def test_fold_seeds_distinct():
    s = fold_seeds(0, 5)
    assert len(set(s)) == 5 and s == fold_seeds(0, 5)


def test_ablation_table_shape():
    est = SDNE(dim=8, hidden=(16,), epochs=20, gamma=0.1, delta=0.1)
    r = ablation(karate(), est, seeds=[0, 1, 2])
    assert [row["config"] for row in r.table()] == list(ABLATION_CONFIGS)
    assert len(r.to_csv().splitlines()) == 5
    assert all(len(v) == 3 for v in r.per_seed.values())
    with pytest.raises(ValueError):
        ablation(karate(), est, seeds=[0, 1])


def test_ablation_zero_weights_indistinguishable():
    est = LINE(dim=8, order="second", epochs=2)
    r = ablation(karate(), est, seeds=[0, 1, 2])
    assert all(r.per_seed[c] == r.per_seed["none"] for c in ABLATION_CONFIGS)
    assert r.p_value("both", "none") == 1.0
