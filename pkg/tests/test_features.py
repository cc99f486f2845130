import networkx as nx
import numpy as np
import pytest

import oracles
from xmembed.features import (
    ALL_FEATURES, DEFAULT_FEATURES, FeatureMatrix, SenseFeatures, betweenness, burt_constraint,
    check_feature_set, default_katz_alpha, eccentricity, ego_net_edges, feature_correlations,
    katz_centrality, leading_eigenvalue, normalize_features, personalized_pagerank,
    personalized_pagerank_matrix, positional_features, sense_features, structural_features,
)
from xmembed.graph import Graph, barbell, complete_graph, karate, local_clustering, path_graph

SUITE = oracles.graph_suite()


def test_suite_is_large_enough():
    assert len(SUITE) >= 200
    assert max(g.n for g in SUITE) <= 12


def test_katz_matches_dense_solve_on_suite():
    worst = 0.0
    for g in SUITE:
        A = g.dense_adjacency()
        lam = np.linalg.eigvalsh(A).max()
        alpha = 0.85 / lam
        worst = max(worst, np.abs(katz_centrality(g, alpha) - oracles.katz(A, alpha)).max())
    assert worst <= 1e-8


def test_default_katz_alpha_uses_spectral_radius():
    for g in SUITE[::10]:
        lam = np.linalg.eigvalsh(g.dense_adjacency()).max()
        assert leading_eigenvalue(g) == pytest.approx(lam, rel=1e-6)
        assert default_katz_alpha(g) < 1 / lam


def test_betweenness_matches_path_enumeration_on_suite():
    for g in SUITE:
        exact = oracles.betweenness(g.dense_adjacency())
        got = betweenness(g)
        assert np.abs(got - np.array([float(x) for x in exact])).max() < 1e-12


def test_ppr_matches_stationary_solve_on_suite():
    worst = 0.0
    for g in SUITE:
        ref = oracles.ppr_matrix(g.dense_adjacency())
        worst = max(worst, np.abs(personalized_pagerank_matrix(g) - ref).max())
        fm = structural_features(g, ["ppr_mean", "ppr_std"])
        assert np.allclose(fm.column("ppr_std"), ref.std(axis=1), atol=1e-6)
        assert np.allclose(fm.column("ppr_mean"), 1.0 / g.n)
    assert worst <= 1e-6


def test_eccentricity_matches_all_pairs_on_suite():
    for g in SUITE:
        assert np.array_equal(eccentricity(g), oracles.eccentricity(g.dense_adjacency()))


def test_local_features_match_loops_on_suite():
    for g in SUITE[::3]:
        A = g.dense_adjacency()
        assert np.allclose(local_clustering(g), oracles.clustering(A), atol=1e-12)
        assert np.allclose(burt_constraint(g), oracles.burt(A), atol=1e-12)
        assert np.array_equal(ego_net_edges(g), oracles.ego_edges(A))


def test_centralities_match_networkx():
    for g in SUITE[::7]:
        h = nx.Graph(list(map(tuple, g.edges())))
        h.add_nodes_from(range(g.n))
        fm = structural_features(g, "all")
        order = range(g.n)
        pr = nx.pagerank(h, alpha=0.85, tol=1e-13, max_iter=10_000)
        assert np.allclose(fm.column("pagerank"), [pr[v] for v in order], atol=1e-8)
        dc = nx.degree_centrality(h)
        assert np.allclose(fm.column("degree_centrality"), [dc[v] for v in order])
        nd = nx.average_neighbor_degree(h)
        assert np.allclose(fm.column("avg_neighbor_degree"), [nd[v] for v in order])
        bc = nx.constraint(h)
        assert np.allclose(fm.column("burt_constraint"), [bc[v] for v in order])
        A = g.dense_adjacency()
        w, V = np.linalg.eigh(A)
        lead = np.abs(V[:, -1])
        if w[-1] - w[-2] > 1e-3:
            assert np.allclose(fm.column("eigenvector"), lead, atol=1e-6)


# worked examples


def test_ppr_k2():
    g = complete_graph(2)
    assert np.allclose(personalized_pagerank(g, 0), [1 / 1.85, 0.85 / 1.85], atol=1e-6)
    assert np.allclose(personalized_pagerank(g, 0), [0.5405, 0.4595], atol=1e-4)


def test_ppr_isolated_source_keeps_mass():
    g = Graph.from_edges(3, [(0, 1)])
    assert np.allclose(personalized_pagerank(g, 2), [0, 0, 1])


def test_katz_k2_symmetric():
    assert np.allclose(katz_centrality(complete_graph(2), alpha=0.4), [2 ** -0.5] * 2)


def test_katz_p3_against_solve():
    # x1 = 1 + 0.1 x2 and x2 = 1 + 0.2 x1 give x = (1.1, 1.2, 1.1) / 0.98
    x = katz_centrality(path_graph(3), alpha=0.1)
    ref = np.array([1.1, 1.2, 1.1]) / 0.98
    assert np.allclose(x, ref / np.linalg.norm(ref), atol=1e-10)


def test_katz_divergent_alpha_raises():
    with pytest.raises(ArithmeticError, match="alpha"):
        katz_centrality(complete_graph(4), alpha=0.5)


def test_burt_triangle():
    assert np.allclose(burt_constraint(complete_graph(3)), 1.125)


def test_betweenness_star_and_path():
    assert betweenness(path_graph(3)).tolist() == [0, 1, 0]
    assert betweenness(complete_graph(4)).tolist() == [0, 0, 0, 0]


def test_betweenness_parallel_matches_serial():
    g = karate()
    assert np.allclose(betweenness(g, n_jobs=2), betweenness(g))


def test_eccentricity_disconnected_per_component():
    g = Graph.from_edges(5, [(0, 1), (1, 2), (3, 4)])
    assert eccentricity(g).tolist() == [2, 1, 2, 1, 1]


# feature sets and normalization


def test_feature_set_names():
    assert len(ALL_FEATURES) == 15 and len(DEFAULT_FEATURES) == 7
    assert check_feature_set("degree, katz") == ("degree", "katz")
    with pytest.raises(ValueError, match="valid names"):
        check_feature_set(["degree", "nope"])
    with pytest.raises(ValueError):
        check_feature_set("degree,degree")


def test_karate_default_shape_and_range():
    fm = sense_features(karate())
    assert fm.shape == (34, 7) and fm.names == DEFAULT_FEATURES
    assert fm.values.min() == 0 and fm.values.max() == 1
    assert np.all(fm.values.min(axis=0) == 0) and np.all(fm.values.max(axis=0) == 1)


def test_all_features_supported():
    fm = structural_features(karate(), "all")
    assert fm.shape == (34, 15)
    assert np.array_equal(fm.column("weighted_degree"), fm.column("degree"))
    assert fm.flags.get("ppr_mean_constant")


def test_normalize_affine_and_constant():
    fm = FeatureMatrix(np.array([[2.0, 3.0], [4.0, 3.0], [6.0, 3.0]]), ["a", "b"])
    out = normalize_features(fm)
    assert out.values[:, 0].tolist() == [0, 0.5, 1]
    assert out.values[:, 1].tolist() == [0.5, 0.5, 0.5]
    assert out.flags["constant_columns"] == ["b"]


def test_normalize_idempotent():
    once = sense_features(karate())
    twice = normalize_features(once)
    assert np.array_equal(once.values, twice.values)


def test_positional_barbell():
    g = barbell(5, 0)
    fm = positional_features(g, [0, 9])
    assert fm.names == ("hops_to_0", "ppr_of_0", "hops_to_9", "ppr_of_9")
    assert fm.column("hops_to_0")[9] == 3
    assert fm.column("hops_to_0")[4] == 1


def test_positional_unreachable_anchor_flagged():
    g = Graph.from_edges(4, [(0, 1), (2, 3)])
    fm = positional_features(g, [0])
    assert fm.flags["unreachable_anchor"]
    assert np.all(np.isfinite(fm.values))


def test_sense_features_transformer():
    est = SenseFeatures()
    X = est.fit_transform(karate())
    assert X.shape == (34, 7)
    assert list(est.get_feature_names_out()) == list(DEFAULT_FEATURES)
    assert np.array_equal(est.transform(karate()), X)
    assert SenseFeatures(anchors=[0, 33]).fit_transform(karate()).shape == (34, 11)


def test_n_jobs_does_not_change_output():
    a = sense_features(karate(), "all")
    b = sense_features(karate(), "all", n_jobs=2)
    assert np.allclose(a.values, b.values, atol=1e-12)


def test_csv_roundtrip():
    import io
    fm = sense_features(karate())
    back = FeatureMatrix.from_csv(io.StringIO(fm.to_csv()))
    assert back.names == fm.names and np.array_equal(back.values, fm.values)


def test_correlations_constant_column_zero():
    x = np.column_stack([np.arange(5.0), np.ones(5), np.arange(5.0) ** 2])
    c = feature_correlations(x)
    assert c[0, 1] == 0 and c[0, 0] == 1 and 0.9 < c[0, 2] <= 1
