import json

import numpy as np
import pytest

from gnnaudit.graph import (
    DatasetMeta,
    GraphFormatError,
    average_degree,
    induced_subgraph,
    l_hop_neighborhood,
    label_homophily,
    load_graph,
    save_graph,
)

from conftest import CORA_DIR, make_graph, random_graph, requires_cora


def bfs_hops_oracle(g, v, hops):
    """Plain BFS over neighbor sets, independent of the library path."""
    dist = {v: 0}
    frontier = [v]
    while frontier:
        nxt = []
        for u in frontier:
            for w in g.neighbors(u):
                w = int(w)
                if w not in dist:
                    dist[w] = dist[u] + 1
                    nxt.append(w)
        frontier = nxt
    return {u for u, d in dist.items() if 1 <= d <= hops}


class TestConstruction:
    def test_reversed_and_duplicate_edges_collapse(self):
        g = make_graph(3, [(1, 0), (0, 1), (1, 2)])
        assert g.edge_count == 2
        assert g.edges.tolist() == [[0, 1], [1, 2]]

    def test_self_loop_rejected(self):
        with pytest.raises(GraphFormatError, match="self-loop"):
            make_graph(6, [(5, 5)])

    def test_label_out_of_range_rejected(self):
        with pytest.raises(GraphFormatError, match="label out of range"):
            make_graph(2, [(0, 1)], labels=[0, 7], num_classes=2)

    def test_neighbor_lists_sorted(self):
        g = make_graph(4, [(2, 0), (0, 3), (0, 1)])
        assert g.neighbors(0).tolist() == [1, 2, 3]

    def test_arrays_frozen(self, triangle):
        with pytest.raises(ValueError):
            triangle.edges[0, 0] = 5


class TestLoadSave:
    def test_round_trip_identical(self, tmp_path, miniset):
        save_graph(miniset, tmp_path / "copy", "miniset")
        again = load_graph(tmp_path / "copy")
        assert again.edges.tolist() == miniset.edges.tolist()
        assert np.array_equal(again.features, miniset.features)
        assert np.array_equal(again.labels, miniset.labels)

    def test_round_trip_bytes_stable(self, tmp_path, miniset):
        save_graph(miniset, tmp_path / "a", "miniset")
        save_graph(load_graph(tmp_path / "a"), tmp_path / "b", "miniset")
        for fname in ("meta.json", "edges.csv", "features.csv", "labels.csv"):
            assert (tmp_path / "a" / fname).read_bytes() == (tmp_path / "b" / fname).read_bytes()

    def test_zero_edge_file_gives_isolated_nodes(self, tmp_path):
        g = make_graph(4, [])
        save_graph(g, tmp_path / "d", "edgeless")
        loaded = load_graph(tmp_path / "d")
        assert loaded.edge_count == 0
        assert all(loaded.degree(v) == 0 for v in range(4))

    def test_missing_file_rejected(self, tmp_path):
        (tmp_path / "d").mkdir()
        with pytest.raises(GraphFormatError, match="missing"):
            load_graph(tmp_path / "d")

    def test_row_count_mismatch_rejected(self, tmp_path, triangle):
        save_graph(triangle, tmp_path / "d", "t")
        meta = json.loads((tmp_path / "d" / "meta.json").read_text())
        meta["node_count"] = 5
        (tmp_path / "d" / "meta.json").write_text(json.dumps(meta))
        with pytest.raises(GraphFormatError):
            load_graph(tmp_path / "d")

    def test_duplicate_and_reversed_lines_deduplicated(self, tmp_path, triangle):
        save_graph(triangle, tmp_path / "d", "t")
        edges = (tmp_path / "d" / "edges.csv").read_text()
        # re-list the first edge forwards and backwards; counts still match
        (tmp_path / "d" / "edges.csv").write_text(edges + "0,1\n1,0\n")
        g = load_graph(tmp_path / "d")
        assert g.edge_count == 3

    def test_self_loop_line_rejected(self, tmp_path, triangle):
        save_graph(triangle, tmp_path / "d", "t")
        edges = (tmp_path / "d" / "edges.csv").read_text()
        (tmp_path / "d" / "edges.csv").write_text(edges + "5,5\n")
        with pytest.raises(GraphFormatError, match="self-loop"):
            load_graph(tmp_path / "d")

    def test_non_numeric_feature_rejected(self, tmp_path, triangle):
        save_graph(triangle, tmp_path / "d", "t")
        text = (tmp_path / "d" / "features.csv").read_text().replace("0.", "oops.", 1)
        (tmp_path / "d" / "features.csv").write_text(text)
        with pytest.raises(GraphFormatError, match="non-numeric"):
            load_graph(tmp_path / "d")

    @requires_cora
    def test_cora_counts(self):
        g = load_graph(CORA_DIR)
        assert g.node_count == 2708
        assert g.edge_count == 5278
        assert g.num_classes == 7
        assert g.feature_dim == 1433


class TestAverageDegree:
    def test_triangle(self, triangle):
        assert average_degree(triangle) == 2.0

    def test_empty_graph_rejected(self):
        g = make_graph(0, [], labels=[], features=np.zeros((0, 3)), num_classes=1)
        with pytest.raises(ValueError):
            average_degree(g)

    @requires_cora
    def test_cora_value(self):
        assert average_degree(load_graph(CORA_DIR)) == pytest.approx(3.90, abs=0.01)


class TestHomophily:
    def test_single_label_connected_graph_is_one(self, triangle):
        _, avg = label_homophily(triangle)
        assert avg == 1.0

    def test_isolated_nodes_undefined(self):
        g = make_graph(3, [(0, 1)], labels=[0, 1, 0], num_classes=2)
        per_node, avg = label_homophily(g)
        assert per_node[2] is None
        assert avg == 0.0  # 0 and 1 disagree with their only neighbor

    def test_all_isolated_signalled(self):
        g = make_graph(3, [])
        with pytest.raises(ValueError, match="isolated"):
            label_homophily(g)

    def test_average_matches_brute_force(self, miniset):
        per_node, avg = label_homophily(miniset)
        manual = []
        for v in range(miniset.node_count):
            nbrs = miniset.neighbors(v)
            if nbrs.size == 0:
                assert per_node[v] is None
                continue
            same = sum(1 for u in nbrs if miniset.labels[u] == miniset.labels[v])
            manual.append(same / nbrs.size)
            assert per_node[v] == pytest.approx(manual[-1])
            assert 0.0 <= per_node[v] <= 1.0
        assert avg == pytest.approx(float(np.mean(manual)))

    @requires_cora
    def test_cora_value(self):
        _, avg = label_homophily(load_graph(CORA_DIR))
        assert avg == pytest.approx(0.8252, abs=0.0005)


class TestInducedSubgraph:
    def test_empty_selection(self, triangle):
        sub, mapping = induced_subgraph(triangle, [])
        assert sub.node_count == 0 and sub.edge_count == 0 and mapping == {}

    def test_full_selection_is_identity(self, triangle):
        sub, mapping = induced_subgraph(triangle, range(3))
        assert mapping == {0: 0, 1: 1, 2: 2}
        assert sub.edges.tolist() == triangle.edges.tolist()

    def test_path_endpoints_only(self, path3):
        sub, mapping = induced_subgraph(path3, [0, 2])
        assert sub.node_count == 2
        assert sub.edge_count == 0
        assert mapping == {0: 0, 2: 1}

    def test_features_and_labels_follow_nodes(self, miniset):
        nodes = [5, 17, 40]
        sub, mapping = induced_subgraph(miniset, nodes)
        for old in nodes:
            new = mapping[old]
            assert np.array_equal(sub.features[new], miniset.features[old])
            assert sub.labels[new] == miniset.labels[old]

    def test_out_of_range_rejected(self, triangle):
        with pytest.raises(IndexError):
            induced_subgraph(triangle, [99])

    @pytest.mark.parametrize("seed", range(5))
    def test_never_gains_edges(self, seed):
        g = random_graph(14, 0.3, seed)
        rng = np.random.default_rng(seed)
        nodes = rng.choice(14, size=7, replace=False)
        sub, _ = induced_subgraph(g, nodes)
        assert sub.edge_count <= g.edge_count


class TestLHopNeighborhood:
    def test_isolated_node_empty(self):
        g = make_graph(2, [])
        assert l_hop_neighborhood(g, 0, 3) == set()

    def test_zero_hops_empty(self, path3):
        assert l_hop_neighborhood(path3, 0, 0) == set()

    def test_path_one_and_two_hops(self, path3):
        assert l_hop_neighborhood(path3, 0, 1) == {1}
        assert l_hop_neighborhood(path3, 0, 2) == {1, 2}

    def test_invalid_node_rejected(self, path3):
        with pytest.raises(IndexError):
            l_hop_neighborhood(path3, 9, 1)

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_bfs_oracle_and_is_monotone(self, seed):
        g = random_graph(12, 0.25, seed)
        for v in range(g.node_count):
            prev = set()
            for hops in range(4):
                got = l_hop_neighborhood(g, v, hops)
                assert got == bfs_hops_oracle(g, v, hops)
                assert prev <= got
                prev = got


def test_dataset_meta_consistency(miniset):
    meta = DatasetMeta.from_graph("miniset", miniset)
    assert meta.edge_count == miniset.edge_count
    assert meta.avg_degree == pytest.approx(2 * miniset.edge_count / miniset.node_count)


def test_miniset_fixture_matches_generator(tmp_path):
    from _miniset import write_miniset
    from conftest import MINISET_DIR

    write_miniset(tmp_path / "regen")
    for fname in ("meta.json", "edges.csv", "features.csv", "labels.csv"):
        assert (tmp_path / "regen" / fname).read_bytes() == (MINISET_DIR / fname).read_bytes()
