"""Tests for the graphfilt module."""
import math
import unittest

import networkx as nx
import numpy as np
import pytest

from diagram_landmarks.diagram import PersistenceDiagram, filter_top_n
from diagram_landmarks.errors import DataError
from diagram_landmarks.graphfilt import (
    DescriptorPart,
    Graph,
    VertexFunction,
    corpus_diagrams,
    descriptor_closeness,
    descriptor_degree,
    descriptor_hks,
    descriptor_slug,
    diagram_for_descriptor,
    extended_persistence,
    parse_descriptor,
    pool_descriptors,
    vertex_function,
)
from tests.conftest import random_diagram

P3 = Graph.from_edges(3, [(0, 1), (1, 2)])
C4 = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
K2 = Graph.from_edges(2, [(0, 1)])


def as_pairs(diagram: PersistenceDiagram):
    return [(p.birth, p.death) for p in diagram]


def random_graph(rng, n, p):
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    return Graph.from_edges(n, edges)


class TestGraph(unittest.TestCase):
    """Test cases for Graph validation."""

    def test_from_edges_normalizes(self):
        graph = Graph.from_edges(3, [(1, 0), (0, 1), (2, 1)])
        self.assertEqual(graph.edges, ((0, 1), (1, 2)))

    def test_rejects_self_loop(self):
        with self.assertRaises(ValueError):
            Graph(2, ((1, 1),))

    def test_rejects_out_of_range(self):
        with self.assertRaises(ValueError):
            Graph(2, ((0, 2),))

    def test_rejects_duplicate(self):
        with self.assertRaises(ValueError):
            Graph(2, ((0, 1), (1, 0)))

    def test_to_networkx_keeps_isolated(self):
        self.assertEqual(Graph(3, ()).to_networkx().number_of_nodes(), 3)

    def test_vertex_function_rejects_nan(self):
        with self.assertRaises(ValueError):
            VertexFunction(np.array([0.0, np.nan]), "bad")


class TestDescriptors(unittest.TestCase):
    """Test cases for degree, HKS and closeness."""

    def test_degree(self):
        self.assertEqual(list(descriptor_degree(P3).values), [1, 2, 1])
        self.assertEqual(list(descriptor_degree(C4).values), [2, 2, 2, 2])
        star = Graph.from_edges(5, [(0, i) for i in range(1, 5)])
        self.assertEqual(list(descriptor_degree(star).values), [4, 1, 1, 1, 1])

    def test_hks_single_vertex(self):
        np.testing.assert_allclose(descriptor_hks(Graph(1, ()), 3.0).values, [1.0])

    def test_hks_k2(self):
        t = 0.7
        np.testing.assert_allclose(descriptor_hks(K2, t).values, [0.5 + 0.5 * math.exp(-2 * t)] * 2)

    def test_hks_vertex_transitive(self):
        values = descriptor_hks(C4, 1.0).values
        np.testing.assert_allclose(values, values[0])

    def test_hks_name(self):
        self.assertEqual(descriptor_hks(K2, 10.0).descriptor_name, "hks:10")

    def test_hks_sums_to_heat_trace(self):
        graph = random_graph(np.random.default_rng(0), 8, 0.4)
        laplacian = nx.laplacian_matrix(graph.to_networkx(), nodelist=range(8)).toarray()
        trace = np.exp(-np.linalg.eigvalsh(laplacian.astype(float))).sum()
        self.assertAlmostEqual(descriptor_hks(graph, 1.0).values.sum(), trace)

    def test_closeness(self):
        np.testing.assert_allclose(descriptor_closeness(K2).values, [1.0, 1.0])
        np.testing.assert_allclose(descriptor_closeness(P3).values, [1 / 3, 1 / 2, 1 / 3])

    def test_closeness_isolated(self):
        graph = Graph.from_edges(3, [(0, 1)])
        np.testing.assert_allclose(descriptor_closeness(graph).values, [1.0, 1.0, 0.0])


class TestParseDescriptor(unittest.TestCase):
    """Test cases for descriptor names."""

    def test_pool(self):
        parts = parse_descriptor("degree+hks:10")
        self.assertEqual(parts, [DescriptorPart("degree"), DescriptorPart("hks", "10")])
        self.assertEqual(parts[1].label, "hks:10")

    def test_table(self):
        self.assertEqual(parse_descriptor("table:f.txt"), [DescriptorPart("table", "f.txt")])

    def test_unknown(self):
        with self.assertRaises(ValueError):
            parse_descriptor("betweenness")

    def test_bad_hks_time(self):
        with self.assertRaises(ValueError):
            parse_descriptor("hks:x")
        with self.assertRaises(ValueError):
            parse_descriptor("hks:-1")

    def test_argument_on_degree(self):
        with self.assertRaises(ValueError):
            parse_descriptor("degree:3")

    def test_slug(self):
        self.assertEqual(descriptor_slug("degree+hks:10"), "degree+hks_10")

    def test_table_values_length(self):
        with self.assertRaises(DataError):
            vertex_function(P3, DescriptorPart("table", "f.txt"), np.array([1.0, 2.0]))


class TestExtendedPersistence(unittest.TestCase):
    """Test cases for extended_persistence."""

    def test_path(self):
        h0, h1 = extended_persistence(P3, VertexFunction(np.array([1.0, 2.0, 1.0]), "f"))
        self.assertEqual(as_pairs(h0), [(1.0, 2.0), (1.0, 2.0)])
        self.assertEqual(len(h1), 0)
        self.assertEqual(h0.homology_dim, 0)
        self.assertEqual(h1.homology_dim, 1)

    def test_constant_cycle(self):
        h0, h1 = extended_persistence(C4, VertexFunction(np.ones(4), "f"))
        self.assertEqual(len(h0), 0)
        self.assertEqual(len(h1), 0)

    def test_two_components(self):
        graph = Graph.from_edges(4, [(0, 1), (2, 3)])
        h0, h1 = extended_persistence(graph, VertexFunction(np.array([0.0, 1.0, 0.5, 2.0]), "f"))
        self.assertEqual(as_pairs(h0), [(0.0, 1.0), (0.5, 2.0)])
        self.assertEqual(len(h1), 0)

    def test_cycle_bar(self):
        # 4-cycle with a peak pendant: the cycle closes at 3 and its component tops out at 5
        graph = Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 0), (2, 4)])
        h0, h1 = extended_persistence(graph, VertexFunction(np.array([0.0, 1.0, 3.0, 2.0, 5.0]), "f"))
        self.assertEqual(as_pairs(h1), [(3.0, 5.0)])
        self.assertEqual(as_pairs(h0), [(0.0, 5.0)])

    def test_negative_values_rejected(self):
        with self.assertRaises(DataError):
            extended_persistence(K2, VertexFunction(np.array([-1.0, 0.0]), "f"))

    def test_length_mismatch(self):
        with self.assertRaises(DataError):
            extended_persistence(K2, VertexFunction(np.array([1.0]), "f"))


@pytest.mark.parametrize("seed", range(5))
def test_cycle_rank_with_peak_pendants(seed):
    """One H1 bar per independent cycle once every component has a strict peak."""
    rng = np.random.default_rng(seed)
    base = random_graph(rng, 9, 0.35)
    nx_graph = base.to_networkx()
    components = [min(c) for c in nx.connected_components(nx_graph)]
    n = base.n_vertices + len(components)
    edges = list(base.edges) + [(root, base.n_vertices + i) for i, root in enumerate(components)]
    graph = Graph.from_edges(n, edges)
    values = np.concatenate([rng.uniform(0.0, 1.0, base.n_vertices), np.full(len(components), 2.0)])
    h0, h1 = extended_persistence(graph, VertexFunction(values, "f"))
    cycle_rank = len(base.edges) - base.n_vertices + len(components)
    assert len(h1) == cycle_rank
    assert sum(1 for p in h0 if p.death == 2.0) >= len(components)


@pytest.mark.parametrize("seed", range(5))
def test_sublevel_components_oracle(seed):
    """Live H0 bars at t equal sublevel components minus fully-present components."""
    rng = np.random.default_rng(100 + seed)
    graph = random_graph(rng, 8, 0.3)
    values = rng.uniform(0.0, 5.0, graph.n_vertices)
    h0, _ = extended_persistence(graph, VertexFunction(values, "f"))
    nx_graph = graph.to_networkx()
    full = [list(c) for c in nx.connected_components(nx_graph)]
    ticks = np.sort(values)
    thresholds = np.concatenate([ticks, (ticks[:-1] + ticks[1:]) / 2])
    for t in thresholds:
        sub = nx_graph.subgraph([v for v in range(graph.n_vertices) if values[v] <= t])
        finished = sum(1 for c in full if values[c].max() <= t)
        alive = sum(1 for p in h0 if p.birth <= t < p.death)
        assert alive == nx.number_connected_components(sub) - finished


@pytest.mark.parametrize("seed", range(3))
def test_monotone_relabeling(seed):
    rng = np.random.default_rng(200 + seed)
    graph = random_graph(rng, 8, 0.4)
    values = rng.uniform(0.0, 3.0, graph.n_vertices)
    warped = values ** 3 + 2 * values
    h0, h1 = extended_persistence(graph, VertexFunction(values, "f"))
    g0, g1 = extended_persistence(graph, VertexFunction(warped, "g"))

    def warp(x):
        return x ** 3 + 2 * x

    assert as_pairs(g0) == [(warp(b), warp(d)) for b, d in as_pairs(h0)]
    assert as_pairs(g1) == [(warp(b), warp(d)) for b, d in as_pairs(h1)]


class TestPooling(unittest.TestCase):
    """Test cases for pool_descriptors and corpus_diagrams."""

    def test_single(self):
        diagram = PersistenceDiagram.from_pairs([(0, 1), (0, 2)])
        self.assertEqual(pool_descriptors([diagram]), filter_top_n(diagram, 50))

    def test_top_fifty_of_sixty(self):
        rng = np.random.default_rng(0)
        a = random_diagram(rng, 30, min_points=30)
        b = random_diagram(rng, 30, min_points=30)
        pooled = pool_descriptors([a, b], n_max=50)
        self.assertEqual(len(pooled), 50)
        persistence = sorted((p.death - p.birth for p in list(a) + list(b)), reverse=True)
        self.assertAlmostEqual(min(p.death - p.birth for p in pooled), persistence[49])

    def test_empty_is_identity(self):
        diagram = PersistenceDiagram.from_pairs([(0, 1)])
        self.assertEqual(as_pairs(pool_descriptors([diagram, PersistenceDiagram()])), [(0, 1)])

    def test_nothing_to_pool(self):
        with self.assertRaises(ValueError):
            pool_descriptors([])

    def test_diagram_for_pool(self):
        parts = parse_descriptor("degree+closeness")
        diagram = diagram_for_descriptor(P3, parts)
        # degree gives two (1, 2) bars, closeness two (1/3, 1/2) bars
        self.assertEqual(len(diagram), 4)

    def test_corpus_order(self):
        diagrams = corpus_diagrams([P3, K2, C4], "degree")
        self.assertEqual(len(diagrams), 3)
        self.assertEqual(as_pairs(diagrams[0]), [(1.0, 2.0), (1.0, 2.0)])
        self.assertEqual(len(diagrams[2]), 0)

    def test_corpus_table(self):
        tables = {"table:f.txt": [np.array([0.0, 3.0, 1.0]), np.array([2.0, 4.0])]}
        diagrams = corpus_diagrams([P3, K2], "table:f.txt", tables=tables)
        self.assertEqual(as_pairs(diagrams[1]), [(2.0, 4.0)])
