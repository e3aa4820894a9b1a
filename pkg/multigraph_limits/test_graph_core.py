"""
Tests for adjacency matrices, urn words and the urn -> adjacency map
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multigraph_limits.errors import (
    DomainError,
    EdgeListFormatError,
    InvalidAdjacencyError,
    InvalidUrnError,
    OddDegreeSumError,
)
from multigraph_limits.graph_core import (
    AdjacencyMatrix,
    DegreeSequence,
    UrnConfiguration,
    adjacency_to_urn,
    urn_to_adjacency,
)


@st.composite
def multigraphs(draw, max_n=5, max_count=4):
    n = draw(st.integers(min_value=1, max_value=max_n))
    counts = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        counts[i, i] = 2 * draw(st.integers(min_value=0, max_value=max_count))
        for j in range(i + 1, n):
            counts[i, j] = counts[j, i] = draw(st.integers(min_value=0, max_value=max_count))
    return AdjacencyMatrix(counts, validate=True)


@st.composite
def urn_words(draw, max_n=4, max_edges=6):
    n = draw(st.integers(min_value=1, max_value=max_n))
    length = 2 * draw(st.integers(min_value=0, max_value=max_edges))
    word = draw(st.lists(st.integers(min_value=0, max_value=n - 1), min_size=length, max_size=length))
    return UrnConfiguration(n, word)


class TestAdjacencyMatrix:
    def test_degree_counts_loops_twice(self):
        assert AdjacencyMatrix([[2, 1], [1, 0]]).degree(0) == 3
        assert AdjacencyMatrix([[0]]).degree(0) == 0
        assert AdjacencyMatrix([[2, 0], [0, 2]]).degree(1) == 2

    def test_degree_out_of_range(self):
        with pytest.raises(DomainError):
            AdjacencyMatrix([[0]]).degree(1)

    def test_edge_counts(self):
        assert AdjacencyMatrix([[2, 1], [1, 0]]).edge_counts() == (2, 1)
        assert AdjacencyMatrix.zeros(3).edge_counts() == (0, 0)
        assert AdjacencyMatrix([[0, 3], [3, 0]]).edge_counts() == (3, 3)

    def test_relabel_swap(self):
        swapped = AdjacencyMatrix([[2, 1], [1, 0]]).relabel([1, 0])
        assert swapped == AdjacencyMatrix([[0, 1], [1, 2]])

    def test_relabel_rejects_non_permutation(self):
        with pytest.raises(DomainError):
            AdjacencyMatrix([[2, 1], [1, 0]]).relabel([0, 0])

    def test_principal_submatrix(self):
        graph = AdjacencyMatrix([[2, 1], [1, 0]])
        assert graph.principal_submatrix(2) == graph
        assert graph.principal_submatrix(1) == AdjacencyMatrix([[2]])
        with pytest.raises(DomainError):
            graph.principal_submatrix(3)

    def test_simplify_drops_loops_and_multiplicity(self):
        simple = AdjacencyMatrix([[4, 3, 0], [3, 0, 1], [0, 1, 2]]).simplify()
        assert simple == AdjacencyMatrix([[0, 1, 0], [1, 0, 1], [0, 1, 0]])

    @pytest.mark.parametrize(
        "counts",
        [[[1, 0], [0, 0]], [[0, 1], [2, 0]], [[0, -1], [-1, 0]]],
        ids=["odd-diagonal", "asymmetric", "negative"],
    )
    def test_validate_rejects(self, counts):
        with pytest.raises(InvalidAdjacencyError):
            AdjacencyMatrix(counts, validate=True)

    def test_non_square(self):
        with pytest.raises(InvalidAdjacencyError):
            AdjacencyMatrix([[0, 1, 2]])

    def test_counts_are_read_only(self):
        graph = AdjacencyMatrix([[0, 1], [1, 0]])
        with pytest.raises(ValueError):
            graph.counts[0, 1] = 5

    def test_constructor_copies(self):
        source = np.array([[0, 1], [1, 0]])
        graph = AdjacencyMatrix(source)
        source[0, 1] = 7
        assert graph.counts[0, 1] == 1

    @given(multigraphs())
    @settings(max_examples=50, deadline=None)
    def test_degree_sum_is_twice_edges(self, graph):
        assert graph.degrees().total == 2 * graph.edge_counts().m

    @given(multigraphs(), st.randoms(use_true_random=False))
    @settings(max_examples=50, deadline=None)
    def test_relabel_inverse(self, graph, random):
        tau = list(range(graph.n))
        random.shuffle(tau)
        inverse = np.argsort(tau)
        assert graph.relabel(tau).relabel(inverse) == graph
        assert sorted(graph.relabel(tau).degrees().as_tuple()) == sorted(graph.degrees().as_tuple())


class TestEdgeList:
    def test_format(self):
        text = AdjacencyMatrix([[2, 1, 0], [1, 0, 3], [0, 3, 0]]).to_edge_list()
        assert text == "3 5\n1 1 1\n1 2 1\n2 3 3\n"

    def test_empty_graph(self):
        assert AdjacencyMatrix.zeros(2).to_edge_list() == "2 0\n"

    @given(multigraphs())
    @settings(max_examples=50, deadline=None)
    def test_parse_inverts_format(self, graph):
        assert AdjacencyMatrix.from_edge_list(graph.to_edge_list()) == graph

    @pytest.mark.parametrize(
        "text",
        ["", "2\n", "2 1\n2 1 1\n", "2 2\n1 2 1\n", "2 2\n1 2 1\n1 2 1\n", "2 1\n1 3 1\n", "2 1\n1 2 x\n"],
        ids=["empty", "short-header", "unordered-pair", "wrong-m", "duplicate", "out-of-range", "garbage"],
    )
    def test_malformed(self, text):
        with pytest.raises(EdgeListFormatError):
            AdjacencyMatrix.from_edge_list(text)


class TestUrn:
    def test_single_colour(self):
        assert urn_to_adjacency(UrnConfiguration(1, [0, 0])) == AdjacencyMatrix([[2]])

    def test_parallel_edges(self):
        assert urn_to_adjacency(UrnConfiguration(2, [0, 1, 1, 0])) == AdjacencyMatrix([[0, 2], [2, 0]])

    def test_edge_and_loop(self):
        expected = np.zeros((3, 3), dtype=int)
        expected[0, 1] = expected[1, 0] = 1
        expected[2, 2] = 2
        assert urn_to_adjacency(UrnConfiguration(3, [0, 1, 2, 2])) == AdjacencyMatrix(expected)

    def test_odd_length_cannot_pair(self):
        with pytest.raises(InvalidUrnError):
            urn_to_adjacency(UrnConfiguration(2, [0, 1, 1]))

    def test_colour_out_of_range(self):
        with pytest.raises(InvalidUrnError):
            UrnConfiguration(2, [0, 2])

    def test_key_is_one_based(self):
        assert UrnConfiguration(2, [0, 1]).key() == "1 2"

    @given(urn_words())
    @settings(max_examples=100, deadline=None)
    def test_degrees_are_colour_counts(self, psi):
        graph = urn_to_adjacency(psi)
        np.testing.assert_array_equal(graph.degrees().degrees, psi.multiplicities())
        assert graph.edge_counts().m == psi.length // 2

    @given(urn_words())
    @settings(max_examples=100, deadline=None)
    def test_edge_direction_is_irrelevant(self, psi):
        flipped = np.array(psi.word).reshape(-1, 2)[:, ::-1].reshape(-1)
        assert urn_to_adjacency(UrnConfiguration(psi.n, flipped)) == urn_to_adjacency(psi)

    @given(multigraphs())
    @settings(max_examples=50, deadline=None)
    def test_canonical_preimage(self, graph):
        assert urn_to_adjacency(adjacency_to_urn(graph)) == graph


class TestDegreeSequence:
    def test_odd_sum(self):
        with pytest.raises(OddDegreeSumError):
            DegreeSequence([1, 2])

    def test_negative(self):
        with pytest.raises(DomainError):
            DegreeSequence([-2, 2])

    def test_equality_and_hash(self):
        assert DegreeSequence([2, 2]) == DegreeSequence(np.array([2, 2]))
        assert len({DegreeSequence([2, 2]), DegreeSequence((2, 2))}) == 1
