import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pota.errors import EdgeLookupError, ShapeError
from pota.gridgraph import build_grid_graph, edge_norm


def test_two_by_two():
    g = build_grid_graph(2, 2)
    assert g.n == 4 and g.n_edges == 4
    assert g.degrees.tolist() == [2, 2, 2, 2]


def test_three_by_three_degrees():
    g = build_grid_graph(3, 3)
    assert g.degrees[4] == 4
    assert [g.degrees[i] for i in (0, 2, 6, 8)] == [2, 2, 2, 2]
    assert g.neighbors(4).tolist() == [1, 3, 5, 7]


def test_single_cell_is_isolated():
    g = build_grid_graph(1, 1)
    assert g.n_edges == 0 and g.degrees.tolist() == [0]


def test_eight_connectivity():
    g = build_grid_graph(3, 3, 8)
    assert g.degrees[4] == 8 and g.degrees[0] == 3


def test_bad_arguments():
    with pytest.raises(ShapeError):
        build_grid_graph(0, 3)
    with pytest.raises(ShapeError):
        build_grid_graph(3, 3, 6)


def test_edge_norm_examples():
    assert edge_norm(build_grid_graph(2, 1), 0, 1) == 1.0
    g = build_grid_graph(5, 5)
    assert edge_norm(g, 12, 13) == 0.25  # two interior cells
    assert edge_norm(g, 0, 1) == pytest.approx(1 / math.sqrt(6))  # corner (2) to border (3)


def test_edge_norm_matches_degrees_everywhere():
    # no lattice pairs degree 2 with degree 4; the formula is checked on every stored edge instead
    g = build_grid_graph(4, 3, 8)
    want = 1.0 / np.sqrt(g.degrees[g.rows] * g.degrees[g.indices])
    assert np.array_equal(g.norm, want)
    assert 1.0 / math.sqrt(2 * 4) == pytest.approx(0.35355339, abs=1e-8)


def test_missing_edge():
    with pytest.raises(EdgeLookupError):
        build_grid_graph(3, 3).edge_position(0, 4)


def test_edge_dots_matches_gather(rng):
    g = build_grid_graph(7, 5, 8)
    a, b = rng.standard_normal((g.n, 3)), rng.standard_normal((g.n, 3))
    assert np.allclose(g.edge_dots(a, b), np.einsum("ij,ij->i", a[g.rows], b[g.indices]), atol=1e-14)


@given(st.integers(1, 30), st.integers(1, 30))
def test_edge_count_and_symmetry(w, h):
    g = build_grid_graph(w, h)
    assert g.n_edges == w * (h - 1) + h * (w - 1)
    adj = g.adjacency()
    assert (adj != adj.T).nnz == 0
    assert (g.rows != g.indices).all()
    assert np.array_equal(g.degrees, np.diff(g.indptr))
    assert np.all(g.norm > 0) and np.all(np.isfinite(g.norm))
    assert np.array_equal(g.rows[g.reverse], g.indices)
