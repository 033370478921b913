import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pota.adaptiveprop import (
    LatentBundle,
    PropagationConfig,
    average_latents,
    compute_edge_weights,
    propagate,
    propagate_backward,
    propagate_forward,
    propagate_variant,
)
from pota.errors import ConfigError, ShapeError
from pota.gridgraph import build_grid_graph
from pota.numerics import finite_diff_check

PAIR = build_grid_graph(2, 1)


def test_average_latents():
    m = np.arange(6.0).reshape(3, 2)
    assert np.array_equal(average_latents(m, m), m)
    assert np.array_equal(average_latents(m, -m), np.zeros_like(m))
    assert average_latents(LatentBundle(np.array([[1.0, 3.0]]), np.array([[3.0, 1.0]]), "target")).tolist() == [[2, 2]]
    with pytest.raises(ShapeError):
        average_latents(np.zeros((2, 2)), np.zeros((2, 3)))


def test_edge_weights_examples(rng):
    l0 = rng.standard_normal((2, 3))
    assert np.array_equal(compute_edge_weights(l0, PAIR, np.zeros(3)), np.zeros(2))
    # (l_0 + l_1) . a = 0.5
    l0 = np.array([[0.25, 0.0], [0.25, 0.0]])
    w = compute_edge_weights(l0, PAIR, np.array([1.0, 7.0]))
    assert w == pytest.approx([math.tanh(0.5)] * 2, abs=1e-15)
    assert w[0] == pytest.approx(0.46211715, abs=1e-8)


def test_edge_weights_bounded_for_large_inputs(rng):
    g = build_grid_graph(6, 6)
    w = compute_edge_weights(rng.uniform(-1e3, 1e3, (g.n, 4)), g, rng.uniform(-1e3, 1e3, 4))
    assert np.all(np.abs(w) <= 1.0)


def test_two_node_propagation():
    l0 = np.array([[1.0, 2.0], [10.0, 20.0]])
    assert propagate(l0, PAIR, np.ones(2), 1).tolist() == [[11, 22], [11, 22]]
    assert propagate(l0, PAIR, -np.ones(2), 1).tolist() == [[-9, -18], [9, 18]]
    gcn = propagate_variant(l0, PAIR, PropagationConfig(1, "gcn-style"))
    assert gcn.tolist() == [[11, 22], [11, 22]]


def test_isolated_node_keeps_features(rng):
    g = build_grid_graph(1, 1)
    l0 = rng.standard_normal((1, 5))
    for layers in (1, 2, 5):
        assert np.array_equal(propagate(l0, g, np.zeros(0), layers), l0)


def test_gat_uniform_and_normalised(rng):
    g = build_grid_graph(4, 3)
    l0 = np.ones((g.n, 2))
    cfg = PropagationConfig(1, "gat")
    # equal scores -> each neighbour gets 1/deg
    out = propagate_variant(l0, g, cfg, a=np.array([0.3, -0.1]))
    assert np.allclose(out, 2.0)
    _, cache = propagate_forward(rng.standard_normal((g.n, 2)), g, rng.standard_normal(2), cfg)
    alpha = cache[5][0]
    assert np.allclose(np.bincount(g.rows, alpha, minlength=g.n), 1.0)


def test_variant_errors():
    with pytest.raises(ConfigError):
        PropagationConfig(0)
    with pytest.raises(ConfigError):
        PropagationConfig(2, "sage")
    with pytest.raises(ConfigError):
        propagate_variant(np.zeros((2, 1)), PAIR, PropagationConfig(1, "gat"))
    with pytest.raises(ShapeError):
        compute_edge_weights(np.zeros((2, 3)), PAIR, np.zeros(2))


@pytest.mark.parametrize("variant", ["adaptive", "gcn", "gat"])
@pytest.mark.parametrize("recompute", [False, True])
def test_propagation_gradient(rng, variant, recompute):
    g = build_grid_graph(3, 3)
    cfg = PropagationConfig(2, variant, recompute)
    params = {"l0": rng.standard_normal((g.n, 3)), "a": rng.standard_normal(3)}
    r = rng.standard_normal((g.n, 3))
    out, cache = propagate_forward(params["l0"], g, params["a"], cfg)
    g_l0, g_a = propagate_backward(r, cache)
    grads = {"l0": g_l0, "a": np.zeros(3) if g_a is None else g_a}
    err = finite_diff_check(lambda p: float((r * propagate_forward(p["l0"], g, p["a"], cfg)[0]).sum()),
                            params, grads, 1e-6)
    assert err < 1e-4


@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_zero_weights_are_identity(seed, layers):
    g = build_grid_graph(5, 5)
    l0 = np.random.default_rng(seed).standard_normal((g.n, 3))
    assert np.array_equal(propagate(l0, g, np.zeros(g.n_stored), layers), l0)


@given(st.integers(0, 2**32 - 1))
def test_edge_weights_symmetric(seed):
    rng = np.random.default_rng(seed)
    g = build_grid_graph(5, 4)
    w = compute_edge_weights(rng.standard_normal((g.n, 3)), g, rng.standard_normal(3))
    assert np.array_equal(w, w[g.reverse])
