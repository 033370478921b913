"""Signed message passing over the cell lattice, plus GCN- and GAT-style
variants used for ablations.

Every variant has the same residual form

    l^(g)_i = l^(0)_i + sum_{j in N(i)} c_ij l^(g-1)_j

and differs only in the per-edge coefficient ``c_ij``:

* adaptive: ``tanh((l_i + l_j) . a) / sqrt(deg_i deg_j)`` (signed, in [-1, 1] before normalisation)
* gcn:      ``1 / sqrt(deg_i deg_j)``
* gat:      softmax over ``N(i)`` of ``(l_i + l_j) . a`` (non-negative, rows sum to 1)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .gridgraph import GridGraph

VARIANTS = ("adaptive", "gcn", "gat")
_ALIASES = {"gcn-style": "gcn", "gat-style": "gat"}


@dataclass(frozen=True)
class PropagationConfig:
    layers: int = 2
    variant: str = "adaptive"
    recompute_weights: bool = False  # derive coefficients from l^(g-1) instead of l^(0)

    def __post_init__(self):
        object.__setattr__(self, "variant", _ALIASES.get(self.variant, self.variant))
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown propagation variant {self.variant!r}")
        if self.layers < 1:
            raise ConfigError(f"propagation needs >= 1 layer, got {self.layers}")


@dataclass
class LatentBundle:
    l_spe: np.ndarray
    l_com: np.ndarray
    domain: str


def average_latents(l_spe, l_com=None) -> np.ndarray:
    if isinstance(l_spe, LatentBundle):
        l_spe, l_com = l_spe.l_spe, l_spe.l_com
    if l_spe.shape != l_com.shape:
        raise ShapeError(f"cannot average latents of shapes {l_spe.shape} and {l_com.shape}")
    return (l_spe + l_com) / 2.0


def _edge_scores(l: np.ndarray, graph: GridGraph, a: np.ndarray) -> np.ndarray:
    if l.shape[1] != a.shape[0]:
        raise ShapeError(f"latent width {l.shape[1]} does not match attention length {a.shape[0]}")
    # (l_i + l_j) . a == l_i . a + l_j . a ; the sum is commutative, so scores are symmetric
    la = l @ a
    return la[graph.rows] + la[graph.indices]


def _scores_backward(g_s: np.ndarray, l: np.ndarray, graph: GridGraph, a: np.ndarray):
    n = graph.n
    g_la = np.bincount(graph.rows, g_s, minlength=n) + np.bincount(graph.indices, g_s, minlength=n)
    return np.outer(g_la, a), l.T @ g_la


def compute_edge_weights(l0: np.ndarray, graph: GridGraph, a: np.ndarray) -> np.ndarray:
    """Signed weight ``tanh((l_i + l_j) . a)`` for every stored edge."""
    return np.tanh(_edge_scores(l0, graph, a))


def _segment_softmax(s: np.ndarray, graph: GridGraph) -> np.ndarray:
    m = np.full(graph.n, -np.inf)
    np.maximum.at(m, graph.rows, s)
    e = np.exp(s - m[graph.rows])
    z = np.bincount(graph.rows, e, minlength=graph.n)
    return e / z[graph.rows]


def _coefficients(l: np.ndarray, graph: GridGraph, a: np.ndarray | None, variant: str):
    """Per-edge coefficients and what the backward pass needs."""
    if variant == "gcn":
        return graph.norm, None
    s = _edge_scores(l, graph, a)
    if variant == "adaptive":
        w = np.tanh(s)
        return w * graph.norm, w
    alpha = _segment_softmax(s, graph)
    return alpha, alpha


def _coefficients_backward(g_c, aux, l, graph, a, variant):
    if variant == "gcn":
        return None, None
    if variant == "adaptive":
        g_s = g_c * graph.norm * (1.0 - aux * aux)
    else:
        ga = aux * g_c
        g_s = ga - aux * np.bincount(graph.rows, ga, minlength=graph.n)[graph.rows]
    return _scores_backward(g_s, l, graph, a)


def _layer(l0: np.ndarray, prev: np.ndarray, graph: GridGraph, coef: np.ndarray) -> np.ndarray:
    return l0 + graph.matrix(coef) @ prev


def propagate(l0: np.ndarray, graph: GridGraph, weights: np.ndarray, config: PropagationConfig | int = 2):
    """Residual signed propagation with fixed edge weights ``w_ij`` (one per stored edge)."""
    layers = config if isinstance(config, int) else config.layers
    coef = weights * graph.norm
    out = l0
    for _ in range(layers):
        out = _layer(l0, out, graph, coef)
    return out


def propagate_variant(l0: np.ndarray, graph: GridGraph, config: PropagationConfig, a=None) -> np.ndarray:
    """GCN-style (all weights 1) or GAT-style (softmax attention) propagation."""
    if config.variant not in ("gcn", "gat"):
        raise ConfigError(f"propagate_variant handles gcn/gat, got {config.variant!r}")
    if config.variant == "gat" and a is None:
        raise ConfigError("gat-style propagation needs an attention vector")
    return propagate_forward(l0, graph, a, config)[0]


def propagate_forward(l0: np.ndarray, graph: GridGraph, a: np.ndarray | None, config: PropagationConfig):
    """Differentiable propagation for any variant; returns ``(l^(L), cache)``."""
    coefs, auxes, inputs = [], [], []
    prev = l0
    coef, aux = _coefficients(l0, graph, a, config.variant)
    for _ in range(config.layers):
        if config.recompute_weights and inputs:
            coef, aux = _coefficients(prev, graph, a, config.variant)
        inputs.append(prev)
        coefs.append(coef)
        auxes.append(aux)
        prev = _layer(l0, prev, graph, coef)
    return prev, (l0, graph, a, config, inputs, coefs, auxes)


def propagate_backward(g_out: np.ndarray, cache):
    """Return ``(grad wrt l^(0), grad wrt a or None)``."""
    l0, graph, a, config, inputs, coefs, auxes = cache
    variant = config.variant
    g_l0 = np.zeros_like(l0)
    g_a = None if variant == "gcn" else np.zeros_like(a)
    g_coef_shared = np.zeros(graph.n_stored) if not config.recompute_weights else None
    g = g_out
    for k in range(config.layers - 1, -1, -1):
        prev, coef = inputs[k], coefs[k]
        g_l0 += g
        g_c = graph.edge_dots(g, prev)
        g = graph.matrix(coef).T @ g
        if variant != "gcn":
            if config.recompute_weights:
                g_prev, ga = _coefficients_backward(g_c, auxes[k], prev, graph, a, variant)
                g = g + g_prev
                g_a += ga
            else:
                g_coef_shared += g_c
    g_l0 += g
    if g_coef_shared is not None and variant != "gcn":
        g_prev, ga = _coefficients_backward(g_coef_shared, auxes[0], l0, graph, a, variant)
        g_l0 += g_prev
        g_a += ga
    return g_l0, g_a
