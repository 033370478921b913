"""Latent feature extractors, gradient reversal and the domain discriminator.

Three two-layer extractors (source-specific, shared, target-specific) map
encoded cells to ``h``-dim latents. A single discriminator scores every latent
stream with the probability that it came from the target region; only the
shared stream passes through gradient reversal on its way in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BatchError, ShapeError
from .numerics import (
    Params,
    matmul,
    matmul_backward,
    relu_backward,
    relu_elem,
    sigmoid_backward,
    sigmoid_elem,
)

SOURCE, TARGET = "source", "target"
EXTRACTORS = ("source", "shared", "target")
SOURCE_LABEL, TARGET_LABEL = 0.0, 1.0
PROB_CLAMP = 1e-12


def glorot(rng: np.random.Generator, n_in: int, n_out: int) -> np.ndarray:
    lim = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-lim, lim, size=(n_in, n_out))


def init_extractor(rng, n_in: int, hidden: int, which: str) -> Params:
    p = f"ext_{which}"
    return {
        f"{p}.W1": glorot(rng, n_in, hidden),
        f"{p}.b1": np.zeros(hidden),
        f"{p}.W2": glorot(rng, hidden, hidden),
        f"{p}.b2": np.zeros(hidden),
    }


def init_discriminator(rng, hidden: int) -> Params:
    return {
        "disc.W1": glorot(rng, hidden, hidden),
        "disc.b1": np.zeros(hidden),
        "disc.W2": glorot(rng, hidden, 1),
        "disc.b2": np.zeros(1),
    }


def _mlp_forward(x, W1, b1, W2, b2):
    pre = matmul(x, W1) + b1
    hid = relu_elem(pre)
    return matmul(hid, W2) + b2, (x, pre, hid)


def _mlp_backward(g_out, W1, W2, cache, need_input_grad=True):
    x, pre, hid = cache
    g_hid, gW2 = matmul_backward(g_out, hid, W2)
    gb2 = g_out.sum(axis=0)
    g_pre = relu_backward(g_hid, pre)
    gx, gW1 = matmul_backward(g_pre, x, W1) if need_input_grad else (None, x.T @ g_pre)
    gb1 = g_pre.sum(axis=0)
    return gx, gW1, gb1, gW2, gb2


def extract_forward(x: np.ndarray, params: Params, which: str):
    p = f"ext_{which}"
    W1 = params[f"{p}.W1"]
    if x.ndim != 2 or x.shape[1] != W1.shape[0]:
        raise ShapeError(f"extractor {which!r} expects width {W1.shape[0]}, got features of shape {x.shape}")
    return _mlp_forward(x, W1, params[f"{p}.b1"], params[f"{p}.W2"], params[f"{p}.b2"])


def extract(x: np.ndarray, which: str, params: Params) -> np.ndarray:
    """linear -> ReLU -> linear latents for every row of ``x``."""
    return extract_forward(x, params, which)[0]


def extract_backward(g_out: np.ndarray, params: Params, which: str, cache, grads: Params) -> None:
    """Accumulate extractor parameter gradients into ``grads``."""
    p = f"ext_{which}"
    _, gW1, gb1, gW2, gb2 = _mlp_backward(
        g_out, params[f"{p}.W1"], params[f"{p}.W2"], cache, need_input_grad=False
    )
    grads[f"{p}.W1"] += gW1
    grads[f"{p}.b1"] += gb1
    grads[f"{p}.W2"] += gW2
    grads[f"{p}.b2"] += gb2


def grl_forward(x: np.ndarray) -> np.ndarray:
    return x


def grl_backward(upstream_grad: np.ndarray, mu: float) -> np.ndarray:
    return -mu * upstream_grad


def discriminate_forward(latents: np.ndarray, params: Params):
    W1 = params["disc.W1"]
    if latents.ndim != 2 or latents.shape[1] != W1.shape[0]:
        raise ShapeError(f"discriminator expects width {W1.shape[0]}, got {latents.shape}")
    logits, cache = _mlp_forward(latents, W1, params["disc.b1"], params["disc.W2"], params["disc.b2"])
    prob = sigmoid_elem(logits)
    return prob, (cache, prob)


def discriminate(latents: np.ndarray, params: Params) -> np.ndarray:
    """(n, 1) probability that each latent row comes from the target region."""
    return discriminate_forward(latents, params)[0]


def discriminate_backward(g_prob: np.ndarray, params: Params, cache, grads: Params) -> np.ndarray:
    """Accumulate discriminator gradients; return the gradient w.r.t. its input."""
    mlp_cache, prob = cache
    g_logit = sigmoid_backward(g_prob, prob)
    gx, gW1, gb1, gW2, gb2 = _mlp_backward(g_logit, params["disc.W1"], params["disc.W2"], mlp_cache)
    grads["disc.W1"] += gW1
    grads["disc.b1"] += gb1
    grads["disc.W2"] += gW2
    grads["disc.b2"] += gb2
    return gx


@dataclass(frozen=True)
class DomainBatch:
    n_source: int
    n_target: int

    def __post_init__(self):
        if self.n_source < 1 or self.n_target < 1:
            raise BatchError(f"domain batch needs >= 1 cell per region, got {self.n_source}/{self.n_target}")

    @property
    def rho(self) -> float:
        return self.n_source / (self.n_source + self.n_target)


def _bce(p: np.ndarray, label: float) -> float:
    q = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(-np.mean(label * np.log(q) + (1.0 - label) * np.log(1.0 - q)))


def _bce_grad(p: np.ndarray, label: float, scale: float) -> np.ndarray:
    q = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    g = (-label / q + (1.0 - label) / (1.0 - q)) * (scale / p.shape[0])
    # clamped entries carry no gradient
    return np.where(q == p, g, 0.0)


def domain_loss(d_com_s, d_spe_s, d_com_t, d_spe_t, batch: DomainBatch) -> float:
    """rho * (L_com^s + L_spe^s) + (1 - rho) * (L_com^t + L_spe^t) with BCE per stream."""
    for arr, n, tag in ((d_com_s, batch.n_source, "source"), (d_spe_s, batch.n_source, "source"),
                        (d_com_t, batch.n_target, "target"), (d_spe_t, batch.n_target, "target")):
        if len(arr) != n:
            raise BatchError(f"{tag} stream has {len(arr)} predictions, batch says {n}")
    rho = batch.rho
    return rho * (_bce(d_com_s, SOURCE_LABEL) + _bce(d_spe_s, SOURCE_LABEL)) + (1.0 - rho) * (
        _bce(d_com_t, TARGET_LABEL) + _bce(d_spe_t, TARGET_LABEL)
    )


def domain_loss_grads(d_com_s, d_spe_s, d_com_t, d_spe_t, batch: DomainBatch, scale: float = 1.0):
    """Gradients of ``scale * domain_loss`` w.r.t. the four probability vectors."""
    rho = batch.rho
    return (
        _bce_grad(d_com_s, SOURCE_LABEL, scale * rho),
        _bce_grad(d_spe_s, SOURCE_LABEL, scale * rho),
        _bce_grad(d_com_t, TARGET_LABEL, scale * (1.0 - rho)),
        _bce_grad(d_spe_t, TARGET_LABEL, scale * (1.0 - rho)),
    )
