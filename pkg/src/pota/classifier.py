"""Per-region heads, the joint objective and the training loop.

One forward pass over a region runs: specific + shared extractors, latent
averaging, propagation, and a linear head followed by log-softmax NLL on the
training mask. With a source region present, both regions' latents are also
scored by the discriminator and the domain loss is added with weight ``lam``.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .adaptiveprop import PropagationConfig, propagate_backward, propagate_forward
from .disentangle import (
    DomainBatch,
    discriminate_backward,
    discriminate_forward,
    domain_loss,
    domain_loss_grads,
    extract_backward,
    extract_forward,
    glorot,
    grl_backward,
    grl_forward,
    init_discriminator,
    init_extractor,
)
from .errors import BatchError, ConfigError, FormatError, ShapeError, TrainingError
from .featurecodec import FeatureSchema, RegionDataset
from .numerics import AdamState, Params, adam_step, log_softmax_backward, log_softmax_rows

N_CLASSES = 2
WETLAND = 1

PROPAGATIONS = ("adaptive", "gcn", "gat", "none")
LATENTS = ("both", "shared", "specific")

# ablation modes as overrides on top of a base config
MODES = {
    "full": {},
    "no-dd": {"use_domain_loss": False},
    "no-ap": {"propagation": "none"},
    "gcn-style": {"propagation": "gcn"},
    "gat-style": {"propagation": "gat"},
    "shared-only": {"latent": "shared"},
    "specific-only": {"latent": "specific"},
}


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    lam: float = 0.2
    lr: float = 1e-3
    patience: int = 300
    max_epochs: int = 2000
    layers: int = 2
    hidden: int = 64
    mu: float = 1.0
    use_domain_loss: bool = True
    propagation: str = "adaptive"
    latent: str = "both"
    recompute_weights: bool = False
    class_weighting: str = "off"
    connectivity: int = 4
    stratified: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if not self.lr > 0:
            raise ConfigError(f"learning rate must be > 0, got {self.lr}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.max_epochs < 1 or self.hidden < 1 or self.layers < 1:
            raise ConfigError("max_epochs, hidden and layers must be positive")
        if not self.mu > 0:
            raise ConfigError(f"GRL coefficient mu must be > 0, got {self.mu}")
        if self.propagation not in PROPAGATIONS:
            raise ConfigError(f"propagation must be one of {PROPAGATIONS}, got {self.propagation!r}")
        if self.latent not in LATENTS:
            raise ConfigError(f"latent must be one of {LATENTS}, got {self.latent!r}")
        if self.class_weighting not in ("off", "balanced"):
            raise ConfigError(f"class_weighting must be off|balanced, got {self.class_weighting!r}")
        if self.connectivity not in (4, 8):
            raise ConfigError(f"connectivity must be 4 or 8, got {self.connectivity}")

    def with_mode(self, mode: str) -> "TrainConfig":
        if mode not in MODES:
            raise ConfigError(f"unknown mode {mode!r}; expected one of {list(MODES)}")
        return replace(self, **MODES[mode])

    def propagation_config(self) -> PropagationConfig | None:
        if self.propagation == "none":
            return None
        return PropagationConfig(self.layers, self.propagation, self.recompute_weights)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)


def init_params(input_width: int, config: TrainConfig) -> Params:
    rng = np.random.default_rng(config.seed)
    h = config.hidden
    params: Params = {}
    for which in ("source", "shared", "target"):
        params.update(init_extractor(rng, input_width, h, which))
    params.update(init_discriminator(rng, h))
    for dom in ("source", "target"):
        params[f"att_{dom}"] = rng.uniform(-1.0, 1.0, size=h) / np.sqrt(h)
    for dom in ("source", "target"):
        params[f"head_{dom}.W"] = glorot(rng, h, N_CLASSES)
        params[f"head_{dom}.b"] = np.zeros(N_CLASSES)
    return params


def predict_logits(latents: np.ndarray, head: str, params: Params) -> np.ndarray:
    W = params[f"head_{head}.W"]
    if latents.ndim != 2 or latents.shape[1] != W.shape[0]:
        raise ShapeError(f"head {head!r} expects latent width {W.shape[0]}, got {latents.shape}")
    return latents @ W + params[f"head_{head}.b"]


def class_weights(labels: np.ndarray, mask: np.ndarray, mode: str) -> np.ndarray:
    """Per-cell loss weights over the masked cells."""
    y = labels[mask]
    if mode == "off":
        return np.ones(y.size)
    counts = np.bincount(y, minlength=N_CLASSES).astype(np.float64)
    per_class = np.where(counts > 0, y.size / (N_CLASSES * np.maximum(counts, 1)), 0.0)
    return per_class[y]


def nll_loss(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray, weights: np.ndarray | None = None):
    """Weighted mean of -log softmax(logits)[label] over masked cells."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise BatchError("nll_loss: empty mask")
    logp = log_softmax_rows(logits[mask])
    y = labels[mask]
    w = np.ones(y.size) if weights is None else weights
    return float(-(w * logp[np.arange(y.size), y]).sum() / w.sum())


def total_loss(ls_pred: float, lt_pred: float, l_dom: float, lam: float) -> float:
    if lam < 0:
        raise ConfigError(f"lambda must be >= 0, got {lam}")
    return ls_pred + lt_pred + lam * l_dom


@dataclass
class _Branch:
    domain: str
    spe: np.ndarray
    com: np.ndarray
    c_spe: tuple
    c_com: tuple
    l0: np.ndarray
    out: np.ndarray
    prop_cache: tuple | None
    logits: np.ndarray
    logp: np.ndarray
    train_idx: np.ndarray
    y_train: np.ndarray
    w_train: np.ndarray
    loss: float
    d_com: np.ndarray | None = None
    d_spe: np.ndarray | None = None
    dc_com: tuple | None = None
    dc_spe: tuple | None = None


def branch_forward(params: Params, config: TrainConfig, ds: RegionDataset, domain: str,
                   mask: np.ndarray | None = None, with_discriminator: bool = False) -> _Branch:
    spe, c_spe = extract_forward(ds.x, params, domain)
    com, c_com = extract_forward(ds.x, params, "shared")
    if config.latent == "both":
        l0 = (spe + com) / 2.0
    elif config.latent == "shared":
        l0 = (com + com) / 2.0
    else:
        l0 = (spe + spe) / 2.0
    pcfg = config.propagation_config()
    if pcfg is None:
        out, pcache = l0, None
    else:
        out, pcache = propagate_forward(l0, ds.graph, params.get(f"att_{domain}"), pcfg)
    logits = predict_logits(out, domain, params)
    logp = log_softmax_rows(logits)
    mask = ds.train if mask is None else mask
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise BatchError(f"{ds.name}: empty training mask")
    y = ds.labels[idx]
    w = class_weights(ds.labels, mask, config.class_weighting)
    loss = float(-(w * logp[idx, y]).sum() / w.sum())
    br = _Branch(domain, spe, com, c_spe, c_com, l0, out, pcache, logits, logp, idx, y, w, loss)
    if with_discriminator:
        br.d_com, br.dc_com = discriminate_forward(grl_forward(com[idx]), params)
        br.d_spe, br.dc_spe = discriminate_forward(spe[idx], params)
    return br


@dataclass
class Forward:
    source: _Branch | None
    target: _Branch
    batch: DomainBatch | None
    loss_pred_source: float
    loss_pred_target: float
    loss_dom: float
    total: float


def forward(params: Params, config: TrainConfig, source: RegionDataset | None, target: RegionDataset) -> Forward:
    """Joint objective ``L_pred^s + L_pred^t + lam * L_dom`` (target-only when ``source`` is None)."""
    if source is None:
        tb = branch_forward(params, config, target, "target")
        return Forward(None, tb, None, 0.0, tb.loss, 0.0, tb.loss)
    sb = branch_forward(params, config, source, "source", with_discriminator=True)
    tb = branch_forward(params, config, target, "target", with_discriminator=True)
    batch = DomainBatch(sb.train_idx.size, tb.train_idx.size)
    l_dom = domain_loss(sb.d_com, sb.d_spe, tb.d_com, tb.d_spe, batch)
    lam = config.lam if config.use_domain_loss else 0.0
    total = total_loss(sb.loss, tb.loss, l_dom, lam)
    return Forward(sb, tb, batch, sb.loss, tb.loss, l_dom, total)


def _branch_backward(params, config, br: _Branch, grads: Params, pred_weight: float,
                     g_d_com, g_d_spe, mu: float, reverse: bool) -> None:
    n = br.logp.shape[0]
    g_logp = np.zeros_like(br.logp)
    if pred_weight != 0.0:
        g_logp[br.train_idx, br.y_train] = -pred_weight * br.w_train / br.w_train.sum()
    g_logits = log_softmax_backward(g_logp, br.logp)
    d = br.domain
    grads[f"head_{d}.W"] += br.out.T @ g_logits
    grads[f"head_{d}.b"] += g_logits.sum(axis=0)
    g_out = g_logits @ params[f"head_{d}.W"].T
    if br.prop_cache is None:
        g_l0 = g_out
    else:
        g_l0, g_a = propagate_backward(g_out, br.prop_cache)
        if g_a is not None:
            grads[f"att_{d}"] += g_a
    if config.latent == "both":
        g_spe, g_com = g_l0 / 2.0, g_l0 / 2.0
    elif config.latent == "shared":
        g_spe, g_com = np.zeros((n, g_l0.shape[1])), g_l0 / 2.0 + g_l0 / 2.0
    else:
        g_spe, g_com = g_l0 / 2.0 + g_l0 / 2.0, np.zeros((n, g_l0.shape[1]))
    if g_d_com is not None:
        g_in = discriminate_backward(g_d_com, params, br.dc_com, grads)
        g_com[br.train_idx] += grl_backward(g_in, mu) if reverse else g_in
        g_spe[br.train_idx] += discriminate_backward(g_d_spe, params, br.dc_spe, grads)
    extract_backward(g_spe, params, d, br.c_spe, grads)
    extract_backward(g_com, params, "shared", br.c_com, grads)


def backward(params: Params, config: TrainConfig, fwd: Forward, pred_weight: float = 1.0,
             dom_weight: float | None = None, reverse: bool = True) -> Params:
    """Gradients of ``pred_weight * (L_pred^s + L_pred^t) + dom_weight * L_dom``.

    ``dom_weight`` defaults to the configured lambda (0 with the domain loss
    disabled). ``reverse=False`` bypasses gradient reversal, for checks only.
    """
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    if dom_weight is None:
        dom_weight = config.lam if config.use_domain_loss else 0.0
    if fwd.source is None:
        _branch_backward(params, config, fwd.target, grads, pred_weight, None, None, config.mu, reverse)
        return grads
    sb, tb = fwd.source, fwd.target
    use_dom = config.use_domain_loss
    if use_dom:
        g_cs, g_ss, g_ct, g_st = domain_loss_grads(sb.d_com, sb.d_spe, tb.d_com, tb.d_spe, fwd.batch, dom_weight)
    else:
        g_cs = g_ss = g_ct = g_st = None
    _branch_backward(params, config, sb, grads, pred_weight, g_cs, g_ss, config.mu, reverse)
    _branch_backward(params, config, tb, grads, pred_weight, g_ct, g_st, config.mu, reverse)
    return grads


@dataclass
class PoTAModel:
    params: Params
    config: TrainConfig
    schema: FeatureSchema
    target_only: bool = False

    def branch(self, ds: RegionDataset, domain: str = "target") -> _Branch:
        if ds.x.shape[1] != self.params[f"ext_{domain}.W1"].shape[0]:
            raise ShapeError(
                f"region {ds.name!r} encodes to width {ds.x.shape[1]}, model expects "
                f"{self.params[f'ext_{domain}.W1'].shape[0]}"
            )
        return branch_forward(self.params, self.config, ds, domain, mask=np.ones(ds.n, dtype=bool))

    def predict_proba(self, ds: RegionDataset, domain: str = "target") -> np.ndarray:
        """(n, 2) class probabilities; column 1 is wetland."""
        return np.exp(self.branch(ds, domain).logp)

    def latents(self, ds: RegionDataset, domain: str):
        b = self.branch(ds, domain)
        return b.spe, b.com

    def save(self, path) -> None:
        doc = {
            "format": "pota-model",
            "version": 1,
            "target_only": self.target_only,
            "train_config": self.config.to_json(),
            "schema": self.schema.to_json(),
            "params": {k: {"shape": list(v.shape), "data": v.reshape(-1).tolist()} for k, v in self.params.items()},
        }
        Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "PoTAModel":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}:{e.lineno}: {e.msg}") from None
        if doc.get("format") != "pota-model":
            raise FormatError(f"{path}: not a model file")
        params = {
            k: np.array(v["data"], dtype=np.float64).reshape(v["shape"]) for k, v in doc["params"].items()
        }
        return cls(params, TrainConfig.from_json(doc["train_config"]),
                   FeatureSchema.from_json(doc["schema"]), doc.get("target_only", False))


def infer_target(model: PoTAModel, target: RegionDataset) -> np.ndarray:
    """Wetland probability per target cell."""
    return model.predict_proba(target, "target")[:, WETLAND]


@dataclass
class TrainReport:
    loss_pred_source: list[float] = field(default_factory=list)
    loss_pred_target: list[float] = field(default_factory=list)
    loss_dom: list[float] = field(default_factory=list)
    loss_total: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    best_epoch: int = -1
    last_epoch: int = -1
    metrics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def _accuracy(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    return float((logits[mask].argmax(axis=1) == labels[mask]).mean())


def _mean_nll(logp: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    return float(-logp[mask, labels[mask]].mean())


def train(source: RegionDataset | None, target: RegionDataset, config: TrainConfig,
          schema: FeatureSchema | None = None) -> tuple[PoTAModel, TrainReport]:
    """Full-graph Adam training with early stopping on target validation accuracy.

    Returns the parameters from the best-validation epoch. With ``source=None``
    only the target branch is trained (the target-only baseline).
    """
    if source is not None and source.x.shape[1] != target.x.shape[1]:
        raise ShapeError(f"source width {source.x.shape[1]} != target width {target.x.shape[1]}")
    if not target.val.any():
        raise BatchError(f"{target.name}: empty validation mask")
    params = init_params(target.x.shape[1], config)
    state = AdamState.for_params(params)
    report = TrainReport()
    best_acc, best_nll, best_params = -math.inf, math.inf, None
    for epoch in range(config.max_epochs):
        fwd = forward(params, config, source, target)
        if not math.isfinite(fwd.total):
            raise TrainingError(f"non-finite loss at epoch {epoch}", epoch)
        val_acc = _accuracy(fwd.target.logits, target.labels, target.val)
        val_nll = _mean_nll(fwd.target.logp, target.labels, target.val)
        report.loss_pred_source.append(fwd.loss_pred_source)
        report.loss_pred_target.append(fwd.loss_pred_target)
        report.loss_dom.append(fwd.loss_dom)
        report.loss_total.append(fwd.total)
        report.val_accuracy.append(val_acc)
        report.last_epoch = epoch
        # accuracy first; validation NLL breaks ties on accuracy plateaus
        if (val_acc, -val_nll) > (best_acc, -best_nll):
            best_acc, best_nll, report.best_epoch = val_acc, val_nll, epoch
            best_params = copy.deepcopy(params)
        elif epoch - report.best_epoch >= config.patience:
            break
        grads = backward(params, config, fwd)
        adam_step(params, grads, state, config.lr)
    model = PoTAModel(best_params, config, schema, target_only=source is None)
    b = model.branch(target)
    report.metrics = {
        "best_val_accuracy": best_acc,
        "test_accuracy": _accuracy(b.logits, target.labels, target.test),
    }
    return model, report
