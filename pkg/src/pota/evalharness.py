"""Metrics, transfer-gain matrices, ablation sweeps, candidate ranking,
latent export and the epoch-time scaling probe.

All CSV writers use a fixed header row (see ``*_HEADER`` constants).
"""

from __future__ import annotations

import csv
import logging
import time
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .classifier import PoTAModel, TrainConfig, backward, forward, init_params
from .classifier import train as train_model
from .disentangle import discriminate
from .errors import BatchError, ConfigError, PotaError
from .featurecodec import RegionDataset, RegionRecords, build_dataset, fit_schema
from .numerics import AdamState, adam_step

log = logging.getLogger(__name__)

METRICS_HEADER = ("mode", "seed", "accuracy", "recall", "tp", "fp", "tn", "fn")
GAIN_HEADER = ("source", "target", "gain", "n_seeds", "transfer_accuracy", "baseline_accuracy")
CANDIDATE_HEADER = ("rank", "cell", "row", "col", "wetland_probability")
SCALING_HEADER = ("width", "height", "n_edges", "epoch_seconds")


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total

    @property
    def recall(self) -> float:
        # 0 when there are no positives; see recall_defined
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def recall_defined(self) -> bool:
        return self.tp + self.fn > 0

    @classmethod
    def from_predictions(cls, pred: np.ndarray, labels: np.ndarray) -> "Metrics":
        pred = np.asarray(pred, dtype=bool)
        y = np.asarray(labels) == 1
        return cls(int((pred & y).sum()), int((pred & ~y).sum()), int((~pred & ~y).sum()), int((~pred & y).sum()))


def evaluate(model: PoTAModel, region: RegionDataset, mask: np.ndarray | str = "test",
             domain: str = "target") -> Metrics:
    """Argmax predictions against labels over the masked cells."""
    m = region.mask(mask) if isinstance(mask, str) else np.asarray(mask, dtype=bool)
    if not m.any():
        raise BatchError(f"{region.name}: empty evaluation mask")
    pred = model.predict_proba(region, domain).argmax(axis=1) == 1
    return Metrics.from_predictions(pred[m], region.labels[m])


def prepare_pair(source: RegionRecords, target: RegionRecords, config: TrainConfig):
    """Fit the pair's schema and build both datasets with the config's seed."""
    schema = fit_schema(source, target)
    kw = dict(connectivity=config.connectivity, stratified=config.stratified)
    return (build_dataset(source, schema, config.seed, **kw),
            build_dataset(target, schema, config.seed, **kw), schema)


def run_pair(source: RegionRecords | None, target: RegionRecords, config: TrainConfig,
             reference: RegionRecords | None = None):
    """Train on a record pair (``source=None`` for target-only) and score the target test mask.

    ``reference`` fixes the schema for target-only runs so they encode exactly
    like the paired transfer run.
    """
    ref = source if source is not None else (reference if reference is not None else target)
    ds, dt, schema = prepare_pair(ref, target, config)
    model, report = train_model(ds if source is not None else None, dt, config, schema)
    return model, report, evaluate(model, dt, "test")


@dataclass
class GainMatrix:
    names: list[str]
    gain: np.ndarray  # (k, k) mean over seeds; NaN = missing
    transfer_acc: np.ndarray
    baseline_acc: np.ndarray
    per_seed: dict  # (i, j) -> list of gains
    failures: dict  # (i, j) -> message

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(GAIN_HEADER)
            for i, s in enumerate(self.names):
                for j, t in enumerate(self.names):
                    w.writerow([s, t, repr(float(self.gain[i, j])), len(self.per_seed.get((i, j), [])),
                                repr(float(self.transfer_acc[i, j])), repr(float(self.baseline_acc[i, j]))])


def transfer_gain_matrix(regions: Sequence[RegionRecords], config: TrainConfig,
                         seeds: Sequence[int] = (0, 1, 2, 3, 4)) -> GainMatrix:
    """Mean target test-accuracy gain of transfer over target-only, per ordered pair.

    Both runs of a pair share schema, split masks and seed, so every entry is a
    paired difference. Self-pairs are 0 by definition.
    """
    k = len(regions)
    if k < 2:
        raise ConfigError("transfer_gain_matrix needs at least 2 regions")
    gain = np.zeros((k, k))
    tacc = np.full((k, k), np.nan)
    bacc = np.full((k, k), np.nan)
    per_seed, failures = {}, {}
    for i, src in enumerate(regions):
        for j, tgt in enumerate(regions):
            if i == j:
                continue
            gains, ta, ba = [], [], []
            try:
                for seed in seeds:
                    cfg = replace(config, seed=seed)
                    _, _, m_t = run_pair(src, tgt, cfg)
                    _, _, m_b = run_pair(None, tgt, cfg, reference=src)
                    ta.append(m_t.accuracy)
                    ba.append(m_b.accuracy)
                    gains.append(m_t.accuracy - m_b.accuracy)
            except PotaError as e:
                failures[(i, j)] = f"{type(e).__name__}: {e}"
                log.warning("gain entry %s -> %s failed: %s", src.name, tgt.name, e)
                gain[i, j] = np.nan
                continue
            per_seed[(i, j)] = gains
            gain[i, j] = float(np.mean(gains))
            tacc[i, j] = float(np.mean(ta))
            bacc[i, j] = float(np.mean(ba))
    return GainMatrix([r.name for r in regions], gain, tacc, bacc, per_seed, failures)


ABLATION_MODES = ("full", "no-dd", "no-ap", "gcn-style", "gat-style", "shared-only", "specific-only")


def ablation_suite(source: RegionRecords, target: RegionRecords, config: TrainConfig,
                   modes: Sequence[str] = ABLATION_MODES) -> dict[str, Metrics]:
    """Target test metrics for each mode, all with the same seed and splits."""
    out = {}
    for mode in modes:
        cfg = config.with_mode(mode)
        out[mode] = run_pair(source, target, cfg)[2]
    return out


def write_metrics_csv(rows, path) -> None:
    """``rows``: iterable of (mode, seed, Metrics)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for mode, seed, m in rows:
            w.writerow([mode, seed, repr(m.accuracy), repr(m.recall), m.tp, m.fp, m.tn, m.fn])


@dataclass(frozen=True)
class Candidate:
    cell: int
    row: int
    col: int
    probability: float


def rank_candidates(model: PoTAModel, region: RegionDataset, top_k: int, domain: str = "target") -> list[Candidate]:
    """Non-wetland cells by descending wetland probability (ties: lower index first)."""
    if top_k <= 0:
        raise ConfigError(f"top_k must be positive, got {top_k}")
    prob = model.predict_proba(region, domain)[:, 1]
    idx = np.flatnonzero(region.labels == 0)
    order = idx[np.lexsort((idx, -prob[idx]))][:top_k]
    width = region.graph.width
    return [Candidate(int(i), int(i // width), int(i % width), float(prob[i])) for i in order]


def write_candidates_csv(cands: Sequence[Candidate], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CANDIDATE_HEADER)
        for r, c in enumerate(cands, start=1):
            w.writerow([r, c.cell, c.row, c.col, repr(c.probability)])


def export_latents(model: PoTAModel, source: RegionDataset, target: RegionDataset,
                   sample_per_domain: int = 500, seed: int = 0) -> list[tuple]:
    """Rows of (domain, stream, *latent) for a seeded sample of cells per region."""
    rng = np.random.default_rng(seed)
    rows = []
    for dom, ds in (("source", source), ("target", target)):
        k = sample_per_domain
        if k > ds.n:
            warnings.warn(f"{ds.name}: sample {k} exceeds {ds.n} cells; using all", stacklevel=2)
            k = ds.n
        idx = np.sort(rng.choice(ds.n, size=k, replace=False))
        spe, com = model.latents(ds, dom)
        for stream, lat in (("specific", spe), ("shared", com)):
            rows.extend((dom, stream, *map(float, lat[i])) for i in idx)
    return rows


def write_latents_csv(rows, hidden: int, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["domain", "stream", *[f"z{k}" for k in range(hidden)]])
        for r in rows:
            w.writerow([r[0], r[1], *map(repr, r[2:])])


def discriminator_accuracy(model: PoTAModel, source: RegionDataset, target: RegionDataset) -> dict[str, float]:
    """Domain-classification accuracy of the discriminator on each latent stream, all cells."""
    hits = {"specific": [], "shared": []}
    for dom, ds in (("source", source), ("target", target)):
        spe, com = model.latents(ds, dom)
        want = dom == "target"
        hits["specific"].append((discriminate(spe, model.params)[:, 0] > 0.5) == want)
        hits["shared"].append((discriminate(com, model.params)[:, 0] > 0.5) == want)
    return {k: float(np.concatenate(v).mean()) for k, v in hits.items()}


def time_epochs(source: RegionDataset, target: RegionDataset, config: TrainConfig, epochs: int = 5) -> float:
    """Median wall time of one training epoch (forward, backward, Adam) after one warmup epoch."""
    params = init_params(target.x.shape[1], config)
    state = AdamState.for_params(params)
    times = []
    for e in range(epochs + 1):
        t0 = time.perf_counter()
        fwd = forward(params, config, source, target)
        adam_step(params, backward(params, config, fwd), state, config.lr)
        if e:
            times.append(time.perf_counter() - t0)
    return float(np.median(times))


def scaling_probe(sizes: Sequence[int | tuple[int, int]], config: TrainConfig, epochs: int = 5,
                  synth=None) -> list[tuple[int, int, int, float]]:
    """(width, height, edge count, median epoch seconds) per grid size."""
    from .synthgen import SynthConfig, generate_pair

    if len(sizes) < 3:
        raise ConfigError("scaling_probe needs at least 3 grid sizes")
    base = synth or SynthConfig()
    out = []
    for size in sizes:
        w, h = (size, size) if isinstance(size, int) else size
        sc = replace(base, width=w, height=h, wetland_density=0.1)
        src, tgt = generate_pair(sc, replace(sc, seed=sc.seed + 1))
        ds, dt, _ = prepare_pair(src, tgt, config)
        out.append((w, h, dt.graph.n_edges, time_epochs(ds, dt, config, epochs)))
    return out


def scaling_factor_per_doubling(rows) -> float:
    """2**slope of the log-log fit of epoch time against edge count."""
    e = np.log2([r[2] for r in rows])
    t = np.log2([r[3] for r in rows])
    slope = np.polyfit(e, t, 1)[0]
    return float(2.0 ** slope)


def write_scaling_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCALING_HEADER)
        for r in rows:
            w.writerow([r[0], r[1], r[2], repr(r[3])])
