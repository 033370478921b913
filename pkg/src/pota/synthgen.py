"""Paired synthetic regions with controllable wetland density, spatial
correlation and domain shift.

A standardised "wetness" field drives everything: wetland labels are its top
``density`` quantile, continuous features are affine in it (slope 0
for uninformative ones) plus an optional independent smooth nuisance field,
categorical features bucket a blend of it with an independent field, and HAND
height decreases with it. Source and target share the coefficient set except for a
``domain_shift`` fraction that the target redraws.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import ConfigError, GenerationError
from .featurecodec import CATEGORICAL, CONTINUOUS, FeatureSpec, RegionRecords
from .gridgraph import GridGraph


@dataclass(frozen=True)
class SynthConfig:
    width: int = 64
    height: int = 64
    wetland_density: float = 0.05
    spatial_scale: int = 2
    cardinalities: tuple[int, ...] = (4, 3)
    n_continuous: int = 4
    n_informative: int | None = None  # continuous features with nonzero slope; None = all
    domain_shift: float = 0.3
    noise: float = 1.0
    nuisance: float = 0.0  # scale of each continuous feature's independent smooth field
    heterophilic: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "cardinalities", tuple(int(c) for c in self.cardinalities))
        if not 0.0 < self.wetland_density < 1.0:
            raise ConfigError(f"wetland_density must be in (0, 1), got {self.wetland_density}")
        if self.width < 8 or self.height < 8:
            raise ConfigError(f"synthetic grids must be at least 8x8, got {self.width}x{self.height}")
        if not 0.0 <= self.domain_shift <= 1.0:
            raise ConfigError(f"domain_shift must be in [0, 1], got {self.domain_shift}")
        if self.spatial_scale < 0 or self.noise < 0 or self.nuisance < 0:
            raise ConfigError("spatial_scale, noise and nuisance must be non-negative")
        if any(c < 2 for c in self.cardinalities):
            raise ConfigError("categorical cardinalities must be >= 2")
        if self.n_continuous < 1:
            raise ConfigError("need at least one continuous feature")
        if self.n_informative is not None and not 0 <= self.n_informative <= self.n_continuous:
            raise ConfigError("n_informative must be in [0, n_continuous]")

    def to_json(self) -> dict:
        d = asdict(self)
        d["cardinalities"] = list(self.cardinalities)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class Coefficients:
    cont_slope: np.ndarray
    cont_offset: np.ndarray
    cont_spread: np.ndarray
    cat_mix: np.ndarray
    hand_slope: float
    hand_offset: float

    def as_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.cont_slope, self.cont_offset, self.cont_spread, self.cat_mix, [self.hand_slope, self.hand_offset]]
        )

    @classmethod
    def from_vector(cls, v: np.ndarray, n_continuous: int, n_categorical: int) -> "Coefficients":
        k = n_continuous
        return cls(v[:k].copy(), v[k:2 * k].copy(), v[2 * k:3 * k].copy(),
                   v[3 * k:3 * k + n_categorical].copy(), float(v[-2]), float(v[-1]))


def _draw(rng: np.random.Generator, n_continuous: int, n_categorical: int, p_informative: float) -> np.ndarray:
    slope = rng.uniform(0.5, 1.5, n_continuous) * rng.choice([-1.0, 1.0], n_continuous)
    slope[rng.random(n_continuous) >= p_informative] = 0.0
    offset = rng.uniform(4.0, 6.0, n_continuous)
    spread = rng.uniform(0.5, 1.5, n_continuous)
    mix = rng.uniform(0.3, 0.9, n_categorical)
    hand = [rng.uniform(0.8, 1.4), rng.uniform(2.8, 3.6)]
    return np.concatenate([slope, offset, spread, mix, hand])


def make_coefficients(config: SynthConfig, seed: int = 0) -> Coefficients:
    """The coefficient set shared by a source/target pair."""
    rng = np.random.default_rng([seed, 0xC0EF])
    n_cat, n_cont = len(config.cardinalities), config.n_continuous
    v = _draw(rng, n_cont, n_cat, 1.0)
    n_inf = n_cont if config.n_informative is None else config.n_informative
    v[rng.permutation(n_cont)[n_inf:]] = 0.0
    return Coefficients.from_vector(v, n_cont, n_cat)


def shift_coefficients(coefs: Coefficients, shift: float, rng: np.random.Generator) -> Coefficients:
    """Redraw ``round(shift * K)`` of the ``K`` coefficients from the same prior."""
    n_cont, n_cat = coefs.cont_slope.size, coefs.cat_mix.size
    v = coefs.as_vector()
    fresh = _draw(rng, n_cont, n_cat, float(np.mean(coefs.cont_slope != 0)))
    k = int(round(shift * v.size))
    idx = rng.choice(v.size, size=k, replace=False)
    v[idx] = fresh[idx]
    return Coefficients.from_vector(v, n_cont, n_cat)


def smooth_field(rng: np.random.Generator, height: int, width: int, scale: int) -> np.ndarray:
    """Box-blurred white noise, standardised to mean 0 and unit variance."""
    f = rng.standard_normal((height, width))
    if scale > 0:
        f = uniform_filter(f, size=2 * scale + 1, mode="wrap")
    return (f - f.mean()) / f.std()


def feature_specs(config: SynthConfig) -> tuple[FeatureSpec, ...]:
    cats = [FeatureSpec(f"cat_{i}", CATEGORICAL, c) for i, c in enumerate(config.cardinalities)]
    conts = [FeatureSpec(f"cont_{i}", CONTINUOUS) for i in range(config.n_continuous)]
    return tuple(cats + conts)


def generate_region(config: SynthConfig, role: str, shared_coefficients: Coefficients,
                    name: str | None = None) -> RegionRecords:
    if role not in ("source", "target"):
        raise ConfigError(f"role must be source or target, got {role!r}")
    n = config.width * config.height
    k = int(round(config.wetland_density * n))
    if k == 0:
        raise GenerationError(
            f"density {config.wetland_density} on {config.width}x{config.height} yields no wetland "
            "cells; use a larger grid"
        )
    rng = np.random.default_rng([config.seed, 0 if role == "source" else 1])
    coefs = shared_coefficients
    if role == "target" and config.domain_shift > 0:
        coefs = shift_coefficients(coefs, config.domain_shift, rng)
    h, w = config.height, config.width
    wet = smooth_field(rng, h, w, config.spatial_scale)
    if config.heterophilic:
        r, c = np.indices((h, w))
        wet = wet * np.where((r + c) % 2 == 0, 1.0, -1.0)
    u = wet.reshape(-1)

    labels = np.zeros(n, dtype=np.int64)
    labels[np.argsort(-u, kind="stable")[:k]] = 1

    cols = []
    for i, card in enumerate(config.cardinalities):
        mix = coefs.cat_mix[i]
        other = smooth_field(rng, h, w, config.spatial_scale).reshape(-1)
        v = mix * u + np.sqrt(1.0 - mix * mix) * other
        edges = np.quantile(v, np.arange(1, card) / card)
        cols.append(np.searchsorted(edges, v, side="right").astype(np.float64))
    for i in range(config.n_continuous):
        other = smooth_field(rng, h, w, config.spatial_scale).reshape(-1)
        val = (coefs.cont_offset[i] + coefs.cont_slope[i] * u + config.nuisance * coefs.cont_spread[i] * other
               + config.noise * rng.standard_normal(n))
        cols.append(np.maximum(val, 0.0))
    hand = np.maximum(coefs.hand_offset - coefs.hand_slope * u + config.noise * rng.standard_normal(n), 0.0)

    return RegionRecords(
        name=name or f"{role}_{config.seed}",
        width=w,
        height=h,
        features=feature_specs(config),
        raw=np.column_stack(cols),
        hand=hand,
        labels=labels,
        domain=role,
    )


def generate_pair(source_config: SynthConfig, target_config: SynthConfig, world_seed: int = 0,
                  names=("source", "target")) -> tuple[RegionRecords, RegionRecords]:
    coefs = make_coefficients(source_config, world_seed)
    src = generate_region(source_config, "source", coefs, names[0])
    tgt = generate_region(target_config, "target", coefs, names[1])
    return src, tgt


def homophily(labels, graph: GridGraph) -> float:
    """Fraction of edges whose endpoints share a label."""
    y = labels.labels if isinstance(labels, RegionRecords) else np.asarray(labels)
    if graph.n_stored == 0:
        return 1.0
    return float((y[graph.rows] == y[graph.indices]).mean())
