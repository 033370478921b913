"""Per-cell raw records and their encoding into the model's input matrix.

Categorical (and ordinal) soil attributes become one-hot blocks, continuous
attributes are divided by the max over *both* regions, and HAND height is
thresholded at 2 m. Records are stored column-wise; ``CellRecord`` is the
per-cell view.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateFeatureError, EncodeError, SchemaError, SplitError

HAND_THRESHOLD_M = 2.0
SPLIT_FRACTIONS = (0.10, 0.40, 0.50)

CATEGORICAL = "categorical"
CONTINUOUS = "continuous"


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str
    cardinality: int | None = None
    max_value: float | None = None

    def __post_init__(self):
        if self.kind == CATEGORICAL:
            if self.cardinality is None or self.cardinality < 2:
                raise SchemaError(f"categorical feature {self.name!r} needs cardinality >= 2")
        elif self.kind == CONTINUOUS:
            if self.max_value is not None and not self.max_value > 0:
                raise DegenerateFeatureError(f"continuous feature {self.name!r} has max {self.max_value}")
        else:
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")

    @property
    def width(self) -> int:
        return self.cardinality if self.kind == CATEGORICAL else 1

    def to_json(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        if self.kind == CATEGORICAL:
            d["cardinality"] = self.cardinality
        elif self.max_value is not None:
            d["max_value"] = self.max_value
        return d

    @classmethod
    def from_json(cls, d: dict) -> "FeatureSpec":
        return cls(d["name"], d["kind"], d.get("cardinality"), d.get("max_value"))


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[FeatureSpec, ...]

    @property
    def width(self) -> int:
        """Encoded width: one-hot blocks + continuous columns + the HAND flag."""
        return sum(f.width for f in self.features) + 1

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def to_json(self) -> list[dict]:
        return [f.to_json() for f in self.features]

    @classmethod
    def from_json(cls, items: list[dict]) -> "FeatureSchema":
        return cls(tuple(FeatureSpec.from_json(d) for d in items))


class CellRecord(NamedTuple):
    row: int
    col: int
    raw_features: tuple
    hand_height: float
    wetland_label: int


@dataclass
class RegionRecords:
    """All cells of one region, column-wise, in row-major cell order."""

    name: str
    width: int
    height: int
    features: tuple[FeatureSpec, ...]  # declared; continuous max_value unset
    raw: np.ndarray  # (n, n_features) float64; categorical codes stored as floats
    hand: np.ndarray  # (n,) meters
    labels: np.ndarray  # (n,) int64 in {0, 1}
    domain: str = "source"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.width * self.height
        self.raw = np.asarray(self.raw, dtype=np.float64).reshape(n, len(self.features))
        self.hand = np.asarray(self.hand, dtype=np.float64).reshape(n)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(n)
        if not np.all(np.isfinite(self.hand)):
            raise SchemaError(f"region {self.name!r}: non-finite hand_height")
        if np.any((self.labels != 0) & (self.labels != 1)):
            raise SchemaError(f"region {self.name!r}: wetland labels must be 0/1")

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def __len__(self) -> int:
        return self.n_cells

    def cell(self, i: int) -> CellRecord:
        r, c = divmod(i, self.width)
        vals = tuple(
            int(v) if f.kind == CATEGORICAL else float(v) for f, v in zip(self.features, self.raw[i])
        )
        return CellRecord(r, c, vals, float(self.hand[i]), int(self.labels[i]))

    def __iter__(self) -> Iterator[CellRecord]:
        for i in range(self.n_cells):
            yield self.cell(i)

    @property
    def wetland_fraction(self) -> float:
        return float(self.labels.mean())


def fit_schema(source: RegionRecords, target: RegionRecords) -> FeatureSchema:
    """Schema with continuous maxima taken over the union of both regions."""
    if source.n_cells == 0 or target.n_cells == 0:
        raise SchemaError("cannot fit a schema on an empty region")
    if len(source.features) != len(target.features):
        raise SchemaError(
            f"feature arity mismatch: {len(source.features)} (source) vs {len(target.features)} (target)"
        )
    specs = []
    for k, (fs, ft) in enumerate(zip(source.features, target.features)):
        if fs.name != ft.name or fs.kind != ft.kind:
            raise SchemaError(f"feature {k}: {fs.name}/{fs.kind} vs {ft.name}/{ft.kind}")
        if fs.kind == CATEGORICAL:
            if fs.cardinality != ft.cardinality:
                raise SchemaError(
                    f"feature {fs.name!r}: cardinality {fs.cardinality} vs {ft.cardinality}"
                )
            specs.append(FeatureSpec(fs.name, CATEGORICAL, fs.cardinality))
        else:
            m = float(max(source.raw[:, k].max(), target.raw[:, k].max()))
            if not m > 0:
                raise DegenerateFeatureError(f"continuous feature {fs.name!r} has maximum {m} in both regions")
            specs.append(FeatureSpec(fs.name, CONTINUOUS, max_value=m))
    return FeatureSchema(tuple(specs))


def encode(records: RegionRecords, schema: FeatureSchema) -> np.ndarray:
    if len(records.features) != len(schema.features):
        raise SchemaError(
            f"region {records.name!r} has {len(records.features)} features, schema has {len(schema.features)}"
        )
    for k, (fr, fs) in enumerate(zip(records.features, schema.features)):
        if (fr.name, fr.kind, fr.cardinality) != (fs.name, fs.kind, fs.cardinality):
            raise SchemaError(
                f"region {records.name!r} feature {k} is {fr.name}/{fr.kind}/{fr.cardinality}, "
                f"schema expects {fs.name}/{fs.kind}/{fs.cardinality}"
            )
    n = records.n_cells
    out = np.zeros((n, schema.width), dtype=np.float64)
    col = 0
    rows = np.arange(n)
    for k, spec in enumerate(schema.features):
        v = records.raw[:, k]
        if spec.kind == CATEGORICAL:
            codes = v.astype(np.int64)
            bad = (codes != v) | (codes < 0) | (codes >= spec.cardinality)
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                r, c = divmod(i, records.width)
                raise EncodeError(
                    f"{records.name}: cell (row={r}, col={c}) has code {v[i]!r} for "
                    f"{spec.name!r} (cardinality {spec.cardinality})"
                )
            out[rows, col + codes] = 1.0
        else:
            out[:, col] = np.clip(v / spec.max_value, 0.0, 1.0)
        col += spec.width
    out[:, col] = (records.hand >= HAND_THRESHOLD_M).astype(np.float64)
    return out


def split_masks(n_cells: int, fractions=SPLIT_FRACTIONS, seed: int = 0, labels=None):
    """Disjoint train/val/test boolean masks from a seeded permutation.

    Train and val sizes are floored; the remainder goes to test. With
    ``labels`` the split is done within each class separately.
    """
    fr = tuple(float(f) for f in fractions)
    if len(fr) != 3 or abs(sum(fr) - 1.0) > 1e-9 or min(fr) < 0:
        raise SplitError(f"fractions must be three non-negatives summing to 1, got {fractions}")
    if n_cells < 10:
        raise SplitError(f"need at least 10 cells to split, got {n_cells}")
    rng = np.random.default_rng(seed)
    groups = [np.arange(n_cells)] if labels is None else [
        np.flatnonzero(np.asarray(labels) == c) for c in np.unique(labels)
    ]
    masks = [np.zeros(n_cells, dtype=bool) for _ in range(3)]
    for idx in groups:
        perm = idx[rng.permutation(idx.size)]
        n_tr = int(np.floor(fr[0] * idx.size))
        n_va = int(np.floor(fr[1] * idx.size))
        masks[0][perm[:n_tr]] = True
        masks[1][perm[n_tr:n_tr + n_va]] = True
        masks[2][perm[n_tr + n_va:]] = True
    if not all(m.any() for m in masks):
        raise SplitError(f"{n_cells} cells leave an empty split with fractions {fr}")
    return masks[0], masks[1], masks[2]


@dataclass
class RegionDataset:
    """Encoded features, labels, lattice graph and split masks for one region."""

    name: str
    x: np.ndarray
    labels: np.ndarray
    graph: "GridGraph"  # noqa: F821
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    records: RegionRecords | None = None

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def mask(self, split: str) -> np.ndarray:
        if split == "all":
            return np.ones(self.n, dtype=bool)
        try:
            return {"train": self.train, "val": self.val, "test": self.test}[split]
        except KeyError:
            raise SplitError(f"unknown split {split!r}") from None


def build_dataset(
    records: RegionRecords,
    schema: FeatureSchema,
    seed: int,
    connectivity: int = 4,
    stratified: bool = False,
    fractions: Sequence[float] = SPLIT_FRACTIONS,
) -> RegionDataset:
    from .gridgraph import build_grid_graph

    x = encode(records, schema)
    graph = build_grid_graph(records.width, records.height, connectivity)
    tr, va, te = split_masks(
        records.n_cells, fractions, seed, labels=records.labels if stratified else None
    )
    return RegionDataset(records.name, x, records.labels.copy(), graph, tr, va, te, records)
