"""On-disk formats: Region Grid Files and run-config files.

A region is two files side by side::

    <name>.manifest.json   {"format", "version", "name", "width", "height",
                            "domain", "features": [{"name", "kind", "cardinality"?}],
                            "cells": "<name>.cells.csv"}
    <name>.cells.csv       row,col,<feature columns in manifest order>,hand_height_m,wetland_label

Cells are written in row-major order, LF line endings, UTF-8, ``repr`` floats
(shortest round-tripping form) and integer categorical codes.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .classifier import TrainConfig
from .errors import ConfigError, FormatError
from .featurecodec import CATEGORICAL, FeatureSpec, RegionRecords
from .synthgen import SynthConfig

MANIFEST_SUFFIX = ".manifest.json"
CELLS_SUFFIX = ".cells.csv"
TAIL_COLUMNS = ("hand_height_m", "wetland_label")


def region_paths(path) -> tuple[Path, Path]:
    """Manifest and cell-table paths for a region stem or either file."""
    p = Path(path)
    s = str(p)
    for suffix in (MANIFEST_SUFFIX, CELLS_SUFFIX):
        if s.endswith(suffix):
            s = s[: -len(suffix)]
    return Path(s + MANIFEST_SUFFIX), Path(s + CELLS_SUFFIX)


def _fmt_float(v: float) -> str:
    return repr(float(v))


def write_region(records: RegionRecords, path) -> tuple[Path, Path]:
    mpath, cpath = region_paths(path)
    mpath.parent.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": "pota-region",
        "version": 1,
        "name": records.name,
        "width": records.width,
        "height": records.height,
        "domain": records.domain,
        "features": [{k: v for k, v in f.to_json().items() if k != "max_value"} for f in records.features],
        "cells": cpath.name,
    }
    mpath.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8", newline="\n")

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "col", *[f.name for f in records.features], *TAIL_COLUMNS])
    cat = [f.kind == CATEGORICAL for f in records.features]
    for i in range(records.n_cells):
        r, c = divmod(i, records.width)
        vals = [str(int(v)) if is_cat else _fmt_float(v) for v, is_cat in zip(records.raw[i], cat)]
        w.writerow([r, c, *vals, _fmt_float(records.hand[i]), int(records.labels[i])])
    cpath.write_text(buf.getvalue(), encoding="utf-8", newline="\n")
    return mpath, cpath


def read_region(path) -> RegionRecords:
    mpath, cpath = region_paths(path)
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FormatError(f"{mpath}: no such file") from None
    except json.JSONDecodeError as e:
        raise FormatError(f"{mpath}:{e.lineno}: {e.msg}") from None
    try:
        width, height = int(manifest["width"]), int(manifest["height"])
        features = tuple(FeatureSpec.from_json(f) for f in manifest["features"])
        name = manifest.get("name", mpath.name[: -len(MANIFEST_SUFFIX)])
        domain = manifest.get("domain", "source")
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{mpath}: bad manifest ({e})") from None
    cpath = mpath.parent / manifest.get("cells", cpath.name)

    n, k = width * height, len(features)
    raw = np.full((n, k), np.nan)
    hand = np.full(n, np.nan)
    labels = np.zeros(n, dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    expected = ["row", "col", *[f.name for f in features], *TAIL_COLUMNS]
    try:
        fh = open(cpath, encoding="utf-8", newline="")
    except FileNotFoundError:
        raise FormatError(f"{cpath}: no such file") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise FormatError(f"{cpath}:1: header {header} does not match manifest order {expected}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(expected):
                raise FormatError(f"{cpath}:{lineno}: expected {len(expected)} fields, got {len(row)}")
            try:
                r, c = int(row[0]), int(row[1])
                vals = [float(v) for v in row[2:2 + k]]
                h = float(row[2 + k])
                y = int(row[3 + k])
            except ValueError as e:
                raise FormatError(f"{cpath}:{lineno}: {e}") from None
            if not (0 <= r < height and 0 <= c < width):
                raise FormatError(f"{cpath}:{lineno}: cell ({r}, {c}) outside {height}x{width} grid")
            i = r * width + c
            if seen[i]:
                raise FormatError(f"{cpath}:{lineno}: duplicate cell ({r}, {c})")
            if y not in (0, 1):
                raise FormatError(f"{cpath}:{lineno}: wetland_label must be 0 or 1, got {y}")
            seen[i] = True
            raw[i], hand[i], labels[i] = vals, h, y
    if not seen.all():
        raise FormatError(f"{cpath}: {int(seen.sum())} cells present, manifest declares {n}")
    return RegionRecords(name, width, height, features, raw, hand, labels, domain)


TRAIN_KEY_ALIASES = {"lambda": "lam", "L": "layers", "h": "hidden"}


def load_run_config(path) -> tuple[TrainConfig, SynthConfig | None]:
    """Parse a run-config JSON: TrainConfig keys at top level, optional ``synth`` object.

    ``seed`` is required; unknown keys are rejected.
    """
    p = Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FormatError(f"{p}: no such file") from None
    except json.JSONDecodeError as e:
        raise FormatError(f"{p}:{e.lineno}: {e.msg}") from None
    return parse_run_config(doc, str(p))


def parse_run_config(doc: dict, where: str = "<config>") -> tuple[TrainConfig, SynthConfig | None]:
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: top level must be an object")
    doc = dict(doc)
    if "seed" not in doc:
        raise ConfigError(f"{where}: 'seed' is required")
    synth = doc.pop("synth", None)
    train_kw = {TRAIN_KEY_ALIASES.get(k, k): v for k, v in doc.items()}
    try:
        tcfg = TrainConfig.from_json(train_kw)
        scfg = None if synth is None else SynthConfig.from_json({"seed": doc["seed"], **synth})
    except ConfigError as e:
        raise ConfigError(f"{where}: {e}") from None
    except TypeError as e:
        raise ConfigError(f"{where}: {e}") from None
    return tcfg, scfg
