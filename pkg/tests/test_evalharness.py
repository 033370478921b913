import csv
from dataclasses import replace

import numpy as np
import pytest

from pota.classifier import PoTAModel, TrainConfig, init_params
from pota.errors import BatchError, ConfigError
from pota.evalharness import (
    ABLATION_MODES,
    GAIN_HEADER,
    METRICS_HEADER,
    Metrics,
    ablation_suite,
    discriminator_accuracy,
    evaluate,
    export_latents,
    prepare_pair,
    rank_candidates,
    scaling_factor_per_doubling,
    transfer_gain_matrix,
    write_candidates_csv,
    write_latents_csv,
    write_metrics_csv,
)
from pota.synthgen import SynthConfig, generate_pair

TINY = TrainConfig(hidden=4, max_epochs=8, patience=5)


@pytest.fixture(scope="module")
def records():
    return generate_pair(SynthConfig(12, 12, wetland_density=0.2, seed=1),
                         SynthConfig(12, 12, wetland_density=0.1, seed=2))


@pytest.fixture(scope="module")
def model_pair(records):
    ds, dt, schema = prepare_pair(*records, TINY)
    return PoTAModel(init_params(dt.x.shape[1], TINY), TINY, schema), ds, dt


class FixedModel:
    """Stands in for a model with fixed wetland probabilities."""

    def __init__(self, prob):
        self.prob = np.asarray(prob, dtype=float)

    def predict_proba(self, region, domain="target"):
        return np.column_stack([1 - self.prob, self.prob])


class Region:
    def __init__(self, labels, width=None):
        from pota.gridgraph import build_grid_graph

        self.labels = np.asarray(labels)
        self.n = self.labels.size
        self.name = "fixed"
        self.graph = build_grid_graph(width or self.n, self.n // (width or self.n))

    def mask(self, split):
        return np.ones(self.n, dtype=bool)


def test_metrics_examples():
    m = Metrics(tp=2, fp=1, tn=6, fn=1)
    assert m.accuracy == pytest.approx(0.8) and m.recall == pytest.approx(2 / 3)
    empty = Metrics(0, 1, 3, 0)
    assert empty.recall == 0.0 and not empty.recall_defined


def test_evaluate_perfect_and_all_negative():
    y = np.array([1, 0, 0, 1, 0])
    m = evaluate(FixedModel(y * 0.9 + 0.05), Region(y), "all")
    assert (m.accuracy, m.recall) == (1.0, 1.0)
    m = evaluate(FixedModel(np.full(5, 0.1)), Region(y), "all")
    assert m.recall == 0.0 and m.tn == 3 and m.fn == 2


def test_evaluate_empty_mask():
    with pytest.raises(BatchError):
        evaluate(FixedModel(np.zeros(3)), Region([0, 1, 0]), np.zeros(3, bool))


def test_evaluate_is_pure(model_pair):
    model, _, dt = model_pair
    assert evaluate(model, dt) == evaluate(model, dt)


def test_rank_candidates_contract():
    y = np.array([0, 1, 0, 0, 0, 1])
    prob = np.array([0.3, 0.99, 0.7, 0.3, 0.9, 0.5])
    c = rank_candidates(FixedModel(prob), Region(y, width=3), top_k=10)
    assert [x.cell for x in c] == [4, 2, 0, 3]
    assert all(y[x.cell] == 0 for x in c)
    assert (c[0].row, c[0].col) == (1, 1)
    assert len(rank_candidates(FixedModel(prob), Region(y, width=3), top_k=2)) == 2
    assert rank_candidates(FixedModel(np.ones(4)), Region([1, 1, 1, 1]), top_k=3) == []
    with pytest.raises(ConfigError):
        rank_candidates(FixedModel(prob), Region(y), top_k=0)


def test_export_latents(model_pair, tmp_path):
    model, ds, dt = model_pair
    rows = export_latents(model, ds, dt, sample_per_domain=20, seed=3)
    assert len(rows) == 4 * 20 and all(len(r) == TINY.hidden + 2 for r in rows)
    assert rows == export_latents(model, ds, dt, sample_per_domain=20, seed=3)
    with pytest.warns(UserWarning, match="exceeds"):
        assert len(export_latents(model, ds, dt, sample_per_domain=500)) == 4 * 144
    write_latents_csv(rows, TINY.hidden, tmp_path / "l.csv")
    header = (tmp_path / "l.csv").read_text().splitlines()[0]
    assert header == "domain,stream,z0,z1,z2,z3"


def test_discriminator_accuracy_range(model_pair):
    model, ds, dt = model_pair
    acc = discriminator_accuracy(model, ds, dt)
    assert set(acc) == {"specific", "shared"} and all(0 <= v <= 1 for v in acc.values())


def test_ablation_suite_rows(records):
    out = ablation_suite(*records, TINY)
    assert list(out) == list(ABLATION_MODES) and len(out) == 7


def test_no_dd_equals_lambda_zero(records):
    a = ablation_suite(*records, TINY, modes=("no-dd",))["no-dd"]
    b = ablation_suite(*records, replace(TINY, lam=0.0), modes=("full",))["full"]
    assert a == b


def test_gain_matrix_shape_and_diagonal(records, tmp_path):
    third = generate_pair(SynthConfig(12, 12, wetland_density=0.3, seed=7),
                          SynthConfig(12, 12, seed=8))[0]
    gm = transfer_gain_matrix([records[0], records[1], third], TINY, seeds=(0, 1))
    assert gm.gain.shape == (3, 3)
    assert np.all(np.diag(gm.gain) == 0)
    assert all(len(v) == 2 for v in gm.per_seed.values())
    gm.write_csv(tmp_path / "g.csv")
    rows = list(csv.reader(open(tmp_path / "g.csv")))
    assert tuple(rows[0]) == GAIN_HEADER and len(rows) == 10


def test_gain_matrix_records_failures(records):
    from pota.featurecodec import FeatureSpec, RegionRecords

    src = records[0]
    odd = RegionRecords("odd", 12, 12, (FeatureSpec("x", "continuous"),), np.ones((144, 1)),
                        np.zeros(144), src.labels)
    gm = transfer_gain_matrix([src, odd], TINY, seeds=(0,))
    assert np.isnan(gm.gain[0, 1]) and (0, 1) in gm.failures


def test_gain_matrix_needs_two_regions(records):
    with pytest.raises(ConfigError):
        transfer_gain_matrix([records[0]], TINY)


def test_metrics_and_candidate_csv(tmp_path):
    write_metrics_csv([("full", 0, Metrics(1, 2, 3, 4))], tmp_path / "m.csv")
    rows = list(csv.reader(open(tmp_path / "m.csv")))
    assert tuple(rows[0]) == METRICS_HEADER and rows[1][4:] == ["1", "2", "3", "4"]
    write_candidates_csv([], tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text() == "rank,cell,row,col,wetland_probability\n"


def test_scaling_factor_fit():
    rows = [(0, 0, 100, 1.0), (0, 0, 200, 2.0), (0, 0, 400, 4.0)]
    assert scaling_factor_per_doubling(rows) == pytest.approx(2.0)
