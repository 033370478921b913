import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pota.errors import DegenerateFeatureError, EncodeError, SchemaError, SplitError
from pota.featurecodec import (
    CATEGORICAL,
    CONTINUOUS,
    FeatureSchema,
    FeatureSpec,
    RegionRecords,
    build_dataset,
    encode,
    fit_schema,
    split_masks,
)

SPECS = (FeatureSpec("soil", CATEGORICAL, 3), FeatureSpec("elev", CONTINUOUS))


def records(raw, hand=None, labels=None, name="r", width=None, specs=SPECS):
    raw = np.asarray(raw, dtype=float)
    n = raw.shape[0]
    width = width or n
    return RegionRecords(name, width, n // width, specs, raw,
                         np.zeros(n) if hand is None else hand,
                         np.zeros(n, dtype=int) if labels is None else labels)


def test_union_max():
    s = records([[0, 5.0], [1, 1.0]])
    t = records([[2, 10.0], [0, 3.0]])
    sch = fit_schema(s, t)
    assert sch.features[1].max_value == 10.0
    assert sch.features[0].cardinality == 3


def test_all_zero_continuous_is_degenerate():
    with pytest.raises(DegenerateFeatureError):
        fit_schema(records([[0, 0.0], [1, 0.0]]), records([[2, 0.0], [0, 0.0]]))


def test_schema_mismatch():
    other = (FeatureSpec("soil", CATEGORICAL, 4), FeatureSpec("elev", CONTINUOUS))
    with pytest.raises(SchemaError, match="cardinality"):
        fit_schema(records([[0, 1.0]]), records([[0, 1.0]], specs=other))
    with pytest.raises(SchemaError, match="arity"):
        fit_schema(records([[0, 1.0]]), records([[0]], specs=SPECS[:1]))


def test_categorical_needs_cardinality():
    with pytest.raises(SchemaError):
        FeatureSpec("x", CATEGORICAL, 1)


def test_encode_examples():
    s = records([[1, 5.0], [0, 10.0]], hand=np.array([2.0, 1.99]))
    x = encode(s, fit_schema(s, s))
    assert x[0].tolist() == [0, 1, 0, 0.5, 1]
    assert x[1].tolist() == [1, 0, 0, 1.0, 0]


def test_encode_clamps_above_fitted_max():
    sch = FeatureSchema((SPECS[0], FeatureSpec("elev", CONTINUOUS, max_value=4.0)))
    assert encode(records([[0, 9.0]]), sch)[0, 3] == 1.0


def test_encode_bad_code_names_cell():
    s = records([[0, 1.0], [0, 1.0], [0, 1.0], [3, 1.0]], width=2)
    sch = FeatureSchema((SPECS[0], FeatureSpec("elev", CONTINUOUS, max_value=1.0)))
    with pytest.raises(EncodeError, match=r"row=1, col=1"):
        encode(s, sch)


def test_encode_rejects_renamed_feature():
    sch = FeatureSchema((FeatureSpec("land", CATEGORICAL, 3), FeatureSpec("elev", CONTINUOUS, max_value=1.0)))
    with pytest.raises(SchemaError):
        encode(records([[0, 1.0]]), sch)


def test_record_validation():
    with pytest.raises(SchemaError):
        records([[0, 1.0]], labels=np.array([2]))
    with pytest.raises(SchemaError):
        records([[0, 1.0]], hand=np.array([np.nan]))


def test_split_sizes():
    tr, va, te = split_masks(100, seed=0)
    assert (tr.sum(), va.sum(), te.sum()) == (10, 40, 50)
    tr, va, te = split_masks(10, seed=0)
    assert (tr.sum(), va.sum(), te.sum()) == (1, 4, 5)


def test_split_deterministic():
    a, b = split_masks(57, seed=3), split_masks(57, seed=3)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_split_errors():
    with pytest.raises(SplitError):
        split_masks(9)
    with pytest.raises(SplitError):
        split_masks(50, fractions=(0.5, 0.5, 0.1))
    with pytest.raises(SplitError):
        split_masks(20, fractions=(0.0, 0.5, 0.5))


def test_stratified_split_keeps_wetlands_everywhere():
    labels = np.zeros(1000, dtype=int)
    labels[:10] = 1
    for m in split_masks(1000, seed=0, labels=labels):
        assert labels[m].sum() >= 1


def test_build_dataset_masks_and_graph():
    s = records(np.column_stack([np.arange(20) % 3, np.arange(20) + 1.0]), width=5)
    ds = build_dataset(s, fit_schema(s, s), seed=0)
    assert ds.n == 20 and ds.graph.n == 20
    assert ds.mask("all").all()
    with pytest.raises(SplitError):
        ds.mask("holdout")


@st.composite
def random_records(draw):
    w, h = draw(st.integers(1, 6)), draw(st.integers(1, 6))
    n = w * h
    cards = draw(st.lists(st.integers(2, 5), min_size=1, max_size=3))
    n_cont = draw(st.integers(1, 3))
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    specs = tuple(FeatureSpec(f"c{i}", CATEGORICAL, c) for i, c in enumerate(cards)) + tuple(
        FeatureSpec(f"x{i}", CONTINUOUS) for i in range(n_cont))
    cols = [rng.integers(0, c, n) for c in cards] + [rng.uniform(0.1, 100, n) for _ in range(n_cont)]
    return RegionRecords("r", w, h, specs, np.column_stack(cols).astype(float),
                         rng.uniform(0, 5, n), rng.integers(0, 2, n)), cards


@given(random_records())
def test_encoded_rows_well_formed(rec_cards):
    rec, cards = rec_cards
    sch = fit_schema(rec, rec)
    x = encode(rec, sch)
    assert x.shape == (rec.n_cells, sch.width)
    col = 0
    for c in cards:
        assert np.all(x[:, col:col + c].sum(axis=1) == 1)
        col += c
    assert np.all((x[:, col:-1] >= 0) & (x[:, col:-1] <= 1))
    assert set(np.unique(x[:, -1])) <= {0.0, 1.0}
    assert np.array_equal(encode(rec, sch), x)


@given(st.integers(10, 500), st.integers(0, 1000), st.booleans())
def test_masks_partition_cells(n, seed, strat):
    labels = np.random.default_rng(seed).integers(0, 2, n) if strat else None
    try:
        tr, va, te = split_masks(n, seed=seed, labels=labels)
    except SplitError:
        return  # a tiny class can leave a stratified split empty
    assert not (tr & va).any() and not (tr & te).any() and not (va & te).any()
    assert (tr | va | te).all()
