from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pota.errors import ConfigError, GenerationError
from pota.gridgraph import build_grid_graph
from pota.synthgen import (
    SynthConfig,
    generate_pair,
    generate_region,
    homophily,
    make_coefficients,
    shift_coefficients,
)


def test_density_examples():
    r = generate_region(SynthConfig(64, 64, wetland_density=0.12), "source", make_coefficients(SynthConfig()))
    assert abs(r.wetland_fraction - 0.12) <= 0.2 * 0.12
    c = SynthConfig(128, 128, wetland_density=0.006)
    r = generate_region(c, "target", make_coefficients(c))
    assert abs(r.wetland_fraction - 0.006) <= 0.002


def _block_means(col, side=64, block=8):
    # smooth fields correlate neighbouring cells, so cells are not independent;
    # 8x8 block means are close to independent at the default spatial scale
    return col.reshape(side // block, block, side // block, block).mean(axis=(1, 3)).reshape(-1)


def test_no_shift_same_distribution():
    c = SynthConfig(64, 64, domain_shift=0.0, seed=3)
    s, t = generate_pair(c, replace(c, seed=4))
    for k, f in enumerate(s.features):
        if f.kind != "continuous":
            continue
        a, b = _block_means(s.raw[:, k]), _block_means(t.raw[:, k])
        se = np.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
        assert abs(a.mean() - b.mean()) < 3 * se


def test_shift_changes_coefficients():
    coefs = make_coefficients(SynthConfig(), 0)
    v0 = coefs.as_vector()
    v1 = shift_coefficients(coefs, 0.5, np.random.default_rng(0)).as_vector()
    assert 0 < (v0 != v1).sum() <= round(0.5 * v0.size)
    assert np.array_equal(shift_coefficients(coefs, 0.0, np.random.default_rng(0)).as_vector(), v0)


def test_n_informative():
    c = make_coefficients(SynthConfig(n_continuous=6, n_informative=2))
    assert (c.cont_slope != 0).sum() == 2


def test_hand_decreases_with_wetness():
    r = generate_region(SynthConfig(noise=0.1), "source", make_coefficients(SynthConfig()))
    assert r.hand[r.labels == 1].mean() < r.hand[r.labels == 0].mean()


def test_homophily_examples():
    g = build_grid_graph(6, 6)
    assert homophily(np.zeros(36, dtype=int), g) == 1.0
    checker = np.indices((6, 6)).sum(axis=0).reshape(-1) % 2
    assert homophily(checker, g) == 0.0


def test_homophily_grows_with_scale():
    g = build_grid_graph(64, 64)
    hs = []
    for scale in (0, 2, 4):
        c = SynthConfig(wetland_density=0.2, spatial_scale=scale, seed=9)
        hs.append(homophily(generate_region(c, "source", make_coefficients(c)), g))
    assert hs[0] < hs[1] < hs[2]


def test_heterophilic_region_is_low_homophily():
    c = SynthConfig(wetland_density=0.3, spatial_scale=3, heterophilic=True)
    assert homophily(generate_region(c, "source", make_coefficients(c)), build_grid_graph(64, 64)) < 0.5


def test_errors():
    with pytest.raises(GenerationError):
        c = SynthConfig(8, 8, wetland_density=0.001)
        generate_region(c, "source", make_coefficients(c))
    for kw in ({"width": 4}, {"wetland_density": 1.0}, {"domain_shift": 1.5}, {"n_informative": 9}, {"nuisance": -0.1}):
        with pytest.raises(ConfigError):
            SynthConfig(**kw)
    with pytest.raises(ConfigError):
        generate_region(SynthConfig(), "other", make_coefficients(SynthConfig()))


def test_nuisance_leaves_labels_and_spreads_features():
    c = SynthConfig(32, 32, seed=6)
    coefs = make_coefficients(c)
    plain = generate_region(c, "source", coefs)
    noisy = generate_region(replace(c, nuisance=2.0), "source", coefs)
    assert np.array_equal(plain.labels, noisy.labels)
    cont = [k for k, f in enumerate(plain.features) if f.kind == "continuous"]
    assert not np.allclose(plain.raw[:, cont], noisy.raw[:, cont])
    cat = [k for k, f in enumerate(plain.features) if f.kind == "categorical"]
    assert np.array_equal(plain.raw[:, cat], noisy.raw[:, cat])


def test_config_json():
    c = SynthConfig(cardinalities=(2, 5), heterophilic=True)
    assert SynthConfig.from_json(c.to_json()) == c
    with pytest.raises(ConfigError):
        SynthConfig.from_json({"colour": 1})


@given(st.integers(8, 24), st.integers(8, 24), st.floats(0.02, 0.9), st.integers(0, 10**6))
def test_exact_density_and_determinism(w, h, d, seed):
    c = SynthConfig(w, h, wetland_density=d, seed=seed)
    coefs = make_coefficients(c, seed)
    a = generate_region(c, "target", coefs)
    b = generate_region(c, "target", coefs)
    assert np.array_equal(a.raw, b.raw) and np.array_equal(a.hand, b.hand) and np.array_equal(a.labels, b.labels)
    assert abs(a.labels.sum() - d * w * h) <= 0.5 + 1e-9
    assert np.all(a.raw >= 0) and np.all(a.hand >= 0)
