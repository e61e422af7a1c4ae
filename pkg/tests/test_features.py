import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockbayes.errors import DegenerateBlockError, InsufficientDataError
from blockbayes.features import (
    FeatureConfig,
    GlcmMatrix,
    bic_select,
    block_descriptor,
    descriptor_length,
    em_fit_gmm,
    glcm,
    gmm_free_parameters,
    haralick,
    uniform_glcm,
)
from blockbayes.imageio import BlockGrid, GrayImage


def block(rows, maxval=255):
    return GrayImage.from_array(np.asarray(rows), maxval=maxval)


def glcm_oracle(arr, levels, maxval, offset):
    """Pixel-by-pixel symmetric co-occurrence counting."""
    dr, dc = offset
    h, w = arr.shape
    m = np.zeros((levels, levels))
    for r in range(h):
        for c in range(w):
            r2, c2 = r + dr, c + dc
            if 0 <= r2 < h and 0 <= c2 < w:
                a = int(arr[r, c]) * levels // (maxval + 1)
                b = int(arr[r2, c2]) * levels // (maxval + 1)
                m[a, b] += 1
                m[b, a] += 1
    return m / m.sum()


# --- co-occurrence -----------------------------------------------------------


@pytest.mark.parametrize("levels", [2, 8, 16])
def test_glcm_constant_block(levels):
    m = glcm(block(np.full((4, 5), 200)), levels)
    q = 200 * levels // 256
    expected = np.zeros((levels, levels))
    expected[q, q] = 1.0
    assert np.array_equal(m.p, expected)


def test_glcm_alternating_row():
    m = glcm(block([[0, 1, 0, 1]], maxval=1), levels=2, offset=(0, 1))
    assert m.p.tolist() == [[0.0, 0.5], [0.5, 0.0]]


def test_glcm_two_bands():
    m = glcm(block([[0, 0], [255, 255]]), levels=2, offset=(0, 1))
    assert m.p.tolist() == [[0.5, 0.0], [0.0, 0.5]]


def test_glcm_block_too_small():
    with pytest.raises(DegenerateBlockError):
        glcm(block([[5]]), 8, (0, 1))
    with pytest.raises(DegenerateBlockError):
        glcm(block([[5, 6, 7]]), 8, (1, 0))


@settings(max_examples=60, deadline=None)
@given(
    h=st.integers(1, 8),
    w=st.integers(1, 8),
    levels=st.integers(2, 9),
    dr=st.integers(-3, 3),
    dc=st.integers(-3, 3),
    seed=st.integers(0, 10_000),
)
def test_glcm_matches_oracle_symmetric_normalized(h, w, levels, dr, dc, seed):
    if (dr, dc) == (0, 0):
        return
    arr = np.random.default_rng(seed).integers(0, 256, size=(h, w))
    if abs(dr) >= h or abs(dc) >= w:
        with pytest.raises(DegenerateBlockError):
            glcm(block(arr), levels, (dr, dc))
        return
    m = glcm(block(arr), levels, (dr, dc))
    assert np.all(m.p >= 0)
    assert abs(m.p.sum() - 1.0) <= 1e-12
    assert np.array_equal(m.p, m.p.T)
    np.testing.assert_allclose(m.p, glcm_oracle(arr, levels, 255, (dr, dc)), atol=1e-15)


# --- Haralick ---------------------------------------------------------------


def test_haralick_single_entry():
    p = np.zeros((8, 8))
    p[3, 3] = 1.0
    f = haralick(GlcmMatrix(8, p))
    assert (f.energy, f.entropy, f.contrast, f.homogeneity) == (1.0, 0.0, 0.0, 1.0)


def test_haralick_uniform_2x2():
    f = haralick(uniform_glcm(2))
    assert f.energy == pytest.approx(0.25, abs=1e-12)
    assert f.entropy == pytest.approx(math.log(4), abs=1e-12)
    assert f.contrast == pytest.approx(0.5, abs=1e-12)
    assert f.homogeneity == pytest.approx(0.75, abs=1e-12)


def test_haralick_off_diagonal_pair():
    f = haralick(GlcmMatrix(2, np.array([[0.0, 0.5], [0.5, 0.0]])))
    assert f.energy == pytest.approx(0.5, abs=1e-12)
    assert f.entropy == pytest.approx(math.log(2), abs=1e-12)
    assert f.contrast == pytest.approx(1.0, abs=1e-12)
    assert f.homogeneity == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(h=st.integers(2, 10), w=st.integers(2, 10), levels=st.integers(2, 8), seed=st.integers(0, 10_000))
def test_haralick_bounds(h, w, levels, seed):
    arr = np.random.default_rng(seed).integers(0, 256, size=(h, w))
    m = glcm(block(arr), levels)
    f = haralick(m)
    assert 0 < f.energy <= 1 + 1e-15
    assert 0 < f.homogeneity <= 1 + 1e-15
    assert f.entropy >= 0 and f.contrast >= 0
    single = np.count_nonzero(m.p) == 1
    assert (abs(f.energy - 1.0) < 1e-12) == single


# --- EM -----------------------------------------------------------------------


def test_em_single_component_closed_form():
    x = np.random.default_rng(0).normal(3.0, 2.0, size=300)
    g = em_fit_gmm(x, 1, seed=5, max_iter=1)
    assert g.weights.tolist() == [1.0]
    assert g.means[0] == pytest.approx(x.mean(), abs=1e-12)
    assert g.variances[0] == pytest.approx(x.var(), rel=1e-12)
    full = em_fit_gmm(x, 1, seed=5)
    assert full.means[0] == pytest.approx(x.mean(), abs=1e-12)
    n = x.size
    expected_ll = -0.5 * n * (math.log(2 * math.pi * x.var()) + 1)
    assert full.log_likelihood == pytest.approx(expected_ll, rel=1e-12)


def test_em_recovers_two_components():
    rng = np.random.default_rng(2024)
    comp = rng.random(500) < 0.5
    x = np.where(comp, rng.normal(0, 1, 500), rng.normal(10, 1, 500))
    g = em_fit_gmm(x, 2, seed=1).sorted_by_mean()
    assert abs(g.means[0] - 0) < 0.3 and abs(g.means[1] - 10) < 0.3
    assert abs(g.weights.sum() - 1) <= 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_em_log_likelihood_monotone(seed):
    rng = np.random.default_rng(seed)
    x = rng.gamma(2.0, 3.0, size=int(rng.integers(20, 400)))
    g = em_fit_gmm(x, int(rng.integers(1, 6)), seed=seed)
    assert np.all(np.diff(g.ll_history) >= -1e-9)
    assert g.log_likelihood == g.ll_history[-1]


def test_em_variance_floor_on_collapse():
    x = np.array([0.0] * 50 + [100.0] * 50)
    g = em_fit_gmm(x, 3, seed=0)
    floor = 1e-6 * 100.0**2 + 1e-12
    assert np.all(g.variances >= floor * (1 - 1e-12))
    assert abs(g.weights.sum() - 1) <= 1e-12


def test_em_constant_samples():
    g = em_fit_gmm(np.full(10, 7.0), 3, seed=0)
    assert np.allclose(g.means, 7.0)
    assert np.all(g.variances >= 1e-12)


def test_em_insufficient_data():
    with pytest.raises(InsufficientDataError):
        em_fit_gmm([1.0, 2.0], 3)


def test_em_deterministic():
    x = np.random.default_rng(1).normal(size=100)
    a, b = em_fit_gmm(x, 3, seed=9), em_fit_gmm(x, 3, seed=9)
    assert np.array_equal(a.means, b.means) and np.array_equal(a.variances, b.variances)


# --- BIC ------------------------------------------------------------------------


def test_free_parameter_count():
    assert [gmm_free_parameters(k) for k in range(1, 6)] == [2, 5, 8, 11, 14]


def test_bic_constant_samples_pick_one():
    r = bic_select(np.full(40, 128.0), k_sup=4)
    assert r.chosen_k == 1
    assert r.params.weights.tolist() == [1.0]


def test_bic_values_length_and_formula():
    x = np.random.default_rng(4).normal(size=3)
    r = bic_select(x, k_sup=5)
    assert len(r.bic_values) == 3 and r.v_k == (2, 5, 8)
    n = x.size
    ll1 = -0.5 * n * (math.log(2 * math.pi * x.var()) + 1)
    assert r.bic_values[0] == pytest.approx(-2 * ll1 + 2 * math.log(n), rel=1e-9)
    assert r.chosen_k == int(np.argmin(r.bic_values)) + 1


def test_bic_two_components():
    rng = np.random.default_rng(77)
    x = np.concatenate([rng.normal(0, 1, 250), rng.normal(10, 1, 250)])
    assert bic_select(x, k_sup=5, seed=3).chosen_k == 2


def test_bic_empty():
    with pytest.raises(InsufficientDataError):
        bic_select([], 3)


# --- descriptor ---------------------------------------------------------------


def test_constant_block_descriptor():
    d = block_descriptor(block(np.full((6, 6), 93)), FeatureConfig(k_sup=3))
    assert d.tolist() == [1, 0, 0, 93, 0, 0, 1, 0, 0, 1]


@pytest.mark.parametrize("k_sup", [1, 2, 3, 5])
def test_descriptor_layout(k_sup):
    arr = np.random.default_rng(k_sup).integers(0, 256, size=(9, 7))
    d = block_descriptor(block(arr), FeatureConfig(k_sup=k_sup))
    assert d.shape == (descriptor_length(k_sup),) == (2 * k_sup + 4,)
    w, mu = d[:k_sup], d[k_sup : 2 * k_sup]
    chosen = int(np.count_nonzero(w))
    assert abs(w.sum() - 1) <= 1e-12
    assert np.all(w[chosen:] == 0) and np.all(mu[chosen:] == 0)
    assert np.all(np.diff(mu[:chosen]) >= 0)


def test_descriptor_deterministic_and_identical_blocks():
    arr = np.random.default_rng(8).integers(0, 256, size=(12, 12))
    cfg = FeatureConfig(seed=4)
    a = block_descriptor(block(arr), cfg)
    b = block_descriptor(block(arr.copy()), cfg)
    assert a.tobytes() == b.tobytes()


def test_degenerate_block_uses_uniform_glcm():
    cfg = FeatureConfig(levels=4, k_sup=2)
    d = block_descriptor(block([[10], [20]]), cfg)  # no horizontal pairs
    u = haralick(uniform_glcm(4))
    assert d[-4:].tolist() == pytest.approx(list(u), abs=1e-15)


def test_feature_config_validation():
    with pytest.raises(ValueError):
        FeatureConfig(levels=1)
    with pytest.raises(ValueError):
        FeatureConfig(offset=(0, 0))
    assert FeatureConfig().grid == BlockGrid(4, 4)
