import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plumeseg.dimred import SpectralPCA, false_color
from plumeseg.midway import (MidwayEqualizer, frame_quantile_function, midway_equalize,
                             pixel_quantiles, quantile_grid)

Q = 1024


def sort_oracle(values, Q):
    # order statistic j sits at (j + 0.5)/n; linear between, flat outside
    v = sorted(float(x) for x in np.ravel(values))
    n = len(v)
    out = []
    for i in range(Q):
        q = (i + 0.5) / Q
        pos = q * n - 0.5
        if pos <= 0:
            out.append(v[0])
        elif pos >= n - 1:
            out.append(v[-1])
        else:
            j = int(np.floor(pos))
            f = pos - j
            out.append(v[j] + f * (v[j + 1] - v[j]))
    return np.array(out)


def test_quantile_function_examples(rng):
    assert np.array_equal(frame_quantile_function([0.0, 1.0], 2), [0.0, 1.0])
    assert np.array_equal(frame_quantile_function(np.full(9, 0.3), 16), np.full(16, 0.3))
    u = rng.uniform(size=100)
    assert np.allclose(frame_quantile_function(u, 64), sort_oracle(u, 64), rtol=0, atol=1e-15)
    with pytest.raises(ValueError):
        frame_quantile_function(u, 1)


def shuffled_ramp(rng, n=64):
    # evenly spaced values: the empirical quantile function has no kinks inside
    return rng.permutation(np.linspace(0.0, 1.0, n))


def kink_bound(values, Q):
    # resampling a piecewise linear inverse CDF on a grid of step 1/Q and
    # interpolating back costs at most |slope jump| / (4Q) at each kink
    v = np.sort(np.ravel(values))
    slopes = np.diff(v) * v.size
    jumps = np.abs(np.diff(slopes)) if slopes.size > 1 else np.zeros(1)
    ends = slopes[[0, -1]] if slopes.size else np.zeros(1)
    return max(jumps.max(initial=0.0), ends.max()) / (4 * Q) + 1e-12


def test_single_frame_is_identity(rng):
    v = shuffled_ramp(rng).reshape(1, 8, 8)
    out = midway_equalize(v, Q)
    assert np.max(np.abs(out - v)) < 1.0 / Q


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_single_frame_within_kink_bound(seed):
    rng = np.random.default_rng(seed)
    v = rng.uniform(size=(1, 8, 8))
    out = midway_equalize(v, Q)
    assert np.max(np.abs(out - v)) <= kink_bound(v, Q)


def test_constant_frames_meet_halfway():
    v = np.stack([np.zeros((4, 4)), np.ones((4, 4))])
    out = midway_equalize(v, Q)
    assert np.allclose(out, 0.5)


def test_identical_distributions_unchanged(rng):
    base = np.linspace(0.0, 1.0, 64)
    v = np.stack([rng.permutation(base).reshape(8, 8) for _ in range(3)])
    out = midway_equalize(v, Q)
    for t in range(3):
        assert np.max(np.abs(np.sort(out[t].ravel()) - base)) < 1.0 / Q


def ks(a, b):
    grid = np.union1d(a, b)
    Fa = np.searchsorted(np.sort(a), grid, side="right") / a.size
    Fb = np.searchsorted(np.sort(b), grid, side="right") / b.size
    return np.max(np.abs(Fa - Fb))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_two_frame_ks(seed):
    rng = np.random.default_rng(seed)
    v = np.stack([rng.uniform(size=(8, 8)), rng.beta(2, 5, size=(8, 8))])
    out = midway_equalize(v, Q)
    assert ks(out[0].ravel(), out[1].ravel()) <= 2.0 / Q


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_monotone_within_frame(seed):
    rng = np.random.default_rng(seed)
    v = rng.uniform(size=(3, 6, 5))
    out = midway_equalize(v, Q)
    for t in range(3):
        order = np.argsort(v[t].ravel(), kind="stable")
        assert np.all(np.diff(out[t].ravel()[order]) >= 0)


def test_idempotent(rng):
    v = rng.uniform(size=(4, 10, 10)) ** np.arange(1, 5)[:, None, None]
    once = midway_equalize(v, Q)
    twice = midway_equalize(once, Q)
    assert np.max(np.abs(twice - once)) < 2.0 / Q


def test_table_invariants(rng):
    v = rng.uniform(size=(5, 6, 6, 3))
    eq = MidwayEqualizer(Q).fit(v)
    assert eq.quantiles_.shape == (3, Q)
    assert np.all(np.diff(eq.quantiles_, axis=1) >= 0)
    for c in range(3):
        assert eq.quantiles_[c].min() >= v[..., c].min()
        assert eq.quantiles_[c].max() <= v[..., c].max()
    with pytest.raises(ValueError):
        eq.transform(v[..., :2])


def test_ties_share_level():
    q = pixel_quantiles([1.0, 1.0, 2.0, 0.0])
    assert q[0] == q[1]
    assert np.allclose(quantile_grid(4), [0.125, 0.375, 0.625, 0.875])


def test_synth_false_color_flicker_removed(default_emissivity):
    scores = SpectralPCA(5).fit_transform(default_emissivity)
    rgb = false_color(scores)
    out = midway_equalize(rgb, Q)
    for c in range(3):
        prof = np.sort(out[..., c].reshape(out.shape[0], -1), axis=1)
        assert np.max(prof.max(axis=0) - prof.min(axis=0)) <= 2.0 / Q
