import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infestscope import blocks as blk


def test_equal_logits_identity_projection_returns_input():
    x = np.random.default_rng(0).random((3, 4, 5))
    out = blk.amfm_fuse(x, x, blk.AmfmParams(np.eye(3), np.eye(3), (0.0, 0.0)))
    assert np.array_equal(out, x)


def test_saturated_logits_pick_rgb_branch():
    rng = np.random.default_rng(1)
    a, b = rng.random((2, 6, 6)), rng.random((2, 6, 6))
    out = blk.amfm_fuse(a, b, blk.AmfmParams(np.eye(2), np.eye(2), (20.0, -20.0)))
    direct = math.exp(20) / (math.exp(20) + math.exp(-20))
    assert blk.AmfmParams(np.eye(2), np.eye(2), (20.0, -20.0)).weights[0] == pytest.approx(direct, abs=1e-15)
    assert np.max(np.abs(out - a)) < 1e-6


def test_zero_inputs_give_zero_output():
    p = blk.AmfmParams.random(3, 3, 5, np.random.default_rng(2))
    assert np.all(blk.amfm_fuse(np.zeros((3, 2, 2)), np.zeros((3, 2, 2)), p) == 0.0)


def test_projection_is_per_pixel_channel_mixing():
    rng = np.random.default_rng(3)
    w = rng.normal(size=(4, 3))
    x = rng.normal(size=(3, 5, 2))
    out = blk.project(w, x)
    for i in range(5):
        for j in range(2):
            assert np.allclose(out[:, i, j], w @ x[:, i, j], rtol=0, atol=1e-14)


@settings(max_examples=80, deadline=None)
@given(st.floats(-700, 700), st.floats(-700, 700))
def test_softmax_weights_form_a_distribution(a, b):
    w = blk.softmax([a, b])
    assert abs(w.sum() - 1.0) <= 1e-12
    assert np.all(w >= 0)


def test_amfm_shape_errors():
    p = blk.AmfmParams(np.eye(3), np.eye(3))
    with pytest.raises(blk.BlockError, match="spatial"):
        blk.amfm_fuse(np.zeros((3, 2, 2)), np.zeros((3, 2, 3)), p)
    with pytest.raises(blk.BlockError, match="proj_rgb"):
        blk.amfm_fuse(np.zeros((2, 2, 2)), np.zeros((3, 2, 2)), p)
    with pytest.raises(blk.BlockError, match="output channels"):
        blk.AmfmParams(np.eye(3), np.eye(2))
    with pytest.raises(blk.BlockError, match="non-finite"):
        blk.amfm_fuse(np.full((3, 1, 1), np.nan), np.zeros((3, 1, 1)), p)


@pytest.mark.parametrize("c, k", [(1, 1), (2, 1), (8, 3), (16, 3), (64, 3), (128, 5), (256, 5), (512, 5), (1024, 5)])
def test_kernel_size_table(c, k):
    assert blk.eca_kernel_size(c) == k


def test_kernel_size_is_always_odd():
    for c in range(1, 2049):
        assert blk.eca_kernel_size(c) % 2 == 1


def test_circular_conv_matches_direct_sum():
    rng = np.random.default_rng(4)
    for c in (1, 2, 5, 9):
        for k in (1, 3, 5):
            s = rng.normal(size=c)
            w = rng.normal(size=k)
            a = blk.circular_conv1d(s, w)
            ref = [sum(w[j] * s[(i + j - k // 2) % c] for j in range(k)) for i in range(c)]
            assert np.allclose(a, ref, rtol=0, atol=1e-12)


def test_zero_weights_halve_exactly():
    x = np.random.default_rng(5).normal(size=(64, 3, 3))
    assert np.array_equal(blk.eca_forward(x, np.zeros(3)), x * 0.5)


def test_single_channel_ones():
    out = blk.eca_forward(np.ones((1, 4, 4)), [1.0])
    assert np.allclose(out, 1 / (1 + math.exp(-1)), rtol=0, atol=1e-12)
    assert out[0, 0, 0] == pytest.approx(0.7310586, abs=1e-7)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_eca_gain_bounds_and_argmax(c, h, w, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(0, 2, size=(c, h, w))
    wts = rng.normal(0, 1, size=blk.eca_kernel_size(c))
    g = blk.eca_gains(x, wts)
    assert np.all((g > 0) & (g < 1))
    out = blk.eca_forward(x, wts)
    assert np.all(np.abs(out) <= np.abs(x))
    for ch in range(c):
        assert np.argmax(np.abs(out[ch])) == np.argmax(np.abs(x[ch]))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20), st.integers(0, 2**32 - 1))
def test_eca_commutes_with_pixel_permutation(c, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(c, 5, 7))
    wts = rng.normal(size=blk.eca_kernel_size(c))
    perm = rng.permutation(35)
    shuffle = lambda a: a.reshape(c, -1)[:, perm].reshape(c, 5, 7)  # noqa: E731
    assert np.array_equal(blk.eca_forward(shuffle(x), wts), shuffle(blk.eca_forward(x, wts)))


def test_wrong_weight_count():
    with pytest.raises(blk.BlockError, match="needs 3 weights"):
        blk.eca_forward(np.zeros((64, 1, 1)), [1.0])


def test_sigmoid_extremes_are_finite():
    s = blk.sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    assert s.tolist() == [0.0, 0.5, 1.0]
