import numpy as np
import pytest

from dmreward.numerics import (MlpArch, NumericsError, RngStream, fd_check,
                               mlp_backward, mlp_backward_batch, mlp_forward,
                               mlp_forward_batch, random_params, zero_params,
                               T_EMBED_DIM, _T_FREQS)


ARCH = MlpArch(data_dim=2, cond_width=1, hidden=8, depth=2)


def test_zero_params_identity():
    params = zero_params(ARCH)
    x = np.array([0.3, -0.7])
    out = mlp_forward(params, x, 0.5)
    np.testing.assert_allclose(out, x, atol=0.0)


def test_zero_weights_no_residual_term():
    # with zero params the only contribution is the residual skip
    params = zero_params(ARCH)
    out = mlp_forward(params, np.zeros(2), 0.9)
    np.testing.assert_array_equal(out, np.zeros(2))


def test_forward_deterministic():
    params = random_params(ARCH, RngStream(3))
    x = np.array([1.0, 2.0])
    a = mlp_forward(params, x, 0.25)
    b = mlp_forward(params, x, 0.25)
    np.testing.assert_array_equal(a, b)


def test_forward_golden_vector():
    # frozen from the first verified run; cross-checked below against a
    # straight-line reimplementation of the same arithmetic
    params = random_params(ARCH, RngStream(42))
    x = np.array([0.5, -1.0])
    out = mlp_forward(params, x, 0.3, 0)
    golden = np.array([0.5078039347514107, -0.8786911585731149])
    np.testing.assert_allclose(out, golden, rtol=1e-12)

    u = np.concatenate([x, np.sin(_T_FREQS * 0.3), [1.0]])
    h = np.tanh(params.weights[0] @ u + params.biases[0])
    h = np.tanh(params.weights[1] @ h + params.biases[1])
    straight = params.weights[2] @ h + params.biases[2] + x
    np.testing.assert_allclose(out, straight, rtol=1e-14)


def test_forward_rejects_nonfinite():
    params = zero_params(ARCH)
    with pytest.raises(NumericsError):
        mlp_forward(params, np.array([np.nan, 0.0]), 0.5)
    with pytest.raises(NumericsError):
        mlp_forward(params, np.array([0.0, 0.0]), 1.5)


def test_backward_zero_upstream():
    params = random_params(ARCH, RngStream(1))
    g = mlp_backward(params, np.array([0.1, 0.2]), 0.4, 0, np.zeros(2))
    for a in g.flat():
        np.testing.assert_array_equal(a, np.zeros_like(a))


def test_backward_outer_product_single_linear_layer():
    # depth-0 network is a single linear readout of the embedded input:
    # grad_W = upstream (outer) embedded-input
    arch = MlpArch(2, 1, 4, 0)
    params = zero_params(arch)
    x = np.array([0.2, -0.4])
    u = np.array([1.5, -2.0])
    g = mlp_backward(params, x, 0.6, 0, u)
    emb = np.concatenate([x, np.sin(_T_FREQS * 0.6), [1.0]])
    np.testing.assert_allclose(g.d_weights[-1], np.outer(u, emb), rtol=1e-14)
    np.testing.assert_allclose(g.d_biases[-1], u, rtol=1e-14)


def test_backward_matches_finite_differences():
    params = random_params(ARCH, RngStream(7))
    err = fd_check(params, np.array([0.3, 0.9]), 0.7, 0, np.array([1.0, -0.5]))
    assert err < 1e-4


def test_fd_check_zero_upstream():
    params = random_params(ARCH, RngStream(8))
    assert fd_check(params, np.array([0.1, 0.1]), 0.5, 0, np.zeros(2)) == 0.0


def test_fd_large_step_degrades(capsys):
    params = random_params(ARCH, RngStream(9), scale=0.5)
    coarse = fd_check(params, np.array([0.4, -0.2]), 0.5, 0,
                      np.array([1.0, 1.0]), step=1.0)
    print(f"fd error at step 1.0: {coarse:.3e}")  # reported, not asserted


def test_backward_linear_in_upstream():
    params = random_params(ARCH, RngStream(11))
    x, t = np.array([0.5, 0.5]), 0.3
    u1 = np.array([1.0, 2.0])
    u2 = np.array([-0.3, 0.7])
    g1 = mlp_backward(params, x, t, 0, u1)
    g2 = mlp_backward(params, x, t, 0, u2)
    g12 = mlp_backward(params, x, t, 0, u1 + u2)
    for a, b, c in zip(g1.flat(), g2.flat(), g12.flat()):
        np.testing.assert_allclose(a + b, c, atol=1e-10)


def test_batched_matches_loop():
    params = random_params(ARCH, RngStream(13))
    xs = RngStream(14).normal((5, 2))
    ts = np.linspace(0.1, 0.9, 5)
    out = mlp_forward_batch(params, xs, ts, 0)
    for i in range(5):
        np.testing.assert_allclose(out[i], mlp_forward(params, xs[i], ts[i]),
                                   rtol=1e-14)
    us = RngStream(15).normal((5, 2))
    gb = mlp_backward_batch(params, xs, ts, 0, us)
    acc = mlp_backward(params, xs[0], ts[0], 0, us[0])
    for i in range(1, 5):
        acc.add_(mlp_backward(params, xs[i], ts[i], 0, us[i]))
    for a, b in zip(gb.flat(), acc.flat()):
        np.testing.assert_allclose(a, b, atol=1e-10)


class TestRngStream:
    def test_same_seed_identical(self):
        a = RngStream(123).randn(16)
        b = RngStream(123).randn(16)
        np.testing.assert_array_equal(a, b)

    def test_distinct_children_differ(self):
        root = RngStream(5)
        a = root.child("x").randn(8)
        b = root.child("y").randn(8)
        assert not np.array_equal(a, b)

    def test_moments(self):
        draws = RngStream(99).randn(10 ** 6)
        assert abs(draws.mean()) < 0.01
        assert abs(draws.std() - 1.0) < 0.01

    def test_child_independent_of_sibling_consumption(self):
        r1 = RngStream(7)
        r1.child("a").randn(100)
        v1 = r1.child("b").randn(4)
        v2 = RngStream(7).child("b").randn(4)
        np.testing.assert_array_equal(v1, v2)

    def test_rejects_zero_count(self):
        with pytest.raises(NumericsError):
            RngStream(0).randn(0)
