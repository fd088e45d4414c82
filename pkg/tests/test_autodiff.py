import numpy as np
import pytest

from zsdenoise import autodiff as ad
from zsdenoise import ops


def _check_against_fd(graph_fn, x0, atol=1e-6):
    """Compare reverse-mode gradients of a scalar graph against central
    differences over the full flat input vector."""

    def loss_fn(v):
        if isinstance(v, ad.Tensor):
            return graph_fn(v)
        return float(graph_fn(ad.Tensor(np.asarray(v, dtype=np.float64))).data)

    _, grad = ad.evaluate_with_gradients(loss_fn, x0)
    fd = ad.finite_difference_gradient(loss_fn, x0, 1e-5)
    assert np.allclose(grad, fd, atol=atol), np.max(np.abs(grad - fd))


class TestBasics:
    def test_quadratic_value_and_gradient(self):
        theta = ad.parameter(np.array([1.0, -2.0, 3.0]))
        loss = ad.mean(theta * theta) * 3.0
        loss.backward()
        assert loss.data == pytest.approx(14.0)
        assert np.allclose(theta.grad, [2.0, -4.0, 6.0])

    def test_softplus_at_zero(self):
        theta = ad.parameter(np.zeros(()))
        loss = ad.softplus(theta)
        loss.backward()
        assert loss.data == pytest.approx(np.log(2.0))
        assert theta.grad == pytest.approx(0.5)

    def test_absolute_subgradient_zero_at_zero(self):
        theta = ad.parameter(np.array([0.0, -2.0]))
        loss = ad.mean(ad.absolute(theta))
        loss.backward()
        assert np.allclose(theta.grad, [0.0, -0.5])

    def test_backward_requires_scalar(self):
        with pytest.raises(ValueError):
            ad.parameter(np.ones(3)).backward()

    def test_non_finite_rejected(self):
        with pytest.raises(ad.NonFiniteError):
            ad.Tensor(np.array([1.0, np.nan]))

    def test_unused_parameters_get_zero_gradient(self):
        theta = ad.parameter(np.arange(5.0))
        loss = ad.mean(theta[:2] * theta[:2])
        loss.backward()
        assert np.allclose(theta.grad[2:], 0.0)
        assert np.any(theta.grad[:2] != 0.0)

    def test_gradient_accumulates_over_reuse(self):
        theta = ad.parameter(np.array(2.0))
        loss = theta * theta + theta * 3.0
        loss.backward()
        assert theta.grad == pytest.approx(7.0)


class TestFiniteDifferenceOracle:
    def test_square(self):
        fd = ad.finite_difference_gradient(lambda v: float(v[0] ** 2), [3.0], 1e-4)
        assert abs(fd[0] - 6.0) < 1e-6

    def test_absolute_value(self):
        fd = ad.finite_difference_gradient(lambda v: abs(float(v[0])), [1.0], 1e-4)
        assert fd[0] == pytest.approx(1.0)

    def test_coords_subset(self):
        fd = ad.finite_difference_gradient(
            lambda v: float(np.sum(v**2)), np.arange(4.0), 1e-4, coords=[1, 3]
        )
        assert fd[0] == 0.0 and fd[2] == 0.0
        assert fd[1] == pytest.approx(2.0, abs=1e-6)

    def test_rejects_bad_epsilon(self):
        with pytest.raises(ValueError):
            ad.finite_difference_gradient(lambda v: 0.0, [1.0], 0.0)


class TestPrimitiveGradients:
    def test_matmul_softmax_chain(self):
        rng = np.random.default_rng(0)
        w = rng.normal(size=12)

        def graph(v):
            m = v.reshape(3, 4)
            return ad.mean(ad.softmax_rows(m @ ad.constant(np.eye(4))) * m)

        _check_against_fd(graph, w)

    def test_layer_norm(self):
        rng = np.random.default_rng(1)
        x0 = rng.normal(size=16)
        w = np.random.default_rng(2).normal(size=(2, 4))

        def graph(v):
            x = v[:8].reshape(2, 4)
            return ad.mean(ad.layer_norm_rows(x, v[8:12], v[12:16]) * ad.constant(w))

        _check_against_fd(graph, x0)

    def test_clamp_max(self):
        def graph(v):
            return ad.mean(ad.clamp_max(v, 1.5) * v)

        _check_against_fd(graph, np.array([0.5, 2.0, 1.0, 3.0]))

    def test_downsample_pair_adjoints(self):
        rng = np.random.default_rng(3)
        w1 = rng.normal(size=(4, 4))
        w2 = rng.normal(size=(4, 4))

        def graph(v):
            img = v.reshape(8, 8)
            return ad.mean(ad.downsample_g1(img) * ad.constant(w1)) + ad.mean(
                ad.downsample_g2(img) * ad.constant(w2)
            )

        _check_against_fd(graph, rng.normal(size=64))

    def test_extract_patches_round_trip_gradient(self):
        rng = np.random.default_rng(4)
        w = rng.normal(size=(4, 16))

        def graph(v):
            return ad.mean(ad.extract_patches(v.reshape(8, 8), 4) * ad.constant(w))

        _check_against_fd(graph, rng.normal(size=64))

    def test_blur_adjoint_dot_product_identity(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(12, 12))
        y = rng.normal(size=(12, 12))
        k = ops.gaussian_kernel_1d(1.3)
        lhs = np.sum(ops.blur_reflect(x, k) * y)
        rhs = np.sum(x * ops.blur_reflect_adjoint(y, k, x.shape))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_blur_gradient(self):
        rng = np.random.default_rng(6)
        k = ops.gaussian_kernel_1d(0.9)
        w = rng.normal(size=(6, 6))

        def graph(v):
            return ad.mean(ad.blur_reflect(v.reshape(6, 6), k) * ad.constant(w))

        _check_against_fd(graph, rng.normal(size=36))


class TestBilateralGradient:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        img0 = rng.random((8, 8))
        w = rng.normal(size=(8, 8))
        # flat layout: image (64), sigma_r (4), sigma_x (4), sigma_y (4)
        x0 = np.concatenate(
            [
                img0.ravel(),
                rng.uniform(0.1, 0.5, 4),
                rng.uniform(0.6, 1.4, 4),
                rng.uniform(0.6, 1.4, 4),
            ]
        )

        def graph(v):
            img = v[:64].reshape(8, 8)
            sr = v[64:68].reshape(2, 2)
            sx = v[68:72].reshape(2, 2)
            sy = v[72:76].reshape(2, 2)
            return ad.mean(ad.bilateral(img, sr, sx, sy, 4) * ad.constant(w))

        _check_against_fd(graph, x0, atol=1e-5)

    def test_deterministic(self):
        rng = np.random.default_rng(8)
        img = ad.parameter(rng.random((8, 8)))
        sr = ad.constant(np.full((2, 2), 0.2))
        sx = ad.constant(np.full((2, 2), 1.0))
        sy = ad.constant(np.full((2, 2), 1.0))
        a = ad.bilateral(img, sr, sx, sy, 4).data
        b = ad.bilateral(img, sr, sx, sy, 4).data
        assert np.array_equal(a, b)
