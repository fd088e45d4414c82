import math

import numpy as np
import pytest

from zsdenoise import model as M
from zsdenoise.backend import get_kernels
from zsdenoise.imageio import RoiRect
from zsdenoise.model import (
    DenoiserModel,
    ModelMeta,
    SigmaEdit,
    SigmaMaps,
    init_params,
    kernel_halfwidth,
    param_layout,
    predict_sigmas,
    scaled_dot_product_attention,
)


def _zero_model(n_stages=1, **meta_kwargs):
    meta = ModelMeta(n_stages=n_stages, **meta_kwargs)
    return DenoiserModel(meta, np.zeros(M.param_count(meta)))


def _set_field(model, stage, name, values):
    for s, n, off, shape in param_layout(model.meta):
        if s == stage and n == name:
            model.params[off : off + int(np.prod(shape))] = np.asarray(values).ravel()
            return
    raise KeyError(name)


class TestAttention:
    def test_single_row_passthrough(self):
        V = np.array([[1.0, 2.0, 3.0]])
        out = scaled_dot_product_attention(np.ones((1, 3)), np.ones((1, 3)), V)
        assert np.allclose(out, V)

    def test_uniform_logits_give_column_mean(self):
        Q = np.ones((3, 2))
        K = np.zeros((3, 2))  # QK^T = 0 everywhere -> uniform weights
        V = np.array([[0.0, 3.0], [6.0, 3.0], [0.0, 0.0]])
        out = scaled_dot_product_attention(Q, K, V)
        assert np.allclose(out, np.tile(V.mean(axis=0), (3, 1)))

    def test_two_row_hand_case(self):
        Q = np.array([[1.0], [0.0]])
        K = np.array([[1.0], [0.0]])
        V = np.array([[2.0], [4.0]])
        out = scaled_dot_product_attention(Q, K, V)
        w = math.e / (math.e + 1.0)
        assert out[0, 0] == pytest.approx(w * 2.0 + (1.0 - w) * 4.0)  # ~2.5379
        assert out[1, 0] == pytest.approx(3.0)


class TestPredictSigmas:
    def test_zero_params_give_log_two(self):
        model = _zero_model()
        maps = predict_sigmas(np.random.default_rng(0).random((16, 16)), model)
        for chan in (maps.sigma_r, maps.sigma_x, maps.sigma_y):
            assert np.allclose(chan, math.log(2.0))

    def test_grid_shape(self):
        model = init_params(0, n_stages=1)
        maps = predict_sigmas(np.zeros((64, 64)), model)
        assert maps.grid == (8, 8)

    def test_strictly_positive(self):
        model = init_params(3, n_stages=1)
        maps = predict_sigmas(np.random.default_rng(1).random((32, 32)) * 10, model)
        assert maps.sigma_r.min() > 0
        assert maps.sigma_x.min() > 0
        assert maps.sigma_y.min() > 0

    def test_upper_bound_clamps(self):
        model = _zero_model(sigma_upper_bounds=(None, 0.5, None))
        _set_field(model, 0, "head_b", [0.0, 10.0, 0.0])
        maps = predict_sigmas(np.zeros((16, 16)), model)
        assert np.all(maps.sigma_x == 0.5)
        assert np.allclose(maps.sigma_r, math.log(2.0))

    def test_fresh_model_initial_sigmas(self):
        model = init_params(0, n_stages=1)
        maps = predict_sigmas(np.random.default_rng(2).random((32, 32)), model)
        assert np.allclose(maps.sigma_r, 0.05)
        assert np.allclose(maps.sigma_x, 1.0)
        assert np.allclose(maps.sigma_y, 1.0)

    def test_indivisible_dims_rejected(self):
        with pytest.raises(ValueError):
            predict_sigmas(np.zeros((17, 16)), init_params(0, n_stages=1))


class TestKernelHalfwidth:
    def test_values(self):
        assert kernel_halfwidth(1.2, 0.8) == 6
        assert kernel_halfwidth(0.5, 0.5) == 4

    def test_never_zero_for_tiny_sigmas(self):
        assert kernel_halfwidth(1e-9, 1e-9) >= 2


class TestDenoise:
    def test_constant_image_zero_params(self):
        out, maps = M.denoise(np.full((16, 16), 0.3), _zero_model())
        assert np.allclose(out, 0.3, atol=1e-12)
        assert np.allclose(maps[0].sigma_r, math.log(2.0))

    def test_two_stages_compose(self):
        meta = ModelMeta(n_stages=2)
        model = init_params(4, n_stages=2)
        img = np.random.default_rng(5).random((32, 32))
        out_full, _ = M.denoise(img, model)

        n1 = M.stage_param_count(ModelMeta(n_stages=1))
        first = DenoiserModel(ModelMeta(n_stages=1), model.params[:n1].copy())
        second = DenoiserModel(ModelMeta(n_stages=1), model.params[n1:].copy())
        mid, _ = M.denoise(img, first)
        out_seq, _ = M.denoise(mid, second)
        assert np.array_equal(out_full, out_seq)

    def test_output_within_input_range(self):
        img = np.random.default_rng(6).random((32, 32))
        out, _ = M.denoise(img, init_params(7, n_stages=2))
        assert out.min() >= img.min() - 1e-12
        assert out.max() <= img.max() + 1e-12

    def test_deterministic(self):
        img = np.random.default_rng(8).random((16, 16))
        model = init_params(9, n_stages=2)
        a, _ = M.denoise(img, model)
        b, _ = M.denoise(img, model)
        assert np.array_equal(a, b)


class TestSigmaEdit:
    def _maps(self):
        return SigmaMaps(
            np.full((4, 4), math.log(2.0)), np.ones((4, 4)), np.ones((4, 4))
        )

    def test_identity_edit(self):
        maps = self._maps()
        edit = SigmaEdit(stage=0, region=RoiRect(0, 0, 32, 32))
        out = M.apply_sigma_edit(maps, edit, 8)
        assert np.array_equal(out.sigma_r, maps.sigma_r)

    def test_single_patch_multiplier(self):
        edit = SigmaEdit(stage=0, region=RoiRect(8, 8, 16, 16), multiplier_r=2.0)
        out = M.apply_sigma_edit(self._maps(), edit, 8)
        assert out.sigma_r[1, 1] == pytest.approx(2.0 * math.log(2.0))  # ~1.3863
        untouched = out.sigma_r.copy()
        untouched[1, 1] = math.log(2.0)
        assert np.allclose(untouched, math.log(2.0))

    def test_partial_overlap_touches_patch(self):
        # region poking 1px into patch (0,0) must still scale that patch
        edit = SigmaEdit(stage=0, region=RoiRect(7, 7, 9, 9), multiplier_x=3.0)
        out = M.apply_sigma_edit(self._maps(), edit, 8)
        assert np.allclose(out.sigma_x[:2, :2], 3.0)
        assert np.allclose(out.sigma_x[2:, :], 1.0)

    def test_clamp(self):
        edit = SigmaEdit(
            stage=0,
            region=RoiRect(0, 0, 8, 8),
            multiplier_r=10.0,
            clamp_max={"r": 1.0},
        )
        out = M.apply_sigma_edit(self._maps(), edit, 8)
        assert out.sigma_r[0, 0] == 1.0

    def test_original_maps_unchanged(self):
        maps = self._maps()
        edit = SigmaEdit(stage=0, region=RoiRect(0, 0, 32, 32), multiplier_r=5.0)
        M.apply_sigma_edit(maps, edit, 8)
        assert np.allclose(maps.sigma_r, math.log(2.0))

    def test_invalid_region_rejected(self):
        with pytest.raises(ValueError):
            M.apply_sigma_edit(
                self._maps(), SigmaEdit(stage=0, region=RoiRect(0, 0, 64, 64)), 8
            )

    def test_nonpositive_multiplier_rejected(self):
        with pytest.raises(ValueError):
            M.apply_sigma_edit(
                self._maps(),
                SigmaEdit(stage=0, region=RoiRect(0, 0, 8, 8), multiplier_r=0.0),
                8,
            )


class TestRefilter:
    def test_base_maps_match_denoise_bit_exactly(self):
        img = np.random.default_rng(10).random((32, 32))
        model = init_params(11, n_stages=2)
        out, maps = M.denoise(img, model)
        assert np.array_equal(M.refilter(img, model, maps), out)

    def test_tiny_sigmas_approach_identity(self):
        img = np.random.default_rng(12).random((16, 16))
        model = init_params(0, n_stages=1)
        _, maps = M.denoise(img, model)
        shrunk = [
            SigmaMaps(m.sigma_r * 1e-6, m.sigma_x * 1e-6, m.sigma_y * 1e-6)
            for m in maps
        ]
        out = M.refilter(img, model, shrunk)
        assert np.max(np.abs(out - img)) < 1e-6

    def test_map_count_mismatch_rejected(self):
        img = np.zeros((16, 16))
        model = init_params(0, n_stages=2)
        _, maps = M.denoise(img, model)
        with pytest.raises(ValueError):
            M.refilter(img, model, maps[:1])

    def test_nonpositive_sigma_rejected(self):
        img = np.zeros((16, 16))
        model = init_params(0, n_stages=1)
        grid = (2, 2)
        bad = [SigmaMaps(np.zeros(grid), np.ones(grid), np.ones(grid))]
        with pytest.raises(ValueError):
            M.refilter(img, model, bad)


class TestBackendEquivalence:
    def test_forward_and_backward_agree(self):
        numba_k = get_kernels("numba")
        numpy_k = get_kernels("numpy")
        rng = np.random.default_rng(13)
        img = rng.random((16, 16))
        grid = (2, 2)
        sr = rng.uniform(0.05, 0.5, grid)
        sx = rng.uniform(0.4, 2.0, grid)
        sy = rng.uniform(0.4, 2.0, grid)
        kgrid = (2.0 * np.ceil(np.maximum(sx, sy) + 1.0)).astype(np.int64)
        o1, w1 = numba_k.bilateral_forward(img, sr, sx, sy, kgrid, 8)
        o2, w2 = numpy_k.bilateral_forward(img, sr, sx, sy, kgrid, 8)
        assert np.allclose(o1, o2, atol=1e-13)
        assert np.allclose(w1, w2, atol=1e-10)

        gout = rng.normal(size=img.shape)
        b1 = numba_k.bilateral_backward(img, sr, sx, sy, kgrid, 8, o1, w1, gout)
        b2 = numpy_k.bilateral_backward(img, sr, sx, sy, kgrid, 8, o2, w2, gout)
        for g1, g2 in zip(b1, b2):
            assert np.allclose(g1, g2, atol=1e-11)
