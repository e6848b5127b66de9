import numpy as np
import pytest

from fredft import reference
from fredft.autodiff import backward, gradcheck
from fredft.conv import ConvSpec, batch_norm, conv2d, deformable_conv2d
from fredft.layers import BatchNorm2d, Conv2d, DeformConv2d
from fredft.tensor import ShapeError, Tensor
import fredft.tensor as T


class TestConvSpec:
    def test_same_padding(self):
        assert ConvSpec("standard", 3, 4, 3).padding == 1
        assert ConvSpec("dilated", 3, 4, 3, dilation=2).padding == 2
        assert ConvSpec("standard", 3, 4, 7).padding == 3

    def test_even_kernel_rejected(self):
        with pytest.raises(ValueError):
            ConvSpec("standard", 3, 4, 4)

    def test_depthwise_channel_constraint(self):
        with pytest.raises(ValueError):
            ConvSpec("depthwise", 3, 4, 3)

    def test_pointwise_kernel_constraint(self):
        with pytest.raises(ValueError):
            ConvSpec("pointwise", 3, 4, 3)


class TestConv2d:
    def test_identity_1x1(self, rng):
        x = rng.standard_normal((2, 3, 5, 5))
        w = np.eye(3)[:, :, None, None]
        spec = ConvSpec("pointwise", 3, 3, 1)
        out = conv2d(Tensor(x), Tensor(w), Tensor(np.zeros(3)), spec).data
        assert np.allclose(out, x, atol=0)

    def test_centered_delta_depthwise_identity(self, rng):
        x = rng.standard_normal((1, 4, 6, 6))
        w = np.zeros((4, 3, 3))
        w[:, 1, 1] = 1.0
        spec = ConvSpec("depthwise", 4, 4, 3)
        out = conv2d(Tensor(x), Tensor(w), Tensor(np.zeros(4)), spec).data
        assert np.allclose(out, x, atol=0)

    @pytest.mark.parametrize("k,d,kind", [
        (1, 1, "pointwise"), (3, 1, "standard"), (5, 1, "standard"),
        (7, 1, "standard"), (3, 2, "dilated"), (5, 2, "dilated"),
    ])
    def test_matches_naive_oracle(self, both_backends, rng, k, d, kind):
        x = rng.uniform(-1, 1, (1, 3, 6, 6))
        w = rng.uniform(-1, 1, (2, 3, k, k))
        b = rng.uniform(-1, 1, 2)
        got = conv2d(Tensor(x), Tensor(w), Tensor(b), ConvSpec(kind, 3, 2, k, d)).data
        assert np.abs(got - reference.naive_conv2d(x, w, b, d)).max() < 1e-12

    @pytest.mark.parametrize("k", [3, 5, 7])
    def test_depthwise_matches_oracle(self, both_backends, rng, k):
        x = rng.uniform(-1, 1, (2, 3, 6, 6))
        w = rng.uniform(-1, 1, (3, k, k))
        b = rng.uniform(-1, 1, 3)
        got = conv2d(Tensor(x), Tensor(w), Tensor(b), ConvSpec("depthwise", 3, 3, k)).data
        assert np.abs(got - reference.naive_conv2d(x, w, b, 1, depthwise=True)).max() < 1e-12

    def test_preserves_spatial_dims(self, rng):
        layer = Conv2d(3, 8, 5, rng=rng)
        out = layer(Tensor(rng.standard_normal((2, 3, 11, 7))))
        assert out.shape == (2, 8, 11, 7)

    def test_channel_mismatch_rejected(self, rng):
        layer = Conv2d(3, 8, 3, rng=rng)
        with pytest.raises(ShapeError, match="channels"):
            layer(Tensor(np.zeros((1, 4, 5, 5))))

    def test_gradcheck_all_variants(self, rng):
        x = Tensor(rng.uniform(-1, 1, (1, 2, 4, 4)), requires_grad=True)
        for kind, k, d, wshape in [
            ("standard", 3, 1, (3, 2, 3, 3)),
            ("dilated", 3, 2, (3, 2, 3, 3)),
            ("pointwise", 1, 1, (3, 2, 1, 1)),
        ]:
            w = Tensor(rng.uniform(-1, 1, wshape), requires_grad=True)
            b = Tensor(rng.uniform(-1, 1, 3), requires_grad=True)
            spec = ConvSpec(kind, 2, 3, k, d)
            rep = gradcheck(
                lambda: T.tsum(T.mul(conv2d(x, w, b, spec), conv2d(x, w, b, spec))),
                [x, w, b],
                name=kind,
            )
            assert rep.max_rel_err < 1e-4, kind


class TestDeformableConv:
    def test_zero_offsets_equal_standard(self, both_backends, rng):
        x = rng.uniform(-1, 1, (1, 3, 6, 6))
        w = rng.uniform(-1, 1, (4, 3, 3, 3))
        b = rng.uniform(-1, 1, 4)
        off = Tensor(np.zeros((1, 18, 6, 6)))
        got = deformable_conv2d(Tensor(x), off, Tensor(w), Tensor(b), ConvSpec("deformable", 3, 4, 3)).data
        ref = conv2d(Tensor(x), Tensor(w), Tensor(b), ConvSpec("standard", 3, 4, 3)).data
        assert np.abs(got - ref).max() < 1e-12

    def test_constant_field_interior(self, rng):
        v = -0.35
        x = np.full((1, 2, 8, 8), v)
        w = rng.uniform(-1, 1, (3, 2, 3, 3))
        b = rng.uniform(-1, 1, 3)
        off = rng.uniform(-0.45, 0.45, (1, 18, 8, 8))
        got = deformable_conv2d(
            Tensor(x), Tensor(off), Tensor(w), Tensor(b), ConvSpec("deformable", 2, 3, 3)
        ).data
        expect = w.sum(axis=(1, 2, 3)) * v + b
        assert np.abs(got[:, :, 2:-2, 2:-2] - expect[None, :, None, None]).max() < 1e-10

    def test_matches_bilinear_gather_oracle(self, both_backends, rng):
        x = rng.uniform(-1, 1, (1, 2, 6, 6))
        w = rng.uniform(-1, 1, (3, 2, 3, 3))
        b = rng.uniform(-1, 1, 3)
        off = rng.uniform(-0.4, 0.4, (1, 18, 6, 6))
        got = deformable_conv2d(
            Tensor(x), Tensor(off), Tensor(w), Tensor(b), ConvSpec("deformable", 2, 3, 3)
        ).data
        ref = reference.naive_deform_conv2d(x, off, w, b)
        assert np.abs(got - ref).max() < 1e-10

    def test_layer_starts_as_standard_conv(self, rng):
        layer = DeformConv2d(3, 4, rng=rng)
        x = Tensor(rng.uniform(-1, 1, (1, 3, 5, 5)))
        got = layer(x).data
        ref = conv2d(x, layer.weight, layer.bias, ConvSpec("standard", 3, 4, 3)).data
        assert np.abs(got - ref).max() < 1e-12

    def test_gradcheck_including_offsets(self, rng):
        x = Tensor(rng.uniform(-1, 1, (1, 2, 4, 4)), requires_grad=True)
        off_raw = rng.uniform(0.05, 0.45, (1, 18, 4, 4)) * rng.choice([-1, 1], (1, 18, 4, 4))
        off = Tensor(off_raw, requires_grad=True)
        w = Tensor(rng.uniform(-1, 1, (2, 2, 3, 3)), requires_grad=True)
        b = Tensor(rng.uniform(-1, 1, 2), requires_grad=True)
        spec = ConvSpec("deformable", 2, 2, 3)

        def fn():
            out = deformable_conv2d(x, off, w, b, spec)
            return T.tsum(T.mul(out, out))

        rep = gradcheck(fn, [x, off, w, b], name="deform")
        assert rep.max_rel_err < 1e-4


class TestBatchNorm:
    def test_train_mode_zero_mean(self, rng):
        bn = BatchNorm2d(4)
        out = bn(Tensor(rng.uniform(-2, 2, (3, 4, 5, 5))))
        assert np.abs(out.data.mean(axis=(0, 2, 3))).max() < 1e-10

    def test_unit_variance_passthrough(self, rng):
        x = rng.standard_normal((4, 3, 8, 8))
        x = (x - x.mean(axis=(0, 2, 3), keepdims=True)) / x.std(axis=(0, 2, 3), keepdims=True)
        bn = BatchNorm2d(3)
        out = bn(Tensor(x))
        assert np.abs(out.data - x).max() < 1e-4  # eps-induced shrinkage only

    def test_running_stats_momentum_update(self, rng):
        bn = BatchNorm2d(3, momentum=0.1)
        bn.running_mean[:] = 1.0
        bn.running_var[:] = 2.0
        x = rng.uniform(-1, 1, (2, 3, 4, 4))
        bn(Tensor(x))
        mu = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        assert np.allclose(bn.running_mean, 0.9 * 1.0 + 0.1 * mu, atol=1e-14)
        assert np.allclose(bn.running_var, 0.9 * 2.0 + 0.1 * var, atol=1e-14)

    def test_eval_uses_running_stats(self, rng):
        bn = BatchNorm2d(3)
        bn.running_mean[:] = [0.5, -0.5, 0.0]
        bn.running_var[:] = [4.0, 1.0, 0.25]
        bn.eval()
        x = rng.uniform(-1, 1, (1, 3, 2, 2))
        out = bn(Tensor(x)).data
        expect = (x - bn.running_mean[None, :, None, None]) / np.sqrt(
            bn.running_var[None, :, None, None] + bn.eps
        )
        assert np.allclose(out, expect, atol=1e-14)

    def test_gradcheck_train_mode(self, rng):
        x = Tensor(rng.uniform(-1, 1, (2, 3, 3, 3)), requires_grad=True)
        g = Tensor(rng.uniform(0.5, 1.5, 3), requires_grad=True)
        bvec = Tensor(rng.uniform(-0.5, 0.5, 3), requires_grad=True)
        w = rng.uniform(-1, 1, (2, 3, 3, 3))

        def fn():
            out = batch_norm(x, g, bvec, np.zeros(3), np.ones(3), True)
            return T.tsum(T.mul(out, Tensor(w)))

        rep = gradcheck(fn, [x, g, bvec], name="bn")
        assert rep.max_rel_err < 1e-4
