import numpy as np
import pytest

import fredft.tensor as T
from fredft.tensor import ShapeError, Tensor


class TestChannelShuffle:
    def test_pinned_example_groups2(self):
        x = Tensor(np.arange(6, dtype=np.float64).reshape(1, 6, 1, 1))
        out = T.channel_shuffle(x, 2).data.reshape(-1)
        assert out.tolist() == [0, 3, 1, 4, 2, 5]

    def test_groups1_identity(self, rng):
        x = rng.standard_normal((2, 5, 3, 3))
        assert np.array_equal(T.channel_shuffle(Tensor(x), 1).data, x)

    def test_inverse_permutation_restores(self, rng):
        x = rng.standard_normal((2, 8, 2, 2))
        shuffled = T.channel_shuffle(Tensor(x), 4).data
        perm = T.shuffle_permutation(8, 4)
        # brute-force inverse search over channel indices
        inv = [next(d for d in range(8) if perm[d] == s) for s in range(8)]
        assert np.array_equal(shuffled[:, inv], x)

    def test_bijection_preserves_multiset(self, rng):
        x = rng.standard_normal((1, 12, 4, 4))
        out = T.channel_shuffle(Tensor(x), 3).data
        assert np.array_equal(np.sort(out, axis=1), np.sort(x, axis=1))

    def test_spatial_values_untouched(self, rng):
        x = rng.standard_normal((1, 6, 5, 5))
        out = T.channel_shuffle(Tensor(x), 2).data
        perm = T.shuffle_permutation(6, 2)
        for c_out, c_in in enumerate(perm):
            assert np.array_equal(out[:, c_out], x[:, c_in])

    def test_non_divisible_rejected(self):
        with pytest.raises(ShapeError, match="divisible"):
            T.channel_shuffle(Tensor(np.zeros((1, 5, 2, 2))), 2)


class TestSoftmax:
    def test_uniform_on_zeros(self):
        out = T.softmax(Tensor(np.zeros((1, 4, 1, 1))), "channel").data
        assert np.allclose(out, 0.25, atol=1e-15)

    def test_large_inputs_stable(self):
        x = Tensor(np.full((1, 2, 1, 1), 1000.0))
        out = T.softmax(x, "channel").data
        assert np.all(np.isfinite(out))
        assert np.allclose(out, 0.5, atol=1e-15)

    def test_channel_sums(self, rng):
        x = Tensor(rng.uniform(-5, 5, (3, 7, 4, 4)))
        out = T.softmax(x, "channel").data
        assert np.abs(out.sum(axis=1) - 1.0).max() < 1e-12
        assert np.all((out > 0) & (out < 1))

    def test_spatial_sums(self, rng):
        x = Tensor(rng.uniform(-5, 5, (2, 3, 4, 5)))
        out = T.softmax(x, "spatial").data
        assert np.abs(out.sum(axis=(2, 3)) - 1.0).max() < 1e-12

    def test_shift_invariance(self, rng):
        x = rng.uniform(-2, 2, (1, 6, 3, 3))
        a = T.softmax(Tensor(x), "channel").data
        b = T.softmax(Tensor(x + 7.25), "channel").data
        assert np.abs(a - b).max() < 1e-12


class TestLayerNorm:
    def test_closed_form_123(self):
        x = Tensor(np.array([1.0, 2.0, 3.0]).reshape(1, 3, 1, 1))
        out = T.layer_norm(x, Tensor(np.ones(3)), Tensor(np.zeros(3)))
        # mean 2, biased var 2/3 -> normalized (-1, 0, 1) / sqrt(2/3)
        expect = np.array([-1.0, 0.0, 1.0]) / np.sqrt(2.0 / 3.0 + 1e-6)
        assert np.allclose(out.data.reshape(-1), expect, atol=1e-9)

    def test_constant_channel_guarded(self):
        x = Tensor(np.full((1, 4, 2, 2), 5.0))
        out = T.layer_norm(x, Tensor(np.ones(4)), Tensor(np.zeros(4)))
        assert np.abs(out.data).max() < 1e-12

    def test_zero_gamma_gives_beta(self, rng):
        x = Tensor(rng.standard_normal((2, 3, 2, 2)))
        beta = np.array([1.5, -2.0, 0.25])
        out = T.layer_norm(x, Tensor(np.zeros(3)), Tensor(beta))
        assert np.allclose(out.data, beta[None, :, None, None], atol=0)

    def test_statistics_contract(self, rng):
        x = Tensor(rng.uniform(-100, 100, (2, 16, 3, 3)))
        out = T.layer_norm(x, Tensor(np.ones(16)), Tensor(np.zeros(16)))
        assert np.abs(out.data.mean(axis=1)).max() < 1e-10
        assert np.abs(out.data.var(axis=1) - 1.0).max() < 1e-8


class TestPooling:
    def test_constant_map(self):
        x = Tensor(np.full((1, 2, 3, 3), 4.2))
        assert np.allclose(T.global_pool(x, "average").data, 4.2)
        assert np.allclose(T.global_pool(x, "max").data, 4.2)

    def test_identity_grid(self):
        x = Tensor(np.array([[0.0, 1.0], [2.0, 3.0]]).reshape(1, 1, 2, 2))
        assert T.global_pool(x, "average").item() == 1.5
        assert T.global_pool(x, "max").item() == 3.0

    def test_average_matches_loop(self, rng):
        x = rng.standard_normal((2, 3, 4, 5))
        got = T.global_pool(Tensor(x), "average").data
        for n in range(2):
            for c in range(3):
                acc = 0.0
                for h in range(4):
                    for w in range(5):
                        acc += x[n, c, h, w]
                assert abs(got[n, c, 0, 0] - acc / 20) < 1e-12

    def test_avg_pool2(self, rng):
        x = rng.standard_normal((1, 2, 4, 4))
        got = T.avg_pool2(Tensor(x)).data
        assert got.shape == (1, 2, 2, 2)
        assert abs(got[0, 0, 0, 0] - x[0, 0, :2, :2].mean()) < 1e-12


def test_matmul_identity(rng):
    a = rng.standard_normal((2, 3, 4))
    eye = np.broadcast_to(np.eye(4), (2, 4, 4)).copy()
    out = T.matmul_batched(Tensor(a), Tensor(eye)).data
    assert np.allclose(out, a, atol=0)


def test_matmul_shape_mismatch():
    with pytest.raises(ShapeError):
        T.matmul_batched(Tensor(np.zeros((1, 2, 3))), Tensor(np.zeros((1, 4, 5))))


def test_split_concat_roundtrip_bit_exact(rng):
    x = rng.standard_normal((2, 9, 3, 3))
    parts = T.split_channels(Tensor(x), 3)
    assert np.array_equal(T.concat(parts, axis=1).data, x)
    sized = T.split_channels(Tensor(x), [2, 3, 4])
    assert [p.shape[1] for p in sized] == [2, 3, 4]
    assert np.array_equal(T.concat(sized, axis=1).data, x)


def test_split_bad_sizes():
    with pytest.raises(ShapeError):
        T.split_channels(Tensor(np.zeros((1, 7, 2, 2))), 3)


def test_activation_closed_forms():
    assert T.silu(Tensor(np.array(0.0))).item() == 0.0
    assert T.relu(Tensor(np.array(-1.0))).item() == 0.0
    assert T.sigmoid(Tensor(np.array(0.0))).item() == 0.5


def test_ops_deterministic(rng):
    x = rng.standard_normal((2, 4, 8, 8))
    a = T.softmax(Tensor(x), "spatial").data
    b = T.softmax(Tensor(x), "spatial").data
    assert np.array_equal(a, b)


def test_ops_do_not_mutate_inputs(rng):
    x = rng.standard_normal((1, 4, 4, 4))
    t = Tensor(x.copy())
    T.channel_shuffle(t, 2)
    T.softmax(t, "channel")
    T.relu(t)
    assert np.array_equal(t.data, x)


def test_finite_outputs_on_finite_inputs(rng):
    x = Tensor(rng.uniform(-50, 50, (2, 6, 4, 4)))
    for out in (
        T.softmax(x, "channel"),
        T.silu(x),
        T.layer_norm(x, Tensor(np.ones(6)), Tensor(np.zeros(6))),
        T.global_pool(x, "max"),
    ):
        assert np.isfinite(out.data).all()
