import numpy as np
import pytest

import fredft.tensor as T
from fredft.autodiff import AutodiffError, GradReport, backward, gradcheck
from fredft.fft import fft2d
from fredft.tensor import Tensor, no_grad

from conftest import margin_uniform


def test_sum_gradient_is_ones(rng):
    x = Tensor(rng.standard_normal((2, 3, 4, 4)), requires_grad=True)
    backward(T.tsum(x))
    assert np.array_equal(x.grad, np.ones_like(x.data))


def test_square_gradient_closed_form(rng):
    x = Tensor(rng.standard_normal((3, 5)), requires_grad=True)
    backward(T.tsum(T.mul(x, x)))
    assert np.allclose(x.grad, 2 * x.data, atol=1e-14)


def test_fanout_sums_both_branches(rng):
    x = Tensor(rng.standard_normal(4), requires_grad=True)
    y = T.mul(x, Tensor(np.full(4, 3.0)))
    z = T.mul(x, x)
    backward(T.tsum(y + z))
    assert np.allclose(x.grad, 3.0 + 2 * x.data, atol=1e-14)


def test_backward_rejects_non_scalar(rng):
    x = Tensor(rng.standard_normal(4), requires_grad=True)
    with pytest.raises(AutodiffError, match="scalar"):
        backward(x + x)


def test_no_grad_blocks_graph(rng):
    x = Tensor(rng.standard_normal(4), requires_grad=True)
    with no_grad():
        y = T.tsum(T.mul(x, x))
    assert not y.requires_grad


def test_deep_graph_iterative_traversal():
    x = Tensor(np.array(1.0), requires_grad=True)
    y = x
    for _ in range(5000):  # way past the recursion limit
        y = y + Tensor(np.array(0.001))
    backward(y)
    assert x.grad == 1.0


def test_gradcheck_linear_map_machine_precision(rng):
    x = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    w = rng.standard_normal((3, 4))
    rep = gradcheck(lambda: T.tsum(T.mul(x, Tensor(w))), [x], name="linear")
    assert rep.max_rel_err < 1e-9
    assert rep.probes == 12


def test_gradcheck_relu_away_from_kinks(rng):
    x = Tensor(margin_uniform(rng, (4, 4), margin=1e-3), requires_grad=True)
    rep = gradcheck(lambda: T.tsum(T.relu(x)), [x], name="relu")
    assert rep.max_rel_err < 1e-6


def test_gradcheck_probe_cap(rng):
    x = Tensor(rng.standard_normal((10, 10, 10)), requires_grad=True)
    rep = gradcheck(lambda: T.tsum(T.mul(x, x)), [x], max_probes=64)
    assert rep.probes == 64


def test_gradcheck_rejects_non_finite(rng):
    x = Tensor(np.array([0.5]), requires_grad=True)

    def fn():
        with np.errstate(divide="ignore"):
            return T.tsum(T.log(x - Tensor(np.array([0.5]))))

    with pytest.raises(AutodiffError):
        gradcheck(fn, [x])


def test_gradreport_validates():
    with pytest.raises(ValueError):
        GradReport("x", -1.0, 0.0, 1)


def test_fft_gradient_matches_finite_differences(rng):
    """Real loss on the spectrum of a real input: validates the
    conjugate-transpose backward rule."""
    x = Tensor(rng.uniform(-1, 1, (1, 1, 6, 5)), requires_grad=True)
    wr = rng.uniform(-1, 1, (1, 1, 6, 5))
    wi = rng.uniform(-1, 1, (1, 1, 6, 5))

    def fn():
        spec = fft2d(x)
        quad = T.tsum(T.mul(spec.re, spec.re)) + T.tsum(T.mul(spec.im, spec.im))
        lin = T.tsum(T.mul(spec.re, Tensor(wr))) + T.tsum(T.mul(spec.im, Tensor(wi)))
        return quad + lin

    rep = gradcheck(fn, [x], name="fft_loss")
    assert rep.max_rel_err < 1e-6


def test_max_pool_tie_routes_to_lowest_index():
    x = Tensor(np.array([[2.0, 2.0], [1.0, 2.0]]).reshape(1, 1, 2, 2), requires_grad=True)
    backward(T.tsum(T.global_pool(x, "max")))
    expect = np.zeros((1, 1, 2, 2))
    expect[0, 0, 0, 0] = 1.0
    assert np.array_equal(x.grad, expect)
