import numpy as np
import pytest

from fredft import backend, reference
from fredft.fft import (
    ComplexTensor,
    ImaginaryResidueError,
    fft2d,
    ifft2d,
    spectrum_mul,
    take_real,
)
from fredft.tensor import ShapeError, Tensor


def spec_of(x):
    return fft2d(Tensor(x)).to_complex()


class TestForwardTransform:
    def test_constant_map_dc_bin(self, both_backends):
        v = 1.7
        h, w = 6, 5
        spec = spec_of(np.full((1, 1, h, w), v))
        assert abs(spec[0, 0, 0, 0] - v * h * w) < 1e-10
        rest = np.abs(spec)
        rest[0, 0, 0, 0] = 0.0
        assert rest.max() < 1e-10

    def test_delta_gives_flat_spectrum(self, both_backends):
        x = np.zeros((1, 1, 8, 8))
        x[0, 0, 0, 0] = 1.0
        assert np.abs(spec_of(x) - 1.0).max() < 1e-12

    @pytest.mark.parametrize("shape", [(4, 4), (7, 5), (12, 10), (20, 20)])
    def test_matches_naive_dft(self, both_backends, rng, shape):
        x = rng.uniform(-1, 1, (1, 2, *shape))
        assert np.abs(spec_of(x) - reference.naive_dft2d(x)).max() < 1e-9

    def test_linearity(self, rng):
        a = rng.uniform(-1, 1, (1, 1, 9, 9))
        b = rng.uniform(-1, 1, (1, 1, 9, 9))
        lhs = spec_of(2.5 * a - 0.7 * b)
        assert np.abs(lhs - (2.5 * spec_of(a) - 0.7 * spec_of(b))).max() < 1e-10

    def test_conjugate_symmetry_real_input(self, rng):
        x = rng.uniform(-1, 1, (1, 1, 10, 12))
        s = spec_of(x)[0, 0]
        h, w = s.shape
        mirrored = s[(-np.arange(h)) % h][:, (-np.arange(w)) % w]
        assert np.abs(s - np.conj(mirrored)).max() < 1e-10

    def test_rejects_non_nchw(self):
        with pytest.raises(ShapeError):
            fft2d(Tensor(np.zeros((3, 4))))


class TestInverse:
    @pytest.mark.parametrize("shape", [(8, 8), (20, 20), (40, 40), (80, 80)])
    def test_roundtrip(self, both_backends, rng, shape):
        x = rng.uniform(-1, 1, (1, 2, *shape))
        back = ifft2d(fft2d(Tensor(x)))
        assert np.abs(back.re.data - x).max() < 1e-9
        assert np.abs(back.im.data).max() < 1e-9

    def test_parseval(self, rng):
        x = rng.uniform(-1, 1, (2, 3, 16, 12))
        spec = fft2d(Tensor(x))
        space = (x**2).sum()
        freq = (spec.re.data**2 + spec.im.data**2).sum() / (16 * 12)
        assert abs(space - freq) / space < 1e-9


def test_bluestein_matches_radix2_on_pow2(rng):
    z = rng.uniform(-1, 1, (4, 32)) + 1j * rng.uniform(-1, 1, (4, 32))
    assert np.abs(
        backend.dft1d_batch(z) - backend.dft1d_batch_bluestein(z)
    ).max() < 1e-10


def test_backends_agree(rng):
    if not backend.NUMBA_AVAILABLE:
        pytest.skip("numba backend unavailable")
    x = rng.uniform(-1, 1, (1, 2, 15, 9)).astype(np.complex128)
    prev = backend.using_numba()
    try:
        backend.use_numba(True)
        a = backend.dft2(x)
        backend.use_numba(False)
        b = backend.dft2(x)
    finally:
        backend.use_numba(prev)
    assert np.abs(a - b).max() < 1e-12


class TestConvolutionTheorem:
    @pytest.mark.parametrize("shape", [(4, 4), (7, 5), (16, 16), (20, 20)])
    def test_product_inverts_to_circular_convolution(self, rng, shape):
        for _ in range(5):
            a = rng.uniform(-1, 1, (1, 1, *shape))
            b = rng.uniform(-1, 1, (1, 1, *shape))
            prod = spectrum_mul(fft2d(Tensor(a)), fft2d(Tensor(b)))
            got = take_real(ifft2d(prod), imag_tol=1e-6).data
            assert np.abs(got - reference.circular_conv2d(a, b)).max() < 1e-8

    def test_conjugate_flag_gives_correlation(self, rng):
        a = rng.uniform(-1, 1, (1, 1, 6, 6))
        b = rng.uniform(-1, 1, (1, 1, 6, 6))
        prod = spectrum_mul(fft2d(Tensor(a)), fft2d(Tensor(b)), conjugate_b=True)
        got = take_real(ifft2d(prod), imag_tol=1e-6).data
        # circular cross-correlation: sum_a a[u,v] b[(u-y)%, (v-x)%]
        ref = np.zeros_like(got)
        for y in range(6):
            for x in range(6):
                acc = 0.0
                for u in range(6):
                    for v in range(6):
                        acc += a[0, 0, u, v] * b[0, 0, (u - y) % 6, (v - x) % 6]
                ref[0, 0, y, x] = acc
        assert np.abs(got - ref).max() < 1e-8


class TestTakeReal:
    def test_identity_on_real(self, rng):
        x = rng.uniform(-1, 1, (1, 1, 4, 4))
        c = ComplexTensor(Tensor(x), Tensor(np.zeros_like(x)))
        assert np.array_equal(take_real(c).data, x)

    def test_tolerance_violation_raises_with_magnitude(self, rng):
        x = rng.uniform(-1, 1, (1, 1, 4, 4))
        c = ComplexTensor(Tensor(x), Tensor(np.full_like(x, 0.5)))
        with pytest.raises(ImaginaryResidueError) as err:
            take_real(c, imag_tol=1e-6)
        assert err.value.max_imag == pytest.approx(0.5)

    def test_no_tolerance_is_total(self, rng):
        x = rng.uniform(-1, 1, (1, 1, 4, 4))
        c = ComplexTensor(Tensor(x), Tensor(np.full_like(x, 99.0)))
        take_real(c)  # imaginary part discarded by design

    def test_mismatched_re_im_rejected(self):
        with pytest.raises(ShapeError):
            ComplexTensor(Tensor(np.zeros((1, 1, 2, 2))), Tensor(np.zeros((1, 1, 3, 2))))
