"""Finite-difference checks for every tape primitive."""

import numpy as np
import numpy.testing as npt

from fredn import autodiff as ad
from fredn.autodiff import Var


def numeric_grad(fn, x, step=1e-6):
    """Central differences of a scalar-valued fn at x."""
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = fn(x)
        flat[i] = orig - step
        down = fn(x)
        flat[i] = orig
        gflat[i] = (up - down) / (2 * step)
    return grad


def check_op(build, shape, seed=0, tol=1e-7):
    """build(Var) -> Var output; compares tape grad against differences."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape)
    weights = rng.standard_normal(build(Var(x)).shape)

    def scalar(arr):
        return float(ad.vsum(build(Var(arr)) * weights).data)

    v = Var(x)
    out = ad.vsum(build(v) * weights)
    out.backward()
    npt.assert_allclose(v.grad, numeric_grad(scalar, x), atol=tol, rtol=tol)


def test_elementwise_ops():
    rng = np.random.default_rng(1)
    other = rng.standard_normal((3, 4))
    check_op(lambda v: v + other, (3, 4))
    check_op(lambda v: v * other - 2.0 * v, (3, 4))
    check_op(lambda v: v / (other ** 2 + 1.5), (3, 4))
    check_op(lambda v: (v * v + 1.0) ** 0.5, (3, 4))


def test_broadcasting_grads():
    rng = np.random.default_rng(2)
    big = rng.standard_normal((2, 3, 4))
    check_op(lambda v: v * big, (4,))
    check_op(lambda v: big / (v * v + 1.0), (3, 1))
    check_op(lambda v: v + big, (1, 3, 1))


def test_matmul():
    rng = np.random.default_rng(3)
    w = rng.standard_normal((5, 3))
    check_op(lambda v: ad.matmul(v, w), (4, 5))
    check_op(lambda v: ad.matmul(v, w), (2, 6, 5))
    # gradient w.r.t. the weight too
    x = rng.standard_normal((2, 4, 5))
    vw = Var(w.copy())
    out = ad.vsum(ad.matmul(Var(x), vw) * 1.0)
    out.backward()
    expected = numeric_grad(lambda arr: float(np.sum(x @ arr)), w.copy())
    npt.assert_allclose(vw.grad, expected, atol=1e-7)


def test_shape_ops():
    check_op(lambda v: ad.reshape(v, (6, 2)), (3, 4))
    check_op(lambda v: ad.swapaxes(v, -1, -2), (2, 3, 4))
    check_op(lambda v: v[..., 1:3, :], (2, 4, 3))
    check_op(lambda v: ad.concat([v[..., :2, :], v, v[..., 3:4, :]], axis=-2),
             (2, 4, 3))
    check_op(lambda v: ad.stack([v, v * 2.0], axis=-3), (4, 3))


def test_reductions():
    check_op(lambda v: ad.vsum(v, axis=-1, keepdims=True), (3, 5))
    check_op(lambda v: ad.vmean(v, axis=0), (4, 2))
    check_op(lambda v: ad.vmean(v), (3, 3))


def test_nonlinearities():
    check_op(lambda v: ad.sigmoid(v), (3, 4))
    check_op(lambda v: ad.gelu(v), (3, 4), tol=1e-6)
    check_op(lambda v: ad.sqrt(v * v + 0.7), (3, 4))


def test_fft_pair_adjoints():
    for T in (8, 9, 16):
        check_op(lambda v: ad.rfft_planes(v), (2, T, 3))
        nf = T // 2 + 1
        check_op(lambda v, T=T: ad.irfft_planes(v, T), (2, 2, nf, 3))


def test_fft_round_trip_through_tape():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((2, 12, 3))
    with ad.no_grad():
        back = ad.irfft_planes(ad.rfft_planes(Var(x)), 12)
    npt.assert_allclose(back.data, x, atol=1e-12)


def test_grad_accumulates_over_reuse():
    v = Var(np.array([2.0]))
    out = v * v + v * 3.0
    out = ad.vsum(out)
    out.backward()
    npt.assert_allclose(v.grad, [7.0])


def test_no_grad_blocks_graph():
    v = Var(np.ones(3))
    with ad.no_grad():
        out = ad.vsum(v * 2.0)
    assert out._parents == ()


def test_dropout_zero_rate_is_identity():
    rng = np.random.default_rng(5)
    v = Var(np.ones((2, 3)))
    assert ad.dropout(v, 0.0, rng) is v


def test_dropout_mask_scaling():
    rng = np.random.default_rng(6)
    v = Var(np.ones((1000,)))
    out = ad.dropout(v, 0.25, rng)
    kept = out.data[out.data > 0]
    npt.assert_allclose(kept, 1.0 / 0.75)
    assert 600 < kept.size < 900
