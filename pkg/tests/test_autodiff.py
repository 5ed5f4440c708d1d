import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from clipsum import autodiff as ad
from clipsum.autodiff import Parameter, ShapeError, Tensor


def fd_check(build, params, seed_tol=1e-4):
    err = ad.check_gradients(build, params)
    assert err < seed_tol, err
    return err


def test_softmax_uniform():
    out = ad.softmax(Tensor([0.0, 0.0, 0.0]))
    np.testing.assert_allclose(out.data, [1 / 3] * 3, atol=1e-15)


def test_inner_product_hand_value():
    assert ad.inner(Tensor([1.0, 2.0]), Tensor([3.0, 4.0])).item() == 11.0


def test_matmul_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    a = Parameter(rng.standard_normal((2, 3)))
    b = Parameter(rng.standard_normal((3, 1)))
    w = rng.standard_normal((2, 1))
    fd_check(lambda: ad.inner(ad.matmul(a, b), w), [a, b])


def test_backward_sum_gives_ones():
    p = Parameter(np.arange(4.0))
    ad.backward(ad.sum(p))
    np.testing.assert_array_equal(p.grad, np.ones(4))


def test_backward_quadratic_form():
    p = Parameter([1.0, 2.0])
    ad.backward(ad.inner(p, p))
    np.testing.assert_allclose(p.grad, [2.0, 4.0])


def test_backward_rejects_non_scalar_root():
    p = Parameter(np.ones(3))
    with pytest.raises(ShapeError):
        ad.backward(ad.relu(p))


def test_backward_zeroes_unless_accumulating():
    p = Parameter([1.0, 2.0])
    ad.backward(ad.sum(p))
    ad.backward(ad.sum(p))
    np.testing.assert_array_equal(p.grad, [1.0, 1.0])
    ad.backward(ad.sum(p), accumulate=True)
    np.testing.assert_array_equal(p.grad, [2.0, 2.0])


def test_shape_error_names_op_and_shapes():
    with pytest.raises(ShapeError, match=r"matmul.*\(2, 3\).*\(2, 3\)"):
        ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(ShapeError, match="inner-product"):
        ad.inner(Tensor([1.0]), Tensor([1.0, 2.0]))


def test_shared_input_accumulates_both_paths():
    rng = np.random.default_rng(1)
    p = Parameter(rng.standard_normal(5))

    def build():
        e = ad.exp(ad.scalar_mul(p, 0.3))
        return ad.add(ad.inner(e, p), ad.sum(ad.mul(p, p)))

    fd_check(build, [p])


@pytest.mark.parametrize("seed", range(20))
def test_every_op_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    a = Parameter(rng.standard_normal((3, 4)))
    b = Parameter(rng.standard_normal((4, 2)))
    c = Parameter(rng.uniform(0.5, 2.0, (3, 2)))
    v = Parameter(rng.standard_normal(6))
    w = rng.standard_normal((3, 2))

    def build():
        m = ad.matmul(a, b)
        x = ad.add(m, ad.scalar_mul(c, 0.7))
        x = ad.mul(x, ad.sigmoid(c))
        x = ad.add(ad.relu(x), ad.log(c))
        x = ad.div(x, ad.sqrt(c))
        sm = ad.softmax(x, axis=0)
        cat = ad.concat([ad.reshape(sm, (-1,)), v], axis=0)
        win = ad.slice_window(cat, 2, 8, axis=0)
        t = ad.take(cat, np.array([0, 3, 3, 11]))
        total = ad.inner(sm, w)
        total = ad.add(total, ad.mean(ad.exp(ad.scalar_mul(win, 0.5))))
        total = ad.add(total, ad.logsumexp(t))
        total = ad.add(total, ad.sum(ad.transpose(x), axis=0)[1])
        return total

    # relu kinks break finite differences; skip draws that land too close
    pre = (a.data @ b.data + 0.7 * c.data) / (1 + np.exp(-c.data))
    if np.min(np.abs(pre)) < 1e-3:
        pytest.skip("draw lands on a relu kink")
    fd_check(build, [a, b, c, v])


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 6)), elements=st.floats(-50, 50)))
def test_softmax_rows_are_distributions(x):
    out = ad.softmax(Tensor(x), axis=1).data
    assert np.all(out >= 0)
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)


def test_softmax_is_overflow_safe():
    out = ad.softmax(Tensor([1000.0, 1000.0, -1000.0]))
    assert ad.is_finite(out)
    np.testing.assert_allclose(out.data, [0.5, 0.5, 0.0])


def test_adam_first_step_moves_by_lr():
    p = Parameter([3.0])
    p.grad = np.array([1.0])
    ad.adam_step([p], lr=0.1)
    np.testing.assert_allclose(p.data, [2.9], atol=1e-6)


def test_adam_zero_gradient_keeps_parameter_and_decays_moments():
    p = Parameter([3.0])
    p.grad = np.array([1.0])
    ad.adam_step([p], lr=0.1)
    m, v, value = p.m.copy(), p.v.copy(), p.data.copy()
    p.grad = np.array([0.0])
    ad.adam_step([p], lr=0.1)
    np.testing.assert_allclose(p.m, 0.9 * m)
    np.testing.assert_allclose(p.v, 0.999 * v)
    # the decayed first moment still moves p; a never-touched parameter does not
    q = Parameter([1.5])
    ad.adam_step([q], lr=0.1)
    assert q.data[0] == 1.5
    assert not np.array_equal(p.data, value)


def _scalar_adam(x, steps, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t in range(1, steps + 1):
        g = 2 * x
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
    return x


def test_adam_minimizes_quadratic_like_scalar_reference():
    p = Parameter([1.0])
    for _ in range(100):
        ad.backward(ad.inner(p, p))
        ad.adam_step([p], lr=0.1)
    ref = _scalar_adam(1.0, 100, 0.1)
    assert abs(p.data[0]) < 0.05
    assert abs(p.data[0] - ref) < 1e-12
