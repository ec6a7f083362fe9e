import numpy as np
import pytest

from tmac.autodiff import NumericError, ShapeError, Tape, Tensor

from oracles import check_gradients


def test_matmul_worked_example():
    tape = Tape()
    a = Tensor([[1.0, 2.0]], requires_grad=True)
    b = Tensor([[3.0], [4.0]], requires_grad=True)
    out = tape.matmul(a, b)
    assert out.shape == (1, 1)
    assert out.data[0, 0] == 11.0
    tape.backward(out)
    assert np.array_equal(tape.grad(a), [[3.0, 4.0]])
    assert np.array_equal(tape.grad(b), [[1.0], [2.0]])


def test_elementwise_worked_examples():
    tape = Tape()
    assert tape.sigmoid(Tensor([[0.0]])).data[0, 0] == 0.5
    assert abs(tape.exp(Tensor([[-1.0]])).data[0, 0] - 0.36787944117144233) < 1e-15
    assert tape.leaky_relu(Tensor([[-2.0]]), slope=0.2).data[0, 0] == -0.4
    assert tape.relu(Tensor([[-3.0, 5.0]])).data.tolist() == [[0.0, 5.0]]


def test_shape_mismatch_raises():
    tape = Tape()
    with pytest.raises(ShapeError):
        tape.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(ShapeError):
        tape.add(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2))))
    with pytest.raises(ShapeError):
        tape.hconcat(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 3))))


def test_1d_input_promotes_to_row():
    t = Tensor([1.0, 2.0, 3.0])
    assert t.shape == (1, 3)
    with pytest.raises(ShapeError):
        Tensor(np.ones((2, 2, 2)))


def test_non_finite_rejected():
    with pytest.raises(NumericError):
        Tensor([[np.nan]])
    tape = Tape()
    with pytest.raises(NumericError):
        tape.exp(Tensor([[1000.0]]))
    with pytest.raises(NumericError):
        tape.log(Tensor([[0.0]]))


def test_log_of_positive_ok():
    tape = Tape()
    out = tape.log(Tensor([[np.e]]))
    assert abs(out.data[0, 0] - 1.0) < 1e-15


def test_backward_requires_scalar():
    tape = Tape()
    t = Tensor(np.ones((2, 2)), requires_grad=True)
    out = tape.relu(t)
    with pytest.raises(ShapeError):
        tape.backward(out)


def test_grad_unreached_is_zeros():
    tape = Tape()
    a = Tensor([[1.0]], requires_grad=True)
    b = Tensor([[2.0]], requires_grad=True)
    loss = tape.sum(tape.relu(a))
    tape.backward(loss)
    assert np.array_equal(tape.grad(b), [[0.0]])


def test_broadcast_add_row_and_col():
    tape = Tape()
    a = Tensor(np.arange(6, dtype=float).reshape(2, 3), requires_grad=True)
    row = Tensor([[10.0, 20.0, 30.0]], requires_grad=True)
    col = Tensor([[1.0], [2.0]], requires_grad=True)
    out = tape.add(tape.add(a, row), col)
    assert out.data[1, 2] == 5.0 + 30.0 + 2.0
    loss = tape.sum(out)
    tape.backward(loss)
    assert np.array_equal(tape.grad(row), [[2.0, 2.0, 2.0]])
    assert np.array_equal(tape.grad(col), [[3.0], [3.0]])


def test_outer_broadcast():
    tape = Tape()
    col = Tensor([[1.0], [2.0]], requires_grad=True)
    row = Tensor([[3.0, 4.0]], requires_grad=True)
    out = tape.mul(col, row)
    assert out.data.tolist() == [[3.0, 4.0], [6.0, 8.0]]
    tape.backward(tape.sum(out))
    assert np.array_equal(tape.grad(col), [[7.0], [7.0]])
    assert np.array_equal(tape.grad(row), [[3.0, 3.0]])


def test_pow_zero_exponent_has_zero_grad():
    tape = Tape()
    a = Tensor([[0.0, 2.0]], requires_grad=True)
    out = tape.pow(a, 0.0)
    assert out.data.tolist() == [[1.0, 1.0]]
    tape.backward(tape.sum(out))
    assert np.array_equal(tape.grad(a), [[0.0, 0.0]])


def test_clamp_gradient_mask():
    tape = Tape()
    a = Tensor([[-1.0, 0.5, 2.0]], requires_grad=True)
    out = tape.clamp(a, 0.0, 1.0)
    assert out.data.tolist() == [[0.0, 0.5, 1.0]]
    tape.backward(tape.sum(out))
    # entries pushed to the bounds get zero gradient
    assert np.array_equal(tape.grad(a), [[0.0, 1.0, 0.0]])


def test_max_routes_to_first_argmax():
    tape = Tape()
    a = Tensor([[3.0, 7.0, 7.0]], requires_grad=True)
    out = tape.max(a)
    assert out.data[0, 0] == 7.0
    tape.backward(out)
    assert np.array_equal(tape.grad(a), [[0.0, 1.0, 0.0]])


def test_reductions_by_axis():
    tape = Tape()
    a = Tensor([[1.0, 2.0], [3.0, 4.0]])
    assert tape.sum(a, axis="rows").data.tolist() == [[3.0], [7.0]]
    assert tape.sum(a, axis="cols").data.tolist() == [[4.0, 6.0]]
    assert tape.mean(a).data[0, 0] == 2.5
    assert tape.max(a, axis="rows").data.tolist() == [[2.0], [4.0]]


def test_transpose_roundtrip_and_grad():
    tape = Tape()
    a = Tensor([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]], requires_grad=True)
    at = tape.transpose(a)
    assert at.shape == (2, 3)
    assert at.data[0, 2] == 5.0
    w = Tensor(np.array([[1.0], [10.0], [100.0]]))
    tape.backward(tape.sum(tape.matmul(at, w)))
    assert np.array_equal(tape.grad(a), [[1.0, 1.0], [10.0, 10.0], [100.0, 100.0]])


def test_hconcat_splits_gradient():
    tape = Tape()
    a = Tensor([[1.0, 2.0]], requires_grad=True)
    b = Tensor([[3.0]], requires_grad=True)
    out = tape.hconcat(a, b)
    assert out.data.tolist() == [[1.0, 2.0, 3.0]]
    w = Tensor([[1.0], [10.0], [100.0]])
    tape.backward(tape.matmul(out, w))
    assert np.array_equal(tape.grad(a), [[1.0, 10.0]])
    assert np.array_equal(tape.grad(b), [[100.0]])


def test_grad_accumulates_on_reuse():
    tape = Tape()
    a = Tensor([[2.0]], requires_grad=True)
    out = tape.mul(a, a)
    tape.backward(out)
    assert np.array_equal(tape.grad(a), [[4.0]])


def test_tapes_are_independent():
    a = Tensor([[3.0]], requires_grad=True)
    t1, t2 = Tape(), Tape()
    t1.backward(t1.mul(a, Tensor([[2.0]])))
    t2.backward(t2.mul(a, Tensor([[5.0]])))
    assert np.array_equal(t1.grad(a), [[2.0]])
    assert np.array_equal(t2.grad(a), [[5.0]])


def test_finite_difference_random_compositions(rng):
    def build(tape, ts):
        a, b, w = ts
        h = tape.leaky_relu(tape.matmul(a, w), slope=0.2)
        h = tape.add(h, b)
        h = tape.sigmoid(h)
        h = tape.mul(h, h)
        return tape.mean(h)

    for _ in range(10):
        params = [rng.normal(size=(3, 4)), rng.normal(size=(1, 5)), rng.normal(size=(4, 5))]
        assert check_gradients(build, params) <= 1e-4


def test_finite_difference_reductions_and_concat(rng):
    def build(tape, ts):
        a, b = ts
        top = tape.exp(tape.mul(a, Tensor(np.full(a.shape, 0.3))))
        bottom = tape.log(tape.add(tape.relu(b), Tensor(np.full(b.shape, 1.5))))
        joined = tape.hconcat(top, bottom)
        return tape.sum(tape.pow(joined, 2.0))

    for _ in range(10):
        params = [rng.normal(size=(2, 3)), rng.normal(size=(2, 2))]
        assert check_gradients(build, params) <= 1e-4
