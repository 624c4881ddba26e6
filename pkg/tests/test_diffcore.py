import numpy as np
import pytest

from wsproute import diffcore as dc
from wsproute.diffcore import (
    AdamState,
    BatchNorm,
    ShapeError,
    Tensor,
    backward,
    concat,
    exp,
    grad_check,
    index_rows,
    load_arrays,
    log,
    masked_fill,
    matmul,
    mean_,
    no_grad,
    power,
    relu,
    reshape,
    save_arrays,
    softmax,
    sum_,
    tanh,
    transpose,
)

rng = np.random.default_rng(0)

TOL = 1e-6


def check(f, shapes, tol=TOL):
    pts = [rng.standard_normal(s) for s in shapes]
    assert grad_check(f, pts) < tol


# -- per-primitive gradient checks ---------------------------------------


def test_grad_add():
    check(lambda xs: sum_(xs[0] + xs[1]), [(3, 4), (3, 4)])
    check(lambda xs: sum_(xs[0] + xs[1]), [(3, 4), (4,)])  # broadcast


def test_grad_mul_sub_div():
    check(lambda xs: sum_(xs[0] * xs[1]), [(3, 4), (3, 4)])
    check(lambda xs: sum_(xs[0] - xs[1]), [(5,), (5,)])
    check(lambda xs: sum_(xs[0] / (exp(xs[1]) + 1.0)), [(4,), (4,)])


def test_grad_power():
    check(lambda xs: sum_(power(exp(xs[0]), 1.7)), [(3, 3)])


def test_grad_matmul_all_cases():
    check(lambda xs: xs[0] @ xs[1], [(5,), (5,)])
    check(lambda xs: sum_(xs[0] @ xs[1]), [(5,), (5, 3)])
    check(lambda xs: sum_(xs[0] @ xs[1]), [(3, 5), (5,)])
    check(lambda xs: sum_(xs[0] @ xs[1]), [(3, 5), (5, 2)])
    check(lambda xs: sum_(xs[0] @ xs[1]), [(2, 3, 5), (2, 5, 4)])


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))


def test_grad_transpose_reshape():
    check(lambda xs: sum_(transpose(xs[0]) @ xs[0]), [(3, 4)])
    check(lambda xs: sum_(transpose(xs[0], (1, 0, 2)) * 2.0), [(2, 3, 4)])
    check(lambda xs: sum_(power(reshape(xs[0], (6, 2)) @ xs[1], 2.0)), [(3, 4), (2,)])


def test_grad_concat_index():
    check(lambda xs: sum_(power(concat([xs[0], xs[1]], axis=0), 2.0)), [(2, 3), (4, 3)])
    check(
        lambda xs: sum_(power(index_rows(xs[0], [0, 2, 2, 1]), 2.0)),
        [(4, 3)],
    )


def test_grad_reductions():
    check(lambda xs: sum_(xs[0]), [(3, 4)])
    check(lambda xs: sum_(power(sum_(xs[0], axis=1), 2.0)), [(3, 4)])
    check(lambda xs: mean_(power(xs[0], 2.0)), [(3, 4)])
    check(lambda xs: sum_(power(mean_(xs[0], axis=0, keepdims=True), 2.0)), [(3, 4)])


def test_grad_nonlinearities():
    check(lambda xs: sum_(tanh(xs[0])), [(3, 4)])
    check(lambda xs: sum_(exp(xs[0])), [(3,)])
    check(lambda xs: sum_(log(exp(xs[0]) + 1.0)), [(3,)])
    # relu: keep points away from the kink
    pts = [rng.standard_normal((4, 4)) + np.where(rng.random((4, 4)) > 0.5, 2.0, -2.0)]
    assert grad_check(lambda xs: sum_(relu(xs[0])), pts) < TOL


def test_grad_softmax_and_mask():
    check(lambda xs: sum_(power(softmax(xs[0]), 2.0)), [(3, 5)])
    mask = np.zeros((3, 5), dtype=bool)
    mask[:, -1] = True
    check(
        lambda xs: sum_(power(softmax(masked_fill(xs[0], mask, -1e9)), 2.0)),
        [(3, 5)],
    )


def test_softmax_properties():
    x = Tensor(rng.standard_normal((4, 6)) * 50)
    s = softmax(x).data
    assert np.allclose(s.sum(axis=-1), 1.0)
    assert np.all(s >= 0)
    shifted = softmax(Tensor(x.data + 1000.0)).data  # stability under shift
    assert np.allclose(s, shifted)


def test_masked_fill_forward():
    x = Tensor(np.arange(4.0))
    out = masked_fill(x, np.array([True, False, True, False]), -1.0)
    assert out.data.tolist() == [-1.0, 1.0, -1.0, 3.0]


# -- backward mechanics --------------------------------------------------


def test_backward_accumulates_shared_node():
    x = Tensor(np.array(3.0), requires_grad=True)
    y = x * x + x  # dy/dx = 2x + 1 = 7
    backward(y)
    assert x.grad == pytest.approx(7.0)


def test_backward_requires_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeError):
        backward(x * 2.0)


def test_backward_severs_tape():
    x = Tensor(np.array(2.0), requires_grad=True)
    y = x * x
    backward(y)
    assert y._parents == () and y._backward is None


def test_no_grad_blocks_tracking():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = sum_(x * 2.0)
    assert y._parents == ()
    assert y._backward is None


def test_detach():
    x = Tensor(np.ones(2), requires_grad=True)
    d = (x * 3.0).detach()
    assert not d.requires_grad and d._parents == ()
    assert d.data.tolist() == [3.0, 3.0]


# -- batch norm ----------------------------------------------------------


def test_batchnorm_normalizes_training():
    bn = BatchNorm(4)
    x = Tensor(rng.standard_normal((50, 4)) * 3 + 5)
    out = bn(x, training=True).data
    assert np.allclose(out.mean(axis=0), 0.0, atol=1e-7)
    assert np.allclose(out.std(axis=0), 1.0, atol=1e-2)


def test_batchnorm_running_stats_converge():
    bn = BatchNorm(2)
    data = rng.standard_normal((40, 2)) * 2 + 3
    for _ in range(200):
        bn(Tensor(data), training=True)
    assert np.allclose(bn.running_mean, data.mean(axis=0), atol=1e-3)
    assert np.allclose(bn.running_var, data.var(axis=0, ddof=1), atol=1e-3)
    out = bn(Tensor(data), training=False).data
    assert np.allclose(out.mean(axis=0), 0.0, atol=1e-2)


def test_batchnorm_gradcheck():
    bn = BatchNorm(3)
    bn.gamma.data[:] = rng.standard_normal(3)
    bn.beta.data[:] = rng.standard_normal(3)

    def f(xs):
        bn2 = BatchNorm(3)
        bn2.gamma = xs[1]
        bn2.beta = xs[2]
        return sum_(power(bn2(xs[0], training=True), 2.0))

    pts = [rng.standard_normal((6, 3)), bn.gamma.data.copy(), bn.beta.data.copy()]
    assert grad_check(f, pts) < 1e-4


# -- Adam ----------------------------------------------------------------


def test_adam_first_step_magnitude():
    p = Tensor(np.zeros(3), requires_grad=True)
    opt = AdamState({"p": p}, lr=0.1)
    p.grad = np.array([1.0, -2.0, 0.5])
    opt.step()
    # bias-corrected first step moves by ~lr in the sign of the gradient
    assert np.allclose(p.data, [-0.1, 0.1, -0.1], atol=1e-6)
    assert p.grad is None and opt.t == 1


def test_adam_skips_gradless_params():
    p = Tensor(np.ones(2), requires_grad=True)
    opt = AdamState({"p": p}, lr=0.5)
    opt.step()
    assert np.array_equal(p.data, np.ones(2))


def test_adam_minimizes_quadratic():
    p = Tensor(np.array([5.0, -4.0]), requires_grad=True)
    opt = AdamState({"p": p}, lr=0.2)
    for _ in range(400):
        loss = sum_(power(p - np.array([1.0, 2.0]), 2.0))
        backward(loss)
        opt.step()
    assert np.allclose(p.data, [1.0, 2.0], atol=1e-2)


def test_adam_lr_zero_is_noop():
    p = Tensor(np.array([3.0]), requires_grad=True)
    opt = AdamState({"p": p}, lr=0.0)
    p.grad = np.array([10.0])
    opt.step()
    assert p.data.tolist() == [3.0]


# -- checkpoints ---------------------------------------------------------


def test_checkpoint_roundtrip(tmp_path):
    arrays = {
        "w": rng.standard_normal((3, 4)),
        "b": rng.standard_normal(5),
        "s": np.array(2.5),
    }
    path = tmp_path / "ck.bin"
    save_arrays(path, arrays)
    loaded = load_arrays(path)
    assert set(loaded) == set(arrays)
    for k in arrays:
        assert loaded[k].shape == arrays[k].shape
        assert np.array_equal(loaded[k], arrays[k])


def test_checkpoint_magic(tmp_path):
    path = tmp_path / "ck.bin"
    with open(path, "wb") as fh:
        fh.write(b"JUNK\n" + b"\x00" * 16)
    with pytest.raises(ValueError, match="magic"):
        load_arrays(path)


def test_checkpoint_deterministic_bytes(tmp_path):
    arrays = {"a": np.arange(6.0).reshape(2, 3), "z": np.array(1.0)}
    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    save_arrays(p1, arrays)
    save_arrays(p2, arrays)
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_bytes().startswith(b"DFC1\n")
