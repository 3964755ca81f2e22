import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lexiphish.errors import BatchTooSmall, NonFiniteError, ShapeMismatch
from lexiphish.model import build_model
from lexiphish.nn import (
    Adam, BatchNormalization, Conv1D, Dense, GlobalAveragePooling1D, MaxPool1D, ReLU, Sequential, Sigmoid,
    adam_step, bce_loss, bce_with_logits, relu, sigmoid,
)
from lexiphish.nn import functional as F
from lexiphish.nn.gradcheck import activation_pattern, check_layer, check_model, numeric_grad, rel_error


# --- conv1d ---------------------------------------------------------------

def naive_conv(x, w, b):
    L, cin = x.shape
    K, _, f = w.shape
    out = np.zeros((L - K + 1, f))
    for t in range(L - K + 1):
        for j in range(f):
            out[t, j] = b[j] + sum(x[t + k, c] * w[k, c, j] for k in range(K) for c in range(cin))
    return out


def test_conv_identity_tap():
    out, _ = F.conv1d_forward(np.array([[5.0], [6.0], [7.0], [8.0]]), np.array([0.0, 1.0, 0.0]).reshape(3, 1, 1),
                              np.zeros(1))
    assert out.ravel().tolist() == [6.0, 7.0]


def test_conv_difference_kernel():
    out, _ = F.conv1d_forward(np.array([[1.0], [2.0], [3.0], [4.0]]), np.array([1.0, 0.0, -1.0]).reshape(3, 1, 1),
                              np.zeros(1))
    assert out.ravel().tolist() == [-2.0, -2.0]


def test_conv_matches_loop_oracle(rng):
    x = rng.normal(size=(4, 11, 3))
    w, b = rng.normal(size=(3, 3, 5)), rng.normal(size=5)
    out, _ = F.conv1d_forward(x, w, b)
    for i in range(4):
        np.testing.assert_allclose(out[i], naive_conv(x[i], w, b), rtol=1e-12, atol=1e-12)


# frozen from torch.nn.functional.conv1d (scripts/oracles.py)
TORCH_CONV_OUT = [[1.127922077922078, 0.4402597402597403], [0.9720779220779222, 0.5961038961038961]]
TORCH_CONV_GX = [[0.6363636363636362, 0.2727272727272728], [-3.045454545454545, -2.1363636363636367],
                 [-1.227272727272727, -0.3181818181818181], [2.1363636363636367, 3.409090909090909]]
TORCH_CONV_GW = [[[-0.30714285714285716, 0.5571428571428572], [-0.09285714285714286, 0.7]],
                 [[0.12142857142857141, 0.8428571428571429], [0.33571428571428574, 0.9857142857142858]],
                 [[0.55, 1.1285714285714286], [0.7642857142857142, 1.271428571428571]]]


def test_conv_against_torch_values():
    x = np.arange(8, dtype=np.float64).reshape(1, 4, 2) / 7.0 - 0.3
    w = np.linspace(-1, 1, 12).reshape(3, 2, 2)
    b = np.array([0.25, -0.5])
    out, cache = F.conv1d_forward(x, w, b)
    np.testing.assert_allclose(out[0], TORCH_CONV_OUT, rtol=0, atol=1e-14)
    gx, gw, gb = F.conv1d_backward(np.array([[[1.0, -2.0], [0.5, 3.0]]]), cache)
    np.testing.assert_allclose(gx[0], TORCH_CONV_GX, rtol=0, atol=1e-14)
    np.testing.assert_allclose(gw, TORCH_CONV_GW, rtol=0, atol=1e-14)
    assert gb.tolist() == [1.5, 1.0]


def test_conv_shapes_and_params():
    layer = Conv1D(32, 3)
    assert layer.build((21, 1), np.random.default_rng(0)) == (19, 32)
    assert layer.n_trainable == 128
    with pytest.raises(ShapeMismatch):
        F.conv1d_forward(np.zeros((2, 1)), np.zeros((3, 1, 1)), np.zeros(1))
    with pytest.raises(ShapeMismatch):
        F.conv1d_forward(np.zeros((5, 2)), np.zeros((3, 1, 1)), np.zeros(1))


def test_conv_backward_fd(rng):
    x = rng.normal(size=(8, 2))
    w, b = rng.normal(size=(3, 2, 4)), rng.normal(size=4)
    r = rng.normal(size=(6, 4))
    _, cache = F.conv1d_forward(x, w, b)
    gx, gw, gb = F.conv1d_backward(r, cache)
    loss = lambda: float(np.sum(F.conv1d_forward(x, w, b)[0] * r))  # noqa: E731
    assert rel_error(gx, numeric_grad(loss, x)) < 1e-6
    assert rel_error(gw, numeric_grad(loss, w)) < 1e-6
    assert rel_error(gb, numeric_grad(loss, b)) < 1e-6


def test_conv_backward_zero_and_linear(rng):
    x, w, b = rng.normal(size=(2, 6, 2)), rng.normal(size=(3, 2, 3)), rng.normal(size=3)
    _, cache = F.conv1d_forward(x, w, b)
    g = rng.normal(size=(2, 4, 3))
    assert all(np.all(a == 0) for a in F.conv1d_backward(np.zeros_like(g), cache))
    for a1, a2 in zip(F.conv1d_backward(g, cache), F.conv1d_backward(2 * g, cache)):
        np.testing.assert_allclose(a2, 2 * a1, rtol=1e-14)


# --- pooling --------------------------------------------------------------

def test_maxpool_values_and_length():
    out, _ = F.maxpool1d_forward(np.array([[1.0], [3.0], [2.0], [5.0]]))
    assert out.ravel().tolist() == [3.0, 5.0]
    out, _ = F.maxpool1d_forward(np.zeros((19, 32)))
    assert out.shape == (9, 32)
    with pytest.raises(ShapeMismatch):
        F.maxpool1d_forward(np.zeros((1, 3)))


def test_maxpool_backward_routes_to_argmax(rng):
    x = rng.normal(size=(2, 7, 3))
    _, cache = F.maxpool1d_forward(x)
    g = rng.normal(size=(2, 3, 3))
    gx = F.maxpool1d_backward(g, cache)
    loss = lambda: float(np.sum(F.maxpool1d_forward(x)[0] * g))  # noqa: E731
    assert rel_error(gx, numeric_grad(loss, x)) < 1e-8
    assert np.all(gx[:, 6, :] == 0)  # trailing odd element gets nothing
    assert np.count_nonzero(gx) == g.size


def test_gap():
    out, _ = F.gap1d_forward(np.array([[2.0], [4.0], [6.0]]))
    assert out.tolist() == [4.0]
    out, cache = F.gap1d_forward(np.ones((7, 64)))
    assert out.shape == (64,)
    x = np.random.default_rng(3).normal(size=(3, 7, 4))
    _, cache = F.gap1d_forward(x)
    g = np.arange(12.0).reshape(3, 4)
    gx = F.gap1d_backward(g, cache)
    np.testing.assert_allclose(gx, np.repeat(g[:, None, :] / 7, 7, axis=1))


# --- dense ----------------------------------------------------------------

def test_dense_param_counts():
    assert Dense(64).build((64,), None) == (64,)
    d = Dense(64)
    d.build((64,), None)
    assert d.n_trainable == 4160
    d1 = Dense(1)
    d1.build((64,), None)
    assert d1.n_trainable == 65


def test_dense_identity(rng):
    x = rng.normal(size=(5, 4))
    out, _ = F.dense_forward(x, np.eye(4), np.zeros(4))
    assert np.array_equal(out, x)
    with pytest.raises(ShapeMismatch):
        F.dense_forward(x, np.eye(3), np.zeros(3))


# --- batch norm -----------------------------------------------------------

TORCH_BN_OUT = [[0.23105528836449118, -0.4350846186853564, -0.008515562544117172],
                [2.3279399021963494, 0.0267951039949028, 0.12860246525326824],
                [-1.8658293254673672, 0.9505545493554213, -0.8312237293284297],
                [-0.2931658650934734, 0.25773496533503243, 1.9111368266192785]]
TORCH_BN_GX = [[0.2240949807158877, -0.11346868400177308, -0.6838179671209627],
               [-0.48899878618521864, 0.1538058843443474, 0.6561040060685994],
               [-0.7403189434484926, -0.06219952831883289, 0.05220397277433116],
               [1.0052227489178236, 0.021862327976258582, -0.024490011721967842]]
TORCH_BN_GGAMMA = [3.9491326893833327, 1.4837886091103327, 1.662556087043298]


def test_batchnorm_against_torch_values():
    x = np.array([[1.0, -2.0, 0.5], [3.0, 0.0, 0.25], [-1.0, 4.0, 2.0], [0.5, 1.0, -3.0]])
    gamma, beta = np.array([1.5, 0.5, -1.0]), np.array([0.1, 0.2, 0.3])
    g = np.array([[0.3, -1.0, 2.0], [1.0, 0.5, -0.5], [-2.0, 0.25, 1.0], [0.7, 0.1, 0.0]])
    state = {"moving_mean": np.zeros(3), "moving_var": np.ones(3)}
    out, cache = F.batchnorm_forward(x, gamma, beta, state, "train")
    np.testing.assert_allclose(out, TORCH_BN_OUT, rtol=0, atol=1e-13)
    gx, gg, gb = F.batchnorm_backward(g, cache)
    np.testing.assert_allclose(gx, TORCH_BN_GX, rtol=0, atol=1e-13)
    np.testing.assert_allclose(gg, TORCH_BN_GGAMMA, rtol=0, atol=1e-13)
    np.testing.assert_allclose(gb, [0.0, -0.15, 2.5], rtol=0, atol=1e-15)
    # moving stats: momentum 0.9 with the biased batch variance
    np.testing.assert_allclose(state["moving_mean"], [0.0875, 0.075, -0.00625], rtol=0, atol=1e-15)
    np.testing.assert_allclose(state["moving_var"], [1.1046875, 1.36875, 1.232421875], rtol=0, atol=1e-15)


def test_batchnorm_param_split():
    bn = BatchNormalization()
    bn.build((64,), None)
    assert (bn.n_trainable, bn.n_non_trainable) == (128, 128)


def test_batchnorm_infer_identity(rng):
    x = rng.normal(size=(3, 4))
    state = {"moving_mean": np.zeros(4), "moving_var": np.ones(4)}
    out, _ = F.batchnorm_forward(x, np.ones(4), np.zeros(4), state, "infer")
    np.testing.assert_allclose(out, x / np.sqrt(1 + 1e-5), rtol=1e-15)
    np.testing.assert_allclose(out, x, atol=1e-5 * np.abs(x).max())


def test_batchnorm_single_row_infer_ok_train_fails():
    state = {"moving_mean": np.zeros(2), "moving_var": np.ones(2)}
    F.batchnorm_forward(np.ones((1, 2)), np.ones(2), np.zeros(2), state, "infer")
    with pytest.raises(BatchTooSmall):
        F.batchnorm_forward(np.ones((1, 2)), np.ones(2), np.zeros(2), state, "train")


def test_batchnorm_train_normalizes(rng):
    x = rng.normal(5, 3, size=(64, 8))
    state = {"moving_mean": np.zeros(8), "moving_var": np.ones(8)}
    out, _ = F.batchnorm_forward(x, np.ones(8), np.zeros(8), state, "train")
    assert np.max(np.abs(out.mean(axis=0))) < 1e-6
    var = x.var(axis=0)
    np.testing.assert_allclose(out.var(axis=0), var / (var + 1e-5), atol=1e-6)


# --- activations, loss ----------------------------------------------------

def test_activations():
    assert relu(np.array(-3.0)) == 0 and relu(np.array(3.0)) == 3
    assert sigmoid(0.0) == 0.5
    s = sigmoid(np.array([-500.0, 500.0, -1e308]))
    assert np.all(np.isfinite(s)) and s[0] > 0 and s[1] == 1.0


def test_bce():
    assert bce_loss(np.array([1.0]), np.array([1.0])) == pytest.approx(1e-7, rel=1e-3)
    assert bce_loss(np.array([0.5]), np.array([1.0])) == pytest.approx(np.log(2))
    assert bce_loss(np.array([0.5]), np.array([0.0])) == pytest.approx(np.log(2))


def test_bce_logit_gradient(rng):
    z, y = rng.normal(size=9), (rng.random(9) > 0.5).astype(float)
    _, g = bce_with_logits(z, y)
    np.testing.assert_allclose(g, (sigmoid(z) - y) / 9)
    num = numeric_grad(lambda: bce_with_logits(z, y)[0], z, h=1e-6)
    assert rel_error(g, num) < 1e-6


# --- adam -----------------------------------------------------------------

def test_adam_zero_grad_is_noop():
    p = np.array([1.0, -2.0])
    m, v = np.zeros(2), np.zeros(2)
    out, m, v = adam_step(p, np.zeros(2), m, v, 1)
    assert np.array_equal(out, p)


def test_adam_against_torch_values():
    p, m, v = np.array([0.5, -1.0, 2.0]), np.zeros(3), np.zeros(3)
    for t, g in enumerate(([0.1, -0.2, 0.3], [1.0, 0.0, -1.0], [-0.5, 2.0, 0.05]), start=1):
        p, m, v = adam_step(p, np.array(g), m, v, t)
    # torch.optim.Adam, same hyperparameters
    np.testing.assert_allclose(p, [0.4979190642122459, -0.9989141038017461, 1.999891513664708], rtol=0, atol=1e-15)


def test_adam_constant_gradient_step_size():
    p, m, v = np.array([0.0]), np.zeros(1), np.zeros(1)
    prev = p.copy()
    for t in range(1, 1001):
        prev = p.copy()
        p, m, v = adam_step(p, np.array([0.37]), m, v, t)
    assert abs(abs(p - prev)[0] - 1e-3) < 0.05e-3


def test_adam_requires_positive_t():
    with pytest.raises(ValueError):
        adam_step(np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1), 0)


def test_adam_deterministic(rng):
    x = rng.normal(size=(16, 21))
    y = (rng.random(16) > 0.5).astype(float)

    def run():
        net = build_model(5).model
        opt = Adam()
        for _ in range(3):
            net.zero_grad()
            z = net.forward_logits(x, training=True)
            net.backward(bce_with_logits(z, y)[1].reshape(z.shape))
            opt.step(net)
        return net.arrays()

    a, b = run(), run()
    assert all(np.array_equal(a[k], b[k]) for k in a)


# --- gradient checks ------------------------------------------------------

@pytest.mark.parametrize("make,shape,batch", [
    (lambda: Conv1D(4, 3), (9, 2), 3),
    (lambda: MaxPool1D(2), (9, 3), 2),
    (lambda: GlobalAveragePooling1D(), (7, 5), 2),
    (lambda: Dense(6), (5,), 4),
    (lambda: BatchNormalization(), (6,), 8),
    (lambda: ReLU(), (7,), 3),
    (lambda: Sigmoid(), (7,), 3),
])
def test_layer_gradcheck(make, shape, batch, rng):
    layer = make()
    layer.build(shape, rng)
    if "gamma" in layer.params:
        layer.params["gamma"] = rng.normal(size=shape)
        layer.params["beta"] = rng.normal(size=shape)
    x = rng.normal(size=(batch,) + shape)
    errs = check_layer(layer, x, rng)
    assert max(errs.values()) < 1e-4, errs


def test_gradcheck_steps_around_kinks(rng):
    layer = ReLU()
    layer.build((5,), rng)
    # 3e-6 sits inside the default +-1e-5 probe, so a naive central difference reads 0.65 instead of 1
    x = np.array([[3e-6, -2.0, 1.0, -3e-6, 0.5]])
    assert check_layer(layer, x, rng, per_array=5)["input"] < 1e-8
    pool = MaxPool1D(2)
    pool.build((4, 1), rng)
    # an exact tie has no derivative at any step; those probes are skipped, the rest still checked
    tied = np.array([[[0.0], [0.0], [1.0], [2.0]]])
    assert check_layer(pool, tied, rng, per_array=4)["input"] < 1e-8
    num = numeric_grad(lambda: float(pool.forward(tied).sum()), tied, 1e-5, None,
                       lambda: activation_pattern([pool]))
    assert np.isnan(num[0, :2, 0]).all() and num[0, 3, 0] == pytest.approx(1.0)


def test_full_stack_gradcheck(rng):
    net = build_model(3).model
    x = rng.normal(size=(8, 21))
    y = (rng.random(8) > 0.5).astype(float)
    errs = check_model(net, x, y, rng)
    assert max(errs.values()) < 1e-3, errs


# --- sequential -----------------------------------------------------------

def test_shape_chain_and_summary():
    net = build_model(0).model
    assert net.shape_chain() == [(21, 1), (19, 32), (9, 32), (7, 64), (64,), (64,), (64,), (1,)]
    assert (net.n_params, net.n_trainable, net.n_non_trainable) == (10817, 10689, 128)
    assert "Total params: 10817" in net.summary()


def test_nonfinite_is_hard_error():
    net = build_model(0).model
    with pytest.raises(NonFiniteError):
        net.forward_logits(np.full((2, 21), np.nan))


def test_input_shape_check():
    net = build_model(0).model
    with pytest.raises(ShapeMismatch):
        net.predict_proba(np.zeros((2, 20)))
    assert net.predict_proba(np.zeros((2, 21, 1))).shape == (2,)


def test_copy_and_arrays_roundtrip(rng):
    net = build_model(9).model
    clone = net.copy()
    x = rng.normal(size=(5, 21))
    assert np.array_equal(net.predict_proba(x), clone.predict_proba(x))
    arr = net.arrays()
    arr["0.conv1d.w"] = arr["0.conv1d.w"][:1]
    with pytest.raises(ShapeMismatch):
        clone.load_arrays(arr)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_forward_finite_for_bounded_inputs(seed):
    r = np.random.default_rng(seed)
    net = Sequential([Conv1D(4, 3), ReLU(), MaxPool1D(2), GlobalAveragePooling1D(), Dense(3),
                      BatchNormalization(), ReLU(), Dense(1), Sigmoid()], (21, 1)).build(r)
    x = r.uniform(-100, 100, size=(6, 21))
    assert np.all(np.isfinite(net.forward_logits(x, training=True)))
    p = net.predict_proba(x)
    assert np.all((p >= 0) & (p <= 1))
