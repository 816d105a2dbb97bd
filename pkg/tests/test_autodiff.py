import numpy as np
import pytest

from xva.autodiff import (
    ParamStore,
    Tape,
    backward,
    constant,
    conv2d,
    cross_entropy,
    fc,
    gap,
    grad_check,
    kaiming_uniform,
    l2_distance,
    mean_stack,
    mul,
    relu,
    sgd_step,
    softmax_t,
    tsum,
)
from xva.errors import ContractError, ParameterError, ShapeError


def hand_conv_valid(x, k):
    """Loop oracle for a single-channel valid cross-correlation, stride 1."""
    h, w = x.shape
    kh, kw = k.shape
    out = np.zeros((h - kh + 1, w - kw + 1))
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            out[i, j] = (x[i:i + kh, j:j + kw] * k).sum()
    return out


class TestConv2d:
    def test_one_by_one_identity(self):
        t = Tape(ParamStore())
        x = np.arange(12.0).reshape(1, 3, 4)
        w = np.ones((1, 1, 1, 1))
        out = conv2d(t, constant(x), constant(w), constant(np.zeros(1)))
        np.testing.assert_array_equal(out.value, x)

    def test_zero_weight_constant_bias(self):
        t = Tape(ParamStore())
        out = conv2d(t, constant(np.ones((2, 4, 4))), constant(np.zeros((3, 2, 3, 3))),
                     constant(np.array([1.0, -2.0, 0.5])), pad=1)
        for c, b in enumerate([1.0, -2.0, 0.5]):
            np.testing.assert_array_equal(out.value[c], np.full((4, 4), b))

    def test_local_sums_against_hand_conv(self):
        x = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]])
        k = np.ones((2, 2))
        expected = hand_conv_valid(x, k)
        np.testing.assert_array_equal(expected, [[12.0, 16.0], [24.0, 28.0]])
        t = Tape(ParamStore())
        out = conv2d(t, constant(x[None]), constant(k[None, None]), constant(np.zeros(1)))
        np.testing.assert_allclose(out.value[0], expected)

    def test_output_dims_formula(self):
        rng = np.random.default_rng(0)
        for h, k, s, p in [(8, 3, 1, 0), (8, 3, 2, 1), (9, 2, 2, 0), (7, 5, 3, 2)]:
            t = Tape(ParamStore())
            out = conv2d(t, constant(rng.normal(size=(2, h, h))),
                         constant(rng.normal(size=(3, 2, k, k))),
                         constant(np.zeros(3)), stride=s, pad=p)
            expect = (h + 2 * p - k) // s + 1
            assert out.value.shape == (3, expect, expect)

    def test_channel_mismatch(self):
        t = Tape(ParamStore())
        with pytest.raises(ShapeError):
            conv2d(t, constant(np.ones((2, 4, 4))), constant(np.ones((1, 3, 3, 3))),
                   constant(np.zeros(1)))

    def test_kernel_larger_than_input(self):
        t = Tape(ParamStore())
        with pytest.raises(ShapeError):
            conv2d(t, constant(np.ones((1, 2, 2))), constant(np.ones((1, 1, 5, 5))),
                   constant(np.zeros(1)))


class TestRelu:
    def test_clamps_negatives(self):
        t = Tape(ParamStore())
        out = relu(t, constant(np.array([-1.0, 0.0, 2.0])))
        np.testing.assert_array_equal(out.value, [0.0, 0.0, 2.0])

    def test_nonnegative_passthrough(self):
        t = Tape(ParamStore())
        x = np.array([0.5, 3.0, 0.0])
        np.testing.assert_array_equal(relu(t, constant(x)).value, x)

    def test_gradient_mask_and_zero_subgradient(self):
        store = ParamStore()
        store.add("x", np.array([-1.0, 0.0, 2.0]))
        t = Tape(store)
        loss = tsum(t, relu(t, t.param("x")))
        backward(t, loss)
        np.testing.assert_array_equal(store.grads["x"], [0.0, 0.0, 1.0])

    def test_zero_input_zero_gradients(self):
        store = ParamStore()
        store.add("x", np.zeros(5))
        t = Tape(store)
        loss = tsum(t, relu(t, t.param("x")))
        backward(t, loss)
        np.testing.assert_array_equal(store.grads["x"], np.zeros(5))


class TestFc:
    def test_identity(self):
        t = Tape(ParamStore())
        x = np.array([1.0, -2.0, 3.0])
        out = fc(t, constant(x), constant(np.eye(3)), constant(np.zeros(3)))
        np.testing.assert_array_equal(out.value, x)

    def test_zero_weight_gives_bias(self):
        t = Tape(ParamStore())
        b = np.array([4.0, 5.0])
        out = fc(t, constant(np.ones(3)), constant(np.zeros((2, 3))), constant(b))
        np.testing.assert_array_equal(out.value, b)

    def test_hand_value(self):
        t = Tape(ParamStore())
        out = fc(t, constant(np.array([2.0, 3.0])), constant(np.array([[1.0, 1.0]])),
                 constant(np.array([1.0])))
        np.testing.assert_array_equal(out.value, [6.0])


class TestCrossEntropy:
    def test_dominant_logit_limit(self):
        t = Tape(ParamStore())
        logits = np.array([0.0, 1e6, 0.0])
        assert float(cross_entropy(t, constant(logits), 1).value) <= 1e-12

    def test_uniform_logits_closed_form(self):
        t = Tape(ParamStore())
        loss = cross_entropy(t, constant(np.zeros(4)), 2)
        np.testing.assert_allclose(float(loss.value), np.log(4.0), atol=1e-12)

    def test_monotone_in_true_logit(self):
        losses = []
        for v in (0.0, 0.5, 1.0, 2.0):
            t = Tape(ParamStore())
            logits = np.array([1.0, v, -0.5])
            losses.append(float(cross_entropy(t, constant(logits), 1).value))
        assert all(a > b for a, b in zip(losses, losses[1:]))

    def test_label_out_of_range(self):
        t = Tape(ParamStore())
        with pytest.raises(ParameterError):
            cross_entropy(t, constant(np.zeros(3)), 3)


class TestBackward:
    def test_off_path_params_get_zero_gradient(self):
        store = ParamStore()
        store.add("used", np.ones(3))
        store.add("unused", np.ones(4))
        t = Tape(store)
        loss = tsum(t, t.param("used"))
        backward(t, loss)
        np.testing.assert_array_equal(store.grads["used"], np.ones(3))
        np.testing.assert_array_equal(store.grads["unused"], np.zeros(4))

    def test_non_scalar_loss_rejected(self):
        store = ParamStore()
        store.add("x", np.ones(3))
        t = Tape(store)
        with pytest.raises(ContractError):
            backward(t, relu(t, t.param("x")))

    def test_reuse_accumulates(self):
        store = ParamStore()
        store.add("x", np.array([2.0]))
        t = Tape(store)
        x = t.param("x")
        loss = tsum(t, mul(t, x, x))  # d(x^2)/dx = 2x
        backward(t, loss)
        np.testing.assert_allclose(store.grads["x"], [4.0])

    def test_forward_replay_bit_identical(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(2, 6, 6))
        w = rng.normal(size=(3, 2, 3, 3))
        b = rng.normal(size=3)

        def run():
            t = Tape(ParamStore())
            out = gap(t, relu(t, conv2d(t, constant(x), constant(w), constant(b), pad=1)))
            return tsum(t, out).value

        assert float(run()) == float(run())


class TestSgdStep:
    def test_zero_gradient_keeps_weights(self):
        store = ParamStore()
        store.add("w", np.array([1.0, 2.0]))
        sgd_step(store, 0.5)
        np.testing.assert_array_equal(store.weights["w"], [1.0, 2.0])

    def test_basic_update(self):
        store = ParamStore()
        store.add("w", np.array([1.0]))
        store.grads["w"][...] = 2.0
        sgd_step(store, 0.1)
        np.testing.assert_allclose(store.weights["w"], [0.8])
        np.testing.assert_array_equal(store.grads["w"], [0.0])

    def test_two_half_steps_equal_one_step(self):
        g = np.array([0.3, -1.2])
        a = ParamStore()
        a.add("w", np.array([1.0, 1.0]))
        a.grads["w"][...] = g
        sgd_step(a, 0.2)
        b = ParamStore()
        b.add("w", np.array([1.0, 1.0]))
        for _ in range(2):
            b.grads["w"][...] = g
            sgd_step(b, 0.1)
        np.testing.assert_allclose(a.weights["w"], b.weights["w"], atol=1e-15)


class TestGradCheck:
    def test_linear_layer_tight(self):
        rng = np.random.default_rng(4)
        store = ParamStore()
        store.add("w", rng.normal(size=(3, 5)))
        store.add("b", rng.normal(size=3))
        x = rng.normal(size=5)
        proj = rng.normal(size=3)

        def loss_fn(t):
            return tsum(t, mul(t, fc(t, constant(x), t.param("w"), t.param("b")),
                               constant(proj)))

        err, per_param = grad_check(loss_fn, store, coords_per_param=6,
                                    rng=np.random.default_rng(0))
        assert err <= 1e-7
        assert set(per_param) == {"w", "b"}

    def test_composite_chain(self):
        rng = np.random.default_rng(12)
        store = ParamStore()
        store.add("w", 0.3 * rng.normal(size=(2, 1, 3, 3)))
        store.add("b", rng.normal(size=2))
        x = rng.uniform(0.2, 1.0, size=(1, 6, 6))

        def loss_fn(t):
            h = relu(t, conv2d(t, constant(x), t.param("w"), t.param("b"), pad=1))
            p = softmax_t(t, gap(t, h), 0.5)
            return cross_entropy(t, p, 0)

        err, _ = grad_check(loss_fn, store, coords_per_param=5,
                            rng=np.random.default_rng(1))
        assert err <= 1e-5


class TestHelpers:
    def test_mean_stack(self):
        t = Tape(ParamStore())
        xs = [constant(np.full((2, 2), v)) for v in (1.0, 2.0, 6.0)]
        np.testing.assert_allclose(mean_stack(t, xs).value, np.full((2, 2), 3.0))

    def test_l2_distance_values(self):
        t = Tape(ParamStore())
        d = l2_distance(t, constant(np.array([3.0, 4.0])), constant(np.zeros(2)))
        assert float(d.value) == 5.0

    def test_kaiming_bound(self):
        rng = np.random.default_rng(2)
        w = kaiming_uniform(rng, (16, 8, 3, 3))
        bound = np.sqrt(6.0 / (8 * 9))
        assert np.abs(w).max() <= bound
        assert w.shape == (16, 8, 3, 3)

    def test_duplicate_param_name(self):
        store = ParamStore()
        store.add("w", np.ones(2))
        with pytest.raises(ContractError):
            store.add("w", np.ones(2))
