import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from amdkit.nn import CLAMP, AdamState, DenseLayer, bce_sum, sigmoid


def test_sigmoid_matches_definition():
    x = np.linspace(-20, 20, 201)
    expected = 1.0 / (1.0 + np.exp(-x))
    assert np.allclose(sigmoid(x), expected, rtol=0, atol=1e-15)


def test_sigmoid_extreme_inputs_stay_finite():
    with np.errstate(over="raise"):
        out = sigmoid(np.array([-800.0, 800.0]))
    assert out[0] == 0.0
    assert out[1] == 1.0


@given(st.floats(min_value=-100, max_value=100),
       st.floats(min_value=1e-6, max_value=100))
def test_sigmoid_monotone(x, dx):
    a, b = sigmoid(np.array([x])), sigmoid(np.array([x + dx]))
    assert b >= a


def test_bce_sum_hand_value():
    # -[ln 0.8 + ln(1 - 0.3)] for targets (1, 0)
    p = np.array([0.8, 0.3])
    y = np.array([1.0, 0.0])
    expected = -(math.log(0.8) + math.log(0.7))
    assert math.isclose(bce_sum(p, y), expected, rel_tol=1e-15)


def test_bce_sum_clamps_saturated_predictions():
    loss = bce_sum(np.array([0.0]), np.array([1.0]))
    assert math.isclose(loss, -math.log(CLAMP))


def test_bce_sum_shape_mismatch():
    with pytest.raises(ValueError):
        bce_sum(np.zeros(3), np.zeros(4))


def test_layer_init_bounds_and_shapes():
    rng = np.random.default_rng(0)
    layer = DenseLayer.create(50, 20, rng)
    assert layer.W.shape == (20, 50)
    assert layer.b.shape == (20,)
    lim = 1.0 / math.sqrt(50)
    assert np.abs(layer.W).max() <= lim
    assert not layer.b.any()
    # seeded determinism
    again = DenseLayer.create(50, 20, np.random.default_rng(0))
    assert np.array_equal(layer.W, again.W)


def test_layer_forward_activations():
    layer = DenseLayer(W=np.array([[1.0, -2.0]]), b=np.array([0.5]))
    x = np.array([3.0, 1.0])
    z = 1.0 * 3 - 2.0 * 1 + 0.5
    assert np.allclose(layer.forward(x, activation="identity"), [z])
    assert np.allclose(layer.forward(x), [1 / (1 + math.exp(-z))])
    batch = np.array([[3.0, 1.0], [0.0, 0.0]])
    out = layer.forward(batch, activation="identity")
    assert out.shape == (2, 1)
    assert np.allclose(out[:, 0], [z, 0.5])


def test_layer_forward_rejects_bad_width_and_activation():
    layer = DenseLayer(W=np.zeros((1, 2)), b=np.zeros(1))
    with pytest.raises(ValueError):
        layer.forward(np.zeros(3))
    with pytest.raises(ValueError):
        layer.forward(np.zeros(2), activation="relu")


def test_layer_dict_round_trip():
    rng = np.random.default_rng(5)
    layer = DenseLayer.create(4, 3, rng)
    back = DenseLayer.from_dict(layer.to_dict())
    assert np.array_equal(layer.W, back.W)
    assert np.array_equal(layer.b, back.b)


def reference_adam(params, grads_per_step, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Textbook Adam, scalars only, no in-place tricks."""
    p = dict(params)
    m = {k: 0.0 for k in p}
    v = {k: 0.0 for k in p}
    for t, grads in enumerate(grads_per_step, start=1):
        for k, g in grads.items():
            m[k] = beta1 * m[k] + (1 - beta1) * g
            v[k] = beta2 * v[k] + (1 - beta2) * g * g
            mhat = m[k] / (1 - beta1 ** t)
            vhat = v[k] / (1 - beta2 ** t)
            p[k] = p[k] - lr * mhat / (math.sqrt(vhat) + eps)
    return p


def test_adam_matches_scalar_reference():
    rng = np.random.default_rng(11)
    steps = [{"a": float(g1), "b": float(g2)}
             for g1, g2 in rng.normal(size=(6, 2))]
    expected = reference_adam({"a": 0.3, "b": -1.2}, steps, lr=0.05)

    state = AdamState(lr=0.05)
    pa = np.array([0.3])
    pb = np.array([-1.2])
    for grads in steps:
        state.begin_step()
        state.update("a", pa, np.array([grads["a"]]))
        state.update("b", pb, np.array([grads["b"]]))
    assert math.isclose(pa[0], expected["a"], rel_tol=1e-14)
    assert math.isclose(pb[0], expected["b"], rel_tol=1e-14)


def test_adam_requires_begin_step():
    state = AdamState(lr=0.1)
    with pytest.raises(RuntimeError):
        state.update("a", np.zeros(1), np.zeros(1))


def test_adam_rejects_non_finite_gradient():
    state = AdamState(lr=0.1)
    state.begin_step()
    with pytest.raises(FloatingPointError):
        state.update("a", np.zeros(2), np.array([1.0, np.nan]))
    with pytest.raises(FloatingPointError):
        state.update("a", np.zeros(1), np.array([np.inf]))


def test_adam_first_step_size():
    # bias correction makes the very first step ~lr * sign(grad)
    state = AdamState(lr=0.01)
    p = np.array([0.0])
    state.begin_step()
    state.update("a", p, np.array([2.5]))
    assert math.isclose(p[0], -0.01, rel_tol=1e-6)
