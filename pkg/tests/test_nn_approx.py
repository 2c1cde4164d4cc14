import struct

import numpy as np
import pytest

from concepts.errors import PolicyLoadError
from concepts.nn_approx.algorithms import Gradients, Network, NeuralNet, log_softmax, softmax
from concepts.stochastic.algorithms import make_rng

SHAPES = [(4, 8, 3), (2, 5, 5, 1), (3, 1), (6, 4, 4, 2)]
H = 1e-5


def relative_error(analytic, numeric):
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)


def numeric_gradient(fn, vector):
    grad = np.zeros_like(vector)
    for i in range(vector.size):
        up, down = vector.copy(), vector.copy()
        up[i] += H
        down[i] -= H
        grad[i] = (fn(up) - fn(down)) / (2 * H)
    return grad


def random_network(sizes, seed):
    net = NeuralNet.init_network(sizes, seed)
    # Non-zero biases so every parameter is exercised
    g = make_rng(seed + 1000).generator
    return Network(net.layer_sizes, net.weights, [g.normal(scale=0.3, size=b.shape) for b in net.biases])


def linear_net(w, b):
    return Network((1, 1), [np.array([[w]])], [np.array([b])])


def test_init_biases_zero_and_weights_bounded():
    net = NeuralNet.init_network((5, 7, 2), seed=3)
    assert all(not b.any() for b in net.biases)
    for w in net.weights:
        fan_out, fan_in = w.shape
        assert np.max(np.abs(w)) <= np.sqrt(6.0 / (fan_in + fan_out))


def test_init_is_deterministic():
    a, b = NeuralNet.init_network((3, 4, 2), 11), NeuralNet.init_network((3, 4, 2), 11)
    assert np.array_equal(a.parameter_vector(), b.parameter_vector())
    assert not np.array_equal(a.parameter_vector(), NeuralNet.init_network((3, 4, 2), 12).parameter_vector())


def test_init_rejects_single_layer():
    with pytest.raises(ValueError):
        NeuralNet.init_network((3,), 0)


def test_zero_parameters_give_zero_output():
    sizes = (3, 4, 2)
    zero = Network.from_parameter_vector(sizes, np.zeros(3 * 4 + 4 + 4 * 2 + 2))
    assert not NeuralNet.forward(zero, np.array([1.0, -2.0, 3.0])).any()


def test_single_affine_layer():
    assert NeuralNet.forward(linear_net(2.5, -1.0), np.array([3.0]))[0] == pytest.approx(6.5)


def test_forward_finite_for_large_inputs():
    net = random_network((4, 8, 3), 0)
    x = make_rng(1).generator.uniform(-1e3, 1e3, size=(50, 4))
    assert np.all(np.isfinite(NeuralNet.forward(net, x)))


def test_forward_batch_matches_rows_and_is_deterministic():
    net = random_network((4, 8, 3), 2)
    x = make_rng(3).generator.normal(size=(5, 4))
    batch = NeuralNet.forward(net, x)
    for i in range(5):
        assert np.allclose(batch[i], NeuralNet.forward(net, x[i]), atol=1e-14)
    assert np.array_equal(batch, NeuralNet.forward(net, x))


def test_forward_rejects_wrong_input_size():
    with pytest.raises(ValueError):
        NeuralNet.forward(random_network((4, 3), 0), np.zeros(5))


def test_zero_upstream_gives_zero_gradients():
    net = random_network((4, 8, 3), 4)
    grads = NeuralNet.backward(net, np.ones(4), np.zeros(3))
    assert not grads.flat().any()


def test_linear_hand_derivative():
    grads = NeuralNet.backward(linear_net(0.7, 0.1), np.array([3.0]), np.array([1.0]))
    assert grads.weights[0][0, 0] == pytest.approx(3.0)
    assert grads.biases[0][0] == pytest.approx(1.0)


def test_backward_shape_mismatch():
    net = random_network((4, 8, 3), 5)
    with pytest.raises(ValueError):
        NeuralNet.backward(net, np.ones(4), np.ones(2))
    with pytest.raises(ValueError):
        NeuralNet.backward(net, np.ones((2, 4)), np.ones((3, 3)))


@pytest.mark.parametrize("sizes", SHAPES)
def test_backward_matches_finite_differences(sizes):
    for draw in range(10):
        net = random_network(sizes, 100 * draw + len(sizes))
        g = make_rng(draw).generator
        x = g.normal(size=(3, sizes[0]))
        upstream = g.normal(size=(3, sizes[-1]))

        def objective(vector):
            return float(np.sum(NeuralNet.forward(Network.from_parameter_vector(sizes, vector), x) * upstream))

        analytic = NeuralNet.backward(net, x, upstream).flat()
        numeric = numeric_gradient(objective, net.parameter_vector())
        assert np.max(relative_error(analytic, numeric)) < 1e-4


def test_apply_gradients_zero_lr_and_zero_grads():
    net = random_network((3, 4, 2), 6)
    grads = NeuralNet.backward(net, np.ones(3), np.ones(2))
    assert np.array_equal(NeuralNet.apply_gradients(net, grads, 0.0).parameter_vector(), net.parameter_vector())
    assert np.array_equal(NeuralNet.apply_gradients(net, grads.scaled(0.0), 0.5).parameter_vector(),
                          net.parameter_vector())


def test_apply_gradients_quadratic_step():
    net = linear_net(1.0, 0.0)
    theta = net.weights[0][0, 0]
    grads = Gradients([np.array([[2.0 * theta]])], [np.zeros(1)])
    assert NeuralNet.apply_gradients(net, grads, 0.1).weights[0][0, 0] == pytest.approx(0.8)


def test_gradient_descent_decreases_convex_quadratic():
    net = random_network((3, 4, 2), 7)
    losses = []
    for _ in range(50):
        vector = net.parameter_vector()
        losses.append(float(vector @ vector))
        half = [w * 2.0 for w in net.weights], [b * 2.0 for b in net.biases]
        net = NeuralNet.apply_gradients(net, Gradients(*half), 0.01)
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_apply_gradients_rejects_negative_lr():
    net = linear_net(1.0, 0.0)
    with pytest.raises(ValueError):
        NeuralNet.apply_gradients(net, Gradients([np.zeros((1, 1))], [np.zeros(1)]), -0.1)


def test_apply_gradients_does_not_mutate_input():
    net = random_network((3, 4, 2), 8)
    before = net.parameter_vector()
    NeuralNet.apply_gradients(net, NeuralNet.backward(net, np.ones(3), np.ones(2)), 0.5)
    assert np.array_equal(net.parameter_vector(), before)


def test_softmax_is_a_distribution():
    logits = make_rng(9).generator.uniform(-50, 50, size=(1000, 6))
    probs = softmax(logits)
    assert np.all(probs > 0)
    assert np.max(np.abs(probs.sum(axis=1) - 1.0)) <= 1e-12
    assert np.allclose(np.exp(log_softmax(logits)), probs)


def test_uniform_logits_log_prob():
    assert np.allclose(log_softmax(np.zeros(5)), -np.log(5))


def test_network_bytes_round_trip():
    net = random_network((4, 8, 3), 10)
    restored = Network.from_bytes(net.to_bytes())
    assert restored.layer_sizes == net.layer_sizes
    assert restored.parameter_vector().tobytes() == net.parameter_vector().tobytes()


def test_network_bytes_corruption():
    data = random_network((2, 3), 0).to_bytes()
    with pytest.raises(PolicyLoadError):
        Network.from_bytes(b"NOTANET!" + data[8:])
    with pytest.raises(PolicyLoadError):
        Network.from_bytes(data[:-3])
    with pytest.raises(PolicyLoadError):
        Network.from_bytes(data[:8] + struct.pack("<H", 99) + data[10:])
    with pytest.raises(PolicyLoadError):
        Network.from_bytes(data[:5])
