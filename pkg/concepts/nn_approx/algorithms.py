"""Small fully connected network: tanh hidden layers, identity output, exact backprop, plain SGD.

Byte layout of a serialized network (little-endian, version 1):
    8 bytes  magic b"MLPNET\\0\\0"
    uint16   format version
    uint32   number of layer sizes L
    uint32   L layer sizes
    float64  parameters in layer order: W (fan_out x fan_in, row-major) then b, per layer
"""
from dataclasses import dataclass
from typing import List, Sequence, Tuple
import struct

import numpy as np

from concepts.errors import PolicyLoadError
from concepts.stochastic.algorithms import make_rng

NETWORK_MAGIC = b"MLPNET\x00\x00"
NETWORK_FORMAT_VERSION = 1
_HEADER = struct.Struct("<HI")


@dataclass
class Network:
    layer_sizes: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def __post_init__(self):
        self.layer_sizes = tuple(int(n) for n in self.layer_sizes)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[i + 1], self.layer_sizes[i])
            if w.shape != expected or b.shape != (expected[0],):
                raise ValueError(f"layer {i}: weight {w.shape} / bias {b.shape} do not match {expected}")

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "Network":
        return Network(self.layer_sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def parameter_vector(self) -> np.ndarray:
        return np.concatenate([part.ravel() for w, b in zip(self.weights, self.biases) for part in (w, b)])

    @classmethod
    def from_parameter_vector(cls, layer_sizes: Sequence[int], vector: np.ndarray) -> "Network":
        vector = np.asarray(vector, dtype=np.float64)
        weights, biases = [], []
        offset = 0
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            weights.append(vector[offset:offset + fan_in * fan_out].reshape(fan_out, fan_in).copy())
            offset += fan_in * fan_out
            biases.append(vector[offset:offset + fan_out].copy())
            offset += fan_out
        if offset != vector.size:
            raise ValueError(f"parameter vector has {vector.size} entries, layers need {offset}")
        return cls(tuple(layer_sizes), weights, biases)

    def to_bytes(self) -> bytes:
        header = NETWORK_MAGIC + _HEADER.pack(NETWORK_FORMAT_VERSION, len(self.layer_sizes))
        header += struct.pack(f"<{len(self.layer_sizes)}I", *self.layer_sizes)
        return header + self.parameter_vector().astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Network":
        if len(data) < len(NETWORK_MAGIC) + _HEADER.size or not data.startswith(NETWORK_MAGIC):
            raise PolicyLoadError("not a serialized network (bad magic)")
        offset = len(NETWORK_MAGIC)
        version, n_layers = _HEADER.unpack_from(data, offset)
        offset += _HEADER.size
        if version != NETWORK_FORMAT_VERSION:
            raise PolicyLoadError(f"network format version {version}, expected {NETWORK_FORMAT_VERSION}")
        if n_layers < 2 or len(data) < offset + 4 * n_layers:
            raise PolicyLoadError("truncated network header")
        sizes = struct.unpack_from(f"<{n_layers}I", data, offset)
        offset += 4 * n_layers
        n_params = sum(i * o + o for i, o in zip(sizes[:-1], sizes[1:]))
        if len(data) != offset + 8 * n_params:
            raise PolicyLoadError(f"network body has {len(data) - offset} bytes, expected {8 * n_params}")
        vector = np.frombuffer(data, dtype="<f8", count=n_params, offset=offset).astype(np.float64)
        if not np.all(np.isfinite(vector)):
            raise PolicyLoadError("network parameters are not finite")
        return cls.from_parameter_vector(sizes, vector)


@dataclass
class Gradients:
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def flat(self) -> np.ndarray:
        return np.concatenate([part.ravel() for w, b in zip(self.weights, self.biases) for part in (w, b)])

    def scaled(self, factor: float) -> "Gradients":
        return Gradients([w * factor for w in self.weights], [b * factor for b in self.biases])

    def __add__(self, other: "Gradients") -> "Gradients":
        return Gradients([a + b for a, b in zip(self.weights, other.weights)],
                         [a + b for a, b in zip(self.biases, other.biases)])


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


class NeuralNet:
    @staticmethod
    def init_network(layer_sizes: Sequence[int], seed: int) -> Network:
        """Glorot-uniform weights, zero biases."""
        if len(layer_sizes) < 2 or any(int(n) < 1 for n in layer_sizes):
            raise ValueError(f"need at least two positive layer sizes, got {tuple(layer_sizes)}")
        generator = make_rng(seed).generator
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(generator.uniform(-limit, limit, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return Network(tuple(layer_sizes), weights, biases)

    @staticmethod
    def _forward_cache(net: Network, x: np.ndarray) -> List[np.ndarray]:
        activations = [x]
        last = len(net.weights) - 1
        for i, (w, b) in enumerate(zip(net.weights, net.biases)):
            z = activations[-1] @ w.T + b
            activations.append(z if i == last else np.tanh(z))
        return activations

    @staticmethod
    def forward(net: Network, x: np.ndarray) -> np.ndarray:
        """Output for one input vector or a batch of row vectors."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != net.n_inputs:
            raise ValueError(f"input has {x.shape[-1]} features, network expects {net.n_inputs}")
        return NeuralNet._forward_cache(net, x)[-1]

    @staticmethod
    def backward(net: Network, x: np.ndarray, upstream_grad: np.ndarray) -> Gradients:
        """Gradients of sum(output * upstream_grad) w.r.t. every parameter (summed over a batch)."""
        x = np.asarray(x, dtype=np.float64)
        upstream_grad = np.asarray(upstream_grad, dtype=np.float64)
        if x.shape[-1] != net.n_inputs or upstream_grad.shape[-1] != net.n_outputs:
            raise ValueError("input or upstream gradient does not match the network shape")
        x2 = np.atleast_2d(x)
        delta = np.atleast_2d(upstream_grad)
        if x2.shape[0] != delta.shape[0]:
            raise ValueError("input and upstream gradient batch sizes differ")

        activations = NeuralNet._forward_cache(net, x2)
        grad_w = [None] * len(net.weights)
        grad_b = [None] * len(net.biases)
        for i in reversed(range(len(net.weights))):
            grad_w[i] = delta.T @ activations[i]
            grad_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ net.weights[i]) * (1.0 - activations[i] ** 2)
        return Gradients(grad_w, grad_b)

    @staticmethod
    def apply_gradients(net: Network, grads: Gradients, learning_rate: float) -> Network:
        """theta <- theta - learning_rate * grad; returns a new network."""
        if learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if any(w.shape != g.shape for w, g in zip(net.weights, grads.weights)):
            raise ValueError("gradient shapes do not match the network")
        return Network(
            net.layer_sizes,
            [w - learning_rate * g for w, g in zip(net.weights, grads.weights)],
            [b - learning_rate * g for b, g in zip(net.biases, grads.biases)],
        )
