"""Dense feed-forward networks with hand-written reverse mode.

Hidden layers use the rectifier; the output layer is tanh or identity. Parameters are
64-bit. Inputs may be a single vector of shape (n_in,) or a batch of shape (N, n_in);
parameter gradients of a batch are summed over its rows.
"""
import logging
from dataclasses import dataclass

import numpy as np

from src.errors import ShapeError

logger = logging.getLogger(__name__)

OUTPUT_ACTIVATIONS = ("tanh", "identity")
FINAL_LAYER_SCALE = 3e-3


@dataclass(eq=False)
class Mlp:
    layer_sizes: tuple
    weights: list  # weights[k] has shape (layer_sizes[k+1], layer_sizes[k])
    biases: list
    output_activation: str = "identity"

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "Mlp":
        return Mlp(self.layer_sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases],
                   self.output_activation)


def relu(z):
    return np.maximum(z, 0.0)


def relu_grad(z):
    return np.where(z > 0, 1.0, 0.0)


def mlp_init(layer_sizes, output_activation: str = "identity", seed=None) -> Mlp:
    """Creates a network with uniform weights in +-1/sqrt(fan_in), a final layer drawn in
    +-3e-3 and zero biases.

    Parameters:
        - layer_sizes - (n_in, hidden..., n_out), at least one hidden layer
        - output_activation - 'tanh' or 'identity'
        - seed - int seed or numpy Generator

    Returns:
        Mlp
    """
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 3:
        raise ShapeError(f"need input, at least one hidden and an output layer, got {sizes}")
    if any(s < 1 for s in sizes):
        raise ShapeError(f"layer sizes must be positive, got {sizes}")
    if output_activation not in OUTPUT_ACTIVATIONS:
        raise ValueError(f"output_activation must be one of {OUTPUT_ACTIVATIONS}, got {output_activation!r}")

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights, biases = [], []
    n_layers = len(sizes) - 1
    for k in range(n_layers):
        fan_in, fan_out = sizes[k], sizes[k + 1]
        bound = FINAL_LAYER_SCALE if k == n_layers - 1 else 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(sizes, weights, biases, output_activation)


def _as_batch(mlp: Mlp, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != mlp.n_inputs:
        raise ShapeError(f"expected input of size {mlp.n_inputs}, got shape {x.shape}")
    return batch, single


def forward_with_cache(mlp: Mlp, x) -> tuple[np.ndarray, list]:
    """Forward pass that also returns the per-layer (input, pre-activation) pairs that
    backward needs."""
    a, single = _as_batch(mlp, x)
    cache = []
    last = len(mlp.weights) - 1
    for k, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = a @ w.T + b
        cache.append((a, z))
        if k < last:
            a = relu(z)
        else:
            a = np.tanh(z) if mlp.output_activation == "tanh" else z
    return (a[0] if single else a), cache


def forward(mlp: Mlp, x) -> np.ndarray:
    y, _ = forward_with_cache(mlp, x)
    return y


def backward(mlp: Mlp, x, upstream) -> tuple[np.ndarray, np.ndarray]:
    """Exact reverse-mode gradients of sum(upstream * y).

    Parameters:
        - mlp - network
        - x - input vector or batch
        - upstream - dL/dy, same leading shape as the output

    Returns:
        (flattened parameter gradient in flatten() order, gradient with respect to x)
    """
    y, cache = forward_with_cache(mlp, x)
    single = np.ndim(x) == 1
    dy = np.asarray(upstream, dtype=float)
    dy = dy[None, :] if dy.ndim == 1 else dy
    expected = (cache[0][0].shape[0], mlp.n_outputs)
    if dy.shape != expected:
        raise ShapeError(f"upstream gradient must have shape {expected}, got {np.shape(upstream)}")

    n_layers = len(mlp.weights)
    grad_w = [None] * n_layers
    grad_b = [None] * n_layers
    _, z_out = cache[-1]
    if mlp.output_activation == "tanh":
        dz = dy * (1.0 - np.tanh(z_out) ** 2)
    else:
        dz = dy
    for k in reversed(range(n_layers)):
        a_in, _ = cache[k]
        grad_w[k] = dz.T @ a_in
        grad_b[k] = dz.sum(axis=0)
        da = dz @ mlp.weights[k]
        if k > 0:
            dz = da * relu_grad(cache[k - 1][1])
    grads = np.concatenate([np.concatenate((gw.ravel(), gb)) for gw, gb in zip(grad_w, grad_b)])
    return grads, (da[0] if single else da)


def flatten(mlp: Mlp) -> np.ndarray:
    """All parameters as one vector, ordered W0, b0, W1, b1, ... (row-major weights)."""
    return np.concatenate([np.concatenate((w.ravel(), b)) for w, b in zip(mlp.weights, mlp.biases)])


def unflatten(mlp: Mlp, vector) -> Mlp:
    """New network shaped like mlp holding the given parameter vector."""
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (mlp.n_params,):
        raise ShapeError(f"expected {mlp.n_params} parameters, got shape {vector.shape}")
    weights, biases = [], []
    offset = 0
    for w, b in zip(mlp.weights, mlp.biases):
        weights.append(vector[offset:offset + w.size].reshape(w.shape).copy())
        offset += w.size
        biases.append(vector[offset:offset + b.size].copy())
        offset += b.size
    return Mlp(mlp.layer_sizes, weights, biases, mlp.output_activation)


def soft_update(target: Mlp, source: Mlp, tau: float) -> Mlp:
    """Returns tau * source + (1 - tau) * target, parameter by parameter."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if target.layer_sizes != source.layer_sizes:
        raise ShapeError(f"cannot blend {source.layer_sizes} into {target.layer_sizes}")
    weights = [tau * ws + (1.0 - tau) * wt for wt, ws in zip(target.weights, source.weights)]
    biases = [tau * bs + (1.0 - tau) * bt for bt, bs in zip(target.biases, source.biases)]
    return Mlp(target.layer_sizes, weights, biases, target.output_activation)
