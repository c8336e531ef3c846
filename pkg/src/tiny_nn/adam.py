from dataclasses import dataclass

import numpy as np

from src.errors import DivergenceError, ShapeError
from .mlp import Mlp, flatten, unflatten


@dataclass(eq=False)
class AdamState:
    """Adaptive-moment accumulators over the flattened parameter vector."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def zeros_like(mlp: Mlp, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        return AdamState(np.zeros(mlp.n_params), np.zeros(mlp.n_params), 0, beta1, beta2, eps)

    def copy(self) -> "AdamState":
        return AdamState(self.m.copy(), self.v.copy(), self.t, self.beta1, self.beta2, self.eps)


def adam_step(mlp: Mlp, grads, state: AdamState, lr: float) -> tuple[Mlp, AdamState]:
    """One bias-corrected descent step.

    Parameters:
        - mlp - network to update
        - grads - gradient of the loss to minimize, in flatten() order
        - state - optimizer moments for this network
        - lr - learning rate

    Returns:
        (updated network, updated state); inputs are left untouched
    """
    grads = np.asarray(grads, dtype=float)
    if grads.shape != state.m.shape or grads.shape != (mlp.n_params,):
        raise ShapeError(f"gradient shape {grads.shape} does not match {mlp.n_params} parameters")
    if not np.all(np.isfinite(grads)):
        raise DivergenceError("non-finite gradient, update aborted")

    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads ** 2
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    params = flatten(mlp) - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return unflatten(mlp, params), AdamState(m, v, t, state.beta1, state.beta2, state.eps)
