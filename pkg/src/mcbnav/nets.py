"""Dense networks with hand-written backprop.

Small enough to stay in numpy: fully-connected layers, ReLU (or tanh)
hidden activations, uniform fan-in initialization, and an Adam optimizer.
Every backward pass is covered by central finite-difference checks in the
test suite, so keep forward/backward strictly paired when editing.
"""
from __future__ import annotations

import numpy as np


class MLP:
    """Feed-forward net: y = W_n(...act(W_1 x + b_1)...) + b_n.

    Weights are (fan_in, fan_out); forward works on (batch, in) arrays.
    """

    def __init__(self, sizes: list[int], rng: np.random.Generator,
                 activation: str = "relu", out_scale: float = 1.0):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if activation not in ("relu", "tanh"):
            raise ValueError(f"unknown activation {activation!r}")
        self.sizes = list(sizes)
        self.activation = activation
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            bound = 1.0 / np.sqrt(n_in)
            w = rng.uniform(-bound, bound, size=(n_in, n_out))
            b = rng.uniform(-bound, bound, size=n_out)
            if i == len(sizes) - 2 and out_scale != 1.0:
                w *= out_scale
                b *= out_scale
            self.weights.append(w)
            self.biases.append(b)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def _act(self, z: np.ndarray) -> np.ndarray:
        if self.activation == "relu":
            return np.maximum(z, 0.0)
        return np.tanh(z)

    def forward(self, x: np.ndarray, want_cache: bool = False):
        """Returns output (batch, out), and the cache when requested."""
        h = x
        inputs = [x] if want_cache else None
        zs = [] if want_cache else None
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            h = z if i == last else self._act(z)
            if want_cache:
                zs.append(z)
                if i != last:
                    inputs.append(h)
        if want_cache:
            return h, (inputs, zs)
        return h

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)

    def backward(self, cache, grad_out: np.ndarray):
        """Backprop grad_out (batch, out) through a cached forward pass.

        Returns (grad_weights, grad_biases, grad_input); gradients sum
        over the batch, matching a loss summed over rows.
        """
        inputs, zs = cache
        grad_w = [None] * self.n_layers
        grad_b = [None] * self.n_layers
        g = grad_out
        for i in range(self.n_layers - 1, -1, -1):
            if i != self.n_layers - 1:
                if self.activation == "relu":
                    g = g * (zs[i] > 0.0)
                else:
                    g = g * (1.0 - np.tanh(zs[i]) ** 2)
            grad_w[i] = inputs[i].T @ g
            grad_b[i] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return grad_w, grad_b, g

    def backward_input(self, cache, grad_out: np.ndarray) -> np.ndarray:
        """Input gradient only; skips the weight/bias gradient matmuls."""
        _, zs = cache
        g = grad_out
        for i in range(self.n_layers - 1, -1, -1):
            if i != self.n_layers - 1:
                if self.activation == "relu":
                    g = g * (zs[i] > 0.0)
                else:
                    g = g * (1.0 - np.tanh(zs[i]) ** 2)
            g = g @ self.weights[i].T
        return g

    def parameters(self) -> list[np.ndarray]:
        return self.weights + self.biases

    def copy(self) -> "MLP":
        dup = object.__new__(MLP)
        dup.sizes = list(self.sizes)
        dup.activation = self.activation
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters())


def polyak_update(target: MLP, source: MLP, rho: float) -> None:
    """In-place soft update: target <- rho * target + (1 - rho) * source."""
    for pt, ps in zip(target.parameters(), source.parameters()):
        pt *= rho
        pt += (1.0 - rho) * ps


class Adam:
    """Adam over a fixed list of parameter arrays, updated in place."""

    def __init__(self, params: list[np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
