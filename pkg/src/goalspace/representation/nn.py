"""Dense encoder/decoder networks with hand-written reverse-mode gradients."""
from __future__ import annotations

import numpy as np


def _relu(x):
    return np.maximum(x, 0.0)


class MLP:
    """Fully connected stack: ReLU between layers, linear output.

    Parameters live in the shared ``params`` dict under ``{prefix}{i}.W`` and
    ``{prefix}{i}.b`` so one optimizer can update several networks at once.
    """

    def __init__(self, sizes, prefix, params: dict, rng: np.random.Generator | None = None):
        self.sizes = tuple(int(s) for s in sizes)
        self.prefix = prefix
        self.params = params
        if rng is not None:
            for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
                # He init for ReLU layers, Glorot for the linear output
                last = i == len(self.sizes) - 2
                std = np.sqrt(2.0 / (fan_in + fan_out) if last else 2.0 / fan_in)
                params[f"{prefix}{i}.W"] = rng.normal(0.0, std, (fan_in, fan_out))
                params[f"{prefix}{i}.b"] = np.zeros(fan_out)

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def W(self, i):
        return self.params[f"{self.prefix}{i}.W"]

    def b(self, i):
        return self.params[f"{self.prefix}{i}.b"]

    def forward(self, x):
        """Returns the output and the list of layer inputs needed for backward."""
        inputs = []
        h = x
        for i in range(self.n_layers):
            inputs.append(h)
            h = h @ self.W(i) + self.b(i)
            if i < self.n_layers - 1:
                h = _relu(h)
        return h, inputs

    def backward(self, g_out, inputs, grads: dict):
        """Accumulates parameter gradients into ``grads``; returns dL/dx."""
        g = g_out
        for i in reversed(range(self.n_layers)):
            h_in = inputs[i]
            grads[f"{self.prefix}{i}.W"] = h_in.T @ g
            grads[f"{self.prefix}{i}.b"] = g.sum(axis=0)
            if i == 0:
                g = g @ self.W(i).T
            else:
                # h_in is a ReLU output: its derivative is the indicator h_in > 0
                g = (g @ self.W(i).T) * (h_in > 0)
        return g


class DenseNet:
    """Encoder ``D -> hidden -> {mu, log_var}`` (or ``-> z`` for the plain AE)
    and decoder ``l -> reversed(hidden) -> D`` producing Bernoulli logits."""

    def __init__(self, input_dim: int, latent_dim: int, hidden=(512, 256),
                 variational: bool = True, rng: np.random.Generator | None = None,
                 params: dict | None = None):
        self.input_dim = int(input_dim)
        self.latent_dim = int(latent_dim)
        self.hidden = tuple(int(h) for h in hidden)
        self.variational = bool(variational)
        self.params = {} if params is None else params
        enc_out = 2 * self.latent_dim if self.variational else self.latent_dim
        init_rng = rng if params is None else None
        if params is None and rng is None:
            raise ValueError("need an rng to initialise a new network")
        self.encoder = MLP((self.input_dim, *self.hidden, enc_out), "enc.", self.params, init_rng)
        self.decoder = MLP((self.latent_dim, *reversed(self.hidden), self.input_dim),
                           "dec.", self.params, init_rng)

    @property
    def n_parameters(self) -> int:
        return sum(v.size for k, v in self.params.items() if k.startswith(("enc.", "dec.")))

    def decode_probabilities(self, z):
        logits, _ = self.decoder.forward(np.atleast_2d(z))
        return 1.0 / (1.0 + np.exp(-logits))


class SGD:
    def __init__(self, learning_rate=1e-3):
        self.learning_rate = learning_rate

    def step(self, params, grads):
        for k, g in grads.items():
            params[k] -= self.learning_rate * g


class Adagrad:
    def __init__(self, learning_rate=1e-3, eps=1e-8):
        self.learning_rate = learning_rate
        self.eps = eps
        self.accum = {}

    def step(self, params, grads):
        for k, g in grads.items():
            acc = self.accum.setdefault(k, np.zeros_like(g))
            acc += g * g
            params[k] -= self.learning_rate * g / (np.sqrt(acc) + self.eps)


class Adam:
    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m, self.v = {}, {}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            m = self.m.setdefault(k, np.zeros_like(g))
            v = self.v.setdefault(k, np.zeros_like(g))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[k] -= self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.eps)


OPTIMIZERS = {"sgd": SGD, "adagrad": Adagrad, "adam": Adam}


def make_optimizer(name: str, learning_rate: float):
    try:
        return OPTIMIZERS[name.lower()](learning_rate)
    except KeyError:
        raise ValueError(f"unknown optimizer {name!r}; choose from {sorted(OPTIMIZERS)}") from None
