"""Small dense networks in numpy (float64) with hand-written backprop.

The policy problem is tiny (tens of inputs, five outputs), so the nets are
plain 2-hidden-layer tanh MLPs.  Keeping them in numpy makes runs
bit-reproducible and lets the gradient implementation be checked against
central finite differences at tight tolerances.
"""

from __future__ import annotations

import numpy as np


def orthogonal(rng: np.random.Generator, shape: tuple[int, int], gain: float = 1.0) -> np.ndarray:
    a = rng.normal(size=shape)
    q, r = np.linalg.qr(a if shape[0] >= shape[1] else a.T)
    q = q * np.sign(np.diag(r))
    if shape[0] < shape[1]:
        q = q.T
    return gain * q[: shape[0], : shape[1]]


class Mlp:
    """input -> tanh(128) -> tanh(128) -> linear output."""

    def __init__(self, in_dim: int, hidden: int, out_dim: int, rng: np.random.Generator,
                 out_gain: float = 0.01):
        self.in_dim = in_dim
        self.hidden = hidden
        self.out_dim = out_dim
        root2 = np.sqrt(2.0)
        self.params = {
            "w1": orthogonal(rng, (in_dim, hidden), root2),
            "b1": np.zeros(hidden),
            "w2": orthogonal(rng, (hidden, hidden), root2),
            "b2": np.zeros(hidden),
            "w3": orthogonal(rng, (hidden, out_dim), out_gain),
            "b3": np.zeros(out_dim),
        }

    def forward(self, x: np.ndarray):
        """Returns (output, cache); x has shape (batch, in_dim)."""
        p = self.params
        h1 = np.tanh(x @ p["w1"] + p["b1"])
        h2 = np.tanh(h1 @ p["w2"] + p["b2"])
        out = h2 @ p["w3"] + p["b3"]
        return out, (x, h1, h2)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache, dout: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of a scalar loss given d(loss)/d(output)."""
        x, h1, h2 = cache
        p = self.params
        grads = {
            "w3": h2.T @ dout,
            "b3": dout.sum(axis=0),
        }
        dh2 = (dout @ p["w3"].T) * (1.0 - h2 * h2)
        grads["w2"] = h1.T @ dh2
        grads["b2"] = dh2.sum(axis=0)
        dh1 = (dh2 @ p["w2"].T) * (1.0 - h1 * h1)
        grads["w1"] = x.T @ dh1
        grads["b1"] = dh1.sum(axis=0)
        return grads

    # flat-vector access, used by the finite-difference checks
    def get_vector(self) -> np.ndarray:
        return np.concatenate([self.params[k].ravel() for k in sorted(self.params)])

    def set_vector(self, vec: np.ndarray) -> None:
        offset = 0
        for k in sorted(self.params):
            size = self.params[k].size
            self.params[k] = vec[offset : offset + size].reshape(self.params[k].shape).copy()
            offset += size

    @staticmethod
    def grads_vector(grads: dict[str, np.ndarray]) -> np.ndarray:
        return np.concatenate([grads[k].ravel() for k in sorted(grads)])


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def sample_categorical(rng: np.random.Generator, probs: np.ndarray) -> int:
    return int(rng.choice(len(probs), p=probs / probs.sum()))


class Adam:
    """Per-parameter moment-based optimizer with bias correction."""

    def __init__(self, lr: float = 3e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step_pairs(self, pairs) -> None:
        """One optimizer step over [(params, grads, name_prefix), ...]."""
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for params, grads, prefix in pairs:
            for key, g in grads.items():
                name = prefix + key
                if name not in self.m:
                    self.m[name] = np.zeros_like(g)
                    self.v[name] = np.zeros_like(g)
                m = self.m[name]
                v = self.v[name]
                m += (1.0 - self.beta1) * (g - m)
                v += (1.0 - self.beta2) * (g * g - v)
                params[key] -= self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], prefix: str = "") -> None:
        self.step_pairs([(params, grads, prefix)])


def clip_gradients(grad_dicts, max_norm: float) -> float:
    """Global-norm gradient clipping across several gradient dicts, in place."""
    total = 0.0
    for grads in grad_dicts:
        for g in grads.values():
            total += float((g * g).sum())
    norm = np.sqrt(total)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for grads in grad_dicts:
            for g in grads.values():
                g *= scale
    return norm
