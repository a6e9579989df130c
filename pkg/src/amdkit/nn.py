"""Minimal dense-layer toolkit: sigmoid layers, summed BCE, Adam.

Just enough machinery for the small multitask networks in this package; all
math is plain numpy in float64, gradients are supplied by the caller (the
architectures are tiny and fixed, so backprop is written out by hand where
the layers are composed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CLAMP = 1e-12


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def bce_sum(p: np.ndarray, y: np.ndarray) -> float:
    """Summed (not averaged) binary cross-entropy over all entries.

    Probabilities are clamped to [CLAMP, 1 - CLAMP] so saturated units cost a
    large finite penalty instead of inf.
    """
    p, y = np.asarray(p), np.asarray(y)
    if p.shape != y.shape:
        raise ValueError(f"prediction shape {p.shape} != target shape {y.shape}")
    q = np.clip(p, CLAMP, 1.0 - CLAMP)
    return float(-(y * np.log(q) + (1.0 - y) * np.log1p(-q)).sum())


@dataclass
class DenseLayer:
    """Fully connected layer with sigmoid activation: f(x) = sigmoid(W x + b)."""

    W: np.ndarray
    b: np.ndarray

    @classmethod
    def create(cls, n_in: int, n_out: int, rng: np.random.Generator) -> "DenseLayer":
        # uniform in +-1/sqrt(fan_in) keeps pre-activations near the
        # sigmoid's linear range at init
        lim = 1.0 / np.sqrt(n_in)
        W = rng.uniform(-lim, lim, size=(n_out, n_in))
        return cls(W=W, b=np.zeros(n_out))

    @property
    def n_in(self) -> int:
        return self.W.shape[1]

    @property
    def n_out(self) -> int:
        return self.W.shape[0]

    def forward(self, x: np.ndarray, activation: str = "sigmoid") -> np.ndarray:
        """Apply to a single vector (n_in,) or a batch (B, n_in)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n_in:
            raise ValueError(f"input width {x.shape[-1]} != layer width {self.n_in}")
        z = x @ self.W.T + self.b
        if activation == "sigmoid":
            return sigmoid(z)
        if activation == "identity":
            return z
        raise ValueError(f"unknown activation {activation!r}")

    def to_dict(self) -> dict:
        return {"W": self.W.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DenseLayer":
        return cls(W=np.asarray(d["W"], dtype=np.float64),
                   b=np.asarray(d["b"], dtype=np.float64))


@dataclass
class AdamState:
    """Adam moment accumulators for one named parameter set.

    The step count is shared across all parameters registered on the same
    state, matching the usual convention of one global step per batch.
    """

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def begin_step(self) -> None:
        self.t += 1

    def update(self, name: str, param: np.ndarray, grad: np.ndarray) -> None:
        """Apply one Adam update in place. Call begin_step() once per batch first."""
        if self.t < 1:
            raise RuntimeError("begin_step() must be called before update()")
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
        if name not in self.m:
            self.m[name] = np.zeros_like(param)
            self.v[name] = np.zeros_like(param)
        m, v = self.m[name], self.v[name]
        m *= self.beta1
        m += (1.0 - self.beta1) * grad
        v *= self.beta2
        v += (1.0 - self.beta2) * np.square(grad)
        mhat = m / (1.0 - self.beta1 ** self.t)
        vhat = v / (1.0 - self.beta2 ** self.t)
        param -= self.lr * mhat / (np.sqrt(vhat) + self.eps)
