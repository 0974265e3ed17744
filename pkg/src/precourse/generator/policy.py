"""Two-head policy network guiding the tree search.

A small MLP reads the encoded state concatenated with the cost weights and
emits two distributions: one over function ids, one over argument-grid
bins. Both heads are softmax-normalized. Training minimizes cross-entropy
against visit-count targets with Adam.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..core.classifier import StateEncoder
from ..core.schema import State
from ..core.scm import ScmWeights

_PARAM_KEYS = ("w1", "b1", "wf", "bf", "wx", "bx")


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class PolicyModel:
    encoder: StateEncoder
    function_ids: tuple[str, ...]
    grid_size: int
    params: dict[str, np.ndarray]
    _adam: dict = field(default_factory=dict, repr=False)

    @classmethod
    def initialize(cls, encoder: StateEncoder, function_ids: tuple[str, ...],
                   grid_size: int, m: int, hidden: int = 32, seed: int = 0) -> "PolicyModel":
        rng = np.random.default_rng(seed)
        din = encoder.dim + m
        scale = np.sqrt(2.0 / din)
        params = {
            "w1": rng.normal(0.0, scale, size=(hidden, din)),
            "b1": np.zeros(hidden),
            "wf": rng.normal(0.0, np.sqrt(2.0 / hidden), size=(len(function_ids), hidden)),
            "bf": np.zeros(len(function_ids)),
            "wx": rng.normal(0.0, np.sqrt(2.0 / hidden), size=(grid_size, hidden)),
            "bx": np.zeros(grid_size),
        }
        return cls(encoder=encoder, function_ids=function_ids,
                   grid_size=grid_size, params=params)

    def copy(self) -> "PolicyModel":
        return PolicyModel(encoder=self.encoder, function_ids=self.function_ids,
                           grid_size=self.grid_size,
                           params={k: v.copy() for k, v in self.params.items()})

    def encode_input(self, state: State, weights: ScmWeights) -> np.ndarray:
        return np.concatenate([self.encoder.encode(state), weights.array])

    def priors(self, state: State, weights: ScmWeights) -> tuple[np.ndarray, np.ndarray]:
        """(function distribution, argument-bin distribution) for one input."""
        pf, px = self.priors_from_inputs(self.encode_input(state, weights)[None, :])
        return pf[0], px[0]

    def priors_from_inputs(self, inputs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = self.params
        h = np.maximum(0.0, inputs @ p["w1"].T + p["b1"])
        return _softmax(h @ p["wf"].T + p["bf"]), _softmax(h @ p["wx"].T + p["bx"])

    def fit_epoch(self, inputs: np.ndarray, targets_f: np.ndarray, targets_x: np.ndarray,
                  batch_size: int, lr: float, rng: np.random.Generator) -> float:
        """One pass of minibatch Adam on the summed head cross-entropies.

        Returns the mean loss over the epoch.
        """
        n = inputs.shape[0]
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            losses.append(self._step(inputs[idx], targets_f[idx], targets_x[idx], lr))
        return float(np.mean(losses))

    def _step(self, x: np.ndarray, tf: np.ndarray, tx: np.ndarray, lr: float) -> float:
        p = self.params
        b = x.shape[0]
        pre = x @ p["w1"].T + p["b1"]
        h = np.maximum(0.0, pre)
        pf = _softmax(h @ p["wf"].T + p["bf"])
        px = _softmax(h @ p["wx"].T + p["bx"])
        eps = 1e-12
        loss = float(-(tf * np.log(pf + eps)).sum(axis=1).mean()
                     - (tx * np.log(px + eps)).sum(axis=1).mean())

        dlf = (pf - tf) / b  # softmax + cross-entropy gradient
        dlx = (px - tx) / b
        grads = {
            "wf": dlf.T @ h, "bf": dlf.sum(axis=0),
            "wx": dlx.T @ h, "bx": dlx.sum(axis=0),
        }
        dh = dlf @ p["wf"] + dlx @ p["wx"]
        dpre = dh * (pre > 0)
        grads["w1"] = dpre.T @ x
        grads["b1"] = dpre.sum(axis=0)
        self._adam_update(grads, lr)
        return loss

    def _adam_update(self, grads: Mapping[str, np.ndarray], lr: float,
                     beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
        state = self._adam
        state["t"] = state.get("t", 0) + 1
        t = state["t"]
        for key, g in grads.items():
            m = state.setdefault(f"m_{key}", np.zeros_like(g))
            v = state.setdefault(f"v_{key}", np.zeros_like(g))
            m[:] = beta1 * m + (1 - beta1) * g
            v[:] = beta2 * v + (1 - beta2) * g * g
            m_hat = m / (1 - beta1 ** t)
            v_hat = v / (1 - beta2 ** t)
            self.params[key] -= lr * m_hat / (np.sqrt(v_hat) + eps)

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "function_ids": list(self.function_ids),
            "grid_size": self.grid_size,
            "encoder": self.encoder.to_dict(),
            "params": {k: self.params[k].tolist() for k in _PARAM_KEYS},
        }

    @classmethod
    def from_dict(cls, data: Mapping, encoder: StateEncoder) -> "PolicyModel":
        params = {k: np.asarray(data["params"][k], dtype=float) for k in _PARAM_KEYS}
        return cls(encoder=encoder, function_ids=tuple(data["function_ids"]),
                   grid_size=int(data["grid_size"]), params=params)


@dataclass(frozen=True)
class UniformPolicy:
    """Flat priors over functions and argument bins; the untrained baseline."""

    function_ids: tuple[str, ...]
    grid_size: int

    def priors(self, state: State, weights: ScmWeights) -> tuple[np.ndarray, np.ndarray]:
        nf = len(self.function_ids)
        return np.full(nf, 1.0 / nf), np.full(self.grid_size, 1.0 / self.grid_size)
