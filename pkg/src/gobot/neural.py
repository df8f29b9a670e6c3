"""From-scratch feedforward Q-network (one ReLU hidden layer, linear output),
its gradient training step, and the experience replay buffer."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, TrainingDivergenceError


@dataclass
class QWeights:
    """Parameters of Q(s, a): input weights W1 (d, h), hidden bias b1 (h,),
    output weights W2 (h, n_actions), output bias b2 (n_actions,)."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    manifest_digest: str
    seed: int

    @property
    def d(self) -> int:
        return self.W1.shape[0]

    @property
    def h(self) -> int:
        return self.W1.shape[1]

    @property
    def n_actions(self) -> int:
        return self.W2.shape[1]

    def copy(self) -> "QWeights":
        return QWeights(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy(),
                        self.manifest_digest, self.seed)


@dataclass
class Experience:
    """One transition (s, a, r, s', done) as stored in the replay buffer."""

    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    done: bool


class ReplayBuffer:
    """Bounded FIFO of experiences with uniform with-replacement sampling.

    ``positive_count`` counts terminal-success entries (done with r > 0) and
    stays consistent under eviction and flush.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.positive_count = 0
        self._ring: list[Experience] = []
        self._next = 0  # overwrite pointer once full

    def __len__(self) -> int:
        return len(self._ring)

    def entries(self) -> list[Experience]:
        """Contents in FIFO order (oldest first)."""
        if len(self._ring) < self.capacity:
            return list(self._ring)
        return self._ring[self._next:] + self._ring[:self._next]

    def push(self, e: Experience) -> None:
        if len(self._ring) < self.capacity:
            self._ring.append(e)
        else:
            old = self._ring[self._next]
            if old.done and old.r > 0:
                self.positive_count -= 1
            self._ring[self._next] = e
            self._next = (self._next + 1) % self.capacity
        if e.done and e.r > 0:
            self.positive_count += 1

    def sample(self, n: int, rng: np.random.Generator) -> list[Experience]:
        if n > len(self._ring):
            raise ValueError(f"cannot sample {n} from buffer of size {len(self._ring)}")
        idx = rng.integers(0, len(self._ring), size=n)
        return [self._ring[i] for i in idx]

    def flush(self) -> None:
        self._ring.clear()
        self._next = 0
        self.positive_count = 0


def rand_init(d: int, h: int, n_actions: int, manifest_digest: str, seed: int) -> QWeights:
    """Seeded uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer."""
    rng = np.random.default_rng(seed)
    lim1 = 1.0 / math.sqrt(d)
    lim2 = 1.0 / math.sqrt(h)
    return QWeights(
        W1=rng.uniform(-lim1, lim1, size=(d, h)),
        b1=rng.uniform(-lim1, lim1, size=h),
        W2=rng.uniform(-lim2, lim2, size=(h, n_actions)),
        b2=rng.uniform(-lim2, lim2, size=n_actions),
        manifest_digest=manifest_digest,
        seed=seed,
    )


def q_forward(weights: QWeights, s: np.ndarray) -> np.ndarray:
    """Per-action Q-values for one state vector."""
    if s.shape != (weights.d,):
        raise ValueError(f"state has shape {s.shape}, expected ({weights.d},)")
    hidden = np.maximum(s @ weights.W1 + weights.b1, 0.0)
    return hidden @ weights.W2 + weights.b2


def q_forward_batch(weights: QWeights, states: np.ndarray) -> np.ndarray:
    """Per-action Q-values for a (B, d) batch of states."""
    hidden = np.maximum(states @ weights.W1 + weights.b1, 0.0)
    return hidden @ weights.W2 + weights.b2


def bellman_target(r: float, done: bool, s_next: np.ndarray,
                   target_weights: QWeights, gamma: float) -> float:
    """r for terminal transitions, else r + gamma * max_a Q_target(s', a)."""
    if done:
        return r
    return r + gamma * float(np.max(q_forward(target_weights, s_next)))


def train_batch(weights: QWeights, target_weights: QWeights,
                batch: list[Experience], learning_rate: float,
                gamma: float) -> tuple[QWeights, float]:
    """One SGD step on the mean squared TD error of ``batch``.

    Gradients flow only through each experience's chosen action. Returns fresh
    weights; neither input is mutated.
    """
    if not batch:
        raise ValueError("empty batch")
    B = len(batch)
    S = np.stack([e.s for e in batch])
    S_next = np.stack([e.s_next for e in batch])
    A = np.array([e.a for e in batch])
    R = np.array([e.r for e in batch])
    done = np.array([e.done for e in batch])

    next_q = q_forward_batch(target_weights, S_next)
    y = R + gamma * next_q.max(axis=1) * ~done

    Z1 = S @ weights.W1 + weights.b1
    H = np.maximum(Z1, 0.0)
    Q = H @ weights.W2 + weights.b2
    err = Q[np.arange(B), A] - y
    loss = float(np.mean(err ** 2))
    if not math.isfinite(loss):
        raise TrainingDivergenceError(f"non-finite TD loss: {loss}")

    dQ = np.zeros_like(Q)
    dQ[np.arange(B), A] = 2.0 * err / B
    dW2 = H.T @ dQ
    db2 = dQ.sum(axis=0)
    dH = dQ @ weights.W2.T
    dZ1 = dH * (Z1 > 0)
    dW1 = S.T @ dZ1
    db1 = dZ1.sum(axis=0)

    lr = learning_rate
    updated = QWeights(
        W1=weights.W1 - lr * dW1,
        b1=weights.b1 - lr * db1,
        W2=weights.W2 - lr * dW2,
        b2=weights.b2 - lr * db2,
        manifest_digest=weights.manifest_digest,
        seed=weights.seed,
    )
    return updated, loss


def save_weights(weights: QWeights, path: str | Path) -> None:
    """Write weights as JSON: shapes, row-major 64-bit float arrays, manifest."""
    payload = {
        "manifest": weights.manifest_digest,
        "d": weights.d,
        "h": weights.h,
        "n_actions": weights.n_actions,
        "W1": weights.W1.ravel(order="C").tolist(),
        "b1": weights.b1.tolist(),
        "W2": weights.W2.ravel(order="C").tolist(),
        "b2": weights.b2.tolist(),
        "seed": weights.seed,
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_weights(path: str | Path) -> QWeights:
    """Read a weight file written by :func:`save_weights`."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
        d, h, n_actions = raw["d"], raw["h"], raw["n_actions"]
        weights = QWeights(
            W1=np.array(raw["W1"], dtype=float).reshape(d, h),
            b1=np.array(raw["b1"], dtype=float),
            W2=np.array(raw["W2"], dtype=float).reshape(h, n_actions),
            b2=np.array(raw["b2"], dtype=float),
            manifest_digest=raw["manifest"],
            seed=int(raw.get("seed", 0)),
        )
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise DataError(f"cannot read weights {path}: {exc}") from exc
    if weights.b1.shape != (h,) or weights.b2.shape != (n_actions,):
        raise DataError(f"weight file {path} has inconsistent shapes")
    if not all(np.isfinite(m).all() for m in (weights.W1, weights.b1, weights.W2, weights.b2)):
        raise DataError(f"weight file {path} contains non-finite entries")
    return weights
