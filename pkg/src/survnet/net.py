"""Feed-forward networks mapping covariates to survival model parameters."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Node, Tape
from .data import SurvivalDataset, event_count, validate
from .errors import (
    ArchLossMismatch,
    BadArchitecture,
    BadConfig,
    CheckpointError,
    NoEvents,
    ShapeMismatch,
)
from .losses import get_loss

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "survnet-checkpoint"
CHECKPOINT_VERSION = 1


class Mlp:
    """Fully connected network with ReLU between layers and a linear output.

    ``sizes`` is ``[p, h1, ..., out]``; weights are stored as ``(in, out)``
    matrices and biases as ``(1, out)`` rows, all as autodiff leaves.
    """

    def __init__(self, sizes: Sequence[int], weights: Sequence, biases: Sequence):
        self.sizes = [int(s) for s in sizes]
        self.weights = [Node.parameter(w) for w in weights]
        self.biases = [Node.parameter(np.reshape(b, (1, -1))) for b in biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.sizes[i], self.sizes[i + 1])
            if w.shape != expected or b.shape != (1, expected[1]):
                raise BadArchitecture(
                    f"layer {i}: weight {w.shape} / bias {b.shape}, expected {expected}"
                )

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    def parameters(self) -> list[Node]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def zero_grad(self) -> None:
        ad.zero_grad(self.parameters())

    def __call__(self, x) -> Node:
        return forward(self, x)

    def clone(self) -> "Mlp":
        return Mlp(self.sizes, [w.value for w in self.weights], [b.value for b in self.biases])

    def state(self) -> dict:
        return {
            "weights": [w.value.tolist() for w in self.weights],
            "biases": [b.value.ravel().tolist() for b in self.biases],
        }

    @classmethod
    def from_state(cls, sizes, state: dict) -> "Mlp":
        return cls(sizes, state["weights"], state["biases"])


def init(sizes: Sequence[int], seed: int = 0) -> Mlp:
    """Seeded initialization: weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases."""
    sizes = list(sizes)
    if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
        raise BadArchitecture(f"layer sizes must be at least two positive integers, got {sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(sizes, weights, biases)


def forward(mlp: Mlp, x) -> Node:
    """Network output for an n x p covariate matrix, as an n x out node."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.shape[1] != mlp.sizes[0]:
        raise ShapeMismatch(f"expected {mlp.sizes[0]} covariates, got {x.shape[1]}")
    ones = Node.constant(np.ones((x.shape[0], 1)))
    h = Node.constant(x)
    last = len(mlp.weights) - 1
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        h = ad.add(ad.matmul(h, w), ad.matmul(ones, b))
        if i < last:
            h = ad.relu(h)
    return h


def predict(mlp: Mlp, x) -> np.ndarray:
    """Forward pass without recording a tape."""
    return forward(mlp, x).value


class Adam:
    """Adam with bias correction; updates parameter values in place."""

    def __init__(self, params: Sequence[Node], lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]
        self.t = 0

    def step(self, grads: Sequence[np.ndarray] | None = None) -> None:
        grads = [p.grad for p in self.params] if grads is None else list(grads)
        if len(grads) != len(self.params):
            raise ShapeMismatch(f"{len(grads)} gradients for {len(self.params)} parameters")
        for p, g in zip(self.params, grads):
            if np.shape(g) != p.shape:
                raise ShapeMismatch(f"gradient {np.shape(g)} for parameter {p.shape}")
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for i, (p, g) in enumerate(zip(self.params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            p.value -= self.lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)


class SGD:
    def __init__(self, params: Sequence[Node], lr=1e-2):
        self.params = list(params)
        self.lr = lr

    def step(self, grads: Sequence[np.ndarray] | None = None) -> None:
        grads = [p.grad for p in self.params] if grads is None else list(grads)
        for p, g in zip(self.params, grads):
            if np.shape(g) != p.shape:
                raise ShapeMismatch(f"gradient {np.shape(g)} for parameter {p.shape}")
            p.value -= self.lr * g


def adam_step(state: Adam, params: Sequence[Node], grads: Sequence[np.ndarray]) -> Adam:
    if [id(p) for p in params] != [id(p) for p in state.params]:
        raise ShapeMismatch("Adam state was built for different parameters")
    state.step(grads)
    return state


@dataclass
class MomentumConfig:
    m: float = 0.999
    capacity: int = 512

    @classmethod
    def parse(cls, text: str) -> "MomentumConfig":
        """Parse ``"m:K"``, e.g. ``"0.999:512"``."""
        try:
            m, k = text.split(":")
            return cls(float(m), int(k))
        except ValueError:
            raise BadConfig(f"momentum must look like m:K, got {text!r}") from None


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 64
    seed: int = 0
    shuffle: bool = True
    loss: str = "cox-efron"
    lr: float = 1e-3
    optimizer: str = "adam"
    reduction: str = "mean"
    momentum: MomentumConfig | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise BadConfig(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise BadConfig(f"batch size must be >= 1, got {self.batch_size}")
        if self.optimizer not in ("adam", "sgd"):
            raise BadConfig(f"optimizer must be adam or sgd, got {self.optimizer!r}")
        if self.momentum is not None and not 0 <= self.momentum.m <= 1:
            raise BadConfig(f"momentum rate must lie in [0, 1], got {self.momentum.m}")
        if self.momentum is not None and self.momentum.capacity < 0:
            raise BadConfig("memory bank capacity must be >= 0")
        try:
            get_loss(self.loss)
        except ValueError as exc:
            raise BadConfig(str(exc)) from None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    model: Mlp
    losses: list[float]
    skipped_batches: int = 0
    momentum: object = None
    effective_batch: list[int] = field(default_factory=list)


def check_compatible(mlp: Mlp, loss: str) -> None:
    out_dim, _ = get_loss(loss)
    if loss == "weibull" and mlp.out_dim in (1, 2):
        return
    if mlp.out_dim != out_dim:
        raise ArchLossMismatch(
            f"loss {loss!r} needs {out_dim} network output(s), architecture has {mlp.out_dim}"
        )


def train(dataset: SurvivalDataset, mlp: Mlp, config: TrainConfig) -> TrainResult:
    """Minibatch maximum-likelihood training by backpropagation.

    Each epoch visits every subject once; the recorded loss is the mean over
    the batches that were used. Cox batches without any event are skipped.
    With ``config.momentum`` set, the loss is evaluated through a
    :class:`~survnet.momentum.Momentum` wrapper and the returned model is
    the online network.
    """
    from .momentum import Momentum

    validate(dataset)
    check_compatible(mlp, config.loss)
    _, loss_fn = get_loss(config.loss)
    is_cox = config.loss.startswith("cox")
    if is_cox and event_count(dataset) == 0:
        raise NoEvents("training data contains no events")

    params = mlp.parameters()
    opt = Adam(params, lr=config.lr) if config.optimizer == "adam" else SGD(params, lr=config.lr)
    rng = np.random.default_rng(config.seed)

    def base_loss(out, e, t):
        return loss_fn(out, e, t, reduction=config.reduction)

    wrapper = None
    if config.momentum is not None:
        wrapper = Momentum(mlp, base_loss, m=config.momentum.m, capacity=config.momentum.capacity)

    n = dataset.n
    losses, skipped, effective = [], 0, []
    for epoch in range(config.epochs):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        batch_losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            x, e, t = dataset.covariates[idx], dataset.event[idx], dataset.time[idx]
            bank_events = wrapper.bank.event_count() if wrapper is not None else 0
            if is_cox and not e.any() and bank_events == 0:
                skipped += 1
                logger.warning("epoch %d: skipping batch at %d with no events", epoch, start)
                continue
            mlp.zero_grad()
            with Tape() as tape:
                if wrapper is None:
                    loss = base_loss(forward(mlp, x), e, t)
                else:
                    effective.append(len(idx) + len(wrapper.bank))
                    loss = wrapper(x, e, t)
            tape.backward(loss)
            opt.step()
            if wrapper is not None:
                wrapper.ema_update()
            batch_losses.append(loss.item())
        if not batch_losses:
            raise NoEvents(f"epoch {epoch}: every batch lacked events")
        losses.append(float(np.mean(batch_losses)))
    return TrainResult(mlp, losses, skipped, wrapper, effective)


# -- checkpoints --------------------------------------------------------------

def save_checkpoint(path, mlp: Mlp, loss: str, target: Mlp | None = None,
                    momentum: MomentumConfig | None = None) -> None:
    """Write a JSON checkpoint; floats use shortest round-trip decimal text."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "loss": loss,
        "sizes": mlp.sizes,
        "online": mlp.state(),
    }
    if target is not None:
        doc["target"] = target.state()
        doc["momentum"] = asdict(momentum) if momentum is not None else None
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


@dataclass
class Checkpoint:
    loss: str
    online: Mlp
    target: Mlp | None = None
    momentum: dict | None = None

    @property
    def model(self) -> Mlp:
        """The network used for inference (the target network when present)."""
        return self.target if self.target is not None else self.online

    @property
    def is_cox(self) -> bool:
        return self.loss.startswith("cox")


def load_checkpoint(path) -> Checkpoint:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path} is not a version-{CHECKPOINT_VERSION} checkpoint")
    try:
        sizes = doc["sizes"]
        online = Mlp.from_state(sizes, doc["online"])
        target = Mlp.from_state(sizes, doc["target"]) if "target" in doc else None
        return Checkpoint(doc["loss"], online, target, doc.get("momentum"))
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint {path}: {exc}") from None
