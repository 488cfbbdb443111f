"""Momentum training for rank-based survival losses.

An online network is trained by gradient descent while a target network
tracks it as an exponential moving average. Target-network outputs of past
batches are kept in a FIFO memory bank and appended (as constants) to every
new batch before the survival loss is evaluated, so the loss sees
``batch_size + len(bank)`` subjects.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .data import as_arrays
from .net import Mlp, forward, predict


@dataclass(frozen=True)
class BankRecord:
    output: np.ndarray  # one row of target-network output
    event: bool
    time: float


class MemoryBank:
    def __init__(self, capacity: int = 512):
        if capacity < 0:
            raise ValueError("capacity must be >= 0")
        self.capacity = capacity
        self._records: deque[BankRecord] = deque(maxlen=capacity)

    def __len__(self):
        return len(self._records)

    def __iter__(self):
        return iter(self._records)

    def push(self, outputs: np.ndarray, event, time) -> None:
        """Append rows in order, evicting the oldest records past capacity."""
        event, time = as_arrays(event, time)
        outputs = np.array(outputs, dtype=np.float64, copy=True)
        outputs.setflags(write=False)
        for row, e, t in zip(outputs, event, time):
            self._records.append(BankRecord(row, bool(e), float(t)))

    def event_count(self) -> int:
        return sum(r.event for r in self._records)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        outputs = np.array([r.output for r in self._records])
        event = np.array([r.event for r in self._records], dtype=bool)
        time = np.array([r.time for r in self._records], dtype=np.float64)
        return outputs, event, time


class MomentumPair:
    """Online network plus an EMA target network of the same architecture."""

    def __init__(self, online: Mlp, m: float = 0.999):
        if not 0.0 <= m <= 1.0:
            raise ValueError(f"momentum rate must lie in [0, 1], got {m}")
        self.online = online
        self.target = online.clone()
        self.m = m


def ema_update(pair: MomentumPair) -> None:
    """target <- m * target + (1 - m) * online, for every parameter."""
    for t, o in zip(pair.target.parameters(), pair.online.parameters()):
        t.value = pair.m * t.value + (1.0 - pair.m) * o.value


def infer(pair: MomentumPair, x) -> np.ndarray:
    return predict(pair.target, x)


def momentum_loss(pair: MomentumPair, bank: MemoryBank, x, event, time,
                  base_loss: Callable[..., Node]) -> Node:
    """Survival loss on the live batch concatenated with the memory bank.

    Only the online outputs carry gradients. Target outputs for the live
    batch are pushed into the bank after the loss has been evaluated.
    """
    event, time = as_arrays(event, time)
    live_event, live_time = event, time
    theta = forward(pair.online, x)
    if len(bank):
        bank_out, bank_event, bank_time = bank.arrays()
        theta = ad.concat([theta, Node.constant(bank_out)])
        event = np.concatenate([event, bank_event])
        time = np.concatenate([time, bank_time])
    loss = base_loss(theta, event, time)
    bank.push(predict(pair.target, x), live_event, live_time)
    return loss


class Momentum:
    """Callable wrapper: ``loss = momentum(x, event, time)``; ``momentum.infer(x)``."""

    def __init__(self, backbone: Mlp, loss: Callable[..., Node], m: float = 0.999,
                 capacity: int = 512):
        self.pair = MomentumPair(backbone, m)
        self.bank = MemoryBank(capacity)
        self.loss = loss

    @property
    def online(self) -> Mlp:
        return self.pair.online

    @property
    def target(self) -> Mlp:
        return self.pair.target

    def __call__(self, x, event, time) -> Node:
        return momentum_loss(self.pair, self.bank, x, event, time, self.loss)

    def ema_update(self) -> None:
        ema_update(self.pair)

    def infer(self, x) -> np.ndarray:
        return infer(self.pair, x)
