"""Synthetic right-censored survival data with known ground truth."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import SurvivalDataset, write_csv
from .errors import BadConfig

EDGE_CASE_VERSION = 1


@dataclass
class SimConfig:
    """Weibull proportional-hazards generator settings.

    Event times have survival ``exp(-(t / scale) ** shape * exp(x @ beta))``;
    censoring times are exponential with rate ``censoring_rate`` (0 means no
    censoring). ``grid`` > 0 rounds observed times up to multiples of
    ``grid`` to force ties.
    """

    n: int = 500
    p: int = 1
    beta: list[float] = field(default_factory=lambda: [1.0])
    shape: float = 1.0
    scale: float = 1.0
    censoring_rate: float = 0.0
    grid: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.beta = [float(b) for b in np.atleast_1d(self.beta)]
        if self.n < 1:
            raise BadConfig(f"n must be >= 1, got {self.n}")
        if self.p < 1 or len(self.beta) != self.p:
            raise BadConfig(f"beta has {len(self.beta)} entries for p={self.p}")
        if not (self.shape > 0 and self.scale > 0):
            raise BadConfig("baseline shape and scale must be > 0")
        if not self.censoring_rate >= 0:
            raise BadConfig("censoring rate must be >= 0")
        if not self.grid >= 0:
            raise BadConfig("grid must be >= 0")


@dataclass
class Simulation:
    dataset: SurvivalDataset
    config: SimConfig
    event_times: np.ndarray
    censoring_times: np.ndarray

    def ground_truth(self) -> dict:
        return {
            "config": asdict(self.config),
            "event_times": self.event_times.tolist(),
            "censoring_times": [None if np.isinf(c) else float(c) for c in self.censoring_times],
        }


def simulate_weibull_cox(config: SimConfig) -> Simulation:
    rng = np.random.default_rng(config.seed)
    x = rng.standard_normal((config.n, config.p))
    u = rng.uniform(size=config.n)
    lin = x @ np.asarray(config.beta)
    t_event = config.scale * (-np.log(u) / np.exp(lin)) ** (1.0 / config.shape)
    if config.censoring_rate > 0:
        t_cens = rng.exponential(1.0 / config.censoring_rate, size=config.n)
    else:
        t_cens = np.full(config.n, np.inf)
    event = t_event <= t_cens
    observed = np.minimum(t_event, t_cens)
    if config.grid > 0:
        observed = np.ceil(observed / config.grid) * config.grid
    # -log(u) underflows to 0 only for u == 1, which uniform() never returns,
    # but extreme linear predictors can still produce a zero time.
    observed = np.maximum(observed, np.finfo(float).tiny)
    ds = SurvivalDataset(event, observed, x, tuple(f"x{j + 1}" for j in range(config.p)))
    return Simulation(ds, config, t_event, t_cens)


def write_simulation(sim: Simulation, csv_path, truth_path=None) -> None:
    csv_path = Path(csv_path)
    write_csv(sim.dataset, csv_path)
    truth_path = Path(truth_path) if truth_path else csv_path.with_suffix(".truth.json")
    truth_path.write_text(json.dumps(sim.ground_truth(), indent=1) + "\n", encoding="utf-8")


def edge_case_suite() -> dict[str, SurvivalDataset]:
    """Small fixed datasets exercising degenerate survival configurations."""
    def ds(event, time, x=None):
        x = np.zeros((len(time), 1)) if x is None else x
        return SurvivalDataset(event, time, x)

    return {
        "all_censored": ds([0, 0, 0], [1.0, 2.0, 3.0]),
        "single_subject": ds([1], [1.0]),
        "all_tied": ds([1, 1, 1], [2.0, 2.0, 2.0], [[0.0], [1.0], [2.0]]),
        "tied_grid": ds([1, 0, 1, 1, 0, 1], [0.5, 0.5, 1.0, 1.0, 1.5, 1.5],
                        [[0.3], [-0.2], [1.1], [0.0], [-0.7], [0.4]]),
        "no_censoring": ds([1, 1, 1, 1], [1.0, 2.0, 3.0, 4.0], [[1.5], [0.5], [-0.5], [-1.5]]),
        "censored_after_last_event": ds([1, 1, 0, 0], [1.0, 2.0, 3.0, 4.0]),
    }
