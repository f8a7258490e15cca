"""Deterministic random streams and interval estimates for Monte Carlo runs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from statsmodels.stats.proportion import proportion_confint


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``.

    The split is a pure function of its arguments, so replicate ``i`` gets the
    same numbers no matter which worker runs it or in which order.
    """
    if seed is None:
        raise ValueError("a seed is mandatory")
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


@dataclass(frozen=True)
class Estimate:
    """A Bernoulli frequency with its Wilson interval."""

    successes: int
    trials: int
    low: float
    high: float

    @property
    def value(self) -> float:
        return self.successes / self.trials

    @property
    def stderr(self) -> float:
        p = self.value
        return math.sqrt(p * (1 - p) / self.trials)


def wilson(successes: int, trials: int, alpha: float = 0.05) -> Estimate:
    if trials <= 0:
        raise ValueError("need at least one trial")
    lo, hi = proportion_confint(successes, trials, alpha=alpha, method="wilson")
    return Estimate(int(successes), int(trials), float(lo), float(hi))


def map_replicates(fn, tasks, workers: int = 1) -> list:
    """``[fn(t) for t in tasks]``, optionally spread over worker processes.

    Results come back in task order, so the output does not depend on
    ``workers`` as long as each task seeds its own stream.
    """
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
