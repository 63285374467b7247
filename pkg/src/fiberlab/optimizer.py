"""Seedable rand/1/bin differential evolution (maximization, elitist)."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter


@dataclass(frozen=True)
class DEParams:
    bounds: tuple
    generations: int = 100
    population: int | None = None
    differential_weight: float = 0.8
    crossover: float = 0.9
    strategy: str = "rand/1/bin"
    seed: int = 0

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        if self.population is None:
            object.__setattr__(self, "population", 10 * len(bounds))
        self.validate()

    def validate(self):
        if not self.bounds:
            raise InvalidParameter("at least one dimension is required")
        if any(lo >= hi for lo, hi in self.bounds):
            raise InvalidParameter("each bound needs lo < hi")
        if self.population < 4:
            raise InvalidParameter("population must be >= 4")
        if not (0 < self.differential_weight <= 2):
            raise InvalidParameter("differential weight F must lie in (0, 2]")
        if not (0 <= self.crossover <= 1):
            raise InvalidParameter("crossover CR must lie in [0, 1]")
        if self.generations < 0:
            raise InvalidParameter("generations must be >= 0")
        if self.strategy != "rand/1/bin":
            raise InvalidParameter(f"unsupported strategy {self.strategy!r}")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def to_dict(self) -> dict:
        return {"bounds": [list(b) for b in self.bounds], "generations": self.generations,
                "population": self.population, "differential_weight": self.differential_weight,
                "crossover": self.crossover, "strategy": self.strategy, "seed": self.seed}


@dataclass
class DEResult:
    x: np.ndarray
    value: float
    history: list = field(default_factory=list)
    mean_history: list = field(default_factory=list)
    evaluations: int = 0

    def write_history_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["generation", "best", "mean"])
            for g, (b, m) in enumerate(zip(self.history, self.mean_history)):
                w.writerow([g, repr(float(b)), repr(float(m))])


def _evaluate(objective, pop, vectorized):
    if vectorized:
        return np.asarray(objective(pop), dtype=float).reshape(len(pop))
    return np.array([float(objective(x)) for x in pop])


def de_maximize(objective, params: DEParams, x0=None, vectorized: bool = False,
                rng=None) -> DEResult:
    """Maximize ``objective`` over the box ``params.bounds``.

    With ``vectorized`` the objective receives the whole (population, dim)
    array and returns one value per row. ``x0`` (optional) replaces the first
    member of the initial population, so the result is never worse than x0.
    """
    params.validate()
    rng = np.random.default_rng(params.seed) if rng is None else rng
    lo, hi = np.array(params.bounds).T
    npop, dim = params.population, params.dim
    F, CR = params.differential_weight, params.crossover

    pop = lo + rng.random((npop, dim)) * (hi - lo)
    if x0 is not None:
        pop[0] = np.clip(np.asarray(x0, dtype=float), lo, hi)
    fit = _evaluate(objective, pop, vectorized)
    best = int(np.argmax(fit))
    history, means = [float(fit[best])], [float(np.mean(fit))]
    evaluations = npop

    idx = np.arange(npop)
    for _ in range(params.generations):
        # three distinct partners per member, all different from the member itself
        keys = rng.random((npop, npop))
        keys[idx, idx] = np.inf
        r = np.argsort(keys, axis=1)[:, :3]
        mutant = pop[r[:, 0]] + F * (pop[r[:, 1]] - pop[r[:, 2]])
        cross = rng.random((npop, dim)) < CR
        cross[idx, rng.integers(0, dim, npop)] = True
        trial = np.clip(np.where(cross, mutant, pop), lo, hi)
        trial_fit = _evaluate(objective, trial, vectorized)
        evaluations += npop
        keep = trial_fit >= fit
        pop[keep] = trial[keep]
        fit[keep] = trial_fit[keep]
        best = int(np.argmax(fit))
        history.append(float(fit[best]))
        means.append(float(np.mean(fit)))
    return DEResult(pop[best].copy(), float(fit[best]), history, means, evaluations)
