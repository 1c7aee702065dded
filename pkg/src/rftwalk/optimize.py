"""Integer waypoint genomes, the reward-ratio fitness and a genetic algorithm."""
from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .contour import DEFAULT_WIDTH, FootContour, from_waypoints
from .metrics import CostBreakdown, metrics
from .sim import Scenario, SimulationDiverged, simulate

WORKERS_ENV = "RFTWALK_WORKERS"


@dataclass(frozen=True)
class ShapeSpace:
    """Waypoint design space: ``n`` waypoints over [-L, L], depths ``k * H / K``."""

    n: int = 11
    K: int = 10
    L: float = 0.13
    H: float = 0.03
    width: float = DEFAULT_WIDTH

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError("n must be an integer >= 2")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("K must be a positive integer")
        if not (self.L > 0 and self.H > 0 and self.width > 0):
            raise ValueError("L, H and width must be positive")

    def contour(self, k: Sequence[int]) -> FootContour:
        return from_waypoints(self.check(k), self.L, self.H, self.K, self.width)

    def check(self, k: Sequence[int]) -> tuple:
        k = tuple(int(v) for v in k)
        if len(k) != self.n:
            raise ValueError(f"genome must have {self.n} genes, got {len(k)}")
        if any(v < 1 or v > self.K for v in k):
            raise ValueError(f"genes must lie in 1..{self.K}")
        return k


@dataclass(frozen=True)
class GAConfig:
    population: int = 40
    generations: int = 60
    crossover_rate: float = 0.9
    mutation_rate: float | None = None   # None: 1/n per gene
    elites: int = 2
    seed: int = 0
    parallel: bool = False
    tournament: int = 3

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if self.generations < 1:
            raise ValueError("generations must be at least 1")
        for name in ("crossover_rate", "mutation_rate"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0 <= self.elites <= self.population:
            raise ValueError("elites must lie in [0, population]")
        if self.seed is None:
            raise ValueError("a seed is required")
        if self.tournament < 1:
            raise ValueError("tournament size must be positive")


@dataclass
class GAResult:
    best: tuple
    best_cost: CostBreakdown
    history: list = field(default_factory=list)   # (generation, best J_W, mean J_W)
    evaluations: int = 0


def evaluate(genome: Sequence[int], scenario: Scenario, space: ShapeSpace = ShapeSpace()) -> CostBreakdown:
    """Fitness of one genome; diverged simulations get ``J_W = +inf``."""
    contour = space.contour(genome)
    try:
        traj = simulate(scenario, contour)
    except SimulationDiverged:
        return CostBreakdown.diverged()
    return metrics(traj)


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    if not raw:
        return os.cpu_count() or 1
    n = int(raw)
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer")
    return n


class _Evaluator:
    """Memoizing batch evaluator; results come back in input order."""

    def __init__(self, scenario: Scenario, space: ShapeSpace, workers: int):
        self.scenario = scenario
        self.space = space
        self.workers = workers
        self.cache: dict[tuple, CostBreakdown] = {}

    def __call__(self, genomes: Iterable[Sequence[int]]) -> list[CostBreakdown]:
        keys = [tuple(int(v) for v in g) for g in genomes]
        todo = list(dict.fromkeys(k for k in keys if k not in self.cache))
        if self.workers > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                costs = list(pool.map(lambda k: evaluate(k, self.scenario, self.space), todo))
        else:
            costs = [evaluate(k, self.scenario, self.space) for k in todo]
        self.cache.update(zip(todo, costs))
        return [self.cache[k] for k in keys]


def _finite_mean(values: np.ndarray) -> float:
    ok = values[np.isfinite(values)]
    return float(ok.mean()) if ok.size else math.inf


def optimize(cfg: GAConfig, scenario: Scenario, space: ShapeSpace = ShapeSpace(),
             on_generation: Callable[[int, float, float], None] | None = None) -> GAResult:
    """Minimize J_W over genomes with a generational GA.

    ``cfg.generations`` counts evaluated populations, the random initial one
    included.  Tournament selection, uniform crossover, uniform per-gene
    resampling and elitism; ties are broken by population index so the run
    depends on the seed alone.
    """
    n, K = space.n, space.K
    rng = np.random.default_rng(cfg.seed)
    mut = 1.0 / n if cfg.mutation_rate is None else cfg.mutation_rate
    workers = worker_count() if cfg.parallel else 1
    ev = _Evaluator(scenario, space, workers)

    pop = rng.integers(1, K + 1, size=(cfg.population, n))
    costs = ev(pop)
    history = []
    best, best_cost = None, None
    for gen in range(cfg.generations):
        if gen > 0:
            fit = np.array([c.J_W for c in costs])
            order = np.argsort(fit, kind="stable")
            children = [pop[i].copy() for i in order[:cfg.elites]]
            while len(children) < cfg.population:
                a = pop[_tournament(rng, fit, cfg.tournament)]
                b = pop[_tournament(rng, fit, cfg.tournament)]
                if rng.random() < cfg.crossover_rate:
                    child = np.where(rng.random(n) < 0.5, a, b)
                else:
                    child = a.copy()
                hit = rng.random(n) < mut
                child[hit] = rng.integers(1, K + 1, size=int(hit.sum()))
                children.append(child)
            pop = np.array(children)
            costs = ev(pop)
        fit = np.array([c.J_W for c in costs])
        i = int(np.argmin(fit))
        if best_cost is None or fit[i] < best_cost.J_W:
            best, best_cost = tuple(int(v) for v in pop[i]), costs[i]
        history.append((gen, float(best_cost.J_W), _finite_mean(fit)))
        if on_generation is not None:
            on_generation(*history[-1])
    return GAResult(best, best_cost, history, len(ev.cache))


def _tournament(rng: np.random.Generator, fit: np.ndarray, size: int) -> int:
    idx = rng.integers(0, fit.size, size=size)
    return int(min(idx, key=lambda i: (fit[i], i)))


def enumerate_all(scenario: Scenario, space: ShapeSpace, workers: int = 1) -> list[tuple[tuple, CostBreakdown]]:
    """Every genome of a small space with its cost, in lexicographic order."""
    genomes = list(itertools.product(range(1, space.K + 1), repeat=space.n))
    if len(genomes) > 100_000:
        raise ValueError(f"{len(genomes)} genomes is too many to enumerate")
    costs = _Evaluator(scenario, space, workers)(genomes)
    return list(zip(genomes, costs))


def brute_force_best(scenario: Scenario, space: ShapeSpace, workers: int = 1) -> tuple[tuple, CostBreakdown]:
    """Lowest-J_W genome (first in lexicographic order on ties)."""
    return min(enumerate_all(scenario, space, workers), key=lambda gc: gc[1].J_W)


def report(cfg: GAConfig, space: ShapeSpace, result: GAResult, scenario_echo: dict) -> dict:
    """Optimization report body (no timestamps or host details)."""
    contour = space.contour(result.best)

    def num(v):
        return v if math.isfinite(v) else None

    return {
        "config": {"ga": asdict(cfg), "space": asdict(space), "scenario": scenario_echo},
        "history": [{"generation": g, "best_J_W": num(b), "mean_J_W": num(m)}
                    for g, b, m in result.history],
        "evaluations": result.evaluations,
        "best_genome": list(result.best),
        "best_contour": contour.to_dict(),
        "cost": result.best_cost.to_dict(),
    }


def convexity_note(k: Sequence[int]) -> str:
    """Describe whether the mid-span waypoints sit above the heel and toe ones."""
    k = list(k)
    n = len(k)
    mid = k[1:-1] if n > 2 else k
    # larger k is deeper, so a shallower middle means a smaller mean index
    if np.mean(mid) < 0.5 * (k[0] + k[-1]):
        return f"mid-span waypoints shallower than heel/toe (non-convex): k = {k}"
    return f"mid-span waypoints at or below heel/toe depth (convex-like): k = {k}"
