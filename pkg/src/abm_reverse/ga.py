"""Simple genetic algorithm over initial strategy distributions.

A genome is a ``(N, S)`` uint64 array of bit-packed strategy tables. Every
other game parameter (N, S, m, threshold, variant) is fixed by the config.

RNG streams: ``SeedSequence(cfg.seed).spawn(4)`` yields independent
generators for initialization, selection, crossover and mutation, in that
order. Fitness evaluation draws no random numbers, so results do not depend
on how evaluations are scheduled.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.stats import rankdata

from .abm import (GameVariant, ThirdPartyGame, check_memory, history_indices,
                  simulate_population)
from .fitness import FitnessMetric, FitnessValue, population_distance
from .market_data import ReturnSeries


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 50
    max_generations: int = 200
    elite_count: int = 2
    crossover_rate: float = 0.9
    mutation_rate_per_bit: float = 0.005
    stall_generations: int = 20
    min_improvement: float = 0.0
    seed: int = 0
    variant: GameVariant = GameVariant.GCMJG
    n_agents: int = 15
    n_strategies: int = 2
    memory: int = 3
    threshold: float = 0.0
    metric: FitnessMetric = FitnessMetric.L2
    crossover_granularity: str = "agent"  # or "strategy"
    zero_sign: int = -1

    def __post_init__(self):
        object.__setattr__(self, "variant", GameVariant.parse(self.variant))
        object.__setattr__(self, "metric", FitnessMetric.parse(self.metric))
        self.validate()

    def validate(self) -> None:
        if self.population_size < 2:
            raise ConfigError("population_size must be >= 2")
        if not 0 <= self.elite_count < self.population_size:
            raise ConfigError("elite_count must be in [0, population_size)")
        if self.max_generations < 1:
            raise ConfigError("max_generations must be >= 1")
        for name in ("crossover_rate", "mutation_rate_per_bit"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.stall_generations < 1:
            raise ConfigError("stall_generations must be >= 1")
        if self.n_agents < 1 or self.n_strategies < 1:
            raise ConfigError("n_agents and n_strategies must be >= 1")
        try:
            check_memory(self.memory)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.crossover_granularity not in ("agent", "strategy"):
            raise ConfigError("crossover_granularity must be 'agent' or 'strategy'")
        if self.zero_sign not in (1, -1):
            raise ConfigError("zero_sign must be +1 or -1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @property
    def table_bits(self) -> int:
        return 1 << self.memory

    def with_seed(self, seed: int) -> "GAConfig":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variant"] = self.variant.value
        d["metric"] = self.metric.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GAConfig":
        known = cls.__dataclass_fields__
        unknown = set(d) - set(known)
        if unknown:
            raise ConfigError(f"unknown GA settings: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class TrainingWindow:
    """An in-sample slice plus the m external symbols that precede it."""

    warm: np.ndarray
    external: ReturnSeries

    @classmethod
    def from_series(cls, series: ReturnSeries, start: int, stop: int, memory: int) -> "TrainingWindow":
        if start - memory < 0:
            raise ValueError(f"need {memory} symbols before index {start} for warm-up")
        if stop <= start or stop > len(series):
            raise ValueError("window must be a nonempty range inside the series")
        return cls(np.array(series.binary[start - memory:start]), series.slice(start, stop))

    @property
    def hist_idx(self) -> np.ndarray:
        m = len(self.warm)
        return history_indices(np.concatenate([self.warm, self.external.binary]), m)[:-1]

    @property
    def next_history(self) -> np.ndarray:
        """The m symbols ending at the last in-sample day."""
        m = len(self.warm)
        return np.concatenate([self.warm, self.external.binary])[-m:]

    def __len__(self) -> int:
        return len(self.external)


@dataclass
class GARunResult:
    best_genome: np.ndarray
    best_fitness: FitnessValue
    trace_best: list[float] = field(default_factory=list)
    trace_mean: list[float] = field(default_factory=list)
    generations_run: int = 0
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "best_genome": [[int(w) for w in row] for row in self.best_genome],
            "best_distance": self.best_fitness.distance,
            "trace_best": list(self.trace_best),
            "trace_mean": list(self.trace_mean),
            "generations_run": self.generations_run,
            "seed": self.seed,
        }


def decode(genome: np.ndarray, cfg: GAConfig) -> ThirdPartyGame:
    genome = np.asarray(genome, dtype=np.uint64)
    if genome.shape != (cfg.n_agents, cfg.n_strategies):
        raise ValueError(f"genome shape {genome.shape} does not match N={cfg.n_agents}, S={cfg.n_strategies}")
    return ThirdPartyGame(cfg.variant, genome, cfg.memory, cfg.threshold)


def _pack_bits(bits: np.ndarray) -> np.ndarray:
    weights = np.left_shift(np.uint64(1), np.arange(bits.shape[-1], dtype=np.uint64))
    return (bits.astype(np.uint64) * weights).sum(axis=-1, dtype=np.uint64)


def random_genomes(cfg: GAConfig, rng: np.random.Generator, count: int) -> np.ndarray:
    bits = rng.integers(0, 2, size=(count, cfg.n_agents, cfg.n_strategies, cfg.table_bits))
    return _pack_bits(bits)


def init_population(cfg: GAConfig, rng: np.random.Generator) -> np.ndarray:
    """Population of (P, N, S) genomes with i.i.d. fair table bits."""
    return random_genomes(cfg, rng, cfg.population_size)


def evaluate_population(genomes: np.ndarray, window: TrainingWindow, cfg: GAConfig) -> np.ndarray:
    run = simulate_population(genomes, cfg.variant, cfg.memory, cfg.threshold,
                              window.hist_idx, window.external.binary)
    return -population_distance(cfg.metric, run.demand, window.external, cfg.zero_sign)


def evaluate(genome: np.ndarray, window: TrainingWindow, cfg: GAConfig) -> FitnessValue:
    return FitnessValue(float(-evaluate_population(np.asarray(genome)[None], window, cfg)[0]))


def rank_weights(fitness: np.ndarray) -> np.ndarray:
    """Selection weight P - rank + 1, best rank 1; tied genomes share their average rank."""
    fitness = np.asarray(fitness, dtype=float)
    ranks = rankdata(-fitness, method="average")
    return len(fitness) - ranks + 1.0


def select(fitness: np.ndarray, rng: np.random.Generator, n_pairs: int) -> np.ndarray:
    """Rank-proportional parent pairs, drawn with replacement: (n_pairs, 2) indices."""
    w = rank_weights(fitness)
    return rng.choice(len(w), size=(n_pairs, 2), p=w / w.sum())


def elite_indices(fitness: np.ndarray, count: int) -> np.ndarray:
    return np.argsort(-np.asarray(fitness), kind="stable")[:count]


def crossover(parent_a: np.ndarray, parent_b: np.ndarray, rng: np.random.Generator,
              crossover_rate: float, granularity: str = "agent") -> np.ndarray:
    """Uniform crossover with agent slots (all S tables together) as the unit.

    Works on single genomes (N, S) or stacks of pairs (K, N, S).
    """
    a = np.asarray(parent_a, dtype=np.uint64)
    b = np.asarray(parent_b, dtype=np.uint64)
    if a.shape != b.shape:
        raise ValueError("parents have different dimensions")
    single = a.ndim == 2
    if single:
        a, b = a[None], b[None]
    K, N, S = a.shape
    do_cross = rng.random(K) < crossover_rate
    if granularity == "agent":
        take_a = (rng.random((K, N)) < 0.5)[:, :, None]
    elif granularity == "strategy":
        take_a = rng.random((K, N, S)) < 0.5
    else:
        raise ValueError(f"unknown crossover granularity {granularity!r}")
    take_a = take_a | ~do_cross[:, None, None]
    child = np.where(take_a, a, b)
    return child[0] if single else child


def mutate(genome: np.ndarray, rng: np.random.Generator, mutation_rate_per_bit: float,
           memory: int) -> np.ndarray:
    """Flip each table bit independently with the given probability."""
    g = np.asarray(genome, dtype=np.uint64)
    flips = rng.random(g.shape + (1 << memory,)) < mutation_rate_per_bit
    return g ^ _pack_bits(flips)


def next_generation(pop: np.ndarray, fitness: np.ndarray, cfg: GAConfig, sel_rng, cx_rng, mut_rng) -> np.ndarray:
    elites = pop[elite_indices(fitness, cfg.elite_count)]
    n_children = cfg.population_size - cfg.elite_count
    pairs = select(fitness, sel_rng, n_children)
    children = crossover(pop[pairs[:, 0]], pop[pairs[:, 1]], cx_rng, cfg.crossover_rate,
                         cfg.crossover_granularity)
    children = mutate(children, mut_rng, cfg.mutation_rate_per_bit, cfg.memory)
    return np.concatenate([elites, children])


def run_ga(cfg: GAConfig, window: TrainingWindow) -> GARunResult:
    """Evolve the population until the generation cap or a fitness stall."""
    init_rng, sel_rng, cx_rng, mut_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(4))
    pop = init_population(cfg, init_rng)
    result = GARunResult(pop[0], FitnessValue(np.inf), seed=cfg.seed)
    best = -np.inf
    stall = 0
    while True:
        fitness = evaluate_population(pop, window, cfg)
        i = int(np.argmax(fitness))
        result.trace_best.append(float(fitness[i]))
        result.trace_mean.append(float(fitness.mean()))
        result.generations_run += 1
        if fitness[i] > best + cfg.min_improvement:
            stall = 0
        else:
            stall += 1
        if fitness[i] > best:
            best = float(fitness[i])
            result.best_genome = pop[i].copy()
            result.best_fitness = FitnessValue(-best)
        if result.generations_run >= cfg.max_generations or stall >= cfg.stall_generations:
            return result
        pop = next_generation(pop, fitness, cfg, sel_rng, cx_rng, mut_rng)


def random_baseline(cfg: GAConfig, window: TrainingWindow, n: int, seed: int,
                    batch: int = 2000) -> np.ndarray:
    """Distances of `n` uniformly random genomes on the window."""
    rng = np.random.default_rng(seed)
    out = []
    for start in range(0, n, batch):
        g = random_genomes(cfg, rng, min(batch, n - start))
        out.append(-evaluate_population(g, window, cfg))
    return np.concatenate(out)
