"""Plant a hidden ensemble, reverse-engineer its output blind, then score recovery."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.stats import binom

from .abm import GameVariant, ThirdPartyGame
from .evaluation import success_rate
from .ga import GAConfig, TrainingWindow, evaluate, random_baseline, random_genomes, run_ga
from .market_data import ReturnSeries
from .pipeline import PredictionRecord, WindowSpec, blackbox_generate, run_experiment


@dataclass(frozen=True)
class PlantedSpec:
    """Either an explicit game or the recipe for a random one."""

    variant: GameVariant = GameVariant.GCMJG
    n_agents: int = 15
    n_strategies: int = 2
    memory: int = 3
    threshold: float = 0.0
    seed: int = 0
    game: Optional[ThirdPartyGame] = None

    def build(self) -> ThirdPartyGame:
        if self.game is not None:
            return self.game
        cfg = GAConfig(variant=self.variant, n_agents=self.n_agents, n_strategies=self.n_strategies,
                       memory=self.memory, threshold=self.threshold)
        tables = random_genomes(cfg, np.random.default_rng(self.seed), 1)[0]
        return ThirdPartyGame(self.variant, tables, self.memory, self.threshold)

    @classmethod
    def from_dict(cls, d: dict) -> "PlantedSpec":
        d = dict(d)
        if "game" in d:
            return cls(game=ThirdPartyGame.from_dict(d["game"]))
        if "variant" in d:
            d["variant"] = GameVariant.parse(d["variant"])
        return cls(**d)


@dataclass
class Scorecard:
    best_distance: float
    random_percentile: float
    holdout_accuracy: float
    holdout_days: int
    holdout_successes: int
    holdout_p_value: float
    planted_distance: float
    genome_bit_agreement: float
    per_day_percentile_mean: float = float("nan")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class BlackBoxExperiment:
    planted: ThirdPartyGame = field(repr=False)
    series: ReturnSeries = field(repr=False)
    records: list[PredictionRecord] = field(repr=False)
    scorecard: Scorecard

    def to_dict(self) -> dict:
        return {
            "planted": self.planted.to_dict(),
            "series": [int(s) for s in self.series.binary],
            "scorecard": self.scorecard.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def reverse_engineer(series: ReturnSeries, spec: WindowSpec, cfg: GAConfig, holdout_days: int,
                     workers: int = 1) -> list[PredictionRecord]:
    """The search path: it only ever receives the generated series."""
    first = len(series) - holdout_days
    return run_experiment(series, list(range(first, len(series))), spec, cfg, workers=workers)


def percentile_vs_random(distance: float, random_distances: np.ndarray) -> float:
    """Share of random genomes that are strictly worse (larger distance)."""
    return float(np.count_nonzero(random_distances > distance)) / len(random_distances)


def run_blackbox(planted_spec: PlantedSpec, cfg: GAConfig, spec: WindowSpec, holdout_days: int,
                 seed: int, n_random: int = 10_000, workers: int = 1,
                 per_day_baseline: bool = False) -> BlackBoxExperiment:
    planted = planted_spec.build()
    m = planted.memory
    if m != cfg.memory:
        raise ValueError("planted memory differs from the search configuration")
    length = m + spec.in_sample_days + holdout_days
    series = blackbox_generate(planted, length, seed)

    records = reverse_engineer(series, spec, cfg, holdout_days, workers)

    # the box is opened only below
    first = len(series) - holdout_days
    window = TrainingWindow.from_series(series, first - spec.in_sample_days, first, m)
    baseline = random_baseline(cfg, window, n_random, seed)
    best = min(records[0].best_distances)
    k = sum(r.correct for r in records)
    n = len(records)
    per_day = float("nan")
    if per_day_baseline:
        pct = []
        for r in records:
            w = TrainingWindow.from_series(series, r.index - spec.in_sample_days, r.index, m)
            pct.append(percentile_vs_random(min(r.best_distances),
                                            random_baseline(cfg, w, n_random, seed)))
        per_day = float(np.mean(pct))
    if planted.tables.shape == (cfg.n_agents, cfg.n_strategies):
        as_planted = replace(cfg, variant=planted.variant, threshold=planted.threshold)
        planted_dist = evaluate(planted.tables, window, as_planted).distance
        agreement = _bit_agreement(planted, records, cfg, series, spec)
    else:
        planted_dist, agreement = float("nan"), float("nan")
    card = Scorecard(
        best_distance=float(best),
        random_percentile=percentile_vs_random(best, baseline),
        holdout_accuracy=success_rate(records),
        holdout_days=n,
        holdout_successes=int(k),
        holdout_p_value=float(binom.sf(k - 1, n, 0.5)),
        planted_distance=float(planted_dist),
        genome_bit_agreement=agreement,
        per_day_percentile_mean=per_day,
    )
    return BlackBoxExperiment(planted, series, records, card)


def _bit_agreement(planted, records, cfg, series, spec) -> float:
    """Informational: fraction of table bits shared with the first day's best genome."""
    first = records[0]
    window = TrainingWindow.from_series(series, first.index - spec.in_sample_days, first.index, cfg.memory)
    genome = run_ga(cfg.with_seed(first.ga_seed_base ^ 1), window).best_genome
    diff = np.bitwise_xor(genome, planted.tables)
    L = 1 << cfg.memory
    flipped = sum(bin(int(x)).count("1") for x in diff.ravel())
    return 1.0 - flipped / (diff.size * L)
