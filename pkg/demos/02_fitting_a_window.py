"""Evolve a game population to match a 25-day window and compare with random genomes.

Run: python demos/02_fitting_a_window.py
"""
# %%
import numpy as np

from abm_reverse.ga import GAConfig, TrainingWindow, run_ga, random_baseline
from abm_reverse.market_data import ReturnSeries, synthetic_dates

rng = np.random.default_rng(11)
series = ReturnSeries.from_returns(synthetic_dates(40), rng.normal(0, 0.01, 40))
cfg = GAConfig(n_agents=15, n_strategies=2, memory=3, seed=1)
window = TrainingWindow.from_series(series, 15, 40, cfg.memory)

# %%
result = run_ga(cfg, window)
print(f"generations run: {result.generations_run}")
print("best distance by generation:", np.round(-np.array(result.trace_best[::10]), 4))

# %% how unusual is that fit?
rand = random_baseline(cfg, window, 5000, seed=2)
best = result.best_fitness.distance
print(f"best {best:.4f}; random genomes: median {np.median(rand):.4f}, "
      f"5th pct {np.percentile(rand, 5):.4f}; beaten by {np.mean(rand <= best):.2%}")
