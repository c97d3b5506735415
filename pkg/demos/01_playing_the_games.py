"""Minority vs majority agents on one return series.

Run: python demos/01_playing_the_games.py
"""
# %%
import numpy as np

from abm_reverse.abm import GameVariant, ThirdPartyGame, run_window, predict_next

rng = np.random.default_rng(3)
returns = rng.normal(0, 0.01, 60)
symbols = np.where(returns >= 0, 1, -1)

# 11 agents, 2 strategies each, memory 2 -> each strategy is a 4-entry lookup table
m = 2
tables = rng.integers(0, 1 << (1 << m), size=(11, 2), dtype=np.uint64)

# %% same agents, different rules
for variant in GameVariant:
    game = ThirdPartyGame(variant, tables, m, threshold=0.0)
    steps, end = run_window(game, symbols[m:], symbols[:m])
    demand = np.array([s.excess_demand for s in steps])
    active = np.mean([np.count_nonzero(s.actions) for s in steps])
    print(f"{variant.value:9s} mean |A| {np.abs(demand).mean():.2f}  active agents/day {active:.1f}  "
          f"next-day call {predict_next(end, symbols[-m:]):+d}")

# %% a high threshold keeps everyone out of the market
quiet = ThirdPartyGame("GCMjG", tables, m, threshold=1e9)
steps, _ = run_window(quiet, symbols[m:], symbols[:m])
print("threshold 1e9 -> all demand zero:", all(s.excess_demand == 0 for s in steps))
