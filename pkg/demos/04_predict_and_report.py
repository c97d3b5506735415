"""Walk-forward predictions on real prices and the regime table.

Run: python demos/04_predict_and_report.py
"""
# %%
from pathlib import Path

from abm_reverse.evaluation import label_days, regime_breakdown
from abm_reverse.ga import GAConfig
from abm_reverse.market_data import load_prices, to_returns
from abm_reverse.pipeline import WindowSpec, run_experiment

csv = Path(__file__).resolve().parents[1] / "tests" / "data" / "goog_daily.csv"
series = to_returns(load_prices(csv))
days = list(range(len(series) - 15, len(series)))

# %% two variants, small GA so this stays quick
records = []
for variant in ("GCMjG", "GCMG"):
    cfg = GAConfig(variant=variant, population_size=30, max_generations=60, seed=4)
    records += run_experiment(series, days, WindowSpec(ensemble_runs=5), cfg)

# %% label 5-day blocks by their up/down day count; mixed blocks stay Unclassified
dates = [series.dates[t] for t in days]
blocks = [{"start": dates[i], "end": dates[min(i + 4, len(dates) - 1)]} for i in range(0, len(dates), 5)]
regimes = label_days(dates, series.returns[days], blocks)
print({d.isoformat(): regimes[d].value for d in dates[::5]})
print(regime_breakdown(records, regimes, n_strategies=1000, seed=0).render())
