"""Plant a hidden game, let the search see only its output, then open the box.

Run: python demos/03_black_box.py   (about a minute on one core)
"""
# %%
from abm_reverse.blackbox import PlantedSpec, run_blackbox
from abm_reverse.ga import GAConfig
from abm_reverse.pipeline import WindowSpec

planted = PlantedSpec(variant="GCMjG", n_agents=15, n_strategies=2, memory=3, seed=0)
exp = run_blackbox(planted, GAConfig(seed=0), WindowSpec(in_sample_days=25, ensemble_runs=10),
                   holdout_days=20, seed=0, n_random=2000)

# %%
card = exp.scorecard
print(f"in-sample distance {card.best_distance:.4f} (planted game itself: {card.planted_distance:.4f})")
print(f"better than {card.random_percentile:.1%} of random genomes")
print(f"holdout: {card.holdout_successes}/{card.holdout_days} correct, p = {card.holdout_p_value:.3g}")
print(f"table bits shared with the planted game: {card.genome_bit_agreement:.2f}")
