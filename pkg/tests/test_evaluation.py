import datetime as dt

import numpy as np
import pytest
from scipy import stats

from abm_reverse.abm import GameVariant
from abm_reverse.evaluation import (EmptyInput, UnlabeledDate, benchmark_rates, exact_p_value,
                                    exact_tail_rate, format_row, label_days, null_distribution,
                                    p_value, regime_breakdown, success_rate)
from abm_reverse.market_data import RegimeLabel
from abm_reverse.pipeline import PredictionRecord

D0 = dt.date(2001, 1, 1)


def rec(i, pred, real, variant="GCMjG", param_set="default", ret=None):
    return PredictionRecord(
        date=D0 + dt.timedelta(days=i), index=i, variant=GameVariant.parse(variant), param_set=param_set,
        per_run_demand=(pred,), mean_demand=float(pred), predicted_sign=pred, realized_sign=real,
        realized_return=0.01 * real if ret is None else ret, dispersion=0.0, ga_seed_base=0)


def test_success_rate_examples():
    assert success_rate([rec(i, 1, 1) for i in range(5)]) == 1.0
    assert success_rate([rec(i, 1, 1 if i % 2 else -1) for i in range(10)]) == 0.5
    recs = [rec(i, 1, 1 if i < 345 else -1) for i in range(606)]
    assert success_rate(recs) == pytest.approx(345 / 606)
    assert round(success_rate(recs), 2) == 0.57
    with pytest.raises(EmptyInput):
        success_rate([])


def test_negation_complement():
    rng = np.random.default_rng(0)
    recs = [rec(i, int(rng.choice([-1, 1])), int(rng.choice([-1, 1]))) for i in range(77)]
    neg = [rec(r.index, -r.predicted_sign, r.realized_sign) for r in recs]
    assert success_rate(recs) + success_rate(neg) == 1.0


def test_null_single_day():
    null = null_distribution(1, 1000, seed=1)
    assert set(np.unique(null.success_counts)) <= {0, 1}
    assert abs(null.success_counts.mean() - 0.5) < 0.06


def test_null_mean_within_three_sigma():
    n = 606
    null = null_distribution(n, 1000, seed=2, realized=np.random.default_rng(3).choice([-1, 1], n))
    sigma = 0.5 / np.sqrt(n * 1000)
    assert abs(null.success_counts.mean() / n - 0.5) < 3 * sigma
    assert null.success_counts.min() >= 0 and null.success_counts.max() <= n


def test_exact_tail_value():
    # a 0.55 success rate over 606 days rounds to p = 0.01
    tail = exact_tail_rate(0.55, 606)
    assert tail == pytest.approx(stats.binom.sf(333, 606, 0.5))
    assert tail == pytest.approx(0.006574, abs=1e-6)
    assert round(tail, 2) == 0.01


def test_p_value_extremes():
    null = null_distribution(50, 1000, seed=0)
    assert p_value(50, null) == 0.0
    assert p_value(0, null) == pytest.approx(1.0, abs=0.01)


@pytest.mark.parametrize("seed", range(5))
def test_p_value_at_055(seed):
    null = null_distribution(606, 1000, seed=seed)
    assert 0.002 <= p_value(333, null) <= 0.02


def test_p_value_antitone():
    null = null_distribution(100, 1000, seed=4)
    ps = [p_value(k, null) for k in range(101)]
    assert all(a >= b for a, b in zip(ps, ps[1:]))
    assert exact_p_value(50, 100) > exact_p_value(60, 100)


def test_null_calibration_ks():
    n = 606
    support = np.arange(n + 1)
    cdf = stats.binom.cdf(support, n, 0.5)
    crit = stats.kstwo.ppf(0.99, 1000)
    passed = 0
    for seed in range(40):
        counts = null_distribution(n, 1000, seed=seed).success_counts
        ecdf = np.searchsorted(np.sort(counts), support, side="right") / 1000
        passed += np.max(np.abs(ecdf - cdf)) < crit
    assert passed / 40 >= 0.95


def labels(recs, label):
    return {r.date: label for r in recs}


def test_breakdown_all_nontrending():
    recs = [rec(i, 1, 1 if i % 2 else -1) for i in range(20)]
    rep = regime_breakdown(recs, labels(recs, RegimeLabel.NON_TRENDING))
    assert rep.row("GCMjG", "Trending").n_days == 0
    assert rep.row("GCMjG", "NonTrending").n_days == 20
    assert "Non-trending periods" in rep.render()


def test_breakdown_hand_tally():
    recs = [rec(i, 1, 1 if i < 7 else -1) for i in range(12)]
    reg = {r.date: (RegimeLabel.TRENDING_UP if r.index < 5 else
                    RegimeLabel.NON_TRENDING if r.index < 9 else RegimeLabel.UNCLASSIFIED)
           for r in recs}
    rep = regime_breakdown(recs, reg)
    tr, nt, al = (rep.row("GCMjG", b) for b in ("Trending", "NonTrending", "All"))
    assert (tr.n_days, tr.successes) == (5, 5)
    assert (nt.n_days, nt.successes) == (4, 2)
    assert (al.n_days, al.successes) == (12, 7)
    assert tr.n_days + nt.n_days + rep.unclassified_days["GCMjG"] == al.n_days


def test_breakdown_unlabeled_date():
    recs = [rec(i, 1, 1) for i in range(3)]
    with pytest.raises(UnlabeledDate):
        regime_breakdown(recs, {recs[0].date: RegimeLabel.NON_TRENDING})


def test_breakdown_min_max_over_param_sets():
    a = [rec(i, 1, 1 if i < 6 else -1, param_set="a") for i in range(10)]
    b = [rec(i, 1, 1 if i < 8 else -1, param_set="b") for i in range(10)]
    rep = regime_breakdown(a + b, labels(a, RegimeLabel.TRENDING_UP))
    row = rep.row("GCMjG", "All")
    assert (row.min_rate, row.max_rate, row.success_rate) == (0.6, 0.8, pytest.approx(0.7))
    assert row.n_days == 10 and row.n_param_sets == 2


def test_format_row_layout():
    assert format_row(0.01, 0.55, 0.51, 0.60) == "(0.01) 0.55 | 0.51 | 0.60"
    assert format_row(0.0, 0.67, 0.64, 0.70) == "(0.00) 0.67 | 0.64 | 0.70"


def test_render_contains_row_format():
    recs = [rec(i, 1, 1 if i % 3 else -1) for i in range(30)]
    text = regime_breakdown(recs, labels(recs, RegimeLabel.TRENDING_UP)).render()
    import re
    assert re.search(r"GCMjG\s+\| \(\d\.\d\d\) \d\.\d\d \| \d\.\d\d \| \d\.\d\d", text)


def test_benchmarks():
    up = [rec(i, 1, 1 if i % 3 else -1) for i in range(30)]
    b = benchmark_rates(up, labels(up, RegimeLabel.TRENDING_UP))
    assert b["Trending"]["buy_and_hold"] == pytest.approx(2 / 3)
    flat = [rec(i, 1, 1 if i % 2 else -1) for i in range(30)]
    b = benchmark_rates(flat, labels(flat, RegimeLabel.NON_TRENDING))
    assert b["NonTrending"]["buy_and_hold"] == 0.5 and b["NonTrending"]["sell_and_hold"] == 0.5
    allup = [rec(i, 1, 1) for i in range(10)]
    assert benchmark_rates(allup, labels(allup, RegimeLabel.TRENDING_UP))["All"]["buy_and_hold"] == 1.0


def test_zero_return_days_counted():
    recs = [rec(0, 1, 1, ret=0.0), rec(1, 1, 1), rec(2, -1, -1)]
    rep = regime_breakdown(recs, labels(recs, RegimeLabel.UNCLASSIFIED))
    assert rep.row("GCMjG", "All").zero_return_days == 1


def test_label_days_from_ranges():
    dates = [D0 + dt.timedelta(days=i) for i in range(9)]
    rets = [0.01, 0.01, -0.01, 0.01, -0.01, 0.02, 0.0, 0.0, 0.0]
    out = label_days(dates, rets, [{"start": dates[0], "end": dates[2]},
                                   {"start": dates[3].isoformat(), "end": dates[4].isoformat()},
                                   {"start": dates[5], "end": dates[5], "label": "TrendingDown"}])
    assert [out[d] for d in dates[:6]] == [RegimeLabel.TRENDING_UP] * 3 + \
        [RegimeLabel.NON_TRENDING] * 2 + [RegimeLabel.TRENDING_DOWN]
    assert out[dates[8]] is RegimeLabel.UNCLASSIFIED
