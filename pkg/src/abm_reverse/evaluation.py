"""Success rates, random-strategy significance and regime breakdowns."""
from __future__ import annotations

import datetime as dt
import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.stats import binom

from .abm import GameVariant
from .market_data import RegimeLabel


class EvaluationError(ValueError):
    pass


class EmptyInput(EvaluationError):
    pass


class UnlabeledDate(EvaluationError):
    pass


BUCKETS = ("All", "Trending", "NonTrending")
BUCKET_TITLES = {"All": "All periods", "Trending": "Trending periods",
                 "NonTrending": "Non-trending periods"}


def success_rate(records) -> float:
    records = list(records)
    if not records:
        raise EmptyInput("no records")
    return sum(r.predicted_sign == r.realized_sign for r in records) / len(records)


@dataclass(frozen=True)
class NullDistribution:
    n_days: int
    n_strategies: int
    success_counts: np.ndarray
    seed: int


def null_distribution(n_days: int, n_strategies: int = 1000, seed: int = 0,
                      realized: Optional[Sequence[int]] = None) -> NullDistribution:
    """Success counts of fair-coin sign guessers against a fixed realized sequence.

    Each count is Binomial(n_days, 1/2) whatever the realized signs are; they
    default to all up.
    """
    if n_days < 1:
        raise EvaluationError("n_days must be >= 1")
    realized = np.ones(n_days, dtype=np.int8) if realized is None else np.asarray(realized)
    if len(realized) != n_days:
        raise EvaluationError("realized sequence length differs from n_days")
    rng = np.random.default_rng(seed)
    counts = np.empty(n_strategies, dtype=np.int64)
    chunk = max(1, 2_000_000 // n_days)
    for start in range(0, n_strategies, chunk):
        k = min(chunk, n_strategies - start)
        guesses = rng.integers(0, 2, size=(k, n_days), dtype=np.int8) * 2 - 1
        counts[start:start + k] = (guesses == realized).sum(axis=1)
    return NullDistribution(n_days, n_strategies, counts, seed)


def p_value(observed: int, null: NullDistribution) -> float:
    """Fraction of random strategies that strictly beat the observed success count."""
    return float(np.count_nonzero(null.success_counts > observed)) / null.n_strategies


def exact_p_value(observed: int, n_days: int) -> float:
    """P(Binomial(n_days, 1/2) > observed)."""
    return float(binom.sf(observed, n_days, 0.5))


def exact_tail_rate(rate: float, n_days: int) -> float:
    """P(Binomial(n_days, 1/2) / n_days >= rate)."""
    k = int(np.ceil(rate * n_days - 1e-9))
    return float(binom.sf(k - 1, n_days, 0.5))


def bucket_of(label: RegimeLabel) -> str:
    if label.trending:
        return "Trending"
    if label is RegimeLabel.NON_TRENDING:
        return "NonTrending"
    return "Unclassified"


@dataclass
class BucketRow:
    variant: str
    bucket: str
    n_days: int
    successes: int = 0
    success_rate: float = float("nan")
    p_value: float = float("nan")
    exact_p_value: float = float("nan")
    min_rate: float = float("nan")
    max_rate: float = float("nan")
    n_param_sets: int = 0
    buy_and_hold: float = float("nan")
    sell_and_hold: float = float("nan")
    zero_return_days: int = 0


@dataclass
class SuccessReport:
    rows: list[BucketRow] = field(default_factory=list)
    n_strategies: int = 1000
    null_seed: int = 0
    unclassified_days: dict = field(default_factory=dict)
    tie_days: int = 0

    def row(self, variant, bucket: str) -> BucketRow:
        v = GameVariant.parse(variant).value
        for r in self.rows:
            if r.variant == v and r.bucket == bucket:
                return r
        raise KeyError((v, bucket))

    def to_dict(self) -> dict:
        def clean(x):
            return None if isinstance(x, float) and np.isnan(x) else x
        return {
            "n_strategies": self.n_strategies,
            "null_seed": self.null_seed,
            "unclassified_days": dict(self.unclassified_days),
            "tie_days": self.tie_days,
            "rows": [{k: clean(v) for k, v in asdict(r).items()} for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def render(self) -> str:
        return render_table(self)


def format_row(p: float, avg: float, lo: float, hi: float) -> str:
    return f"({p:.2f}) {avg:.2f} | {lo:.2f} | {hi:.2f}"


def render_table(report: SuccessReport) -> str:
    head = f"{'agent type':<10} | {'(p-val) avg':<11} | {'min':<4} | {'max':<4} | {'n':>4} | {'B&H':<4} | {'S&H':<4}"
    lines = [head, "-" * len(head)]
    variants = list(dict.fromkeys(r.variant for r in report.rows))
    for bucket in BUCKETS:
        lines.append(f"[{BUCKET_TITLES[bucket]}]")
        for v in variants:
            r = report.row(v, bucket)
            if r.n_days == 0:
                lines.append(f"{v:<10} | {'-':<11} | {'-':<4} | {'-':<4} | {0:>4} | {'-':<4} | {'-':<4}")
                continue
            body = format_row(r.p_value, r.success_rate, r.min_rate, r.max_rate)
            lines.append(f"{v:<10} | {body} | {r.n_days:>4} | {r.buy_and_hold:.2f} | {r.sell_and_hold:.2f}")
    unc = ", ".join(f"{k}={n}" for k, n in report.unclassified_days.items())
    lines.append(f"unclassified days excluded from regime buckets: {unc or 0}; "
                 f"ties predicted down: {report.tie_days}; null: {report.n_strategies} random strategies")
    return "\n".join(lines) + "\n"


def _label(regimes: Mapping, day: dt.date) -> RegimeLabel:
    try:
        return RegimeLabel(regimes[day])
    except KeyError:
        raise UnlabeledDate(f"no regime label for {day}") from None


def benchmark_rates(records, regimes: Mapping) -> dict[str, dict[str, float]]:
    """Buy-and-hold / sell-and-hold success per bucket: the share of up / down days."""
    days: dict[str, dict] = defaultdict(dict)
    for r in records:
        b = bucket_of(_label(regimes, r.date))
        days["All"][r.date] = r.realized_sign
        days[b][r.date] = r.realized_sign
    out = {}
    for b in BUCKETS + ("Unclassified",):
        signs = np.array(list(days.get(b, {}).values()))
        if signs.size:
            up = float(np.count_nonzero(signs > 0)) / signs.size
            out[b] = {"buy_and_hold": up, "sell_and_hold": 1.0 - up, "n_days": int(signs.size)}
        else:
            out[b] = {"buy_and_hold": float("nan"), "sell_and_hold": float("nan"), "n_days": 0}
    return out


def regime_breakdown(records, regimes: Mapping, n_strategies: int = 1000,
                     seed: int = 0) -> SuccessReport:
    """Table of success rates per game variant and regime bucket.

    Buckets are all days, trending (up or down) days and non-trending days.
    With several GA parameter sets the reported rate is their mean and
    min/max span them; the p-value refers to the mean rate.
    """
    records = list(records)
    if not records:
        raise EmptyInput("no records")
    grouped: dict[tuple, dict[str, list]] = defaultdict(lambda: defaultdict(list))
    unclassified: dict[str, set] = defaultdict(set)
    for r in records:
        label = _label(regimes, r.date)
        b = bucket_of(label)
        grouped[(r.variant.value, "All")][r.param_set].append(r)
        if b == "Unclassified":
            unclassified[r.variant.value].add(r.date)
        else:
            grouped[(r.variant.value, b)][r.param_set].append(r)
    bench = benchmark_rates(records, regimes)
    report = SuccessReport(n_strategies=n_strategies, null_seed=seed,
                           unclassified_days={v: len(d) for v, d in unclassified.items()},
                           tie_days=sum(r.tie for r in records))
    nulls: dict[int, NullDistribution] = {}
    variants = [v.value for v in GameVariant if any(r.variant is v for r in records)]
    for v in variants:
        for b in BUCKETS:
            sets = grouped.get((v, b), {})
            row = BucketRow(v, b, 0)
            if sets:
                rates = [success_rate(rs) for rs in sets.values()]
                days = {r.date for rs in sets.values() for r in rs}
                n = len(days)
                avg = float(np.mean(rates))
                observed = int(round(avg * n))
                if n not in nulls:
                    nulls[n] = null_distribution(n, n_strategies, seed)
                zero_days = {r.date for rs in sets.values() for r in rs if r.realized_return == 0}
                row = BucketRow(
                    variant=v, bucket=b, n_days=n, successes=observed, success_rate=avg,
                    p_value=p_value(observed, nulls[n]), exact_p_value=exact_p_value(observed, n),
                    min_rate=float(min(rates)), max_rate=float(max(rates)), n_param_sets=len(rates),
                    buy_and_hold=bench[b]["buy_and_hold"], sell_and_hold=bench[b]["sell_and_hold"],
                    zero_return_days=len(zero_days),
                )
            report.rows.append(row)
    return report


def label_days(dates: Sequence[dt.date], returns: Sequence[float],
               ranges: Sequence[Mapping]) -> dict[dt.date, RegimeLabel]:
    """Per-day regime labels from explicit date ranges.

    A range without a ``label`` is classified from the returns it covers.
    Days outside every range are Unclassified.
    """
    from .market_data import classify_regime

    dates = list(dates)
    r = np.asarray(returns, dtype=float)
    out = {d: RegimeLabel.UNCLASSIFIED for d in dates}
    for block in ranges:
        start, end = _as_date(block["start"]), _as_date(block["end"])
        if end < start:
            raise EvaluationError(f"regime range ends before it starts: {start}..{end}")
        mask = np.array([start <= d <= end for d in dates], dtype=bool)
        if not mask.any():
            continue
        label = block.get("label")
        label = RegimeLabel(label) if label else classify_regime(r[mask])
        for d, inside in zip(dates, mask):
            if inside:
                out[d] = label
    return out


def _as_date(x) -> dt.date:
    return x if isinstance(x, dt.date) else dt.date.fromisoformat(str(x))
