"""Sliding-window next-day prediction with an ensemble of GA runs."""
from __future__ import annotations

import datetime as dt
import json
import logging
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .abm import GameVariant, ThirdPartyGame, decide, predict_next, run_window, score_update
from .ga import GAConfig, TrainingWindow, decode, run_ga
from .market_data import ReturnSeries, synthetic_dates

logger = logging.getLogger(__name__)


class PipelineError(ValueError):
    pass


class DegenerateGameWarning(UserWarning):
    pass


@dataclass(frozen=True)
class WindowSpec:
    in_sample_days: int = 25
    ensemble_runs: int = 10
    combiner: str = "mean"  # or "vote"

    def validate(self, memory: int) -> None:
        if self.in_sample_days < memory + 1:
            raise PipelineError(f"in_sample_days ({self.in_sample_days}) must be >= memory + 1 ({memory + 1})")
        if self.ensemble_runs < 1:
            raise PipelineError("ensemble_runs must be >= 1")
        if self.combiner not in ("mean", "vote"):
            raise PipelineError("combiner must be 'mean' or 'vote'")


@dataclass(frozen=True)
class PredictionRecord:
    date: dt.date
    index: int
    variant: GameVariant
    param_set: str
    per_run_demand: tuple[int, ...]
    mean_demand: float
    predicted_sign: int
    realized_sign: int
    realized_return: float
    dispersion: float
    ga_seed_base: int
    tie: bool = False
    best_distances: tuple[float, ...] = field(default=())

    @property
    def correct(self) -> bool:
        return self.predicted_sign == self.realized_sign

    def to_dict(self) -> dict:
        d = asdict(self)
        d["date"] = self.date.isoformat()
        d["variant"] = self.variant.value
        d["per_run_demand"] = list(self.per_run_demand)
        d["best_distances"] = list(self.best_distances)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "PredictionRecord":
        return cls(
            date=dt.date.fromisoformat(d["date"]),
            index=int(d["index"]),
            variant=GameVariant.parse(d["variant"]),
            param_set=str(d["param_set"]),
            per_run_demand=tuple(int(a) for a in d["per_run_demand"]),
            mean_demand=float(d["mean_demand"]),
            predicted_sign=int(d["predicted_sign"]),
            realized_sign=int(d["realized_sign"]),
            realized_return=float(d["realized_return"]),
            dispersion=float(d["dispersion"]),
            ga_seed_base=int(d["ga_seed_base"]),
            tie=bool(d.get("tie", False)),
            best_distances=tuple(float(x) for x in d.get("best_distances", ())),
        )

    @property
    def key(self) -> tuple:
        return (self.variant.value, self.param_set, self.date)


def day_seed(master_seed: int, variant: GameVariant, t: int) -> int:
    """Per-day GA seed base; run k of the ensemble uses ``base ^ k``."""
    code = list(GameVariant).index(GameVariant.parse(variant))
    ss = np.random.SeedSequence([int(master_seed), code, int(t)])
    return int(ss.generate_state(1, np.uint64)[0])


def train_and_predict(window: TrainingWindow, cfg: GAConfig) -> tuple[int, float]:
    """One ensemble member: search, replay the best genome in-sample, predict.

    Returns (raw next-day excess demand, best in-sample distance).
    """
    res = run_ga(cfg, window)
    game = decode(res.best_genome, cfg)
    _, trained = run_window(game, window.external, window.warm)
    if trained.pending is not None:
        logger.debug("discarding unsettled pending decision at prediction time")
    return predict_next(trained, window.next_history), res.best_fitness.distance


def combine(demands: Sequence[int], n_agents: int, combiner: str = "mean") -> tuple[float, float, int, bool]:
    """Ensemble demand -> (mean, dispersion, predicted sign, tie flag).

    Each run's demand is taken as a fraction of N. A zero mean predicts a
    down day and raises the tie flag.
    """
    a = np.asarray(demands, dtype=float) / n_agents
    votes = np.sign(a) if combiner == "vote" else a
    mean = float(votes.mean())
    dispersion = float(a.std())
    if mean > 0:
        return mean, dispersion, 1, False
    if mean < 0:
        return mean, dispersion, -1, False
    return mean, dispersion, -1, True


def _check_day(external: ReturnSeries, t: int, spec: WindowSpec, cfg: GAConfig) -> None:
    spec.validate(cfg.memory)
    if t < spec.in_sample_days + cfg.memory:
        raise PipelineError(f"day index {t} lacks {spec.in_sample_days} in-sample days plus "
                            f"{cfg.memory} warm-up symbols")
    if t >= len(external):
        raise PipelineError(f"day index {t} is beyond the series (length {len(external)})")


def _window_for(external: ReturnSeries, t: int, spec: WindowSpec, cfg: GAConfig) -> TrainingWindow:
    # the search only ever sees data strictly before t
    past = external.head(t)
    return TrainingWindow.from_series(past, t - spec.in_sample_days, t, cfg.memory)


def _make_record(external, t, spec, cfg, base, results, param_set) -> PredictionRecord:
    demands = [int(r[0]) for r in results]
    mean, disp, pred, tie = combine(demands, cfg.n_agents, spec.combiner)
    if tie:
        logger.info("tie on %s: all runs net to zero demand, predicting down", external.dates[t])
    return PredictionRecord(
        date=external.dates[t], index=t, variant=cfg.variant, param_set=param_set,
        per_run_demand=tuple(demands), mean_demand=mean, predicted_sign=pred,
        realized_sign=int(external.binary[t]), realized_return=float(external.returns[t]),
        dispersion=disp, ga_seed_base=base, tie=tie,
        best_distances=tuple(float(r[1]) for r in results),
    )


def predict_day(external: ReturnSeries, t: int, spec: WindowSpec, cfg: GAConfig,
                param_set: str = "default") -> PredictionRecord:
    """Ensemble prediction of the sign of day t from the in-sample window before it."""
    _check_day(external, t, spec, cfg)
    window = _window_for(external, t, spec, cfg)
    base = day_seed(cfg.seed, cfg.variant, t)
    results = [train_and_predict(window, cfg.with_seed(base ^ k))
               for k in range(1, spec.ensemble_runs + 1)]
    return _make_record(external, t, spec, cfg, base, results, param_set)


# ---------------------------------------------------------------------------
# checkpointed experiments


def read_records(path) -> list[PredictionRecord]:
    path = Path(path)
    out = []
    with path.open() as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(PredictionRecord.from_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise PipelineError(f"{path}:{n}: bad record ({exc})") from None
    return out


def write_records(path, records: Iterable[PredictionRecord]) -> None:
    """Atomically replace `path` with the records in canonical order."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    recs = sorted(records, key=lambda r: r.key)
    with tmp.open("w") as fh:
        for r in recs:
            fh.write(r.to_json() + "\n")
    os.replace(tmp, path)


def _append(path: Path, record: PredictionRecord) -> None:
    with path.open("a") as fh:
        fh.write(record.to_json() + "\n")
        fh.flush()
        os.fsync(fh.fileno())


def _resolve_days(external: ReturnSeries, days) -> list[int]:
    out = []
    for d in days:
        out.append(external.index_of(d) if isinstance(d, dt.date) else int(d))
    return out


def run_experiment(external: ReturnSeries, days, spec: WindowSpec, cfg: GAConfig, *,
                   workers: int = 1, checkpoint=None, param_set: str = "default",
                   progress=None) -> list[PredictionRecord]:
    """Predict every requested day independently.

    With a checkpoint path, finished records are appended as they complete
    and already present ones are reused; the file is rewritten in canonical
    order at the end so its contents do not depend on scheduling.
    """
    idx = _resolve_days(external, days)
    for t in idx:
        _check_day(external, t, spec, cfg)
    done: dict[tuple, PredictionRecord] = {}
    others: list[PredictionRecord] = []
    ckpt = Path(checkpoint) if checkpoint is not None else None
    if ckpt is not None and ckpt.exists():
        for r in read_records(ckpt):
            if r.variant == cfg.variant and r.param_set == param_set:
                done[r.key] = r
            else:
                others.append(r)
    todo = [t for t in idx if (cfg.variant.value, param_set, external.dates[t]) not in done]
    if done:
        logger.info("resuming: %d of %d days already complete", len(idx) - len(todo), len(idx))

    def finish(t, base, results):
        rec = _make_record(external, t, spec, cfg, base, results, param_set)
        done[rec.key] = rec
        if ckpt is not None:
            _append(ckpt, rec)
        if progress is not None:
            progress(rec)

    jobs = {}
    for t in todo:
        base = day_seed(cfg.seed, cfg.variant, t)
        window = _window_for(external, t, spec, cfg)
        jobs[t] = (base, [(window, cfg.with_seed(base ^ k)) for k in range(1, spec.ensemble_runs + 1)])

    try:
        if workers <= 1 or not todo:
            for t, (base, args) in jobs.items():
                finish(t, base, [train_and_predict(*a) for a in args])
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = {t: [pool.submit(train_and_predict, *a) for a in args]
                           for t, (base, args) in jobs.items()}
                for t, futs in futures.items():
                    finish(t, jobs[t][0], [f.result() for f in futs])
    finally:
        if ckpt is not None and (done or others):
            write_records(ckpt, list(done.values()) + others)

    return [done[(cfg.variant.value, param_set, external.dates[t])] for t in idx]


# ---------------------------------------------------------------------------
# black-box series


def blackbox_generate(planted: ThirdPartyGame, length: int, seed: int) -> ReturnSeries:
    """Closed-loop series from a planted game.

    The first m symbols are random; afterwards each day's symbol is the sign
    of the planted game's excess demand (a seeded coin flip when it is zero),
    fed back as both the realized sign and the next history bit.
    """
    m = planted.memory
    if length < m + 1:
        raise PipelineError(f"length must be >= memory + 1 ({m + 1})")
    rng = np.random.default_rng(seed)
    symbols = [int(s) for s in rng.choice([-1, 1], size=m)]
    game = planted
    acted = False
    while len(symbols) < length:
        step = decide(game, symbols[-m:])
        a = step.excess_demand
        acted = acted or any(step.actions)
        sym = 1 if a > 0 else -1 if a < 0 else int(rng.choice([-1, 1]))
        game = score_update(game, step, sym)
        symbols.append(sym)
    if not acted:
        warnings.warn("planted game never traded; series is pure coin flips", DegenerateGameWarning)
    return ReturnSeries.from_returns(synthetic_dates(length), np.array(symbols, dtype=float))
