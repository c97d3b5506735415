"""Distances between a game's excess demand and the external return series.

Fitness is the negated distance, so larger is better.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class FitnessError(ValueError):
    pass


class FitnessMetric(str, enum.Enum):
    L1 = "l1"
    L2 = "l2"
    HAMMING_BINARY = "hamming2"
    HAMMING_TERNARY = "hamming3"
    XCORR = "xcorr"

    @classmethod
    def parse(cls, name) -> "FitnessMetric":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise FitnessError(f"unknown metric {name!r}") from None


@dataclass(frozen=True)
class FitnessValue:
    distance: float

    @property
    def fitness(self) -> float:
        return -self.distance


def _demand(steps) -> np.ndarray:
    if len(steps) and hasattr(steps[0], "excess_demand"):
        return np.array([s.excess_demand for s in steps], dtype=float)
    return np.asarray(steps, dtype=float)


def normalize_demand(steps, external) -> np.ndarray:
    """Rescale excess demand to the return series' in-sample standard deviation.

    A constant demand series maps to zeros.
    """
    a = _demand(steps)
    r = np.asarray(getattr(external, "returns", external), dtype=float)
    if a.shape[-1] != r.shape[-1]:
        raise FitnessError("demand and returns differ in length")
    sig_r = np.std(r)
    if sig_r == 0:
        raise FitnessError("flat external window: zero standard deviation")
    sig_a = np.std(a, axis=-1, keepdims=True)
    scale = np.divide(sig_r, sig_a, out=np.zeros_like(sig_a), where=sig_a > 0)
    return a * scale


def sign2(a, zero_sign: int = -1) -> np.ndarray:
    """Binary sign; zero demand carries no bullish information and codes as `zero_sign`."""
    a = np.asarray(a)
    return np.where(a > 0, 1, np.where(a < 0, -1, zero_sign)).astype(np.int8)


def sign3(a) -> np.ndarray:
    return np.sign(np.asarray(a)).astype(np.int8)


def metric_between(metric, x, y) -> float:
    """The underlying distance on already coded series of equal length."""
    metric = FitnessMetric.parse(metric)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise FitnessError("series differ in length")
    if metric is FitnessMetric.L1:
        return float(np.abs(x - y).sum())
    if metric is FitnessMetric.L2:
        return float(np.sqrt(((x - y) ** 2).sum()))
    if metric in (FitnessMetric.HAMMING_BINARY, FitnessMetric.HAMMING_TERNARY):
        return float(np.count_nonzero(x != y))
    return float(_xcorr_distance(x[None], y)[0])


def _xcorr_distance(a: np.ndarray, r: np.ndarray) -> np.ndarray:
    ac = a - a.mean(axis=-1, keepdims=True)
    rc = r - r.mean()
    den = np.sqrt((ac ** 2).sum(axis=-1) * (rc ** 2).sum())
    corr = np.divide((ac * rc).sum(axis=-1), den, out=np.zeros(a.shape[0]), where=den > 0)
    return 1.0 - corr


def population_distance(metric, demand: np.ndarray, external, zero_sign: int = -1) -> np.ndarray:
    """Distance of every row of a (P, T) demand matrix to the external window."""
    metric = FitnessMetric.parse(metric)
    demand = np.atleast_2d(np.asarray(demand, dtype=float))
    T = demand.shape[1]
    r = np.asarray(external.returns, dtype=float)
    if len(r) != T:
        raise FitnessError("demand and external window differ in length")
    if T < 1:
        raise FitnessError("empty window")
    if metric is FitnessMetric.HAMMING_BINARY:
        return np.count_nonzero(sign2(demand, zero_sign) != external.binary, axis=1).astype(float)
    if metric is FitnessMetric.HAMMING_TERNARY:
        return np.count_nonzero(sign3(demand) != external.ternary, axis=1).astype(float)
    if metric is FitnessMetric.XCORR:
        return _xcorr_distance(demand, r)
    rhat = normalize_demand(demand, r)
    if metric is FitnessMetric.L1:
        return np.abs(rhat - r).sum(axis=1)
    return np.sqrt(((rhat - r) ** 2).sum(axis=1))


def distance(metric, steps, external, zero_sign: int = -1) -> FitnessValue:
    """Distance between one game's steps and the external window."""
    a = _demand(steps)
    if len(a) != len(external.returns):
        raise FitnessError("steps and external window differ in length")
    if len(a) == 0:
        raise FitnessError("empty window")
    metric = FitnessMetric.parse(metric)
    if metric is FitnessMetric.HAMMING_BINARY:
        d = metric_between(metric, sign2(a, zero_sign), external.binary)
    elif metric is FitnessMetric.HAMMING_TERNARY:
        d = metric_between(metric, sign3(a), external.ternary)
    elif metric is FitnessMetric.XCORR:
        d = metric_between(metric, a, external.returns)
    else:
        d = metric_between(metric, normalize_demand(a, external.returns), external.returns)
    return FitnessValue(d)
