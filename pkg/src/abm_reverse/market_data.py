"""Price ingestion, return series and regime labelling."""
from __future__ import annotations

import csv
import datetime as dt
import enum
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)


class MarketDataError(ValueError):
    pass


class MalformedRow(MarketDataError):
    pass


class NonPositivePrice(MarketDataError):
    pass


class DuplicateDate(MarketDataError):
    pass


class SeriesTooShort(MarketDataError):
    pass


class EmptyWindow(MarketDataError):
    pass


@dataclass(frozen=True)
class PriceSeries:
    dates: tuple[dt.date, ...]
    closes: np.ndarray

    def __post_init__(self):
        closes = np.asarray(self.closes, dtype=float)
        closes.setflags(write=False)
        object.__setattr__(self, "closes", closes)
        if len(self.dates) != len(closes):
            raise MarketDataError("dates and closes differ in length")
        if len(closes) < 2:
            raise SeriesTooShort("a price series needs at least 2 entries")
        if np.any(~(closes > 0)):
            raise NonPositivePrice("closes must be strictly positive")
        for a, b in zip(self.dates, self.dates[1:]):
            if not a < b:
                raise MarketDataError(f"dates not strictly increasing at {b}")

    def __len__(self) -> int:
        return len(self.closes)


def load_prices(path, date_column: str = "date", close_column: str = "close") -> PriceSeries:
    """Read a CSV with a header row holding ISO dates and decimal closes.

    Extra columns are ignored; rows are sorted ascending by date.
    """
    path = Path(path)
    rows: dict[dt.date, float] = {}
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or date_column not in reader.fieldnames \
                or close_column not in reader.fieldnames:
            raise MalformedRow(f"{path}: header must contain '{date_column}' and '{close_column}'")
        for row in reader:
            line = reader.line_num
            try:
                day = dt.date.fromisoformat(row[date_column].strip())
                close = float(row[close_column])
            except (TypeError, ValueError, AttributeError) as exc:
                raise MalformedRow(f"{path}:{line}: cannot parse row ({exc})") from None
            if not close > 0:
                raise NonPositivePrice(f"{path}:{line}: non-positive close {close}")
            if day in rows:
                raise DuplicateDate(f"{path}:{line}: duplicate date {day}")
            rows[day] = close
    dates = sorted(rows)
    return PriceSeries(tuple(dates), np.array([rows[d] for d in dates]))


def binary_code(r: np.ndarray) -> np.ndarray:
    """Up/down coding; a zero return codes as up."""
    return np.where(np.asarray(r) >= 0, 1, -1).astype(np.int8)


def ternary_code(r: np.ndarray) -> np.ndarray:
    return np.sign(np.asarray(r)).astype(np.int8)


@dataclass(frozen=True)
class ReturnSeries:
    """Dated returns with their binary {+1,-1} and ternary {+1,0,-1} codings."""

    dates: tuple[dt.date, ...]
    returns: np.ndarray
    binary: np.ndarray
    ternary: np.ndarray

    def __post_init__(self):
        for name in ("returns", "binary", "ternary"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = len(self.returns)
        if not (len(self.dates) == len(self.binary) == len(self.ternary) == n):
            raise MarketDataError("return series fields differ in length")

    @classmethod
    def from_returns(cls, dates: Sequence[dt.date], returns) -> "ReturnSeries":
        r = np.asarray(returns, dtype=float)
        zeros = int(np.count_nonzero(r == 0))
        if zeros:
            logger.info("%d zero returns coded as up in the binary history", zeros)
        return cls(tuple(dates), r, binary_code(r), ternary_code(r))

    def __len__(self) -> int:
        return len(self.returns)

    def head(self, stop: int) -> "ReturnSeries":
        """Entries [0, stop) only; nothing at or beyond `stop` is reachable."""
        return ReturnSeries(self.dates[:stop], self.returns[:stop].copy(),
                            self.binary[:stop].copy(), self.ternary[:stop].copy())

    def slice(self, start: int, stop: int) -> "ReturnSeries":
        return ReturnSeries(self.dates[start:stop], self.returns[start:stop].copy(),
                            self.binary[start:stop].copy(), self.ternary[start:stop].copy())

    def index_of(self, day: dt.date) -> int:
        try:
            return self.dates.index(day)
        except ValueError:
            raise KeyError(f"{day} not in series") from None


def to_returns(prices: PriceSeries, kind: str = "log") -> ReturnSeries:
    if len(prices) < 2:
        raise SeriesTooShort("need at least 2 prices")
    c = prices.closes
    if kind == "log":
        r = np.log(c[1:] / c[:-1])
    elif kind == "simple":
        r = c[1:] / c[:-1] - 1.0
    else:
        raise ValueError(f"unknown return kind {kind!r}")
    return ReturnSeries.from_returns(prices.dates[1:], r)


class RegimeLabel(str, enum.Enum):
    TRENDING_UP = "TrendingUp"
    TRENDING_DOWN = "TrendingDown"
    NON_TRENDING = "NonTrending"
    UNCLASSIFIED = "Unclassified"

    @property
    def trending(self) -> bool:
        return self in (RegimeLabel.TRENDING_UP, RegimeLabel.TRENDING_DOWN)


def classify_regime(window) -> RegimeLabel:
    """Label a window of returns by its up-day/down-day counts.

    At least twice as many up days as down days is an up trend (and vice
    versa); equal counts is non-trending; anything else is unclassified.
    """
    r = np.asarray(getattr(window, "returns", window), dtype=float)
    if r.size == 0:
        raise EmptyWindow("cannot classify an empty window")
    up = int(np.count_nonzero(r > 0))
    down = int(np.count_nonzero(r < 0))
    if up == down:
        return RegimeLabel.NON_TRENDING
    if (down > 0 and up >= 2 * down) or (down == 0 and up > 0):
        return RegimeLabel.TRENDING_UP
    if (up > 0 and down >= 2 * up) or (up == 0 and down > 0):
        return RegimeLabel.TRENDING_DOWN
    return RegimeLabel.UNCLASSIFIED


def synthetic_dates(n: int, start: dt.date = dt.date(2000, 1, 3)) -> tuple[dt.date, ...]:
    """Consecutive business days, for series that carry no calendar of their own."""
    days = np.busday_offset(np.datetime64(start, "D"), np.arange(n), roll="forward")
    return tuple(d.item() for d in days)
