"""Strategies, agents and the five grand-canonical game variants.

Two execution paths share one set of rules:

* ``decide`` / ``score_update`` / ``run_window`` operate on a single
  :class:`ThirdPartyGame` value, agent by agent. They are the readable
  reference and are used for black-box generation and final predictions.
* ``simulate_population`` advances a whole GA population at once with numpy
  and is what the search loop calls.

History coding: a window of ``m`` binary symbols (oldest first) maps to the
table index ``sum(bit_j << j)`` where ``bit_j`` is 1 for an up symbol and
``j = 0`` is the most recent day.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

MAX_MEMORY = 6  # 2**6 table cells fit one uint64


class GameError(ValueError):
    pass


class GameVariant(str, enum.Enum):
    GCMG = "GCMG"
    GCMJG = "GCMjG"
    DEL_GCMJG = "DelGCMjG"
    DEL_GCMG = "DelGCMG"
    MIXG = "MixG"

    @classmethod
    def parse(cls, name) -> "GameVariant":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        for v in cls:
            if v.value.lower() == key:
                return v
        raise GameError(f"unknown game variant {name!r}")

    @property
    def delayed(self) -> bool:
        return self in (GameVariant.DEL_GCMJG, GameVariant.DEL_GCMG)

    def rule_signs(self, n_agents: int) -> np.ndarray:
        """+1 for majority-rule agents, -1 for minority-rule agents."""
        if self in (GameVariant.GCMG, GameVariant.DEL_GCMG):
            return -np.ones(n_agents, dtype=np.int8)
        if self in (GameVariant.GCMJG, GameVariant.DEL_GCMJG):
            return np.ones(n_agents, dtype=np.int8)
        signs = np.ones(n_agents, dtype=np.int8)
        signs[: (n_agents + 1) // 2] = -1
        return signs


def check_memory(m: int) -> None:
    if not 1 <= m <= MAX_MEMORY:
        raise GameError(f"memory must be in [1, {MAX_MEMORY}], got {m}")


def history_index(history: Sequence[int]) -> int:
    idx = 0
    for j, sym in enumerate(reversed(list(history))):
        if sym not in (1, -1):
            raise GameError(f"history symbols must be +1/-1, got {sym}")
        if sym == 1:
            idx |= 1 << j
    return idx


def history_indices(symbols: np.ndarray, m: int) -> np.ndarray:
    """Table index for every length-m window of `symbols`.

    Entry k covers symbols[k:k+m], so the result has len(symbols)-m+1 entries.
    """
    bits = (np.asarray(symbols) > 0).astype(np.int64)
    n = len(bits) - m + 1
    if n < 1:
        raise GameError("not enough symbols for one history window")
    idx = np.zeros(n, dtype=np.int64)
    for j in range(m):
        # j-th most recent symbol of window k sits at k + m - 1 - j
        idx |= bits[m - 1 - j: m - 1 - j + n] << j
    return idx


def table_actions(word: int, m: int) -> np.ndarray:
    cells = np.arange(1 << m, dtype=np.uint64)
    return np.where((np.uint64(word) >> cells) & np.uint64(1), 1, -1).astype(np.int8)


def pack_actions(actions) -> int:
    word = 0
    for i, a in enumerate(actions):
        if a not in (1, -1):
            raise GameError(f"strategy entries must be +1/-1, got {a}")
        if a == 1:
            word |= 1 << i
    return word


@dataclass(frozen=True)
class StrategyTable:
    """Bit-packed lookup from an m-symbol history to buy (+1) or sell (-1)."""

    memory: int
    word: int

    def __post_init__(self):
        check_memory(self.memory)
        if not 0 <= self.word < (1 << (1 << self.memory)):
            raise GameError("table word has bits beyond 2**m cells")

    @classmethod
    def from_actions(cls, actions: Sequence[int]) -> "StrategyTable":
        m = int(math.log2(len(actions))) if len(actions) else 0
        if len(actions) != 1 << m:
            raise GameError("table length must be a power of two")
        return cls(m, pack_actions(actions))

    def action(self, idx: int) -> int:
        return 1 if (self.word >> idx) & 1 else -1

    @property
    def actions(self) -> np.ndarray:
        return table_actions(self.word, self.memory)


@dataclass(frozen=True)
class Agent:
    strategies: tuple[StrategyTable, ...]
    scores: tuple[float, ...]
    threshold: float
    rule: str  # "minority" | "majority"
    delayed: bool


@dataclass(frozen=True)
class MarketStep:
    history: int
    actions: tuple[int, ...]
    excess_demand: int


@dataclass(frozen=True, eq=False)
class ThirdPartyGame:
    """One candidate agent ensemble: N agents x S strategy tables each.

    ``tables`` holds the bit-packed initial strategy distribution (the GA
    genome); ``scores`` the virtual points; ``pending`` the history index of a
    delayed-variant decision still waiting for its payoff.
    """

    variant: GameVariant
    tables: np.ndarray
    memory: int
    threshold: float = 0.0
    scores: Optional[np.ndarray] = None
    pending: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "variant", GameVariant.parse(self.variant))
        check_memory(self.memory)
        tables = np.array(self.tables, dtype=np.uint64)
        if tables.ndim != 2 or tables.shape[0] < 1 or tables.shape[1] < 1:
            raise GameError("tables must have shape (N, S) with N, S >= 1")
        if (1 << self.memory) < 64 and np.any(tables >> np.uint64(1 << self.memory)):
            raise GameError("table word has bits beyond 2**m cells")
        tables.setflags(write=False)
        object.__setattr__(self, "tables", tables)
        scores = np.zeros(tables.shape) if self.scores is None else np.array(self.scores, dtype=float)
        if scores.shape != tables.shape:
            raise GameError("scores shape must match tables")
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "threshold", float(self.threshold))
        if self.pending is not None and not self.variant.delayed:
            raise GameError("only delayed variants carry a pending decision")

    @property
    def n_agents(self) -> int:
        return self.tables.shape[0]

    @property
    def n_strategies(self) -> int:
        return self.tables.shape[1]

    @property
    def rule_signs(self) -> np.ndarray:
        return self.variant.rule_signs(self.n_agents)

    @property
    def agents(self) -> list[Agent]:
        signs = self.rule_signs
        return [
            Agent(
                strategies=tuple(StrategyTable(self.memory, int(w)) for w in self.tables[i]),
                scores=tuple(float(s) for s in self.scores[i]),
                threshold=self.threshold,
                rule="majority" if signs[i] > 0 else "minority",
                delayed=self.variant.delayed,
            )
            for i in range(self.n_agents)
        ]

    def reset(self) -> "ThirdPartyGame":
        """Same strategy distribution with fresh virtual points."""
        return ThirdPartyGame(self.variant, self.tables, self.memory, self.threshold)

    def __eq__(self, other):
        if not isinstance(other, ThirdPartyGame):
            return NotImplemented
        return (self.variant == other.variant and self.memory == other.memory
                and self.threshold == other.threshold and self.pending == other.pending
                and np.array_equal(self.tables, other.tables)
                and np.array_equal(self.scores, other.scores))

    # serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "memory": self.memory,
            "threshold": _encode_float(self.threshold),
            "tables": [[int(w) for w in row] for row in self.tables],
            "scores": [[_encode_float(s) for s in row] for row in self.scores],
            "pending": self.pending,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ThirdPartyGame":
        scores = d.get("scores")
        if scores is not None:
            scores = [[_decode_float(s) for s in row] for row in scores]
        return cls(
            variant=GameVariant.parse(d["variant"]),
            tables=np.array(d["tables"], dtype=np.uint64),
            memory=int(d["memory"]),
            threshold=_decode_float(d.get("threshold", 0.0)),
            scores=scores,
            pending=d.get("pending"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ThirdPartyGame":
        return cls.from_dict(json.loads(text))


def _encode_float(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _decode_float(x) -> float:
    return float(x)


# ---------------------------------------------------------------------------
# reference path


def _history_idx(game: ThirdPartyGame, history) -> int:
    if isinstance(history, (int, np.integer)):
        if not 0 <= history < (1 << game.memory):
            raise GameError("history index out of range")
        return int(history)
    if len(history) != game.memory:
        raise GameError(f"history has {len(history)} symbols, game memory is {game.memory}")
    return history_index(history)


def decide(game: ThirdPartyGame, history) -> MarketStep:
    """Every agent plays its best strategy if that strategy's points beat the threshold.

    Ties between strategies go to the lowest index. `history` is the last m
    binary symbols (oldest first) or an already computed table index.
    """
    idx = _history_idx(game, history)
    actions = []
    for i in range(game.n_agents):
        row = game.scores[i]
        best = 0
        for s in range(1, game.n_strategies):
            if row[s] > row[best]:
                best = s
        if row[best] > game.threshold:
            actions.append(1 if (int(game.tables[i, best]) >> idx) & 1 else -1)
        else:
            actions.append(0)
    return MarketStep(idx, tuple(actions), sum(actions))


def _apply_payoff(game: ThirdPartyGame, idx: int, realized: int) -> np.ndarray:
    scores = game.scores.copy()
    signs = game.rule_signs
    for i in range(game.n_agents):
        for s in range(game.n_strategies):
            a = 1 if (int(game.tables[i, s]) >> idx) & 1 else -1
            scores[i, s] += signs[i] * a * realized
    return scores


def score_update(game: ThirdPartyGame, step: Optional[MarketStep], realized: int) -> ThirdPartyGame:
    """Credit every strategy (virtually, traded or not) against the realized sign.

    Majority agents earn ``a * realized``, minority agents the negation.
    Delayed variants settle the previously pending decision with this
    realized sign and enqueue ``step`` in its place.
    """
    if realized not in (1, -1):
        raise GameError(f"realized sign must be +1/-1, got {realized}")
    if not game.variant.delayed:
        if step is None:
            raise GameError("non-delayed update needs the step being scored")
        return replace(game, scores=_apply_payoff(game, step.history, realized))
    if game.pending is None and step is None:
        raise GameError("delayed update with nothing pending and nothing to enqueue")
    scores = game.scores
    if game.pending is not None:
        scores = _apply_payoff(game, game.pending, realized)
    return replace(game, scores=scores, pending=None if step is None else step.history)


def _symbols(external) -> np.ndarray:
    return np.asarray(getattr(external, "binary", external), dtype=np.int64)


def run_window(game: ThirdPartyGame, external, warm_history) -> tuple[list[MarketStep], ThirdPartyGame]:
    """Play the game across `external`, history always drawn from the external series.

    Returns one step per day and the game with scores current through the
    window (a delayed variant keeps its final decision pending).
    """
    realized = _symbols(external)
    warm = np.asarray(_symbols(warm_history))
    if len(warm) != game.memory:
        raise GameError(f"need {game.memory} warm-up symbols, got {len(warm)}")
    if len(realized) < 1:
        raise GameError("empty window")
    idx = history_indices(np.concatenate([warm, realized]), game.memory)
    steps = []
    for t, r in enumerate(realized):
        step = decide(game, int(idx[t]))
        steps.append(step)
        game = score_update(game, step, int(r))
    return steps, game


def predict_next(game: ThirdPartyGame, history) -> int:
    return decide(game, history).excess_demand


# ---------------------------------------------------------------------------
# vectorized population path


@dataclass
class PopulationRun:
    demand: np.ndarray  # (P, T) excess demand per genome and day
    scores: np.ndarray  # (P, N, S) virtual points after the window
    pending: Optional[int] = None
    active: np.ndarray = field(default=None, repr=False)  # (P, T, N) bool


def simulate_population(tables: np.ndarray, variant, memory: int, threshold: float,
                        hist_idx: np.ndarray, realized: np.ndarray,
                        record_active: bool = False) -> PopulationRun:
    """Advance P games with identical hyperparameters over the same window.

    ``tables`` is (P, N, S) uint64, ``hist_idx[t]`` the history index seen on
    day t and ``realized[t]`` that day's external binary symbol.
    """
    variant = GameVariant.parse(variant)
    tables = np.asarray(tables, dtype=np.uint64)
    if tables.ndim == 2:
        tables = tables[None]
    P, N, S = tables.shape
    T = len(realized)
    if len(hist_idx) != T:
        raise GameError("history and realized series differ in length")
    # precompute +/-1 actions for every cell: (P, N, S, 2**m)
    cells = np.arange(1 << memory, dtype=np.uint64)
    acts = ((tables[..., None] >> cells) & np.uint64(1)).astype(np.int8) * 2 - 1
    signs = variant.rule_signs(N).astype(np.float64)[None, :, None]
    scores = np.zeros((P, N, S))
    demand = np.zeros((P, T), dtype=np.int64)
    active_log = np.zeros((P, T, N), dtype=bool) if record_active else None
    pending = None
    rows = np.arange(P)[:, None]
    cols = np.arange(N)[None, :]
    for t in range(T):
        a_t = acts[..., hist_idx[t]]  # (P, N, S)
        best = np.argmax(scores, axis=-1)  # first maximum = lowest index
        active = scores[rows, cols, best] > threshold
        chosen = a_t[rows, cols, best]
        demand[:, t] = np.where(active, chosen, 0).sum(axis=-1)
        if record_active:
            active_log[:, t] = active
        r = float(realized[t])
        if variant.delayed:
            if pending is not None:
                scores += signs * acts[..., pending] * r
            pending = int(hist_idx[t])
        else:
            scores += signs * a_t * r
    return PopulationRun(demand, scores, pending, active_log)
