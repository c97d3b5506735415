import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abm_reverse.abm import (GameError, GameVariant, MarketStep, StrategyTable, ThirdPartyGame,
                             decide, history_index, history_indices, predict_next, run_window,
                             score_update, simulate_population)


def game_from_lists(variant, tables, memory, threshold=0.0, scores=None):
    """tables[i][s] is a plain list of +/-1 actions indexed by history index."""
    words = [[StrategyTable.from_actions(t).word for t in agent] for agent in tables]
    return ThirdPartyGame(variant, np.array(words, dtype=np.uint64), memory, threshold, scores)


def random_game(rng, variant, n=None, s=None, m=None, tau=None):
    n = n or int(rng.integers(1, 7))
    s = s or int(rng.integers(1, 4))
    m = m or int(rng.integers(1, 5))
    tau = float(rng.choice([-1.0, 0.0, 1.0, 2.5])) if tau is None else tau
    tables = rng.integers(0, 1 << (1 << m), size=(n, s), dtype=np.uint64)
    scores = rng.integers(-4, 5, size=(n, s)).astype(float)
    return ThirdPartyGame(variant, tables, m, tau, scores)


def test_history_index_most_recent_is_low_bit():
    assert history_index([-1, -1, 1]) == 1
    assert history_index([1, -1, -1]) == 4
    assert list(history_indices(np.array([1, -1, -1, 1]), 3)) == [4, 1]


def test_strategy_table_roundtrip():
    t = StrategyTable.from_actions([1, -1, -1, 1])
    assert t.memory == 2
    assert list(t.actions) == [1, -1, -1, 1]
    assert [t.action(i) for i in range(4)] == [1, -1, -1, 1]


def test_memory_limit():
    with pytest.raises(GameError):
        ThirdPartyGame("GCMG", np.zeros((1, 1), dtype=np.uint64), 7)


def test_decide_boundary_abstains():
    g = game_from_lists("GCMjG", [[[1, 1]]], 1, threshold=0.0, scores=[[0.0]])
    step = decide(g, [1])
    assert step.actions == (0,) and step.excess_demand == 0


def test_decide_active_agent():
    g = game_from_lists("GCMjG", [[[1, 1]]], 1, threshold=0.0, scores=[[1.0]])
    assert decide(g, [1]).excess_demand == 1


def test_decide_three_agents_enumeration():
    tables = [[[1, -1], [-1, -1]], [[-1, 1], [1, 1]], [[1, 1], [-1, 1]]]
    scores = [[2.0, 1.0], [0.0, 3.0], [1.0, 1.0]]
    g = game_from_lists("GCMG", tables, 1, threshold=0.5, scores=scores)
    for history in ([1], [-1]):
        idx = 1 if history[0] == 1 else 0
        expected = 0
        for tab, sc in zip(tables, scores):
            best = sc.index(max(sc))  # first maximum
            if sc[best] > 0.5:
                expected += tab[best][idx]
        assert decide(g, history).excess_demand == expected


def test_decide_rejects_wrong_history_length():
    g = game_from_lists("GCMG", [[[1, 1, 1, 1]]], 2)
    with pytest.raises(GameError):
        decide(g, [1])


def test_decide_is_pure():
    g = game_from_lists("GCMjG", [[[1, -1]]], 1, scores=[[3.0]])
    before = g.scores.copy()
    decide(g, [1])
    assert np.array_equal(g.scores, before)


def test_tie_break_lowest_index():
    g = game_from_lists("GCMjG", [[[1, 1], [-1, -1]]], 1, threshold=0.0, scores=[[2.0, 2.0]])
    assert decide(g, [1]).excess_demand == 1


@pytest.mark.parametrize("variant,realized,delta", [
    ("GCMjG", 1, 1), ("GCMG", 1, -1), ("GCMjG", -1, -1), ("GCMG", -1, 1)])
def test_payoff_sign(variant, realized, delta):
    g = game_from_lists(variant, [[[1, 1]]], 1)
    g2 = score_update(g, decide(g, [1]), realized)
    assert g2.scores[0, 0] == delta


def test_delayed_two_step_trace():
    g = game_from_lists("DelGCMjG", [[[1, 1]]], 1, threshold=-1.0)
    step_t = decide(g, [1])
    assert step_t.excess_demand == 1
    g = score_update(g, step_t, 1)
    assert g.scores[0, 0] == 0.0  # nothing settled yet
    assert g.pending == 1
    g = score_update(g, decide(g, [1]), -1)
    assert g.scores[0, 0] == -1.0


def test_delayed_needs_something():
    g = game_from_lists("DelGCMG", [[[1, 1]]], 1)
    with pytest.raises(GameError):
        score_update(g, None, 1)


def test_mixg_split():
    signs = GameVariant.MIXG.rule_signs(5)
    assert list(signs) == [-1, -1, -1, 1, 1]
    g = game_from_lists("MixG", [[[1, 1]]] * 4, 1)
    g2 = score_update(g, decide(g, [1]), 1)
    assert list(g2.scores[:, 0]) == [-1, -1, 1, 1]


def test_run_window_unit():
    g = game_from_lists("GCMjG", [[[1, -1]]], 1)
    steps, _ = run_window(g, np.array([1]), np.array([1]))
    assert len(steps) == 1


def test_run_window_all_abstain():
    g = game_from_lists("GCMjG", [[[1, -1]], [[1, 1]]], 1, threshold=np.inf)
    steps, _ = run_window(g, np.array([1, -1, 1, 1]), np.array([-1]))
    assert all(s.excess_demand == 0 for s in steps)


def test_run_window_hand_trace():
    # agent0 plays +1 after a down day and -1 after an up day; agent1 always sells
    g = game_from_lists("GCMjG", [[[1, -1]], [[-1, -1]]], 1, threshold=-1.0)
    steps, end = run_window(g, np.array([1, -1, 1]), np.array([1]))
    assert [s.excess_demand for s in steps] == [-2, 0, 0]
    assert [s.actions for s in steps] == [(-1, -1), (0, 0), (1, -1)]
    assert end.scores.ravel().tolist() == [1.0, -1.0]


def test_run_window_warm_history_length():
    g = game_from_lists("GCMjG", [[[1, -1, 1, 1]]], 2)
    with pytest.raises(GameError):
        run_window(g, np.array([1, 1]), np.array([1]))


def test_predict_next_all_buy():
    g = game_from_lists("GCMjG", [[[1, 1]]] * 4, 1, threshold=0.0, scores=[[1.0]] * 3 + [[0.0]])
    assert predict_next(g, [-1]) == 3
    assert predict_next(game_from_lists("GCMjG", [[[1, 1]]] * 4, 1, threshold=np.inf,
                                        scores=[[9.0]] * 4), [1]) == 0


def test_json_round_trip(rng):
    for v in GameVariant:
        g = random_game(rng, v)
        assert ThirdPartyGame.from_json(g.to_json()) == g
    g = random_game(rng, "DelGCMG", tau=np.inf)
    g = score_update(g, decide(g, [1] * g.memory), 1)
    back = ThirdPartyGame.from_json(g.to_json())
    assert back == g and back.threshold == np.inf and back.pending == g.pending


def test_engine_matches_reference(rng):
    for v in GameVariant:
        for _ in range(30):
            n, s, m = (int(x) for x in rng.integers(1, 6, size=3))
            m = min(m, 4)
            tau = float(rng.choice([-1.0, 0.0, 1.0]))
            tables = rng.integers(0, 1 << (1 << m), size=(4, n, s), dtype=np.uint64)
            sym = rng.choice([-1, 1], size=20 + m)
            idx = history_indices(sym, m)[:-1]
            run = simulate_population(tables, v, m, tau, idx, sym[m:])
            for p in range(4):
                steps, end = run_window(ThirdPartyGame(v, tables[p], m, tau), sym[m:], sym[:m])
                assert [st.excess_demand for st in steps] == run.demand[p].tolist()
                assert np.array_equal(end.scores, run.scores[p])
                assert end.pending == run.pending


def _increments(game, history, realized):
    step = decide(game, history)
    return score_update(game, step, realized).scores - game.scores


def test_minority_majority_duality(rng):
    for _ in range(500):
        g = random_game(rng, "GCMG")
        h = list(rng.choice([-1, 1], size=g.memory))
        r = int(rng.choice([-1, 1]))
        maj = ThirdPartyGame("GCMjG", g.tables, g.memory, g.threshold, g.scores)
        assert np.array_equal(_increments(g, h, r), -_increments(maj, h, r))


def test_determinism(rng):
    g = random_game(rng, "MixG", n=6, s=3, m=3)
    sym = rng.choice([-1, 1], size=40)
    a, _ = run_window(g, sym[3:], sym[:3])
    b, _ = run_window(ThirdPartyGame.from_json(g.to_json()), sym[3:], sym[:3])
    assert a == b


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(list(GameVariant)),
       st.floats(-3, 3), st.floats(0, 4))
def test_abstention_monotone_in_threshold(seed, variant, tau, bump):
    rng = np.random.default_rng(seed)
    m = 2
    tables = rng.integers(0, 16, size=(1, 6, 2), dtype=np.uint64)
    sym = rng.choice([-1, 1], size=30 + m)
    idx = history_indices(sym, m)[:-1]
    lo = simulate_population(tables, variant, m, tau, idx, sym[m:], record_active=True)
    hi = simulate_population(tables, variant, m, tau + bump, idx, sym[m:], record_active=True)
    assert not np.any(hi.active & ~lo.active)


@pytest.mark.parametrize("sign", [1, -1])
def test_delayed_shift_on_constant_series(rng, sign):
    for _ in range(20):
        m = int(rng.integers(1, 4))
        tables = rng.integers(0, 1 << (1 << m), size=(5, 2), dtype=np.uint64)
        plain = ThirdPartyGame("GCMjG", tables, m)
        delayed = ThirdPartyGame("DelGCMjG", tables, m)
        warm = np.full(m, sign)
        plain_scores, delayed_scores = [], []
        for t in range(1, 51):
            ext = np.full(t, sign)
            plain_scores.append(run_window(plain, ext, warm)[1].scores)
            delayed_scores.append(run_window(delayed, ext, warm)[1].scores)
        for t in range(1, 50):
            assert np.array_equal(delayed_scores[t], plain_scores[t - 1])


def test_abstaining_agent_still_learns():
    g = game_from_lists("GCMjG", [[[-1, -1], [1, 1]]], 1, threshold=np.inf)
    steps, end = run_window(g, np.array([1] * 5), np.array([1]))
    assert all(s.excess_demand == 0 for s in steps)
    assert end.scores[0, 1] > end.scores[0, 0]


def test_demand_bounded(rng):
    for v in GameVariant:
        g = random_game(rng, v, n=7)
        sym = rng.choice([-1, 1], size=30 + g.memory)
        steps, _ = run_window(g, sym[g.memory:], sym[:g.memory])
        assert all(abs(s.excess_demand) <= 7 for s in steps)
