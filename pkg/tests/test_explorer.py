import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from goalspace.env import TrueState
from goalspace.errors import DimensionError, EmptyHistoryError, GoalspaceError
from goalspace.explorer import (
    EngineeredFeatures,
    ExplorationConfig,
    History,
    engineered_decode,
    engineered_encode,
    knn_predict,
    meta_policy,
    nearest_outcome_index,
    read_history_jsonl,
    run_exploration,
    write_epoch_log_csv,
    write_history_jsonl,
)
from goalspace.goal_policy import GoalPolicy
from goalspace.representation import fit_pca

S0 = TrueState("ArmBall", (0.6, 0.6))


def random_history(rng, n, dim=2):
    h = History(dim)
    for _ in range(n):
        h.append(rng.random(21), rng.standard_normal(dim), S0, False)
    return h


def test_singleton_history():
    h = History(2)
    h.append(np.full(21, 0.5), [0.1, 0.2], S0, False)
    rng = np.random.default_rng(0)
    for _ in range(20):
        th = meta_policy(rng.standard_normal(2), h, 0.05, rng)
        assert np.abs(th - 0.5).max() < 0.5


def test_zero_noise_exact_match():
    rng = np.random.default_rng(1)
    h = random_history(rng, 50)
    i = 17
    assert np.array_equal(meta_policy(h.outcomes[i], h, 0.0, rng), h.params[i])


def test_ties_go_to_lowest_epoch():
    h = History(1)
    for k in range(3):
        h.append(np.full(21, 0.1 * k), [1.0], S0, False)
    assert nearest_outcome_index([1.0], h) == 0


def test_nearest_matches_linear_scan():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        n = int(rng.integers(1, 30))
        h = random_history(rng, n, dim=3)
        g = rng.standard_normal(3)
        best, best_d = -1, math.inf
        for j in range(n):
            d = sum((g[k] - h.outcomes[j][k]) ** 2 for k in range(3))
            if d < best_d:
                best, best_d = j, d
        assert nearest_outcome_index(g, h) == best


@given(st.floats(0, 5), st.integers(0, 2 ** 31))
@settings(max_examples=50, deadline=None)
def test_meta_policy_in_unit_box(sigma, seed):
    rng = np.random.default_rng(seed)
    h = random_history(rng, 5)
    th = meta_policy(rng.standard_normal(2), h, sigma, rng)
    assert th.shape == (21,) and th.min() >= 0 and th.max() <= 1


def test_empty_history_errors():
    with pytest.raises(EmptyHistoryError):
        meta_policy([0.0, 0.0], History(2), 0.1, np.random.default_rng(0))
    with pytest.raises(EmptyHistoryError):
        knn_predict(History(2), np.zeros(21), 1)


def test_knn_predict_examples():
    rng = np.random.default_rng(3)
    h = random_history(rng, 40)
    assert np.array_equal(knn_predict(h, h.params[5], 1), h.outcomes[5])
    assert np.allclose(knn_predict(h, rng.random(21), 40), h.outcomes.mean(axis=0))


def test_knn_matches_brute_force():
    rng = np.random.default_rng(4)
    h = random_history(rng, 200)
    for _ in range(500):
        q = rng.random(21)
        k = int(rng.integers(1, 8))
        d = [np.sqrt(((p - q) ** 2).sum()) for p in h.params]
        idx = sorted(range(len(d)), key=lambda j: (d[j], j))[:k]
        assert np.allclose(knn_predict(h, q, k), h.outcomes[idx].mean(axis=0))


def test_history_append_only():
    h = random_history(np.random.default_rng(5), 3)
    with pytest.raises(ValueError):
        h.params[0, 0] = 1.0
    with pytest.raises(DimensionError):
        h.append(np.zeros(21), [1.0, 2.0, 3.0], S0, False)
    checked = History(2, check_append_only=True)
    checked.append(np.zeros(21), [0.0, 0.0], S0, False)
    checked._outcomes[0, 0] = 9.0  # tamper behind the API
    with pytest.raises(GoalspaceError):
        checked.append(np.zeros(21), [0.0, 0.0], S0, False)


def test_history_grows():
    h = History(2, capacity=2)
    for i in range(10):
        h.append(np.full(21, i / 10), [i, i], S0, False)
    assert len(h) == 10 and h[9].epoch == 9 and h[-1].outcome[0] == 9


def test_engineered_features():
    assert np.allclose(engineered_encode(TrueState("ArmBall", (-1.0, -1.0))), (0, 0))
    enc = engineered_encode(TrueState("ArmArrow", (0.0, 0.0), math.pi))
    assert np.allclose(enc, (0.5, 0.5, 0.5))
    rng = np.random.default_rng(6)
    for _ in range(100):
        s = TrueState("ArmArrow", tuple(rng.uniform(-1, 1, 2)), rng.uniform(0, 2 * math.pi))
        back = engineered_decode(engineered_encode(s))
        assert np.abs(back - s.as_vector()).max() < 1e-12
    assert EngineeredFeatures("ArmArrow").dim == 3


CFG = ExplorationConfig(n_bootstrap=20, n_exploration=80, seed=3)


def test_history_length_and_phases():
    h, log = run_exploration("ArmBall", EngineeredFeatures("ArmBall"), GoalPolicy.uniform(2), CFG)
    assert len(h) == len(log) == 100
    assert all(r.phase == "bootstrap" for r in log[:20])
    assert {r.phase for r in log[20:]} <= {"random", "goal"}
    assert all((r.goal is None) == (r.phase != "goal") for r in log)
    assert [e.epoch for e in h] == list(range(100))


def test_run_is_reproducible():
    args = ("ArmArrow", EngineeredFeatures("ArmArrow"), GoalPolicy.uniform(3), CFG)
    h1, l1 = run_exploration(*args)
    h2, l2 = run_exploration(*args)
    assert h1.checksum() == h2.checksum()
    assert all(np.array_equal(a.goal, b.goal) for a, b in zip(l1, l2) if a.goal is not None)


def test_rpe_and_gamma_one_use_random_parameters():
    rpe, _ = run_exploration("ArmBall", None, None, CFG)
    assert rpe.outcome_dim == 0
    cfg = ExplorationConfig(n_bootstrap=20, n_exploration=80, gamma_e=1.0, seed=3)
    g1, log = run_exploration("ArmBall", EngineeredFeatures("ArmBall"),
                              GoalPolicy.uniform(2), cfg)
    assert all(r.phase in ("bootstrap", "random") for r in log)


def test_gamma_one_matches_rpe_rate():
    cfg = ExplorationConfig(n_bootstrap=10, n_exploration=1500, gamma_e=1.0, seed=11)
    g1, _ = run_exploration("ArmBall", EngineeredFeatures("ArmBall"), GoalPolicy.uniform(2), cfg)
    rpe, _ = run_exploration("ArmBall", None, None,
                             ExplorationConfig(n_bootstrap=10, n_exploration=1500, seed=12))
    a, b = g1.handled.mean(), rpe.handled.mean()
    se = math.sqrt(2 * max(a, b) * (1 - max(a, b)) / 1510)
    assert abs(a - b) < 4 * se + 1e-3


def test_embedding_outcomes(armball_small):
    _, images, _ = armball_small
    m = fit_pca(images, 3)
    h, _ = run_exploration("ArmBall", m, GoalPolicy.from_outcomes(m.encode(images)), CFG)
    assert h.outcomes.shape == (100, 3)


def test_argument_checks():
    with pytest.raises(ValueError):
        run_exploration("ArmBall", None, GoalPolicy.uniform(2), CFG)
    with pytest.raises(ValueError):
        run_exploration("ArmBall", EngineeredFeatures("ArmBall"), None, CFG)
    with pytest.raises(DimensionError):
        run_exploration("ArmBall", EngineeredFeatures("ArmBall"), GoalPolicy.uniform(3), CFG)
    with pytest.raises(ValueError):
        ExplorationConfig(gamma_e=1.5)


def test_handled_bounding_box_grows():
    cfg = ExplorationConfig(n_bootstrap=100, n_exploration=400, seed=0)
    h, _ = run_exploration("ArmBall", EngineeredFeatures("ArmBall"), GoalPolicy.uniform(2), cfg)
    pts = h.state_matrix()
    area, prev = [], 0.0
    for t in range(len(h)):
        sel = pts[: t + 1][h.handled[: t + 1]]
        if len(sel):
            a = np.prod(sel.max(axis=0) - sel.min(axis=0))
            assert a >= prev
            prev = a
        area.append(prev)
    assert area[-1] > 0


def test_persistence(tmp_path):
    h, log = run_exploration("ArmArrow", EngineeredFeatures("ArmArrow"), GoalPolicy.uniform(3), CFG)
    write_history_jsonl(tmp_path / "h.jsonl", h)
    back = read_history_jsonl(tmp_path / "h.jsonl")
    assert back.checksum() == h.checksum()
    assert back.states == h.states
    write_epoch_log_csv(tmp_path / "log.csv", log, 3)
    lines = (tmp_path / "log.csv").read_text().splitlines()
    assert lines[0] == "epoch,phase,x,y,angle,handled,goal_0,goal_1,goal_2"
    assert len(lines) == 101
