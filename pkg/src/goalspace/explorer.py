"""Random goal exploration (RGE) with a nearest-neighbour meta-policy.

Three drivers share one loop:

* RPE: every episode uses uniformly random motor parameters;
* RGE-EFR: goals drawn uniformly in the engineered feature box;
* RGE-<learned>: goals drawn from a goal policy fitted in a learned embedding.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from goalspace.env import (
    DEFAULT_DMP,
    TWO_PI,
    DmpConfig,
    EnvKind,
    TrueState,
    as_motor_params,
    run_episode,
)
from goalspace.errors import DimensionError, EmptyHistoryError, GoalspaceError
from goalspace.goal_policy import GoalPolicy
from goalspace.representation.base import EmbeddingModel


@dataclass(frozen=True)
class ExplorationConfig:
    n_observation: int = 10_000
    n_bootstrap: int = 100
    n_exploration: int = 5_000
    gamma_e: float = 0.2
    noise_sigma: float = 0.05
    knn_k: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma_e <= 1.0:
            raise ValueError("gamma_e must lie in [0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.n_bootstrap < 1 or self.n_exploration < 0 or self.knn_k < 1:
            raise ValueError("need n_bootstrap >= 1, n_exploration >= 0, knn_k >= 1")


@dataclass(frozen=True)
class HistoryEntry:
    epoch: int
    params: np.ndarray
    outcome: np.ndarray
    true_state: TrueState
    handled: bool


class History:
    """Append-only store of (parameters, outcome, true state) triples."""

    def __init__(self, outcome_dim: int, n_params: int = DEFAULT_DMP.n_params,
                 capacity: int = 256, check_append_only: bool = False):
        self.outcome_dim = int(outcome_dim)
        self.n_params = int(n_params)
        self._params = np.empty((capacity, self.n_params))
        self._outcomes = np.empty((capacity, self.outcome_dim))
        self._handled = np.zeros(capacity, dtype=bool)
        self._states = []
        self._n = 0
        self._check = check_append_only
        self._digest = None

    def __len__(self):
        return self._n

    def _grow(self):
        cap = 2 * len(self._params)
        for name in ("_params", "_outcomes", "_handled"):
            old = getattr(self, name)
            new = np.zeros((cap,) + old.shape[1:], dtype=old.dtype)
            new[: self._n] = old[: self._n]
            setattr(self, name, new)

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(self._params[: self._n].tobytes())
        h.update(self._outcomes[: self._n].tobytes())
        h.update(self._handled[: self._n].tobytes())
        return h.hexdigest()

    def append(self, params, outcome, true_state: TrueState, handled: bool) -> int:
        outcome = np.asarray(outcome, dtype=float).reshape(-1)
        if outcome.size != self.outcome_dim:
            raise DimensionError("outcome", self.outcome_dim, outcome.size)
        if self._check and self._digest is not None and self.checksum() != self._digest:
            raise GoalspaceError("history entries were modified after being appended")
        if self._n == len(self._params):
            self._grow()
        i = self._n
        self._params[i] = as_motor_params(params) if self.n_params == DEFAULT_DMP.n_params \
            else np.asarray(params, dtype=float)
        self._outcomes[i] = outcome
        self._handled[i] = bool(handled)
        self._states.append(true_state)
        self._n += 1
        if self._check:
            self._digest = self.checksum()
        return i

    @property
    def params(self) -> np.ndarray:
        v = self._params[: self._n].view()
        v.flags.writeable = False
        return v

    @property
    def outcomes(self) -> np.ndarray:
        v = self._outcomes[: self._n].view()
        v.flags.writeable = False
        return v

    @property
    def handled(self) -> np.ndarray:
        v = self._handled[: self._n].view()
        v.flags.writeable = False
        return v

    @property
    def states(self) -> list:
        return list(self._states)

    def state_matrix(self) -> np.ndarray:
        return np.array([s.as_vector() for s in self._states])

    def __getitem__(self, i) -> HistoryEntry:
        if not -self._n <= i < self._n:
            raise IndexError(i)
        i %= self._n
        return HistoryEntry(i, self.params[i], self.outcomes[i], self._states[i],
                            bool(self._handled[i]))

    def __iter__(self):
        return (self[i] for i in range(self._n))


def nearest_outcome_index(goal, history: History) -> int:
    if len(history) == 0:
        raise EmptyHistoryError("the history is empty")
    d2 = ((history.outcomes - np.asarray(goal, dtype=float)) ** 2).sum(axis=1)
    return int(np.argmin(d2))  # first minimum = lowest epoch


def meta_policy(goal, history: History, noise_sigma: float, rng: np.random.Generator):
    """Parameters of the entry whose outcome is closest to ``goal``, plus
    Gaussian noise, clamped to the unit box."""
    i = nearest_outcome_index(goal, history)
    theta = history.params[i] + noise_sigma * rng.standard_normal(history.n_params)
    return np.clip(theta, 0.0, 1.0)


def knn_predict(history: History, params, k: int = 1) -> np.ndarray:
    """Forward model: mean outcome of the ``k`` entries nearest in parameter space."""
    if len(history) < k or k < 1:
        raise EmptyHistoryError(f"need at least k={k} entries, history has {len(history)}")
    d2 = ((history.params - np.asarray(params, dtype=float)) ** 2).sum(axis=1)
    idx = np.argsort(d2, kind="stable")[:k]
    return history.outcomes[idx].mean(axis=0)


class EngineeredFeatures:
    """Hand-designed outcomes: object position mapped to [0, 1]^2, plus angle / 2pi."""

    def __init__(self, env_kind):
        self.env_kind = EnvKind.parse(env_kind)

    @property
    def dim(self) -> int:
        return self.env_kind.state_dim

    def encode_state(self, state: TrueState) -> np.ndarray:
        return engineered_encode(state)

    def decode(self, features) -> np.ndarray:
        return engineered_decode(features)


def engineered_encode(state: TrueState) -> np.ndarray:
    pos = (np.asarray(state.object_pos) + 1.0) / 2.0
    if state.env_kind is EnvKind.ARM_ARROW:
        return np.append(pos, state.object_angle / TWO_PI)
    return pos


def engineered_decode(features) -> np.ndarray:
    """Inverse affine map, back to world coordinates (and radians)."""
    f = np.asarray(features, dtype=float)
    out = f.copy()
    out[..., :2] = 2.0 * f[..., :2] - 1.0
    if f.shape[-1] == 3:
        out[..., 2] = f[..., 2] * TWO_PI
    return out


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    phase: str          # "bootstrap", "random" or "goal"
    state: TrueState
    handled: bool
    goal: np.ndarray | None


def run_exploration(env_kind, embedding, policy: GoalPolicy | None,
                    cfg: ExplorationConfig, dmp: DmpConfig = DEFAULT_DMP,
                    check_append_only: bool = False):
    """Bootstrap with random parameters, then mix random and goal-directed episodes.

    ``embedding`` is an :class:`EmbeddingModel` (outcomes encoded from the
    final image), an :class:`EngineeredFeatures` (outcomes from the true
    state) or ``None`` together with ``policy=None`` for pure random
    parameter exploration.  Returns ``(history, log)``.
    """
    kind = EnvKind.parse(env_kind)
    rpe = embedding is None
    if rpe and policy is not None:
        raise ValueError("random parameter exploration takes no goal policy")
    if not rpe and policy is None:
        raise ValueError("goal exploration needs a goal policy")
    if isinstance(embedding, EngineeredFeatures):
        outcome_dim = embedding.dim

        def outcome_of(state, image):
            return embedding.encode_state(state)
    elif isinstance(embedding, EmbeddingModel):
        outcome_dim = embedding.latent_dim

        def outcome_of(state, image):
            return embedding.encode(image.reshape(-1))
    elif rpe:
        outcome_dim = 0

        def outcome_of(state, image):
            return np.empty(0)
    else:
        raise TypeError(f"unsupported embedding {embedding!r}")
    if policy is not None and policy.dim != outcome_dim:
        raise DimensionError("goal policy dimension", outcome_dim, policy.dim)

    rng = np.random.default_rng(cfg.seed)
    history = History(outcome_dim, dmp.n_params, check_append_only=check_append_only)
    log = []
    total = cfg.n_bootstrap + cfg.n_exploration
    for epoch in range(total):
        goal = None
        if epoch < cfg.n_bootstrap:
            phase = "bootstrap"
            theta = rng.random(dmp.n_params)
        elif rpe or rng.random() < cfg.gamma_e:
            phase = "random"
            theta = rng.random(dmp.n_params)
        else:
            phase = "goal"
            goal = policy.sample(rng)
            theta = meta_policy(goal, history, cfg.noise_sigma, rng)
        state, image, handled = run_episode(kind, theta, cfg=dmp)
        history.append(theta, outcome_of(state, image), state, handled)
        log.append(EpochLog(epoch, phase, state, handled, goal))
    return history, log


# -- persistence ------------------------------------------------------------

def _state_dict(s: TrueState) -> dict:
    return {"env": s.env_kind.value, "x": s.object_pos[0], "y": s.object_pos[1],
            "angle": s.object_angle, "held": s.held}


def write_history_jsonl(path, history: History) -> None:
    with open(path, "w") as fh:
        for e in history:
            fh.write(json.dumps({"epoch": e.epoch, "theta": e.params.tolist(),
                                 "outcome": e.outcome.tolist(),
                                 "true_state": _state_dict(e.true_state),
                                 "handled": e.handled}) + "\n")


def read_history_jsonl(path) -> History:
    rows = [json.loads(line) for line in open(path) if line.strip()]
    dim = len(rows[0]["outcome"]) if rows else 0
    n_params = len(rows[0]["theta"]) if rows else DEFAULT_DMP.n_params
    h = History(dim, n_params)
    for r in rows:
        s = r["true_state"]
        h.append(r["theta"], r["outcome"],
                 TrueState(s["env"], (s["x"], s["y"]), s["angle"], s["held"]), r["handled"])
    return h


def write_epoch_log_csv(path, log, goal_dim: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "phase", "x", "y", "angle", "handled"]
                   + [f"goal_{j}" for j in range(goal_dim)])
        for rec in log:
            goal = [""] * goal_dim if rec.goal is None else [repr(float(g)) for g in rec.goal]
            w.writerow([rec.epoch, rec.phase, repr(rec.state.object_pos[0]),
                        repr(rec.state.object_pos[1]), repr(rec.state.object_angle),
                        int(rec.handled)] + goal)
