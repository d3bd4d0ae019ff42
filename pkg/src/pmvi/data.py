"""Offline trajectory datasets and their sufficient statistics.

A dataset is ``K`` independent episodes of full length ``H`` collected on a
game, stored column-wise as ``(K, H)`` arrays.  Two collectors are provided:

- :func:`collect_behavior`: both players follow fixed Markov policies;
- :func:`collect_predetermined`: the first-step action pair follows a given
  schedule (the compliance regime where actions were fixed before the run);
  later steps use the filler pair (0, 0).

Files use JSON lines: one metadata record followed by one record per
trajectory.  Identical seeds give byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvariantError
from .games import TabularLinearMG, MarkovPolicy


def _int_matrix(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.int64)
    if arr.ndim != 2:
        raise ConfigError(f"{name} must be 2-d, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class OfflineDataset:
    """K full-length trajectories: (s, a, b, r, s') for every step."""

    states: np.ndarray       # (K, H) int
    actions_p1: np.ndarray   # (K, H) int
    actions_p2: np.ndarray   # (K, H) int
    rewards: np.ndarray      # (K, H) float
    next_states: np.ndarray  # (K, H) int
    provenance: str = "behavior"  # "behavior" | "predetermined"

    def __post_init__(self) -> None:
        states = _int_matrix(self.states, "states")
        a1 = _int_matrix(self.actions_p1, "actions_p1")
        a2 = _int_matrix(self.actions_p2, "actions_p2")
        nxt = _int_matrix(self.next_states, "next_states")
        rewards = np.asarray(self.rewards, dtype=np.float64)
        shape = states.shape
        for name, arr in (("actions_p1", a1), ("actions_p2", a2), ("rewards", rewards), ("next_states", nxt)):
            if arr.shape != shape:
                raise ConfigError(f"{name} shape {arr.shape} does not match states {shape}")
        if self.provenance not in ("behavior", "predetermined"):
            raise ConfigError(f"unknown provenance {self.provenance!r}")
        for name, arr in (
            ("states", states), ("actions_p1", a1), ("actions_p2", a2),
            ("rewards", rewards), ("next_states", nxt),
        ):
            arr = np.ascontiguousarray(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def k(self) -> int:
        return self.states.shape[0]

    @property
    def horizon(self) -> int:
        return self.states.shape[1]


@dataclass(frozen=True)
class CountStats:
    """Counting statistics of a dataset's first step.

    - ``first_pair_counts[i, j]``: episodes whose first action pair was (i, j)
    - ``action_next_counts[i, s]``: episodes with first max-action i landing in s
    - ``next_state_counts[s]``: episodes whose second state was s
    - ``first_action_counts[i]``: row sums of ``first_pair_counts``
    """

    first_pair_counts: np.ndarray
    action_next_counts: np.ndarray
    next_state_counts: np.ndarray
    first_action_counts: np.ndarray
    k: int

    def min_cross_count(self, action: int) -> int:
        """min over the action's row and column of the first-step pair counts."""
        row = self.first_pair_counts[action, :].min()
        col = self.first_pair_counts[:, action].min()
        return int(min(row, col))


def collect_behavior(
    game: TabularLinearMG,
    policy_p1: MarkovPolicy,
    policy_p2: MarkovPolicy,
    k: int,
    rng: np.random.Generator,
) -> OfflineDataset:
    """Roll out ``k`` episodes under a fixed behavior policy pair."""
    if policy_p1.player != 1 or policy_p2.player != 2:
        raise ConfigError("collect_behavior expects a (max-player, min-player) policy pair")
    _check_policy_shape(game, policy_p1)
    _check_policy_shape(game, policy_p2)
    if k < 0:
        raise ConfigError("k must be nonnegative")
    h_len, s_count = game.horizon, game.n_states
    states = np.empty((k, h_len), dtype=np.int64)
    a1 = np.empty((k, h_len), dtype=np.int64)
    a2 = np.empty((k, h_len), dtype=np.int64)
    rewards = np.empty((k, h_len), dtype=np.float64)
    nxt = np.empty((k, h_len), dtype=np.int64)

    cur = np.full(k, game.initial_state, dtype=np.int64)
    for h in range(h_len):
        acts1 = _draw_rows(policy_p1.probs[h][cur], rng)
        acts2 = _draw_rows(policy_p2.probs[h][cur], rng)
        step_next = _draw_rows(game.transition[h][cur, acts1, acts2], rng)
        states[:, h] = cur
        a1[:, h] = acts1
        a2[:, h] = acts2
        rewards[:, h] = game.reward[h][cur, acts1, acts2]
        nxt[:, h] = step_next
        cur = step_next
    return OfflineDataset(states, a1, a2, rewards, nxt, provenance="behavior")


def collect_predetermined(
    game: TabularLinearMG,
    schedule,
    rng: np.random.Generator,
) -> OfflineDataset:
    """Roll out one episode per schedule row, first-step actions as scheduled.

    ``schedule`` is a (K, 2) integer array of first-step (max, min) action
    pairs.  Steps after the first play the filler pair (0, 0); only the
    environment is stochastic.
    """
    schedule = np.asarray(schedule, dtype=np.int64)
    if schedule.ndim != 2 or schedule.shape[1] != 2:
        raise ConfigError(f"schedule must have shape (K, 2), got {schedule.shape}")
    k = schedule.shape[0]
    if k and (
        schedule[:, 0].min() < 0
        or schedule[:, 0].max() >= game.n_actions_p1
        or schedule[:, 1].min() < 0
        or schedule[:, 1].max() >= game.n_actions_p2
    ):
        raise ConfigError("schedule contains out-of-range action indices")
    h_len = game.horizon
    states = np.empty((k, h_len), dtype=np.int64)
    a1 = np.zeros((k, h_len), dtype=np.int64)
    a2 = np.zeros((k, h_len), dtype=np.int64)
    rewards = np.empty((k, h_len), dtype=np.float64)
    nxt = np.empty((k, h_len), dtype=np.int64)
    a1[:, 0] = schedule[:, 0]
    a2[:, 0] = schedule[:, 1]

    cur = np.full(k, game.initial_state, dtype=np.int64)
    for h in range(h_len):
        acts1, acts2 = a1[:, h], a2[:, h]
        step_next = _draw_rows(game.transition[h][cur, acts1, acts2], rng)
        states[:, h] = cur
        rewards[:, h] = game.reward[h][cur, acts1, acts2]
        nxt[:, h] = step_next
        cur = step_next
    return OfflineDataset(states, a1, a2, rewards, nxt, provenance="predetermined")


def balanced_schedule(k: int, n_actions_p1: int, n_actions_p2: int | None = None) -> np.ndarray:
    """A (k, 2) schedule cycling uniformly through all action pairs in row-major order."""
    if k < 0:
        raise ConfigError("k must be nonnegative")
    n_actions_p2 = n_actions_p1 if n_actions_p2 is None else n_actions_p2
    idx = np.arange(k, dtype=np.int64) % (n_actions_p1 * n_actions_p2)
    return np.stack([idx // n_actions_p2, idx % n_actions_p2], axis=1)


def count_stats(game: TabularLinearMG, dataset: OfflineDataset) -> CountStats:
    """First-step counting statistics (pair counts, landing counts, ...)."""
    check_dataset_bounds(game, dataset)
    a1c, a2c, sc = game.n_actions_p1, game.n_actions_p2, game.n_states
    if dataset.k:
        first_a1 = dataset.actions_p1[:, 0]
        first_a2 = dataset.actions_p2[:, 0]
        second_s = dataset.next_states[:, 0]
        pair = np.bincount(first_a1 * a2c + first_a2, minlength=a1c * a2c).reshape(a1c, a2c)
        cross = np.bincount(first_a1 * sc + second_s, minlength=a1c * sc).reshape(a1c, sc)
        landing = np.bincount(second_s, minlength=sc)
    else:
        pair = np.zeros((a1c, a2c), dtype=np.int64)
        cross = np.zeros((a1c, sc), dtype=np.int64)
        landing = np.zeros(sc, dtype=np.int64)
    return CountStats(
        first_pair_counts=pair,
        action_next_counts=cross,
        next_state_counts=landing,
        first_action_counts=pair.sum(axis=1),
        k=dataset.k,
    )


def validate_dataset(game: TabularLinearMG, dataset: OfflineDataset) -> None:
    """Check index ranges, continuity s_{h+1} = s'_h, and reward consistency."""
    check_dataset_bounds(game, dataset)
    if dataset.k == 0:
        return
    if dataset.states[:, 0].min() != game.initial_state or dataset.states[:, 0].max() != game.initial_state:
        raise InvariantError("episodes must start at the game's initial state")
    if not np.array_equal(dataset.states[:, 1:], dataset.next_states[:, :-1]):
        raise InvariantError("trajectory discontinuity: s_{h+1} differs from recorded s'_h")
    model_r = game.reward[
        np.arange(game.horizon)[None, :], dataset.states, dataset.actions_p1, dataset.actions_p2
    ]
    worst = np.abs(model_r - dataset.rewards).max()
    if worst > 1e-12:
        raise InvariantError(f"dataset rewards disagree with the model (worst {worst:.3e})")
    support = game.transition[
        np.arange(game.horizon)[None, :],
        dataset.states, dataset.actions_p1, dataset.actions_p2, dataset.next_states,
    ]
    if support.min() <= 0.0:
        raise InvariantError("dataset contains a transition of probability zero under the model")


def save_dataset(dataset: OfflineDataset, path, seed: int | None = None) -> None:
    """Write JSON lines: a meta record then one record per trajectory."""
    meta = {
        "k": dataset.k,
        "horizon": dataset.horizon,
        "provenance": dataset.provenance,
        "seed": seed,
    }
    lines = [json.dumps({"meta": meta})]
    for tau in range(dataset.k):
        steps = [
            {
                "h": h,
                "s": int(dataset.states[tau, h]),
                "a": int(dataset.actions_p1[tau, h]),
                "b": int(dataset.actions_p2[tau, h]),
                "r": float(dataset.rewards[tau, h]),
                "s_next": int(dataset.next_states[tau, h]),
            }
            for h in range(dataset.horizon)
        ]
        lines.append(json.dumps({"tau": tau, "steps": steps}))
    Path(path).write_text("\n".join(lines) + "\n")


def load_dataset(path) -> OfflineDataset:
    try:
        lines = Path(path).read_text().splitlines()
        records = [json.loads(line) for line in lines if line.strip()]
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read dataset file {path}: {exc}") from exc
    if not records or "meta" not in records[0]:
        raise ConfigError(f"dataset file {path} lacks the leading meta record")
    meta = records[0]["meta"]
    k, horizon = int(meta["k"]), int(meta["horizon"])
    if len(records) != k + 1:
        raise ConfigError(f"dataset file {path} announces k={k} but holds {len(records) - 1} trajectories")
    states = np.zeros((k, horizon), dtype=np.int64)
    a1 = np.zeros((k, horizon), dtype=np.int64)
    a2 = np.zeros((k, horizon), dtype=np.int64)
    rewards = np.zeros((k, horizon), dtype=np.float64)
    nxt = np.zeros((k, horizon), dtype=np.int64)
    for record in records[1:]:
        try:
            tau = record["tau"]
            steps = record["steps"]
            if len(steps) != horizon:
                raise ConfigError(f"trajectory {tau} has {len(steps)} steps, expected {horizon}")
            for step in steps:
                h = step["h"]
                states[tau, h] = step["s"]
                a1[tau, h] = step["a"]
                a2[tau, h] = step["b"]
                rewards[tau, h] = step["r"]
                nxt[tau, h] = step["s_next"]
        except (KeyError, TypeError, IndexError) as exc:
            raise ConfigError(f"malformed trajectory record in {path}: {exc}") from exc
    return OfflineDataset(states, a1, a2, rewards, nxt, provenance=meta.get("provenance", "behavior"))


def _draw_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorized categorical draws, one per row of ``probs`` (shape (K, n))."""
    cum = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0])
    picks = (cum <= u[:, None]).sum(axis=1)
    return np.minimum(picks, probs.shape[1] - 1)


def _check_policy_shape(game: TabularLinearMG, policy: MarkovPolicy) -> None:
    expected = game.n_actions_p1 if policy.player == 1 else game.n_actions_p2
    if policy.probs.shape != (game.horizon, game.n_states, expected):
        raise ConfigError(
            f"policy shape {policy.probs.shape} does not fit game "
            f"({game.horizon}, {game.n_states}, {expected})"
        )


def check_dataset_bounds(game: TabularLinearMG, dataset: OfflineDataset) -> None:
    if dataset.horizon != game.horizon:
        raise ConfigError(f"dataset horizon {dataset.horizon} != game horizon {game.horizon}")
    if dataset.k == 0:
        return
    if dataset.states.min() < 0 or dataset.states.max() >= game.n_states:
        raise InvariantError("dataset state index out of range")
    if dataset.next_states.min() < 0 or dataset.next_states.max() >= game.n_states:
        raise InvariantError("dataset next-state index out of range")
    if dataset.actions_p1.min() < 0 or dataset.actions_p1.max() >= game.n_actions_p1:
        raise InvariantError("dataset max-player action index out of range")
    if dataset.actions_p2.min() < 0 or dataset.actions_p2.max() >= game.n_actions_p2:
        raise InvariantError("dataset min-player action index out of range")
