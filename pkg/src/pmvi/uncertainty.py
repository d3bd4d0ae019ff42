"""Dataset-quality diagnostics built on the inverse-Gram feature bonus.

The central quantity is the *relative uncertainty* of a dataset at the
initial state: fix one player to an exact equilibrium policy, let the
opponent roam freely to maximise the accumulated unit bonus
``sqrt(phi' Lambda_h^-1 phi)``, take the larger of the two sides, and
minimise over equilibrium pairs.  It is a pure function of the dataset
(through the Gram matrices) and the transition model -- no rewards enter.

Two cruder checks are provided as well: ``coverage_sufficient_check``
verifies the per-direction domination ``Lambda_h >= I + c1 K E[phi phi']``
against every deterministic opponent response, and ``well_explored_check``
looks at the smallest eigenvalue of the behavior pair's expected feature
outer product.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import OfflineDataset
from .errors import ConfigError
from .evaluation import exact_nash_values, expected_total
from .games import MarkovPolicy, TabularLinearMG
from .value_iteration import bonus_tables, gram_matrices


@dataclass(frozen=True)
class RUReport:
    """Relative uncertainty of a dataset at the initial state.

    ``ru = max(ru_max_side, ru_min_side)`` for the equilibrium pair attaining
    the smallest such max (index ``ne_index`` into the pairs that were tried).
    ``ru_max_side`` lets the max player roam against the fixed equilibrium
    min policy; ``ru_min_side`` is the mirror image.
    """

    ru: float
    ru_max_side: float
    ru_min_side: float
    ne_index: int


@dataclass(frozen=True)
class CoverageReport:
    """Result of the uniform-domination coverage check."""

    ok: bool
    margin: float
    worst_side: str
    worst_h: int
    n_policies_checked: int


def bonus_value_dp(
    game: TabularLinearMG,
    tables: np.ndarray,
    fixed_policy: MarkovPolicy,
) -> tuple[float, MarkovPolicy]:
    """Max expected total of per-step ``tables`` when one side is fixed.

    The free player (the opponent of ``fixed_policy``) maximises
    ``E[sum_h tables[h, s_h, a_h, b_h]]``; ties between actions resolve to
    the smallest index.  Returns the optimum from the initial state and a
    pure maximising policy.
    """
    tables = np.asarray(tables, dtype=np.float64)
    if tables.shape != (game.horizon, game.n_states, game.n_actions_p1, game.n_actions_p2):
        raise ConfigError(f"tables shape {tables.shape} does not match the game")
    free_player = 2 if fixed_policy.player == 1 else 1
    w = np.zeros(game.n_states)
    actions = np.zeros((game.horizon, game.n_states), dtype=np.int64)
    for h in reversed(range(game.horizon)):
        # payoff of (a, b) at h: current table entry plus continuation
        stage = tables[h] + np.einsum("sabt,t->sab", game.transition[h], w)
        if free_player == 1:
            avg = np.einsum("sb,sab->sa", fixed_policy.probs[h], stage)
        else:
            avg = np.einsum("sa,sab->sb", fixed_policy.probs[h], stage)
        actions[h] = np.argmax(avg, axis=1)
        w = avg[np.arange(game.n_states), actions[h]]
    value = float(w[game.initial_state])
    return value, MarkovPolicy.pure(game, free_player, actions)


def relative_uncertainty(
    game: TabularLinearMG,
    dataset: OfflineDataset,
    ne_pairs: Sequence[tuple[MarkovPolicy, MarkovPolicy]] | None = None,
    tol: float = 1e-9,
) -> RUReport:
    """Relative uncertainty of ``dataset`` for ``game`` at the initial state.

    When ``ne_pairs`` is omitted a single exact equilibrium pair is computed
    and used; supplying several pairs tightens the result (the measure is an
    infimum over equilibria, so any finite selection is an upper bound).
    """
    if ne_pairs is None:
        nash = exact_nash_values(game, tol=tol)
        ne_pairs = [(nash.policy_max, nash.policy_min)]
    if not ne_pairs:
        raise ConfigError("ne_pairs must contain at least one equilibrium pair")
    gram = gram_matrices(game, dataset)
    unit = bonus_tables(game, gram, beta=1.0)
    best: tuple[float, float, float, int] | None = None
    for idx, (pi_star, nu_star) in enumerate(ne_pairs):
        if pi_star.player != 1 or nu_star.player != 2:
            raise ConfigError("each equilibrium pair must be (max-player, min-player)")
        min_side, _ = bonus_value_dp(game, unit, fixed_policy=pi_star)
        max_side, _ = bonus_value_dp(game, unit, fixed_policy=nu_star)
        ru = max(max_side, min_side)
        if best is None or ru < best[0]:
            best = (ru, max_side, min_side, idx)
    ru, max_side, min_side, idx = best
    return RUReport(ru=ru, ru_max_side=max_side, ru_min_side=min_side, ne_index=idx)


def expected_feature_outer(
    game: TabularLinearMG,
    policy_max: MarkovPolicy,
    policy_min: MarkovPolicy,
) -> np.ndarray:
    """Per-step expected feature outer products ``E[phi_h phi_h']`` under a
    joint mixed policy pair from the initial state; shape (H, d, d)."""
    if policy_max.player != 1 or policy_min.player != 2:
        raise ConfigError("expected a (max-player, min-player) policy pair in that order")
    rho = np.zeros(game.n_states)
    rho[game.initial_state] = 1.0
    out = np.zeros((game.horizon, game.dim, game.dim))
    for h in range(game.horizon):
        joint = np.einsum("s,sa,sb->sab", rho, policy_max.probs[h], policy_min.probs[h])
        out[h] = np.einsum("sab,sabi,sabj->ij", joint, game.features, game.features)
        rho = np.einsum("sab,sabt->t", joint, game.transition[h])
    return out


def _deterministic_policies(game: TabularLinearMG, player: int, limit: int):
    n_actions = game.n_actions_p1 if player == 1 else game.n_actions_p2
    cells = game.horizon * game.n_states
    total = n_actions**cells
    if total > limit:
        raise ConfigError(
            f"coverage check needs {total} deterministic policies "
            f"(> limit {limit}); use a smaller game or raise limit"
        )
    for combo in itertools.product(range(n_actions), repeat=cells):
        actions = np.asarray(combo, dtype=np.int64).reshape(game.horizon, game.n_states)
        yield MarkovPolicy.pure(game, player, actions)


def coverage_sufficient_check(
    game: TabularLinearMG,
    dataset: OfflineDataset,
    c1: float,
    ne_pair: tuple[MarkovPolicy, MarkovPolicy] | None = None,
    tol: float = 1e-9,
    limit: int = 10_000,
) -> CoverageReport:
    """Check ``Lambda_h >= I + c1 K E_{pair}[phi_h phi_h']`` for every pair
    that fixes one player at equilibrium and lets the other respond.

    Only deterministic responses are enumerated: the expected outer product
    is multilinear in the free player's per-(h, s) action distributions, so
    the feasible set is contained in the convex hull of the deterministic
    ones, and the smallest eigenvalue of an affine matrix map is concave --
    the minimum over the hull is attained at a vertex.  ``margin`` is the
    worst smallest-eigenvalue slack; ``ok`` means it is >= -1e-9.
    """
    if c1 <= 0:
        raise ConfigError(f"c1 must be positive, got {c1!r}")
    if ne_pair is None:
        nash = exact_nash_values(game, tol=tol)
        ne_pair = (nash.policy_max, nash.policy_min)
    pi_star, nu_star = ne_pair
    gram = gram_matrices(game, dataset)
    eye = np.eye(game.dim)
    scale = c1 * dataset.k
    margin = np.inf
    worst_side, worst_h = "max", 0
    n_checked = 0
    for side, fixed in (("min", pi_star), ("max", nu_star)):
        free_player = 2 if side == "min" else 1
        for free in _deterministic_policies(game, free_player, limit):
            pair = (fixed, free) if free_player == 2 else (free, fixed)
            outer = expected_feature_outer(game, pair[0], pair[1])
            n_checked += 1
            for h in range(game.horizon):
                gap = gram[h] - eye - scale * outer[h]
                lam = float(np.linalg.eigvalsh(gap)[0])
                if lam < margin:
                    margin, worst_side, worst_h = lam, side, h
    return CoverageReport(
        ok=bool(margin >= -1e-9),
        margin=margin,
        worst_side=worst_side,
        worst_h=worst_h,
        n_policies_checked=n_checked,
    )


def well_explored_check(
    game: TabularLinearMG,
    policy_max: MarkovPolicy,
    policy_min: MarkovPolicy,
    threshold: float = 0.0,
) -> tuple[bool, np.ndarray]:
    """Smallest eigenvalue of ``E[phi_h phi_h']`` per step under a joint
    policy pair, plus whether every step clears ``threshold``."""
    outer = expected_feature_outer(game, policy_max, policy_min)
    lams = np.array([float(np.linalg.eigvalsh(outer[h])[0]) for h in range(game.horizon)])
    return bool((lams >= threshold - 1e-12).all()), lams


__all__ = [
    "RUReport",
    "CoverageReport",
    "bonus_value_dp",
    "relative_uncertainty",
    "expected_feature_outer",
    "coverage_sufficient_check",
    "well_explored_check",
]
