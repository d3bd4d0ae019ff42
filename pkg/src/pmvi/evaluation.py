"""Exact evaluation of policies and algorithm output on a known game.

Everything here is exact dynamic programming on the tabular model -- no
sampling.  The conventions:

- ``exact_nash_values``: backward induction where each stage matrix is solved
  as a zero-sum game; gives V*, Q* and one equilibrium policy pair.
- ``best_response_value``: value of a fixed Markov policy against the
  opponent's exact best response (which may be taken pure).
- ``suboptimality``: the duality-gap performance measure of a policy pair
  ``sub = V^{*,nu}(x) - V^{pi,*}(x)`` together with the weaker gap
  ``subb = |V*(x) - V^{pi,nu}(x)|``.
- ``theorem_bound_rhs``: the information-theoretic upper bound
  ``2 beta sum_h E[(phi' Lambda_h^-1 phi)^1/2]`` evaluated exactly under the
  two mixed policy pairs the guarantee pairs up (equilibrium vs auxiliary).
- ``value_difference``: the exact two-term expansion of
  ``Vhat_1(x) - V^{pi,nu}_1(x)`` into an equilibrium-advantage term and a
  Bellman-residual term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InvariantError
from .games import MarkovPolicy, QTable, TabularLinearMG, VTable, bellman_apply
from .matrix_nash import solve_zero_sum
from .value_iteration import PmviOutput, bonus_tables

_CHAIN_ATOL = 1e-8


@dataclass(frozen=True)
class NashValues:
    """Exact equilibrium values of a game plus one equilibrium policy pair."""

    v_star: VTable
    q_star: QTable
    policy_max: MarkovPolicy
    policy_min: MarkovPolicy


@dataclass(frozen=True)
class EvaluationReport:
    """Exact performance summary of a policy pair from the initial state.

    - ``v_star``: equilibrium value V*_1(x)
    - ``v_max_br``: V^{*, nu}_1(x), the max-player best-responding to nu
    - ``v_min_br``: V^{pi, *}_1(x), the min-player best-responding to pi
    - ``v_pair``: V^{pi, nu}_1(x)
    - ``sub = v_max_br - v_min_br`` and ``subb = |v_star - v_pair|``
    """

    v_star: float
    v_max_br: float
    v_min_br: float
    v_pair: float
    sub: float
    subb: float


def exact_nash_values(game: TabularLinearMG, tol: float = 1e-9) -> NashValues:
    """Backward induction with a matrix-game solve per (h, s)."""
    h_len, s_count = game.horizon, game.n_states
    q = np.zeros((h_len, s_count, game.n_actions_p1, game.n_actions_p2))
    v = np.zeros((h_len + 1, s_count))
    pi = np.zeros((h_len, s_count, game.n_actions_p1))
    nu = np.zeros((h_len, s_count, game.n_actions_p2))
    for h in reversed(range(h_len)):
        q[h] = bellman_apply(game, h, v[h + 1])
        for s in range(s_count):
            sol = solve_zero_sum(q[h, s], tol=tol)
            v[h, s] = sol.value
            pi[h, s] = sol.row_strategy
            nu[h, s] = sol.col_strategy
    return NashValues(
        v_star=VTable(v[:h_len]),
        q_star=QTable(q),
        policy_max=MarkovPolicy(pi, player=1),
        policy_min=MarkovPolicy(nu, player=2),
    )


def policy_value(game: TabularLinearMG, policy_max: MarkovPolicy, policy_min: MarkovPolicy) -> VTable:
    """V^{pi,nu}_h(s) for a fixed joint policy, by backward DP."""
    _expect_players(policy_max, policy_min)
    v = np.zeros((game.horizon + 1, game.n_states))
    for h in reversed(range(game.horizon)):
        q = bellman_apply(game, h, v[h + 1])
        v[h] = np.einsum("sa,sab,sb->s", policy_max.probs[h], q, policy_min.probs[h])
    return VTable(v[: game.horizon])


def best_response_value(
    game: TabularLinearMG, policy: MarkovPolicy
) -> tuple[VTable, MarkovPolicy]:
    """Fix one player's Markov policy; return the opponent's exact best
    response value table and a pure policy attaining it.

    For a max-player policy pi this is V^{pi,*} (opponent minimizes); for a
    min-player policy nu it is V^{*,nu} (opponent maximizes).
    """
    v = np.zeros((game.horizon + 1, game.n_states))
    br_actions = np.zeros((game.horizon, game.n_states), dtype=np.int64)
    for h in reversed(range(game.horizon)):
        q = bellman_apply(game, h, v[h + 1])
        if policy.player == 1:
            # opponent (min) sees the action-b values averaged over pi
            avg = np.einsum("sa,sab->sb", policy.probs[h], q)
            br_actions[h] = np.argmin(avg, axis=1)
            v[h] = avg[np.arange(game.n_states), br_actions[h]]
        else:
            avg = np.einsum("sb,sab->sa", policy.probs[h], q)
            br_actions[h] = np.argmax(avg, axis=1)
            v[h] = avg[np.arange(game.n_states), br_actions[h]]
    br_player = 2 if policy.player == 1 else 1
    return VTable(v[: game.horizon]), MarkovPolicy.pure(game, br_player, br_actions)


def suboptimality(
    game: TabularLinearMG,
    policy_max: MarkovPolicy,
    policy_min: MarkovPolicy,
    tol: float = 1e-9,
) -> EvaluationReport:
    """Exact duality-gap report for a policy pair from the initial state."""
    _expect_players(policy_max, policy_min)
    nash = exact_nash_values(game, tol=tol)
    v_star = nash.v_star.initial(game)
    v_min_br = best_response_value(game, policy_max)[0].initial(game)
    v_max_br = best_response_value(game, policy_min)[0].initial(game)
    v_pair = policy_value(game, policy_max, policy_min).initial(game)
    if not (v_min_br <= v_star + _CHAIN_ATOL and v_star <= v_max_br + _CHAIN_ATOL):
        raise InvariantError(
            f"weak-duality chain violated: {v_min_br!r} <= {v_star!r} <= {v_max_br!r} fails"
        )
    sub = v_max_br - v_min_br
    if sub < -_CHAIN_ATOL:
        raise InvariantError(f"negative duality gap {sub!r}")
    return EvaluationReport(
        v_star=v_star,
        v_max_br=v_max_br,
        v_min_br=v_min_br,
        v_pair=v_pair,
        sub=sub,
        subb=abs(v_star - v_pair),
    )


def bellman_error_tables(game: TabularLinearMG, output: PmviOutput) -> tuple[np.ndarray, np.ndarray]:
    """Residuals of the two estimates against one exact backup.

    Returns ``(iota_lower, iota_upper)`` with
    ``iota_lower[h] = r_h + P_h V_lower_{h+1} - Q_lower_h`` and the same for
    the upper pair, shapes (H, S, A1, A2).
    """
    h_len = game.horizon
    v_lo = np.vstack([output.v_lower.values, np.zeros((1, game.n_states))])
    v_up = np.vstack([output.v_upper.values, np.zeros((1, game.n_states))])
    iota_lo = np.empty_like(output.q_lower.values)
    iota_up = np.empty_like(output.q_upper.values)
    for h in range(h_len):
        iota_lo[h] = bellman_apply(game, h, v_lo[h + 1]) - output.q_lower.values[h]
        iota_up[h] = bellman_apply(game, h, v_up[h + 1]) - output.q_upper.values[h]
    return iota_lo, iota_up


def sandwich_holds(
    iota_lower: np.ndarray,
    iota_upper: np.ndarray,
    bonus: np.ndarray,
    atol: float = 1e-8,
) -> bool:
    """The two-sided residual event: ``0 <= iota_lower <= 2 Gamma`` and
    ``0 <= -iota_upper <= 2 Gamma`` everywhere (within ``atol``)."""
    lo_ok = (iota_lower >= -atol).all() and (iota_lower <= 2.0 * bonus + atol).all()
    up_ok = (-iota_upper >= -atol).all() and (-iota_upper <= 2.0 * bonus + atol).all()
    return bool(lo_ok and up_ok)


def expected_total(
    game: TabularLinearMG,
    policy_max: MarkovPolicy,
    policy_min: MarkovPolicy,
    tables: np.ndarray,
) -> float:
    """``E[sum_h f_h(s_h, a_h, b_h)]`` from the initial state under a joint
    mixed policy pair, for arbitrary per-step tables f of shape (H,S,A1,A2)."""
    _expect_players(policy_max, policy_min)
    tables = np.asarray(tables, dtype=np.float64)
    if tables.shape != (game.horizon, game.n_states, game.n_actions_p1, game.n_actions_p2):
        raise ConfigError(f"tables shape {tables.shape} does not match the game")
    rho = np.zeros(game.n_states)
    rho[game.initial_state] = 1.0
    total = 0.0
    for h in range(game.horizon):
        joint = np.einsum("s,sa,sb->sab", rho, policy_max.probs[h], policy_min.probs[h])
        total += float((joint * tables[h]).sum())
        rho = np.einsum("sab,sabt->t", joint, game.transition[h])
    return total


def theorem_bound_rhs(
    game: TabularLinearMG,
    output: PmviOutput,
    nash: NashValues,
) -> float:
    """The exact uncertainty-weighted upper bound on the duality gap:

    ``2 beta sum_h E_{pi*, nu_aux}[sqrt(phi' Lambda_h^-1 phi)]
      + 2 beta sum_h E_{pi_aux, nu*}[sqrt(phi' Lambda_h^-1 phi)]``.
    """
    unit = bonus_tables(game, output.gram, beta=1.0)
    first = expected_total(game, nash.policy_max, output.policy_min_aux, unit)
    second = expected_total(game, output.policy_max_aux, nash.policy_min, unit)
    return 2.0 * output.beta * (first + second)


def value_difference(
    game: TabularLinearMG,
    q_hat: QTable,
    v_hat: VTable,
    policy_hat_max: MarkovPolicy,
    policy_hat_min: MarkovPolicy,
    policy_max: MarkovPolicy,
    policy_min: MarkovPolicy,
    atol: float = 1e-8,
) -> tuple[float, float, float]:
    """Exact decomposition of ``Vhat_1(x) - V^{pi,nu}_1(x)``.

    Requires the consistency ``Vhat_h(s) = pihat_h(s)' Qhat_h(s) nuhat_h(s)``
    (checked; the decomposition is an identity only under it).  Returns
    ``(advantage_term, residual_term, total)`` where

    - advantage: ``sum_h E_{pi,nu}[<Qhat_h(s_h), pihat x nuhat - pi x nu>]``
    - residual:  ``sum_h E_{pi,nu}[Qhat_h(s_h,a_h,b_h) - (r_h + P_h Vhat_{h+1})(s_h,a_h,b_h)]``

    and ``total = advantage + residual = Vhat_1(x) - V^{pi,nu}_1(x)``.
    """
    _expect_players(policy_hat_max, policy_hat_min)
    _expect_players(policy_max, policy_min)
    consistency = np.einsum(
        "hsa,hsab,hsb->hs", policy_hat_max.probs, q_hat.values, policy_hat_min.probs
    )
    worst = np.abs(consistency - v_hat.values).max()
    if worst > atol:
        raise InvariantError(
            f"v_hat is not the bilinear form of q_hat under the hat policies "
            f"(worst deviation {worst:.3e})"
        )
    h_len = game.horizon
    v_ext = np.vstack([v_hat.values, np.zeros((1, game.n_states))])
    advantage_tables = np.empty_like(q_hat.values)
    residual_tables = np.empty_like(q_hat.values)
    for h in range(h_len):
        backup = bellman_apply(game, h, v_ext[h + 1])
        residual_tables[h] = q_hat.values[h] - backup
        # <Qhat, pihat x nuhat> is a per-state scalar; spread it as a constant
        # table so the same expectation operator handles both terms.
        hat_value = np.einsum("sa,sab,sb->s", policy_hat_max.probs[h], q_hat.values[h], policy_hat_min.probs[h])
        advantage_tables[h] = hat_value[:, None, None] - q_hat.values[h]
    advantage = expected_total(game, policy_max, policy_min, advantage_tables)
    residual = expected_total(game, policy_max, policy_min, residual_tables)
    total = advantage + residual
    expected = v_hat.initial(game) - policy_value(game, policy_max, policy_min).initial(game)
    if abs(total - expected) > max(atol, 1e-10):
        raise InvariantError(
            f"value-difference identity violated: {total!r} vs {expected!r}"
        )
    return advantage, residual, total


def _expect_players(policy_max: MarkovPolicy, policy_min: MarkovPolicy) -> None:
    if policy_max.player != 1 or policy_min.player != 2:
        raise ConfigError("expected a (max-player, min-player) policy pair in that order")
