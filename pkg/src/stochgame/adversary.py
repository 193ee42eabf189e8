"""Opponent strategies and adversary construction.

Three layers:

* simple baselines (stationary and clocked Markov mixtures);
* the exact finite-horizon best response against any strategy that plays
  through a public-memory table: because the memory state is public and the
  table is fixed, player 2 faces a finite-horizon MDP over (state, memory)
  and backward induction gives the exact minimizing pure clocked policy;
* the worthlessness synthesizer for the Big Match: an inductively built
  uniform mixture of pure clocked adversaries that drives the long-run
  average payoff of ANY fixed public-memory strategy below 3*delta, built by
  exact forward occupancy recursions (no sampling; the thresholds involved
  are brittle under noise).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .games import NormalizedGame

PROB_TOL = 1e-9


# ---------------------------------------------------------------------------
# public-memory strategy tables


@dataclass(frozen=True)
class PublicMemoryStrategyTable:
    """Player 1 strategy with finitely many public memory states.

    action[t-1, m] is the mixture over player-1 actions at stage t with
    memory m (a single broadcast row when stationary); memory_kernel
    [t-1, m, i, j, z'] is the distribution of the next memory state.  Stage
    indices run 1..horizon; tables with a leading axis of length 1 are
    stationary and apply at every stage.
    """

    memory_states: int
    horizon: int
    action: np.ndarray        # (T or 1, M, I)
    memory_kernel: np.ndarray  # (T or 1, M, I, J, Z, M)

    def __post_init__(self):
        action = np.asarray(self.action, dtype=np.float64)
        kernel = np.asarray(self.memory_kernel, dtype=np.float64)
        m = self.memory_states
        if action.ndim != 3 or action.shape[1] != m:
            raise ValueError(f"action table shape {action.shape} invalid "
                             f"for {m} memory states")
        if kernel.ndim != 6 or kernel.shape[1] != m or kernel.shape[5] != m:
            raise ValueError(f"memory kernel shape {kernel.shape} invalid "
                             f"for {m} memory states")
        for name, table in (("action", action), ("memory_kernel", kernel)):
            if table.shape[0] not in (1, self.horizon):
                raise ValueError(
                    f"{name} leading axis {table.shape[0]} must be 1 "
                    f"(stationary) or horizon {self.horizon}")
            sums = table.sum(axis=-1)
            if np.any(np.abs(sums - 1.0) > PROB_TOL) or np.any(table < -PROB_TOL):
                raise ValueError(f"{name} rows must be probability vectors")
        action.flags.writeable = False
        kernel.flags.writeable = False
        object.__setattr__(self, "action", action)
        object.__setattr__(self, "memory_kernel", kernel)

    @property
    def stationary(self) -> bool:
        return self.action.shape[0] == 1 and self.memory_kernel.shape[0] == 1

    def action_at(self, t: int) -> np.ndarray:
        return self.action[0 if self.action.shape[0] == 1 else t - 1]

    def kernel_at(self, t: int) -> np.ndarray:
        return self.memory_kernel[
            0 if self.memory_kernel.shape[0] == 1 else t - 1]


def save_strategy_table(table: PublicMemoryStrategyTable, path: str) -> None:
    doc = {
        "M": table.memory_states,
        "horizon": table.horizon,
        "action": (table.action[0] if table.action.shape[0] == 1
                   else table.action).tolist(),
        "memory_kernel": (table.memory_kernel[0]
                          if table.memory_kernel.shape[0] == 1
                          else table.memory_kernel).tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_strategy_table(path: str) -> PublicMemoryStrategyTable:
    """Read a table from JSON: action rows over player-1 actions, kernel
    rows over memory states; rank decides stationary vs per-stage tables."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    for key in ("M", "horizon", "action", "memory_kernel"):
        if key not in doc:
            raise ValueError(f"{path}: missing field '{key}'")
    action = np.asarray(doc["action"], dtype=np.float64)
    kernel = np.asarray(doc["memory_kernel"], dtype=np.float64)
    if action.ndim == 2:
        action = action[None, :, :]
    if kernel.ndim == 5:
        kernel = kernel[None]
    horizon = doc["horizon"]
    return PublicMemoryStrategyTable(
        memory_states=int(doc["M"]),
        horizon=None if horizon is None else int(horizon),
        action=action, memory_kernel=kernel)


def from_counter_strategy(ngame: NormalizedGame, config, cache, cap: int,
                          horizon: int) -> PublicMemoryStrategyTable:
    """Wrap the counter strategy, with levels clamped at cap, into a
    stationary public-memory table with cap+1 memory states.

    The action row at memory m is the strategy's mixture at the game's
    initial state (correct for games whose other states are absorbing, e.g.
    the Big Match).  At the cap, the up-move folds into staying put.  The
    kernel evaluates the stage payoff at the initial state as well; after
    absorption the true counter sees a constant payoff instead, but memory
    evolution there influences neither payoffs nor best responses.
    """
    from .counter import make_state, update_distribution

    game = ngame.game
    live = game.initial_state
    m_states = cap + 1
    action = np.zeros((1, m_states, game.n_actions1))
    kernel = np.zeros((1, m_states, game.n_actions1, game.n_actions2,
                       game.n_states, m_states))
    for m in range(m_states):
        sol = cache.at(m)
        action[0, m] = sol.strategy1[live]
        state = make_state(config, m)
        for i in range(game.n_actions1):
            for j in range(game.n_actions2):
                x = float(game.payoff[live, i, j])
                for z_next in range(game.n_states):
                    upd = update_distribution(config, state, x,
                                              float(sol.values[z_next]))
                    p_up, p_stay = upd.p_up, upd.p_stay
                    if m == cap:
                        p_stay += p_up
                        p_up = 0.0
                    if m > 0:
                        kernel[0, m, i, j, z_next, m - 1] = upd.p_down
                    kernel[0, m, i, j, z_next, m] = p_stay
                    if m < cap:
                        kernel[0, m, i, j, z_next, m + 1] = p_up
    return PublicMemoryStrategyTable(memory_states=m_states, horizon=horizon,
                                     action=action, memory_kernel=kernel)


# ---------------------------------------------------------------------------
# exact best response


@dataclass(frozen=True)
class BestResponse:
    """Minimizing pure clocked policy over (t, z, m) and its exact value."""

    policy: np.ndarray  # (T, Z, M) of player-2 action indices
    value: float        # expected average payoff under the policy


def best_response_public(ngame: NormalizedGame,
                         sigma: PublicMemoryStrategyTable,
                         horizon: int, initial_memory: int = 0) -> BestResponse:
    """Exact best response of player 2 against a public-memory table.

    Backward induction over the joint observable state (z, m): V_t(z, m) is
    the minimal expected total payoff from stage t on.  Ties in the
    stage-wise minimization break toward the higher action index, so at
    exact indifference the policy plays the latter action.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if sigma.horizon is not None and horizon > sigma.horizon:
        raise ValueError(f"horizon {horizon} exceeds the table's horizon "
                         f"{sigma.horizon}")
    game = ngame.game
    nz, ni, nj = game.n_states, game.n_actions1, game.n_actions2
    m_states = sigma.memory_states
    if sigma.action.shape[2] != ni or sigma.memory_kernel.shape[2:5] != (ni, nj, nz):
        raise ValueError("table dimensions do not match the game")
    policy = np.zeros((horizon, nz, m_states), dtype=np.int8)
    values = np.zeros((nz, m_states))
    for t in range(horizon, 0, -1):
        act = sigma.action_at(t)       # (M, I)
        ker = sigma.kernel_at(t)       # (M, I, J, Z, M')
        cont = np.einsum("mijwn,wn->mijw", ker, values)
        expected = np.einsum("zijw,mijw->zmij", game.transition, cont)
        stage = np.einsum("mi,zij->zmj", act, game.payoff)
        q = stage + np.einsum("mi,zmij->zmj", act, expected)
        policy[t - 1] = (nj - 1) - q[:, :, ::-1].argmin(axis=2)
        values = q.min(axis=2)
    z0 = game.initial_state
    return BestResponse(policy=policy,
                        value=float(values[z0, initial_memory]) / horizon)


def best_response_exact(payoff, transition, action, kernel, horizon: int,
                        initial_state: int, initial_memory: int = 0):
    """Exact-arithmetic twin of best_response_public on nested lists.

    Inputs may be Fractions (or any exact numbers); no floats are introduced
    so the result is exactly comparable with an enumeration oracle.  action
    is [t][m][i] and kernel is [t][m][i][j][z'][m'], both indexed from
    stage 1 at index 0.  Ties break toward the higher action index, same as
    the float path.  Returns (policy[t][z][m], total_value / horizon).
    """
    nz = len(payoff)
    ni = len(payoff[0])
    nj = len(payoff[0][0])
    m_states = len(action[0])
    values = [[0 for _ in range(m_states)] for _ in range(nz)]
    policy = []
    for t in range(horizon, 0, -1):
        act = action[t - 1]
        ker = kernel[t - 1]
        new_values = [[0] * m_states for _ in range(nz)]
        stage_policy = [[0] * m_states for _ in range(nz)]
        for z in range(nz):
            for m in range(m_states):
                best = None
                best_j = 0
                for j in range(nj):
                    total = 0
                    for i in range(ni):
                        w = act[m][i]
                        if w == 0:
                            continue
                        cont = 0
                        for z2 in range(nz):
                            p = transition[z][i][j][z2]
                            if p == 0:
                                continue
                            inner = 0
                            for m2 in range(m_states):
                                km = ker[m][i][j][z2][m2]
                                if km != 0:
                                    inner += km * values[z2][m2]
                            cont += p * inner
                        total += w * (payoff[z][i][j] + cont)
                    if best is None or total <= best:
                        best = total
                        best_j = j
                new_values[z][m] = best
                stage_policy[z][m] = best_j
        values = new_values
        policy.append(stage_policy)
    policy.reverse()
    total = values[initial_state][initial_memory]
    return policy, total / horizon


# ---------------------------------------------------------------------------
# adversary objects consumed by the simulation engine


class StationaryAdversary:
    """Plays a fixed mixture per game state, ignoring clock and memory."""

    init_draws = 0

    def __init__(self, dist):
        dist = np.asarray(dist, dtype=np.float64)
        if np.any(dist < 0) or np.any(np.abs(dist.sum(axis=-1) - 1.0) > PROB_TOL):
            raise ValueError("rows must be probability vectors")
        self.dist = dist
        self.cum = np.cumsum(dist, axis=-1)

    def prepare(self, horizon: int) -> None:
        pass

    def start(self, u0):
        return None

    def act(self, t, z, m, comp, u):
        rows = self.cum[z]
        idx = (u[:, None] >= rows).sum(axis=1)
        return np.minimum(idx, rows.shape[1] - 1)


def stationary_adversary(dist) -> StationaryAdversary:
    return StationaryAdversary(dist)


def pure_column_adversary(n_states: int, n_cols: int, j: int) -> StationaryAdversary:
    dist = np.zeros((n_states, n_cols))
    dist[:, j] = 1.0
    return StationaryAdversary(dist)


class MarkovAdversary:
    """Plays a per-stage mixture table (t, z); stages past the table clamp
    to its last row."""

    init_draws = 0

    def __init__(self, dist_table):
        table = np.asarray(dist_table, dtype=np.float64)
        if table.ndim != 3:
            raise ValueError("expected a (stages, states, actions) table")
        if np.any(table < 0) or np.any(np.abs(table.sum(axis=-1) - 1.0) > PROB_TOL):
            raise ValueError("rows must be probability vectors")
        self.table = table
        self.cum = np.cumsum(table, axis=-1)

    def prepare(self, horizon: int) -> None:
        pass

    def start(self, u0):
        return None

    def act(self, t, z, m, comp, u):
        rows = self.cum[min(t - 1, self.cum.shape[0] - 1)][z]
        idx = (u[:, None] >= rows).sum(axis=1)
        return np.minimum(idx, rows.shape[1] - 1)


def markov_adversary(dist_table) -> MarkovAdversary:
    return MarkovAdversary(dist_table)


class BestResponseAdversary:
    """Plays a precomputed backward-induction policy over (t, z, m).

    The policy is built for build_horizon stages by stages-remaining; when
    the simulated horizon is longer, early stages clamp to the
    deepest-horizon row (row 1) and the final build_horizon stages align
    with the table's endgame.  Memory levels past the table clamp to its
    last row.
    """

    init_draws = 0

    def __init__(self, policy: np.ndarray, build_horizon: int):
        self.policy = policy
        self.build_horizon = build_horizon
        self._shift = 0

    def prepare(self, horizon: int) -> None:
        self._shift = max(0, horizon - self.build_horizon)

    def start(self, u0):
        return None

    def act(self, t, z, m, comp, u):
        row = max(1, t - self._shift)
        table = self.policy[row - 1]
        return table[z, np.minimum(m, table.shape[1] - 1)]


# ---------------------------------------------------------------------------
# worthlessness construction (Big Match)


@dataclass(frozen=True)
class PureClockedAdversary:
    """Pure clocked policy identified with the set of (t, m) pairs mapped to
    action one; everywhere else it plays action zero."""

    ones: frozenset[tuple[int, int]]
    horizon: int
    memory_states: int

    def plays_one(self, t: int, m: int) -> bool:
        return (t, m) in self.ones

    @cached_property
    def dense(self) -> np.ndarray:
        table = np.zeros((self.horizon, self.memory_states), dtype=bool)
        for t, m in self.ones:
            table[t - 1, m] = True
        table.flags.writeable = False
        return table


@dataclass(frozen=True)
class MixedAdversary:
    """Uniform mixture over pure clocked components (repeats allowed)."""

    components: tuple[PureClockedAdversary, ...]

    def __post_init__(self):
        if not self.components:
            raise ValueError("mixture must have at least one component")

    @cached_property
    def stacked_dense(self) -> np.ndarray:
        return np.stack([c.dense for c in self.components])


@dataclass(frozen=True)
class BigMatchIndices:
    live: int
    absorb_action: int
    continue_action: int
    col_zero: int
    col_one: int


def big_match_indices(ngame: NormalizedGame) -> BigMatchIndices:
    """Locate the Big Match structure in a (possibly permuted) game."""
    game = ngame.game
    live = game.initial_state
    if game.n_actions1 != 2 or game.n_actions2 != 2:
        raise ValueError("Big Match structure requires 2x2 actions")
    stays = [bool(np.all(np.abs(game.transition[live, i, :, live] - 1.0) < PROB_TOL))
             for i in range(2)]
    leaves = [bool(np.all(game.transition[live, i, :, live] < PROB_TOL))
              for i in range(2)]
    if not any(stays) or not any(leaves):
        raise ValueError("no continuing/absorbing action pair at the "
                         "initial state")
    cont = stays.index(True)
    absorb = leaves.index(True)
    pay = game.payoff[live, cont]
    if abs(pay[0] - 1.0) < PROB_TOL and abs(pay[1]) < PROB_TOL:
        col_zero, col_one = 0, 1
    elif abs(pay[1] - 1.0) < PROB_TOL and abs(pay[0]) < PROB_TOL:
        col_zero, col_one = 1, 0
    else:
        raise ValueError("continuing payoffs are not the 1/0 pattern")
    if (abs(game.payoff[live, absorb, col_zero]) > PROB_TOL
            or abs(game.payoff[live, absorb, col_one] - 1.0) > PROB_TOL):
        raise ValueError("absorbing payoffs are not the 0/1 pattern")
    return BigMatchIndices(live=live, absorb_action=absorb,
                           continue_action=cont, col_zero=col_zero,
                           col_one=col_one)


class WorthlessnessError(RuntimeError):
    """Construction could not be completed within the horizon."""


@dataclass(frozen=True)
class WorthlessnessCertificate:
    """Everything the construction proves, stage by stage.

    stage_payoffs[i, t-1] is the exact per-stage expected payoff r^i_t of
    the strategy against component i+1; switch_stages holds the n_i of each
    enlargement step (one fewer than the component count); budgets the
    absorb-action mass sum over each component's one-set.  Certified stages
    are those at or beyond t_delta = max n_i, where the count of components
    with r^i_t >= delta may not exceed M+1.
    """

    delta: float
    horizon: int
    memory_states: int
    tail_tol: float
    switch_stages: tuple[int, ...]
    budgets: tuple[float, ...]
    tails: tuple[float, ...]
    component_avg_payoffs: tuple[float, ...]
    stage_payoffs: np.ndarray
    mixture_avg_payoff: float

    @property
    def t_delta(self) -> int:
        return max(self.switch_stages) if self.switch_stages else 1

    @property
    def witness_value(self) -> float:
        """Finite proxy for the eventual-payoff witness: the smallest
        late-window (last tenth of the horizon) average of per-stage
        payoffs across components."""
        window = max(1, self.horizon // 10)
        return float(self.stage_payoffs[:, -window:].mean(axis=1).min())

    def exceed_counts(self) -> np.ndarray:
        """Per certified stage, how many components still collect >= delta."""
        certified = self.stage_payoffs[:, self.t_delta - 1:]
        return (certified >= self.delta).sum(axis=0)

    @property
    def max_exceed_count(self) -> int:
        return int(self.exceed_counts().max())

    def lines(self) -> list[str]:
        counts = self.exceed_counts()
        max_count = int(counts.max()) if counts.size else 0
        max_tail = max(self.tails) if self.tails else 0.0
        return [
            f"components: {self.stage_payoffs.shape[0]}  "
            f"(memory states {self.memory_states}, delta {self.delta:g})",
            f"t_delta (max switch stage): {self.t_delta}",
            f"max budget: {max(self.budgets):.6g} < delta/3 = "
            f"{self.delta / 3:.6g}: "
            f"{'PASS' if max(self.budgets) < self.delta / 3 else 'FAIL'}",
            f"max truncation tail: {max_tail:.3e} < {self.tail_tol:g}: "
            f"{'PASS' if max_tail < self.tail_tol else 'FAIL'}",
            f"certificate count: max {max_count} "
            f"<= M+1 = {self.memory_states + 1}: "
            f"{'PASS' if max_count <= self.memory_states + 1 else 'FAIL'}",
            f"exact mixture average payoff at horizon: "
            f"{self.mixture_avg_payoff:.6g} (target < 3*delta = "
            f"{3 * self.delta:g})",
            f"eventual-payoff witness (best component, late window): "
            f"{self.witness_value:.6g} (target <= delta = {self.delta:g})",
        ]


@dataclass(frozen=True)
class WorthlessnessResult:
    mixture: MixedAdversary
    certificate: WorthlessnessCertificate


def _forward_pass(a, c, kc0, kc1, ones, horizon):
    """Exact occupancy recursion for one pure clocked adversary.

    a[t-1, m]/c[t-1, m]: absorb/continue action probabilities (broadcast
    rows when stationary); kc0/kc1: memory kernels under continue and
    columns 0/1; ones: (T, M) bool, True where the adversary plays 1.
    Returns (occupancy Q, per-stage absorb-at-one/zero masses, stage payoffs).
    """
    t_rows = a.shape[0]
    m_states = a.shape[1]
    occupancy = np.zeros((horizon, m_states))
    occupancy[0, 0] = 1.0
    absorb1 = np.zeros(horizon)
    absorb0 = np.zeros(horizon)
    live_pay = np.zeros(horizon)
    for t in range(horizon):
        row = min(t, t_rows - 1)
        q = occupancy[t]
        mask = ones[t]
        absorb_mass = q * a[row]
        absorb1[t] = absorb_mass[mask].sum()
        absorb0[t] = absorb_mass[~mask].sum()
        cont_mass = q * c[row]
        live_pay[t] = cont_mass[~mask].sum()  # continue vs column 0 pays 1
        if t + 1 < horizon:
            k_eff = np.where(mask[:, None], kc1[row], kc0[row])
            occupancy[t + 1] = cont_mass @ k_eff
    payoffs = np.cumsum(absorb1) + live_pay
    return occupancy, absorb1, absorb0, payoffs


def build_worthlessness_adversary(ngame: NormalizedGame,
                                  sigma: PublicMemoryStrategyTable,
                                  delta: float, horizon: int,
                                  tail_tol: float) -> WorthlessnessResult:
    """Synthesize the uniform mixture that certifies worthlessness of a
    public-memory Big Match strategy.

    Component 1 always plays 0.  Inductively, against component i the exact
    per-stage payoffs r^i_t are computed by forward recursion; every stage
    from the switch stage n_i on where r^i_t >= delta contributes the pair
    (t, m(t)) with the heaviest still-unused occupancy (guaranteed
    >= delta/(3M)); n_i is the least stage where the absorb-action budget of
    the enlarged set stays below delta/3 and the post-n_i absorb-at-zero
    tail is below tail_tol.  Components are collected until their number
    exceeds (M+1)/delta.
    """
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if sigma.horizon is not None and horizon > sigma.horizon:
        raise ValueError(f"horizon {horizon} exceeds the table's horizon "
                         f"{sigma.horizon}")
    idx = big_match_indices(ngame)
    game = ngame.game
    if (sigma.action.shape[2] != game.n_actions1
            or sigma.memory_kernel.shape[2:5] != (game.n_actions1,
                                                  game.n_actions2,
                                                  game.n_states)):
        raise ValueError("table dimensions do not match the game")
    m_states = sigma.memory_states
    n_components = (1 if delta >= 1.0
                    else int(np.floor((m_states + 1) / delta)) + 1)

    a = sigma.action[:, :, idx.absorb_action]
    c = sigma.action[:, :, idx.continue_action]
    kern = sigma.memory_kernel
    kc0 = kern[:, :, idx.continue_action, idx.col_zero, idx.live, :]
    kc1 = kern[:, :, idx.continue_action, idx.col_one, idx.live, :]
    a_full = (np.broadcast_to(a, (horizon, m_states)) if a.shape[0] == 1
              else a[:horizon])

    ones = np.zeros((horizon, m_states), dtype=bool)
    components: list[PureClockedAdversary] = []
    switch_stages: list[int] = []
    budgets: list[float] = []
    tails: list[float] = []
    stage_payoffs = np.zeros((n_components, horizon))

    for comp_index in range(n_components):
        occupancy, _, absorb0, payoffs = _forward_pass(
            a, c, kc0, kc1, ones, horizon)
        stage_payoffs[comp_index] = payoffs
        components.append(PureClockedAdversary(
            ones=frozenset((int(t) + 1, int(m))
                           for t, m in zip(*np.nonzero(ones))),
            horizon=horizon, memory_states=m_states))
        budgets.append(float(a_full[ones].sum()))
        if comp_index == n_components - 1:
            break

        hot = payoffs >= delta  # stages still collecting delta
        selection = np.full(horizon, -1, dtype=np.int64)
        threshold = delta / (3.0 * m_states)
        for t in np.flatnonzero(hot):
            masked = np.where(ones[t], -1.0, occupancy[t])
            m_best = int(masked.argmax())
            if masked[m_best] < threshold:
                raise WorthlessnessError(
                    f"internal invariant violated at stage {t + 1}: no unused "
                    f"memory with occupancy >= delta/(3M) = {threshold:g} "
                    f"although the stage payoff is {payoffs[t]:.6g}")
            selection[t] = m_best

        base_budget = budgets[-1]
        add_cost = np.zeros(horizon)
        sel_t = np.flatnonzero(selection >= 0)
        add_cost[sel_t] = a_full[sel_t, selection[sel_t]]
        suffix_cost = np.cumsum(add_cost[::-1])[::-1]
        tail0 = np.concatenate([np.cumsum(absorb0[::-1])[::-1][1:], [0.0]])
        feasible = np.flatnonzero(
            (base_budget + suffix_cost < delta / 3.0) & (tail0 < tail_tol))
        if feasible.size == 0:
            budget_ok = base_budget + suffix_cost[-1] < delta / 3.0
            tail_ok = tail0[-1] < tail_tol
            raise WorthlessnessError(
                f"horizon {horizon} too short for component "
                f"{comp_index + 2}: binding constraint is "
                f"{'absorb-action budget' if not budget_ok else ''}"
                f"{' and ' if not budget_ok and not tail_ok else ''}"
                f"{'truncation tail' if not tail_ok else ''}"
                f" (budget {base_budget + suffix_cost[-1]:.6g} vs "
                f"{delta / 3:.6g}, tail {tail0[-1]:.3e} vs {tail_tol:g})")
        n_i = int(feasible[0]) + 1
        switch_stages.append(n_i)
        tails.append(float(tail0[n_i - 1]))
        for t in sel_t:
            if t + 1 >= n_i:
                ones[t, selection[t]] = True

    component_avgs = tuple(float(x) for x in stage_payoffs.mean(axis=1))
    certificate = WorthlessnessCertificate(
        delta=delta, horizon=horizon, memory_states=m_states,
        tail_tol=tail_tol, switch_stages=tuple(switch_stages),
        budgets=tuple(budgets), tails=tuple(tails),
        component_avg_payoffs=component_avgs, stage_payoffs=stage_payoffs,
        mixture_avg_payoff=float(stage_payoffs.mean()))
    return WorthlessnessResult(
        mixture=MixedAdversary(components=tuple(components)),
        certificate=certificate)


class MixedClockedAdversary:
    """Engine adapter: draws one component per episode, then plays it.

    Consumes one uniform at episode start (the component draw); pure
    components consume nothing further beyond the per-stage positional
    draws shared by every adversary.
    """

    init_draws = 1

    def __init__(self, mixture: MixedAdversary, indices: BigMatchIndices):
        self.mixture = mixture
        self.indices = indices
        self._dense = mixture.stacked_dense
        cols = np.zeros(2, dtype=np.int64)
        cols[0] = indices.col_zero
        cols[1] = indices.col_one
        self._col_of = cols

    def prepare(self, horizon: int) -> None:
        if horizon > self._dense.shape[1]:
            raise ValueError(f"horizon {horizon} exceeds the mixture's "
                             f"table {self._dense.shape[1]}")

    def start(self, u0):
        return (u0 * len(self.mixture.components)).astype(np.int64)

    def act(self, t, z, m, comp, u):
        m_idx = np.minimum(m, self._dense.shape[2] - 1)
        plays_one = self._dense[comp, t - 1, m_idx]
        return self._col_of[plays_one.astype(np.int64)]
