"""The low-memory counter strategy for player 1.

The strategy keeps a single integer level k; the counter position is
s = base * growth^k on the geometric grid {base * growth^k}.  Each stage it
plays an optimal mixture of the lambda(s)-discounted game at the current
state, where lambda(s) = 1/(s ln^2 s), then moves the level up, down, or not
at all with probabilities driven by the deviation

    d = payoff - value_next + epsilon/2

so that the expected counter increment is exactly d (positive part at the
floor level 0).  Rising counters lower the discount rate, making the
strategy more patient exactly when it has been collecting payoff above the
discounted value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .discounted import SolutionCache
from .games import NormalizedGame


class FeasibilityError(ValueError):
    """Configuration cannot express the update probabilities in [0, 1]."""

    def __init__(self, message: str, minimal_base: float):
        super().__init__(message)
        self.minimal_base = minimal_base


def discount_rate(position: float) -> float:
    """Rate map 1/(s ln^2 s) from counter position to discount rate."""
    if position <= 1.0:
        raise ValueError(
            f"counter position must exceed 1, got {position}")
    log = math.log(position)
    return 1.0 / (position * log * log)


RATE_MAPS = {"inv-s-log2": discount_rate}


@dataclass(frozen=True)
class CounterConfig:
    """Parameters of the counter strategy.

    growth is the multiplicative grid step 1 + epsilon/9; base is the
    smallest counter position (level 0); memory_slope is the coefficient of
    ln n in the memory bounds (default: 4/ln growth, the smallest admissible
    choice and hence the tightest bound to test); min_horizon is
    72/(epsilon^2 * rate(base)), the stage count beyond which the epsilon
    guarantees bind, and doubles as the additive allowance in the uniform
    memory bound m_n <= min_horizon + memory_slope * ln n.
    """

    epsilon: float
    growth: float
    base: float
    memory_slope: float
    min_horizon: float
    rate_map: str = "inv-s-log2"

    def position_at(self, level: int) -> float:
        return self.growth ** level * self.base

    def rate_at(self, level: int) -> float:
        return RATE_MAPS[self.rate_map](self.position_at(level))

    @property
    def minimal_base(self) -> float:
        return 9.0 * self.growth / (8.0 * (self.growth - 1.0))


@dataclass(frozen=True)
class CounterState:
    """Memory level k and its grid position s = base * growth^k."""

    level: int
    position: float

    def __post_init__(self):
        if self.level < 0:
            raise ValueError(f"counter level must be >= 0, got {self.level}")


def make_state(config: CounterConfig, level: int) -> CounterState:
    return CounterState(level=level, position=config.position_at(level))


@dataclass(frozen=True)
class MemoryUpdate:
    """One-step distribution of the level move: up one, stay, down one."""

    p_up: float
    p_stay: float
    p_down: float


def make_config(epsilon: float, base: float,
                memory_slope: float | None = None,
                rate_map: str = "inv-s-log2") -> CounterConfig:
    """Build a validated CounterConfig.

    Rejects infeasible bases: base * (growth-1) / growth >= 9/8 is required
    so that both update probabilities stay in [0, 1] for every deviation
    (|d| <= 1 + epsilon/2 < 9/8 on normalized payoffs).
    """
    if not 0.0 < epsilon < 0.25:
        raise ValueError(f"epsilon must lie in (0, 1/4), got {epsilon}")
    if base <= 2.0:
        raise ValueError(f"base must exceed 2, got {base}")
    if rate_map not in RATE_MAPS:
        raise ValueError(f"unknown rate map {rate_map!r}; "
                         f"available: {sorted(RATE_MAPS)}")
    growth = 1.0 + epsilon / 9.0
    # epsilon/9 instead of growth-1: the subtraction loses ~2 ulp and would
    # reject the exact minimal base.
    minimal = 9.0 * growth / (8.0 * (epsilon / 9.0))
    if base * (epsilon / 9.0) / growth < 9.0 / 8.0:
        raise FeasibilityError(
            f"base {base:g} infeasible for epsilon {epsilon:g}: requires "
            f"base * (growth-1)/growth >= 9/8, i.e. base >= {minimal:.6g}",
            minimal_base=minimal)
    slope = 4.0 / math.log(growth)
    if memory_slope is None:
        memory_slope = slope
    elif memory_slope < slope:
        raise ValueError(
            f"memory_slope {memory_slope:g} below the admissible minimum "
            f"4/ln(growth) = {slope:.6g}")
    min_horizon = 72.0 / (epsilon ** 2 * RATE_MAPS[rate_map](base))
    return CounterConfig(epsilon=epsilon, growth=growth, base=base,
                         memory_slope=memory_slope, min_horizon=min_horizon,
                         rate_map=rate_map)


def _check_unit(name: str, x: float) -> None:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {x}")


def update_distribution(config: CounterConfig, state: CounterState,
                        payoff: float, value_next: float) -> MemoryUpdate:
    """Closed-form one-step move probabilities of the counter level.

    With d = payoff - value_next + epsilon/2 and s the current position:
    d > 0 moves up with probability d/(s(growth-1)); d < 0 moves down with
    probability |d|*growth/(s(growth-1)) unless already at level 0; d = 0
    stays put.  The expected position increment is exactly d (its positive
    part at level 0), and the move probability is at most 2/(s(growth-1)).
    """
    _check_unit("payoff", payoff)
    _check_unit("value_next", value_next)
    d = payoff - value_next + config.epsilon / 2.0
    denom = state.position * (config.growth - 1.0)
    p_up = 0.0
    p_down = 0.0
    if d > 0.0:
        p_up = d / denom
    elif d < 0.0 and state.level > 0:
        p_down = -d * config.growth / denom
    return MemoryUpdate(p_up=p_up, p_stay=1.0 - p_up - p_down, p_down=p_down)


def sample_update(config: CounterConfig, state: CounterState, payoff: float,
                  value_next: float, draw: float) -> CounterState:
    """Map a uniform draw through the (up, stay, down) thresholds."""
    update = update_distribution(config, state, payoff, value_next)
    if draw < update.p_up:
        return make_state(config, state.level + 1)
    if draw < update.p_up + update.p_stay:
        return state
    return make_state(config, state.level - 1)


def select_action(config: CounterConfig, ngame: NormalizedGame,
                  state: CounterState, z: int,
                  cache: SolutionCache) -> np.ndarray:
    """Player 1's mixture at state z: the optimal row strategy of the
    lambda(s)-discounted game at the current counter level."""
    return cache.at(state.level).strategy1[z]


@dataclass(frozen=True)
class ConstantsCheck:
    name: str
    levels: tuple[int, ...]
    margins: tuple[float, ...]  # bound minus achieved; >= 0 passes

    @property
    def passed(self) -> bool:
        return all(m >= 0.0 for m in self.margins)


@dataclass(frozen=True)
class ConstantsReport:
    """Per-level numerical surrogates of the 'base large enough' regime.

    Four checks along the grid {base * growth^k, k <= depth}:
    value_variation: neighbouring-rate value gap within
    (epsilon^2/9)(1/ln s - 1/ln s'); value_floor: discounted values at
    most epsilon/8 below the small-rate limit estimate; step_log:
    ln(growth) ln(growth*s) / ln(s) < 2^-5; rate_variation: neighbouring
    rates within epsilon/8 relative gap.
    """

    checks: tuple[ConstantsCheck, ...]
    limit_spread: float

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        out = [f"limit-estimate spread: {self.limit_spread:.3e}"]
        for check in self.checks:
            worst = min(check.margins)
            level = check.levels[check.margins.index(worst)]
            out.append(
                f"{check.name}: {'PASS' if check.passed else 'FAIL'} "
                f"({len(check.levels)} levels, worst margin {worst:.3e} "
                f"at level {level})")
        return out


def validate_constants(config: CounterConfig, ngame: NormalizedGame,
                       cache: SolutionCache, grid_depth: int) -> ConstantsReport:
    """Check the four regime inequalities on the realized grid.

    Report-only: a failed line means the chosen base is too small for this
    game at this epsilon, not that an operation will raise.
    """
    from .discounted import estimate_value_limit

    if grid_depth < 1:
        raise ValueError(f"grid_depth must be >= 1, got {grid_depth}")
    eps = config.epsilon
    levels = list(range(grid_depth + 1))
    values = {k: cache.at(k).values for k in levels}
    positions = {k: config.position_at(k) for k in levels}
    rates = {k: config.rate_at(k) for k in levels}

    tail = levels[-min(3, len(levels)):]
    limit = estimate_value_limit(ngame, [rates[k] for k in tail],
                                 tol=cache.tol)

    variation = []
    for k in levels[:-1]:
        gap = float(np.max(np.abs(values[k] - values[k + 1])))
        bound = (eps * eps / 9.0) * (1.0 / math.log(positions[k])
                                     - 1.0 / math.log(positions[k + 1]))
        variation.append(bound - gap)

    floor = [float(np.min(values[k] - (limit.values - eps / 8.0)))
             for k in levels]

    step_log = []
    for k in levels:
        s = positions[k]
        achieved = (math.log(config.growth) * math.log(config.growth * s)
                    / math.log(s))
        step_log.append(2.0 ** -5 - achieved)

    rate_var = []
    rate_levels = []
    for k in levels:
        neighbours = [k + 1] if k == 0 else [k - 1, k + 1]
        for k2 in neighbours:
            if k2 > grid_depth:
                continue
            r2 = rates[k2] if k2 in rates else config.rate_at(k2)
            rate_var.append(eps * rates[k] / 8.0 - abs(rates[k] - r2))
            rate_levels.append(k)

    checks = (
        ConstantsCheck("value_variation", tuple(levels[:-1]), tuple(variation)),
        ConstantsCheck("value_floor", tuple(levels), tuple(floor)),
        ConstantsCheck("step_log", tuple(levels), tuple(step_log)),
        ConstantsCheck("rate_variation", tuple(rate_levels), tuple(rate_var)),
    )
    return ConstantsReport(checks=checks, limit_spread=limit.spread)
