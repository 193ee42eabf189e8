"""Seed-reproducible Monte Carlo simulation of strategy pairs.

Randomness contract (the part everything else leans on):

* generator: Philox 4x64, one stream per replication, keyed by the 128-bit
  pair (base_seed, replication index);
* per stage exactly four uniforms are consumed in the fixed order
  (player-1 action, player-2 action, transition, memory update), whether or
  not the play is already absorbed or the strategy is memoryless;
* adversaries that randomize over components (mixtures) consume exactly one
  extra uniform at episode start, before stage 1.

Because stream position is a pure function of the stage index, results are
byte-identical for any replication chunking, stage blocking, or worker
count: replications are partitioned into fixed-size chunks and partial
reductions are combined in chunk order.
"""

from __future__ import annotations

import csv
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .counter import CounterConfig, update_distribution, make_state
from .discounted import SolutionCache
from .games import NormalizedGame, is_absorbing, transition_cdf

QUANTILE_LEVELS = (0.5, 0.9, 0.99, 1.0)

STATS_COLUMNS = ("n", "mean_avg_payoff", "payoff_se",
                 "max_memory_q50", "max_memory_q90", "max_memory_q99",
                 "max_memory_q100", "exceed_rate", "uniform_exceed_rate")
TRACE_COLUMNS = ("replication", "t", "z", "k", "i", "j", "x")


def _sample_rows(cum_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Smallest index a with u < cum_rows[., a]; same rule as sample_index."""
    idx = (u[:, None] >= cum_rows).sum(axis=1)
    return np.minimum(idx, cum_rows.shape[1] - 1)


# ---------------------------------------------------------------------------
# player-1 strategy adapters


class StationaryStrategy:
    """Plays a fixed per-state mixture; memory stays at zero."""

    counter_config: CounterConfig | None = None

    def __init__(self, dist):
        dist = np.asarray(dist, dtype=np.float64)
        if np.any(dist < 0) or np.any(np.abs(dist.sum(axis=-1) - 1.0) > 1e-9):
            raise ValueError("rows must be probability vectors")
        self.cum = np.cumsum(dist, axis=-1)

    def prepare(self, horizon: int) -> None:
        pass

    def act(self, t, z, k, u):
        return _sample_rows(self.cum[z], u)

    def update_memory(self, t, z, k, i, j, z_next, u):
        return k


class CounterStrategy:
    """The geometric-counter strategy driven by a shared solution cache.

    Per-level action mixtures and memory-update thresholds are materialized
    into flat tables, grown on demand as simulated counters climb; the
    thresholds reproduce sample_update exactly (same two float comparisons).
    """

    def __init__(self, ngame: NormalizedGame, config: CounterConfig,
                 cache: SolutionCache | None = None):
        self.ngame = ngame
        self.config = config
        self.counter_config = config
        self.cache = cache if cache is not None else SolutionCache(ngame, config)
        self._levels = 0
        self._cum_act = np.zeros((0, ngame.game.n_states,
                                  ngame.game.n_actions1))
        shape = (0, ngame.game.n_states, ngame.game.n_actions1,
                 ngame.game.n_actions2, ngame.game.n_states)
        self._thresh_up = np.zeros(shape)
        self._thresh_stay = np.zeros(shape)
        self._lock = threading.Lock()

    def prepare(self, horizon: int) -> None:
        self._ensure(1)

    def _ensure(self, levels: int) -> None:
        if levels <= self._levels:
            return
        with self._lock:
            if levels <= self._levels:
                return
            game = self.ngame.game
            nz, ni, nj = game.n_states, game.n_actions1, game.n_actions2
            target = max(levels, self._levels * 2, 8)
            cum = np.zeros((target, nz, ni))
            t_up = np.zeros((target, nz, ni, nj, nz))
            t_stay = np.zeros((target, nz, ni, nj, nz))
            cum[:self._levels] = self._cum_act
            t_up[:self._levels] = self._thresh_up
            t_stay[:self._levels] = self._thresh_stay
            for lvl in range(self._levels, target):
                sol = self.cache.at(lvl)
                cum[lvl] = np.cumsum(sol.strategy1, axis=-1)
                state = make_state(self.config, lvl)
                for z in range(nz):
                    for i in range(ni):
                        for j in range(nj):
                            x = float(game.payoff[z, i, j])
                            for zn in range(nz):
                                upd = update_distribution(
                                    self.config, state, x,
                                    float(sol.values[zn]))
                                t_up[lvl, z, i, j, zn] = upd.p_up
                                t_stay[lvl, z, i, j, zn] = upd.p_up + upd.p_stay
            self._cum_act = cum
            self._thresh_up = t_up
            self._thresh_stay = t_stay
            self._levels = target

    def act(self, t, z, k, u):
        top = int(k.max()) + 1
        if top > self._levels:
            self._ensure(top)
        rows = self._cum_act[k, z]
        return _sample_rows(rows, u)

    def update_memory(self, t, z, k, i, j, z_next, u):
        up = self._thresh_up[k, z, i, j, z_next]
        stay = self._thresh_stay[k, z, i, j, z_next]
        return k + (u < up).astype(np.int64) - (u >= stay).astype(np.int64)


class TableStrategy:
    """Plays a public-memory table (actions depend on stage and memory)."""

    counter_config: CounterConfig | None = None

    def __init__(self, table):
        self.table = table
        self._cum_act = np.cumsum(table.action, axis=-1)
        self._cum_ker = np.cumsum(table.memory_kernel, axis=-1)

    def prepare(self, horizon: int) -> None:
        if self.table.horizon is not None and horizon > self.table.horizon:
            raise ValueError(f"horizon {horizon} exceeds the table's horizon "
                             f"{self.table.horizon}")

    def _row(self, table, t):
        return table[0 if table.shape[0] == 1 else t - 1]

    def act(self, t, z, k, u):
        rows = self._row(self._cum_act, t)[k]
        return _sample_rows(rows, u)

    def update_memory(self, t, z, k, i, j, z_next, u):
        rows = self._row(self._cum_ker, t)[k, i, j, z_next]
        return _sample_rows(rows, u)


# ---------------------------------------------------------------------------
# traces and statistics


@dataclass(frozen=True)
class EpisodeTrace:
    """One simulated play, truncated at the horizon.

    stage_state[t-1] etc. hold the per-stage tuples; absorption_stage is the
    last stage at which play was still in a non-absorbing state (the stage
    the absorbing action fired), None when play never absorbs, 0 when the
    game starts absorbed.
    """

    seed: int
    replication: int
    horizon: int
    stage_state: np.ndarray
    stage_memory: np.ndarray
    stage_action1: np.ndarray
    stage_action2: np.ndarray
    stage_payoff: np.ndarray
    absorption_stage: int | None

    @property
    def stages(self):
        return list(zip(self.stage_state.tolist(),
                        self.stage_memory.tolist(),
                        self.stage_action1.tolist(),
                        self.stage_action2.tolist(),
                        self.stage_payoff.tolist()))


@dataclass(frozen=True)
class RunStatistics:
    """Aggregates over replications at geometric checkpoints.

    mean_avg_payoff[n] estimates the expected n-stage average payoff;
    payoff_se is its sample-sd/sqrt(replications).  Memory fields are only
    populated when the simulated strategy carries a counter config:
    exceed_rate[n] is the fraction of replications whose running max memory
    reached memory_slope*ln n, uniform_exceed_rate the fraction for which
    some stage n had memory above min_horizon + memory_slope*ln n.
    """

    horizon: int
    replications: int
    base_seed: int
    checkpoints: tuple[int, ...]
    mean_avg_payoff: dict[int, float]
    payoff_se: dict[int, float]
    max_memory_quantiles: dict[int, dict[float, int]]
    exceed_rate: dict[int, float] | None
    uniform_exceed_rate: float | None


def default_checkpoints(horizon: int) -> tuple[int, ...]:
    """Geometric grid 10, 10^1.5, 100, ... capped and ending at horizon."""
    points = set()
    k = 2
    while True:
        v = int(round(10 ** (k / 2)))
        if v >= horizon:
            break
        if v >= 1:
            points.add(v)
        k += 1
    points.add(horizon)
    return tuple(sorted(points))


def _quantiles_from_hist(hist: np.ndarray, total: int) -> dict[float, int]:
    cum = np.cumsum(hist)
    out = {}
    for q in QUANTILE_LEVELS:
        rank = q * total
        out[q] = int(np.searchsorted(cum, rank, side="left"))
    if total > 0:
        out[1.0] = int(np.flatnonzero(hist)[-1]) if hist.any() else 0
    return out


@dataclass
class _ChunkResult:
    payoff_sum: np.ndarray      # per checkpoint
    payoff_sumsq: np.ndarray
    max_mem_hists: list[np.ndarray]
    exceed_counts: np.ndarray | None
    uniform_exceed: int
    traces: list[EpisodeTrace] = field(default_factory=list)


def _merge_hists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if len(a) < len(b):
        a, b = b, a
    out = a.copy()
    out[:len(b)] += b
    return out


def _simulate_chunk(ngame: NormalizedGame, sigma, tau, horizon: int,
                    base_seed: int, rep_start: int, rep_count: int,
                    checkpoints: tuple[int, ...],
                    memory_thresholds, collect_traces: bool) -> _ChunkResult:
    game = ngame.game
    nz = game.n_states
    tcdf = transition_cdf(game)
    pay = game.payoff

    gens = [np.random.Generator(np.random.Philox(
        key=[base_seed, rep_start + r])) for r in range(rep_count)]
    comp = None
    if tau.init_draws:
        u0 = np.array([g.random() for g in gens])
        comp = tau.start(u0)

    z = np.full(rep_count, game.initial_state, dtype=np.int64)
    k = np.zeros(rep_count, dtype=np.int64)
    pay_sum = np.zeros(rep_count)
    max_mem = np.zeros(rep_count, dtype=np.int64)
    uniform_flag = np.zeros(rep_count, dtype=bool)

    cp_iter = iter(checkpoints)
    next_cp = next(cp_iter, None)
    n_cp = len(checkpoints)
    payoff_sum = np.zeros(n_cp)
    payoff_sumsq = np.zeros(n_cp)
    hists: list[np.ndarray] = []
    exceed = (np.zeros(n_cp, dtype=np.int64)
              if memory_thresholds is not None else None)
    cp_index = 0

    if collect_traces:
        tz = np.zeros((rep_count, horizon), dtype=np.int64)
        tk = np.zeros((rep_count, horizon), dtype=np.int64)
        ti = np.zeros((rep_count, horizon), dtype=np.int64)
        tj = np.zeros((rep_count, horizon), dtype=np.int64)
        tx = np.zeros((rep_count, horizon))

    block = max(16, min(horizon, int(10_000_000 / (4 * max(rep_count, 1)))))
    t = 1
    while t <= horizon:
        b = min(block, horizon - t + 1)
        u_block = np.stack([g.random(4 * b).reshape(b, 4) for g in gens])
        for s in range(b):
            u = u_block[:, s, :]
            np.maximum(max_mem, k, out=max_mem)
            if memory_thresholds is not None:
                uniform_flag |= k > memory_thresholds.stage_curve[t - 1]
            i = sigma.act(t, z, k, u[:, 0])
            j = tau.act(t, z, k, comp, u[:, 1])
            rows = tcdf[z, i, j]
            z_next = np.minimum((u[:, 2:3] >= rows).sum(axis=1), nz - 1)
            x = pay[z, i, j]
            pay_sum += x
            if collect_traces:
                tz[:, t - 1] = z
                tk[:, t - 1] = k
                ti[:, t - 1] = i
                tj[:, t - 1] = j
                tx[:, t - 1] = x
            k = sigma.update_memory(t, z, k, i, j, z_next, u[:, 3])
            z = z_next
            if next_cp is not None and t == next_cp:
                rbar = pay_sum / t
                payoff_sum[cp_index] = rbar.sum()
                payoff_sumsq[cp_index] = (rbar * rbar).sum()
                hists.append(np.bincount(max_mem))
                if exceed is not None:
                    bound = memory_thresholds.cp_bounds[cp_index]
                    exceed[cp_index] = int((max_mem >= bound).sum())
                cp_index += 1
                next_cp = next(cp_iter, None)
            t += 1

    traces = []
    if collect_traces:
        absorbing = np.array([is_absorbing(game, s) for s in range(nz)])
        for r in range(rep_count):
            abs_mask = absorbing[tz[r]]
            if abs_mask[0]:
                absorption = 0
            elif abs_mask.any():
                absorption = int(np.argmax(abs_mask))  # stage before landing
            else:
                absorption = None
            traces.append(EpisodeTrace(
                seed=base_seed, replication=rep_start + r, horizon=horizon,
                stage_state=tz[r], stage_memory=tk[r], stage_action1=ti[r],
                stage_action2=tj[r], stage_payoff=tx[r],
                absorption_stage=absorption))

    return _ChunkResult(payoff_sum=payoff_sum, payoff_sumsq=payoff_sumsq,
                        max_mem_hists=hists, exceed_counts=exceed,
                        uniform_exceed=int(uniform_flag.sum()),
                        traces=traces)


class _Thresholds:
    """stage_curve[t-1]: uniform bound min_horizon + slope*ln t;
    cp_bounds[idx]: max-memory bound slope*ln n at checkpoint idx."""

    def __init__(self, stage_curve: np.ndarray, cp_bounds: np.ndarray):
        self.stage_curve = stage_curve
        self.cp_bounds = cp_bounds


def _memory_thresholds(config: CounterConfig | None, horizon: int,
                       checkpoints: tuple[int, ...]):
    if config is None:
        return None
    stage_curve = config.min_horizon + config.memory_slope * np.log(
        np.arange(1, horizon + 1, dtype=np.float64))
    cp_bounds = np.array([config.memory_slope * math.log(n)
                          for n in checkpoints])
    return _Thresholds(stage_curve, cp_bounds)


def monte_carlo(ngame: NormalizedGame, sigma, tau, horizon: int,
                replications: int, base_seed: int,
                checkpoints: tuple[int, ...] | None = None,
                workers: int = 1,
                chunk_size: int | None = None) -> RunStatistics:
    """Simulate replications of (sigma, tau) and aggregate statistics.

    Replication r draws from the Philox stream keyed (base_seed, r); chunk
    partitioning is fixed by chunk_size alone, and partial results combine
    in chunk order, so the output is identical for any worker count.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if replications < 1:
        raise ValueError(f"replications must be >= 1, got {replications}")
    if not 0 <= base_seed < 2 ** 64:
        raise ValueError("base_seed must fit in an unsigned 64-bit integer")
    if checkpoints is None:
        checkpoints = default_checkpoints(horizon)
    checkpoints = tuple(sorted(set(int(c) for c in checkpoints)))
    if not checkpoints or checkpoints[0] < 1 or checkpoints[-1] > horizon:
        raise ValueError(f"checkpoints must lie in [1, {horizon}]")
    if chunk_size is None:
        chunk_size = min(replications, 8192)

    sigma.prepare(horizon)
    tau.prepare(horizon)
    thresholds = _memory_thresholds(sigma.counter_config, horizon,
                                    checkpoints)

    chunks = [(start, min(chunk_size, replications - start))
              for start in range(0, replications, chunk_size)]

    def run(chunk):
        start, count = chunk
        return _simulate_chunk(ngame, sigma, tau, horizon, base_seed, start,
                               count, checkpoints, thresholds, False)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(c) for c in chunks]

    payoff_sum = np.zeros(len(checkpoints))
    payoff_sumsq = np.zeros(len(checkpoints))
    hists = [np.zeros(1, dtype=np.int64) for _ in checkpoints]
    exceed = np.zeros(len(checkpoints), dtype=np.int64)
    uniform_count = 0
    for res in results:
        payoff_sum += res.payoff_sum
        payoff_sumsq += res.payoff_sumsq
        hists = [_merge_hists(h, rh) for h, rh in zip(hists, res.max_mem_hists)]
        if res.exceed_counts is not None:
            exceed += res.exceed_counts
        uniform_count += res.uniform_exceed

    n_reps = replications
    mean = {}
    se = {}
    quantiles = {}
    exceed_rate = {} if thresholds is not None else None
    for idx, n in enumerate(checkpoints):
        mu = payoff_sum[idx] / n_reps
        mean[n] = float(mu)
        if n_reps > 1:
            var = (payoff_sumsq[idx] - n_reps * mu * mu) / (n_reps - 1)
            se[n] = float(math.sqrt(max(var, 0.0) / n_reps))
        else:
            se[n] = 0.0
        quantiles[n] = _quantiles_from_hist(hists[idx], n_reps)
        if exceed_rate is not None:
            exceed_rate[n] = float(exceed[idx] / n_reps)

    return RunStatistics(
        horizon=horizon, replications=n_reps, base_seed=base_seed,
        checkpoints=checkpoints, mean_avg_payoff=mean, payoff_se=se,
        max_memory_quantiles=quantiles, exceed_rate=exceed_rate,
        uniform_exceed_rate=(float(uniform_count / n_reps)
                             if thresholds is not None else None))


def run_episode(ngame: NormalizedGame, sigma, tau, horizon: int, seed: int,
                replication: int = 0) -> EpisodeTrace:
    """Simulate one replication and keep the full trace.

    The trace is bit-identical to what replication `replication` of a
    monte_carlo run with base_seed=seed would have produced.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    sigma.prepare(horizon)
    tau.prepare(horizon)
    res = _simulate_chunk(ngame, sigma, tau, horizon, seed, replication, 1,
                          (horizon,), None, True)
    return res.traces[0]


def run_traces(ngame: NormalizedGame, sigma, tau, horizon: int,
               replications: int, base_seed: int) -> list[EpisodeTrace]:
    sigma.prepare(horizon)
    tau.prepare(horizon)
    out = []
    for r in range(replications):
        res = _simulate_chunk(ngame, sigma, tau, horizon, base_seed, r, 1,
                              (horizon,), None, True)
        out.extend(res.traces)
    return out


# ---------------------------------------------------------------------------
# reports and CSV export


@dataclass(frozen=True)
class MemoryBoundRow:
    n: int
    exceed_rate: float
    bound: float        # n^-2
    tolerance: float    # binomial allowance around the bound
    max_over_log: float  # empirical max memory / ln n
    passed: bool


@dataclass(frozen=True)
class MemoryBoundReport:
    rows: tuple[MemoryBoundRow, ...]
    uniform_exceed_rate: float
    uniform_bound: float       # epsilon
    uniform_se: float
    uniform_passed: bool
    memory_slope: float

    @property
    def all_pass(self) -> bool:
        return self.uniform_passed and all(r.passed for r in self.rows)

    def lines(self) -> list[str]:
        out = ["max-memory exceed rates vs the n^-2 bound:"]
        for r in self.rows:
            out.append(
                f"  n={r.n}: rate {r.exceed_rate:.3e} vs bound {r.bound:.3e} "
                f"(+tol {r.tolerance:.3e}), max/ln n = {r.max_over_log:.2f} "
                f"vs slope {self.memory_slope:.2f}: "
                f"{'PASS' if r.passed else 'FAIL'}")
        out.append(
            f"uniform exceed rate {self.uniform_exceed_rate:.3e} <= "
            f"{self.uniform_bound:g} + 4*SE ({self.uniform_se:.3e}): "
            f"{'PASS' if self.uniform_passed else 'FAIL'}")
        return out


def memory_bound_report(stats: RunStatistics,
                        config: CounterConfig) -> MemoryBoundReport:
    """Check the run's memory statistics against the counting bounds.

    Per checkpoint n the exceed rate is compared with n^-2 plus a 4-sigma
    binomial allowance; the uniform rate is compared with epsilon plus four
    empirical standard errors.
    """
    if stats.exceed_rate is None or stats.uniform_exceed_rate is None:
        raise ValueError("statistics were not produced with a counter-based "
                         "strategy")
    reps = stats.replications
    rows = []
    for n in stats.checkpoints:
        bound = 1.0 / (n * n)
        tol = 4.0 * math.sqrt(bound * max(1.0 - bound, 0.0) / reps)
        rate = stats.exceed_rate[n]
        top = stats.max_memory_quantiles[n][1.0]
        ratio = top / math.log(n) if n > 1 else 0.0
        rows.append(MemoryBoundRow(
            n=n, exceed_rate=rate, bound=bound, tolerance=tol,
            max_over_log=ratio, passed=rate <= bound + tol))
    u_rate = stats.uniform_exceed_rate
    u_se = math.sqrt(u_rate * (1.0 - u_rate) / reps)
    return MemoryBoundReport(
        rows=tuple(rows), uniform_exceed_rate=u_rate,
        uniform_bound=config.epsilon, uniform_se=u_se,
        uniform_passed=u_rate <= config.epsilon + 4.0 * u_se,
        memory_slope=config.memory_slope)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def write_statistics_csv(stats: RunStatistics, path: str) -> None:
    """One row per checkpoint; column order is stable (see STATS_COLUMNS)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STATS_COLUMNS)
        for n in stats.checkpoints:
            q = stats.max_memory_quantiles[n]
            writer.writerow([
                _fmt(n),
                _fmt(stats.mean_avg_payoff[n]),
                _fmt(stats.payoff_se[n]),
                _fmt(q[0.5]), _fmt(q[0.9]), _fmt(q[0.99]), _fmt(q[1.0]),
                _fmt(stats.exceed_rate[n]
                     if stats.exceed_rate is not None else None),
                _fmt(stats.uniform_exceed_rate),
            ])


def write_trace_csv(traces: list[EpisodeTrace], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for trace in traces:
            for t in range(trace.horizon):
                writer.writerow([
                    _fmt(trace.replication), _fmt(t + 1),
                    _fmt(int(trace.stage_state[t])),
                    _fmt(int(trace.stage_memory[t])),
                    _fmt(int(trace.stage_action1[t])),
                    _fmt(int(trace.stage_action2[t])),
                    _fmt(float(trace.stage_payoff[t])),
                ])
