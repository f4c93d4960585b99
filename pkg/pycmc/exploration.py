# pycmc/exploration.py

"""
此模块实现四种探索策略 (随机、PIG 贪婪、JPIG 贪婪、PIG rollout)、
带蒙特卡洛平均的 rollout 规划器、精确有限时域 DP 基准，以及产生探索日志的主循环。

规划只在 F 的私有副本上进行；学习者真实的计数只在 `explore` 中更新。
规划阶段对黑盒的查询不计入 N 个探索时段。
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

from . import constants
from .cmc import Cmc, RngStream, check_index, sample_transition, validate
from .estimation import (
    CountTensor,
    DirichletPrior,
    increment,
    missing_information_terms,
    pig,
    pig_table,
)
from .exceptions import HorizonExceededError, IntractableHorizonError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StrategyKind:
    """
    探索策略的描述。

    `kind` 取 `constants.STRATEGY_NAMES` 之一；`mc_repeats` 和 `nesting_depth`
    只对 pig_rollout 有意义。`mc_repeats=None` 表示按环境自动选择
    (确定性链 1 次，否则 16 次)。`nesting_depth=2` 时 rollout 的基策略
    本身是一层 rollout 策略。
    """
    kind: str
    mc_repeats: Optional[int] = None
    nesting_depth: int = 1

    def __post_init__(self):
        if self.kind not in constants.STRATEGY_NAMES:
            raise ValidationError(f"未知的探索策略: {self.kind!r}，可选: {', '.join(constants.STRATEGY_NAMES)}")
        if self.mc_repeats is not None and self.mc_repeats < 1:
            raise ValidationError(f"mc_repeats 必须 >= 1，得到 {self.mc_repeats}")
        if self.nesting_depth not in range(1, constants.MAX_NESTING_DEPTH + 1):
            raise ValidationError(f"nesting_depth 必须是 1 或 2，得到 {self.nesting_depth}")

    @classmethod
    def random(cls):
        return cls(constants.STRATEGY_RANDOM)

    @classmethod
    def pig_greedy(cls):
        return cls(constants.STRATEGY_PIG_GREEDY)

    @classmethod
    def jpig_greedy(cls):
        return cls(constants.STRATEGY_JPIG_GREEDY)

    @classmethod
    def pig_rollout(cls, mc_repeats=None, nesting_depth=1):
        return cls(constants.STRATEGY_PIG_ROLLOUT, mc_repeats, nesting_depth)

    @property
    def label(self) -> str:
        if self.kind == constants.STRATEGY_PIG_ROLLOUT and self.nesting_depth > 1:
            return f"{self.kind}_d{self.nesting_depth}"
        return self.kind

    @property
    def teleports(self) -> bool:
        return self.kind == constants.STRATEGY_JPIG_GREEDY

    def is_deterministic_on(self, env: Cmc) -> bool:
        """在 `env` 上运行结果与种子无关时为真。"""
        return self.kind != constants.STRATEGY_RANDOM and env.is_deterministic


class ExplorationRecord(NamedTuple):
    period: int
    state: int
    control: int
    next_state: int
    pig: float
    mi_total: float
    mi_subset: float


@dataclass(frozen=True, eq=False)
class ExplorationLog:
    """
    一次探索运行的完整记录。

    `records[k]` 中的 PIG 和缺失信息都是在第 k 个时段转移发生之前测得的；
    `final_mi_total` / `final_mi_subset` 是最后一个时段之后的值，
    因此缺失信息曲线共有 N+1 个点。
    """
    strategy: str
    seed: int
    horizon: int
    records: Tuple[ExplorationRecord, ...]
    counts: CountTensor
    final_mi_total: float
    final_mi_subset: float
    metric_subset: Optional[Tuple[int, ...]] = None

    def total_pig(self) -> float:
        total = 0.0
        for record in self.records:
            total += record.pig
        return total

    def visited_states(self) -> set:
        states = {record.state for record in self.records}
        if self.records and self.strategy != constants.STRATEGY_JPIG_GREEDY:
            states.add(self.records[-1].next_state)
        return states

    def controls(self):
        return [record.control for record in self.records]

    def states(self):
        return [record.state for record in self.records]

    def mi_curve(self, subset=True):
        if subset:
            return [r.mi_subset for r in self.records] + [self.final_mi_subset]
        return [r.mi_total for r in self.records] + [self.final_mi_total]

    def counts_at(self, period: int) -> CountTensor:
        """重放前 `period` 条记录，得到该时段开始时的计数。"""
        F = CountTensor.zeros(self.counts.n_states, self.counts.n_controls)
        for record in self.records[:period]:
            F = increment(F, record.control, record.state, record.next_state)
        return F


def _argmax_first(values, tolerance=constants.TIE_TOLERANCE) -> int:
    """最大值的最小索引；差值在 tolerance 内视为并列。"""
    best = max(values)
    for index, value in enumerate(values):
        if value >= best - tolerance:
            return index
    return 0


def random_control(i: int, n_controls: int, rng: RngStream) -> int:
    """从 0..n_controls-1 中均匀随机选一个控制。"""
    if n_controls < 1:
        raise ValidationError("至少需要一个控制")
    return rng.integers(n_controls)


def pig_greedy_control(i: int, F: CountTensor, prior: DirichletPrior) -> int:
    """argmax_u PIG(i,u,F)，并列取最小控制索引。"""
    return _argmax_first([pig(i, u, F, prior) for u in range(F.n_controls)])


def jpig_greedy_pair(F: CountTensor, prior: DirichletPrior) -> Tuple[int, int]:
    """argmax_(i,u) PIG(i,u,F)，并列按 (i, u) 字典序取最小。"""
    table = pig_table(F, prior)
    index = _argmax_first(table.ravel().tolist())
    i, u = divmod(index, F.n_controls)
    return i, u


def resolve_mc_repeats(env: Cmc, mc_repeats=None) -> int:
    if mc_repeats is not None:
        return mc_repeats
    return constants.DETERMINISTIC_MC_REPEATS if env.is_deterministic else constants.DEFAULT_MC_REPEATS


def simulate_policy(start, F, k, N, env, prior, depth, mc_repeats, rng) -> float:
    """
    从 (start, F) 在时段 k 起模拟到 N-1，累加每一步的 PIG。

    depth=0 时模拟 PIG 贪婪基策略；depth>=1 时模拟该深度的 rollout 策略。
    每次采样后都在私有副本上执行 `increment`。
    """
    total = 0.0
    state = start
    counts = F
    for period in range(k, N):
        if depth == 0:
            u = pig_greedy_control(state, counts, prior)
        else:
            u = rollout_control(state, counts, period, N, env, prior, mc_repeats, depth, rng)
        total += pig(state, u, counts, prior)
        j = sample_transition(env, state, u, rng)
        counts = increment(counts, u, state, j)
        state = j
    return total


def base_policy_value(start: int, F: CountTensor, k: int, N: int, env: Cmc,
                      prior: DirichletPrior, rng: RngStream) -> float:
    """
    用黑盒模拟 PIG 贪婪基策略，返回从时段 k 到 N-1 收集到的 PIG 之和。

    k = N 时返回 0。

    Raises:
        HorizonExceededError: k > N。
    """
    if k > N:
        raise HorizonExceededError(f"时段 k={k} 超出时域 N={N}")
    return simulate_policy(start, F, k, N, env, prior, 0, None, rng)


def rollout_control(i: int, F: CountTensor, k: int, N: int, env: Cmc, prior: DirichletPrior,
                    mc_repeats=None, nesting_depth: int = 1, rng: Optional[RngStream] = None) -> int:
    """
    一步前瞻 rollout：对每个控制 u 估计

        PIG(i,u,F) + 平均_r [ j ~ env;  J~_{k+1}(j, F + e_uij) ]

    其中 J~ 由基策略 (nesting_depth=1 时为 PIG 贪婪，=2 时为一层 rollout 策略)
    模拟到时域末端得到。每个 (u, 重复) 使用独立的子随机流，
    按固定顺序求和，因此结果与调度无关。
    并列 (差值在 TIE_TOLERANCE 内) 时优先基策略的选择，其次最小索引。

    Args:
        i (int): 当前状态。
        F (CountTensor): 学习者的计数；不会被修改。
        k (int): 当前时段。
        N (int): 时域。
        env (Cmc): 用于规划模拟的黑盒。
        prior (DirichletPrior): 先验。
        mc_repeats (int, optional): 蒙特卡洛重复次数，None 时自动选择。
        nesting_depth (int): 1 或 2。
        rng (RngStream, optional): 随机流。

    Returns:
        int: 选择的控制。

    Raises:
        HorizonExceededError: k >= N。
    """
    if k >= N:
        raise HorizonExceededError(f"rollout 需要 k < N，得到 k={k}, N={N}")
    if nesting_depth not in range(1, constants.MAX_NESTING_DEPTH + 1):
        raise ValidationError(f"nesting_depth 必须是 1 或 2，得到 {nesting_depth}")
    repeats = resolve_mc_repeats(env, mc_repeats)
    if repeats < 1:
        raise ValidationError(f"mc_repeats 必须 >= 1，得到 {repeats}")
    rng = rng if rng is not None else RngStream()

    streams = rng.spawn(F.n_controls * repeats + 1)
    if nesting_depth == 1:
        base_choice = pig_greedy_control(i, F, prior)
    else:
        base_choice = rollout_control(i, F, k, N, env, prior, repeats, nesting_depth - 1, streams[-1])

    q_values = []
    for u in range(F.n_controls):
        tails = []
        for r in range(repeats):
            stream = streams[u * repeats + r]
            j = sample_transition(env, i, u, stream)
            tails.append(simulate_policy(j, increment(F, u, i, j), k + 1, N, env, prior,
                                         nesting_depth - 1, repeats, stream))
        q_values.append(pig(i, u, F, prior) + math.fsum(tails) / repeats)

    best = max(q_values)
    if q_values[base_choice] >= best - constants.TIE_TOLERANCE:
        choice = base_choice
    else:
        choice = _argmax_first(q_values)
    logger.debug("rollout k=%d i=%d depth=%d q=%s base=%d -> %d", k, i, nesting_depth, q_values, base_choice, choice)
    return choice


def exact_dp(i: int, F: CountTensor, k: int, N: int, env: Cmc, prior: DirichletPrior):
    """
    精确的有限时域 DP：

        J_k(i,F) = max_u [ PIG(i,u,F) + Σ_j p_ij(u) J_{k+1}(j, F + e_uij) ]

    通过显式展开假设计数更新树求值。使用真实转移概率，仅作测试基准。

    Returns:
        tuple: (value, best_control)；k = N 时为 (0.0, None)。

    Raises:
        IntractableHorizonError: (n_states * n_controls)^(N-k) 超过 DP_TREE_LIMIT。
        HorizonExceededError: k > N。
    """
    if k > N:
        raise HorizonExceededError(f"时段 k={k} 超出时域 N={N}")
    branching = env.n_states * env.n_controls
    if branching ** (N - k) > constants.DP_TREE_LIMIT:
        raise IntractableHorizonError(
            f"DP 树规模 ({branching})^{N - k} 超过上限 {constants.DP_TREE_LIMIT}")
    return _dp_value(i, F, k, N, env, prior)


def _dp_value(i, F, k, N, env, prior):
    if k == N:
        return 0.0, None
    q_values = []
    for u in range(env.n_controls):
        value = pig(i, u, F, prior)
        row = env.transitions[u, i]
        for j in range(env.n_states):
            if row[j] > 0.0:
                future, _ = _dp_value(j, increment(F, u, i, j), k + 1, N, env, prior)
                value += row[j] * future
        q_values.append(value)
    best = _argmax_first(q_values)
    return q_values[best], best


def explore(strategy: StrategyKind, env: Cmc, start: int = constants.DEFAULT_START_STATE,
            N: int = constants.DEFAULT_PERIODS, prior: Optional[DirichletPrior] = None,
            seed: int = constants.DEFAULT_SEED, metric_subset=None,
            rng: Optional[RngStream] = None) -> ExplorationLog:
    """
    运行 N 个探索时段并返回完整日志。

    每个时段：按策略选 (i,u) (JPIG 联合选择，其余使用当前状态)，
    在转移前记录 PIG(i,u,F) 和缺失信息，从黑盒采样 j，更新真实计数 F，
    然后推进状态 (JPIG 忽略 j，下一状态来自下一次联合 argmax)。

    Args:
        strategy (StrategyKind): 探索策略。
        env (Cmc): 真实环境。
        start (int): 初始状态。
        N (int): 时段数。
        prior (DirichletPrior, optional): 先验，默认 alpha=0.05。
        seed (int): 随机种子 (未提供 rng 时使用)。
        metric_subset: 缺失信息子集；None 时与总量相同。
        rng (RngStream, optional): 显式随机流，优先于 seed。

    Returns:
        ExplorationLog: 探索日志。
    """
    validate(env)
    check_index(start, env.n_states, "state")
    if N < 1:
        raise ValidationError(f"时段数 N 必须 >= 1，得到 {N}")
    prior = prior if prior is not None else DirichletPrior()
    rng = rng if rng is not None else RngStream(seed)
    subset = tuple(sorted(set(metric_subset))) if metric_subset is not None else None
    if subset is not None:
        for s in subset:
            check_index(s, env.n_states, "state")

    def measure(counts):
        terms = missing_information_terms(env, counts, prior)
        total = float(terms.sum())
        return total, (float(terms[:, list(subset)].sum()) if subset is not None else total)

    F = CountTensor.for_cmc(env)
    state = start
    records = []
    for k in range(N):
        if strategy.kind == constants.STRATEGY_JPIG_GREEDY:
            state, u = jpig_greedy_pair(F, prior)
        elif strategy.kind == constants.STRATEGY_RANDOM:
            u = random_control(state, env.n_controls, rng)
        elif strategy.kind == constants.STRATEGY_PIG_GREEDY:
            u = pig_greedy_control(state, F, prior)
        else:
            u = rollout_control(state, F, k, N, env, prior, strategy.mc_repeats, strategy.nesting_depth, rng)

        gain = pig(state, u, F, prior)
        mi_total, mi_subset = measure(F)
        j = sample_transition(env, state, u, rng)
        F = increment(F, u, state, j)
        records.append(ExplorationRecord(k, state, u, j, gain, mi_total, mi_subset))
        logger.debug("%s k=%d i=%d u=%d j=%d pig=%.6f mi=%.6f", strategy.label, k, state, u, j, gain, mi_subset)
        state = j

    final_total, final_subset = measure(F)
    return ExplorationLog(
        strategy=strategy.label,
        seed=rng.seed,
        horizon=N,
        records=tuple(records),
        counts=F,
        final_mi_total=final_total,
        final_mi_subset=final_subset,
        metric_subset=subset,
    )
