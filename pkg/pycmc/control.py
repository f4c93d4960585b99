# pycmc/control.py

"""
下游的无限时域折扣代价任务。

在估计的 CMC 上用精确策略迭代求最优策略，再在真实 CMC 上做策略评估，
以此比较不同探索方法学到的模型。控制索引从 0 开始；argmin 并列时取最小索引。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import constants
from .cmc import Cmc
from .estimation import CountTensor, DirichletPrior, posterior_tensor
from .exceptions import InvalidDiscountError, ShapeMismatchError, SingularSystemError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StationaryPolicy:
    """平稳策略：`choice[i]` 是状态 i 下的控制。"""
    choice: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "choice", tuple(int(u) for u in self.choice))

    @classmethod
    def constant(cls, n_states: int, control: int = 0) -> "StationaryPolicy":
        return cls((control,) * n_states)

    def __getitem__(self, i):
        return self.choice[i]

    def __len__(self):
        return len(self.choice)

    def check(self, n_states: int, n_controls: int):
        if len(self.choice) != n_states:
            raise ShapeMismatchError(f"策略定义了 {len(self.choice)} 个状态，需要 {n_states}")
        if any(not 0 <= u < n_controls for u in self.choice):
            raise ValidationError(f"策略中的控制必须在 [0, {n_controls}) 内")


@dataclass(frozen=True, eq=False)
class ValueFunction:
    """每个状态的期望折扣代价 J(i)。"""
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __getitem__(self, i):
        return float(self.values[i])

    def __len__(self):
        return self.values.size

    def sup_distance(self, other: "ValueFunction") -> float:
        return float(np.max(np.abs(self.values - other.values)))


@dataclass(frozen=True, eq=False)
class DiscountedTask:
    """代价 g(i,u)，形状 (n_states, n_controls)，以及折扣因子 0 <= discount < 1。"""
    costs: np.ndarray
    discount: float = constants.DEFAULT_DISCOUNT

    def __post_init__(self):
        if not 0.0 <= self.discount < 1.0:
            raise InvalidDiscountError(f"折扣因子必须在 [0, 1) 内，得到 {self.discount!r}")
        costs = np.array(self.costs, dtype=float)
        if costs.ndim != 2:
            raise ShapeMismatchError(f"costs 必须是 (n_states, n_controls) 矩阵，得到 {costs.shape}")
        costs.setflags(write=False)
        object.__setattr__(self, "costs", costs)

    @classmethod
    def from_cmc(cls, cmc: Cmc, discount: float = constants.DEFAULT_DISCOUNT) -> "DiscountedTask":
        return cls(cmc.costs, discount)


def _check_task(p: np.ndarray, task: DiscountedTask):
    n_controls, n_states, _ = p.shape
    if task.costs.shape != (n_states, n_controls):
        raise ShapeMismatchError(f"代价形状 {task.costs.shape} 与转移张量 {p.shape} 不一致")


def _q_values(p: np.ndarray, J: np.ndarray, task: DiscountedTask) -> np.ndarray:
    """Q[u, i] = g(i,u) + discount * Σ_j p_ij(u) J(j)。"""
    return task.costs.T + task.discount * (p @ J)


def _policy_system(p, policy, task):
    n_states = p.shape[1]
    states = np.arange(n_states)
    controls = np.asarray(policy.choice)
    M = np.eye(n_states) - task.discount * p[controls, states, :]
    g = task.costs[states, controls]
    return M, g


def evaluate_policy(p, policy: StationaryPolicy, task: DiscountedTask) -> ValueFunction:
    """
    求解 (I - discount·P_μ) J = g_μ。

    使用带部分主元的 LU 分解直接消元 (scipy.linalg.lu_factor)。

    Raises:
        SingularSystemError: 系统奇异 (discount < 1 且 P 随机时不应发生)。
    """
    p = np.asarray(p, dtype=float)
    _check_task(p, task)
    policy.check(p.shape[1], p.shape[0])
    M, g = _policy_system(p, policy, task)
    lu, piv = lu_factor(M, check_finite=True)
    if np.any(np.diag(lu) == 0.0):
        raise SingularSystemError("策略评估的线性系统是奇异的")
    J = lu_solve((lu, piv), g)
    residual = float(np.max(np.abs(M @ J - g))) if J.size else 0.0
    if residual >= constants.RESIDUAL_TOLERANCE:
        logger.warning("策略评估残差 %.3e 超过容差 %.1e", residual, constants.RESIDUAL_TOLERANCE)
    return ValueFunction(J)


def policy_evaluation_residual(p, policy: StationaryPolicy, task: DiscountedTask, J: ValueFunction) -> float:
    """||MJ - g||_inf。"""
    M, g = _policy_system(np.asarray(p, dtype=float), policy, task)
    return float(np.max(np.abs(M @ J.values - g)))


def improve_policy(p, J: ValueFunction, task: DiscountedTask) -> StationaryPolicy:
    """逐状态取 argmin_u [g(i,u) + discount·Σ_j p_ij(u) J(j)]，并列取最小控制索引。"""
    p = np.asarray(p, dtype=float)
    _check_task(p, task)
    if J.values.shape != (p.shape[1],):
        raise ShapeMismatchError(f"价值函数长度 {J.values.size} 与状态数 {p.shape[1]} 不一致")
    q = _q_values(p, J.values, task)
    best = q.min(axis=0)
    tolerance = constants.TIE_TOLERANCE * np.maximum(1.0, np.abs(best))
    choice = np.argmax(q <= best + tolerance, axis=0)
    return StationaryPolicy(tuple(int(u) for u in choice))


def bellman_residual(p, task: DiscountedTask, J: ValueFunction) -> float:
    """max_i |J(i) - min_u [g + discount·Σ p J]|。"""
    q = _q_values(np.asarray(p, dtype=float), J.values, task)
    return float(np.max(np.abs(J.values - q.min(axis=0))))


def policy_iteration(p, task: DiscountedTask, initial: Optional[StationaryPolicy] = None,
                     trace: Optional[list] = None):
    """
    精确策略迭代：交替进行策略评估和策略改进，直到策略不再变化。

    Args:
        p: 转移张量 (u, i, j)。
        task (DiscountedTask): 代价和折扣。
        initial (StationaryPolicy, optional): 初始策略，默认全部为控制 0。
        trace (list, optional): 若提供，每次评估得到的 ValueFunction 都会追加到其中。

    Returns:
        tuple: (StationaryPolicy, ValueFunction)。
    """
    p = np.asarray(p, dtype=float)
    _check_task(p, task)
    policy = initial if initial is not None else StationaryPolicy.constant(p.shape[1])
    for iteration in range(1, constants.MAX_POLICY_ITERATIONS + 1):
        J = evaluate_policy(p, policy, task)
        if trace is not None:
            trace.append(J)
        improved = improve_policy(p, J, task)
        if improved == policy:
            logger.debug("策略迭代在第 %d 次迭代收敛", iteration)
            return policy, J
        policy = improved
    logger.warning("策略迭代在 %d 次迭代后仍未收敛", constants.MAX_POLICY_ITERATIONS)
    return policy, evaluate_policy(p, policy, task)


def value_iteration_oracle(p, task: DiscountedTask, tolerance: float = constants.DEFAULT_VI_TOLERANCE) -> ValueFunction:
    """
    独立的 Bellman 不动点迭代，用来校验策略迭代。

    当相邻两次的 sup 范数变化小于 tolerance·(1-discount)/(2·discount) 时停止，
    此时结果与 J* 的距离不超过 tolerance。
    """
    if not tolerance > 0.0:
        raise ValidationError("tolerance 必须为正")
    p = np.asarray(p, dtype=float)
    _check_task(p, task)
    J = np.zeros(p.shape[1])
    if task.discount == 0.0:
        return ValueFunction(task.costs.min(axis=1))
    threshold = tolerance * (1.0 - task.discount) / (2.0 * task.discount)
    while True:
        updated = _q_values(p, J, task).min(axis=0)
        change = float(np.max(np.abs(updated - J)))
        J = updated
        if change < threshold:
            return ValueFunction(J)


def evaluate_learned_model(true_cmc: Cmc, F: CountTensor, prior: Optional[DirichletPrior] = None,
                           task: Optional[DiscountedTask] = None):
    """
    在估计模型 p̂(F, prior) 上求最优策略 μ*，再在真实转移上评估 μ*。

    Returns:
        tuple: (StationaryPolicy, 真实 CMC 下的 ValueFunction)。
    """
    if true_cmc.transitions.shape != F.shape:
        raise ShapeMismatchError(f"环境形状 {true_cmc.transitions.shape} 与计数形状 {F.shape} 不一致")
    prior = prior if prior is not None else DirichletPrior()
    task = task if task is not None else DiscountedTask.from_cmc(true_cmc)
    estimate = posterior_tensor(F, prior)
    policy, _ = policy_iteration(estimate, task)
    return policy, evaluate_policy(true_cmc.transitions, policy, task)
