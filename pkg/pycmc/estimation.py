# pycmc/estimation.py

"""
此模块维护转移计数张量 F，给出 Dirichlet 后验均值估计，
并计算信息量：KL 散度、预测信息增益 (PIG) 和缺失信息。

所有信息量以 nat (自然对数) 为单位，并约定 0·log(0/q) = 0。
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import rel_entr

from . import constants
from .cmc import Cmc, check_index
from .exceptions import (
    InvalidPriorError,
    LengthMismatchError,
    ParseError,
    ShapeMismatchError,
    UnsupportedSupportError,
    ValidationError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DirichletPrior:
    """对称 Dirichlet 先验，`alpha` 是每个结果的伪计数。"""
    alpha: float = constants.DEFAULT_ALPHA

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise InvalidPriorError(f"Dirichlet alpha 必须为正，得到 {self.alpha!r}")


@dataclass(frozen=True, eq=False)
class CountTensor:
    """
    转移计数 F，按 (u, i, j) 索引。

    值语义：`increment` 返回新张量，原张量不变，这正是计算假设更新 F^{i->j*}
    所需要的。内部数组是只读的。
    """
    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.ndim != 3 or counts.shape[1] != counts.shape[2]:
            raise ShapeMismatchError(f"计数张量形状必须是 (n_controls, n_states, n_states)，得到 {counts.shape}")
        if np.any(counts < 0):
            raise ValidationError("计数不能为负")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def zeros(cls, n_states: int, n_controls: int) -> "CountTensor":
        return cls(np.zeros((n_controls, n_states, n_states), dtype=np.int64))

    @classmethod
    def for_cmc(cls, cmc: Cmc) -> "CountTensor":
        return cls.zeros(cmc.n_states, cmc.n_controls)

    @property
    def n_states(self) -> int:
        return self.counts.shape[1]

    @property
    def n_controls(self) -> int:
        return self.counts.shape[0]

    @property
    def shape(self):
        return self.counts.shape

    def row(self, u: int, i: int) -> np.ndarray:
        check_index(u, self.n_controls, "control")
        check_index(i, self.n_states, "state")
        return self.counts[u, i]

    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other):
        if not isinstance(other, CountTensor):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.counts, other.counts))

    __hash__ = None


def increment(F: CountTensor, u: int, i: int, j: int) -> CountTensor:
    """
    返回 F 在 (u,i,j) 处加 1 后的新张量。

    Raises:
        IndexOutOfRangeError: 任一索引超出范围。
    """
    check_index(u, F.n_controls, "control")
    check_index(i, F.n_states, "state")
    check_index(j, F.n_states, "state")
    counts = F.counts.copy()
    counts[u, i, j] += 1
    return CountTensor(counts)


def posterior_row(F: CountTensor, prior: DirichletPrior, u: int, i: int) -> np.ndarray:
    """p̂_i.(u,F) = (F_uij + α) / Σ_j' (F_uij' + α)，严格为正且和为 1。"""
    a = F.row(u, i) + prior.alpha
    return a / a.sum()


def posterior_tensor(F: CountTensor, prior: DirichletPrior) -> np.ndarray:
    """整个估计转移张量 p̂，按 (u, i, j) 索引。"""
    a = F.counts + prior.alpha
    return a / a.sum(axis=2, keepdims=True)


def kl_divergence(p, q) -> float:
    """
    KL(p || q) = Σ_j p_j ln(p_j / q_j)，单位为 nat。

    Raises:
        LengthMismatchError: p 与 q 长度不同。
        UnsupportedSupportError: 存在 p_j > 0 而 q_j = 0。
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise LengthMismatchError(f"分布长度不一致: {p.shape} 与 {q.shape}")
    terms = rel_entr(p, q)
    if np.any(np.isinf(terms)):
        j = int(np.flatnonzero(np.isinf(terms))[0])
        raise UnsupportedSupportError(f"q 在 p 的支撑上为 0 (j={j})")
    return float(terms.sum())


def pig(i: int, u: int, F: CountTensor, prior: DirichletPrior) -> float:
    """
    预测信息增益 PIG(i,u,F)。

    对每个假设结果 j*，只复制 (u,i) 这一行并加 1 得到 p̂(F^{i->j*})，
    再以当前估计 p̂_ij*(u,F) 加权求 KL 散度之和。只依赖 (i,u,F,α)，
    从不读取真实转移概率。

    Args:
        i (int): 状态。
        u (int): 控制。
        F (CountTensor): 当前计数。
        prior (DirichletPrior): 先验。

    Returns:
        float: PIG，单位 nat，非负。
    """
    a = F.row(u, i) + prior.alpha
    total = a.sum()
    current = a / total
    hypothetical = (a[np.newaxis, :] + np.eye(a.size)) / (total + 1.0)
    gains = rel_entr(hypothetical, current[np.newaxis, :]).sum(axis=1)
    return max(float(current @ gains), 0.0)


def pig_table(F: CountTensor, prior: DirichletPrior) -> np.ndarray:
    """所有 (i,u) 的 PIG，形状 (n_states, n_controls)。"""
    table = np.empty((F.n_states, F.n_controls))
    for i in range(F.n_states):
        for u in range(F.n_controls):
            table[i, u] = pig(i, u, F, prior)
    return table


def _check_shapes(cmc: Cmc, F: CountTensor):
    if cmc.transitions.shape != F.shape:
        raise ShapeMismatchError(f"环境形状 {cmc.transitions.shape} 与计数形状 {F.shape} 不一致")


def missing_information_terms(true_cmc: Cmc, F: CountTensor, prior: DirichletPrior) -> np.ndarray:
    """缺失信息的各个 KL 项，形状 (n_controls, n_states)。"""
    _check_shapes(true_cmc, F)
    return rel_entr(true_cmc.transitions, posterior_tensor(F, prior)).sum(axis=2)


def missing_information(true_cmc: Cmc, F: CountTensor, prior: DirichletPrior, subset=None) -> float:
    """
    缺失信息：Σ_{i∈subset, u} KL(p_i.(u) || p̂_i.(u,F))。

    Args:
        subset: 可选的状态集合；为 None 时对所有状态求和。

    Raises:
        ShapeMismatchError: 环境与计数形状不一致。
    """
    terms = missing_information_terms(true_cmc, F, prior)
    if subset is not None:
        states = sorted(set(subset))
        for i in states:
            check_index(i, true_cmc.n_states, "state")
        terms = terms[:, states]
    return float(terms.sum())


def per_row_missing_information(true_cmc: Cmc, F: CountTensor, prior: DirichletPrior) -> dict:
    """按 (i,u) 给出缺失信息的各个 KL 项。"""
    terms = missing_information_terms(true_cmc, F, prior)
    return {
        (i, u): float(terms[u, i])
        for i in range(true_cmc.n_states)
        for u in range(true_cmc.n_controls)
    }


def row_label(cmc: Cmc, i: int, u: int) -> str:
    """用 (i,u) 行的主导真实转移标记该行，例如 "p[0->1](0)"。"""
    return f"p[{i}->{cmc.true_successor(i, u)}]({u})"


def save_counts(F: CountTensor) -> str:
    """序列化计数张量，只列出非零元素。"""
    entries = [
        {"u": int(u), "i": int(i), "j": int(j), "n": int(F.counts[u, i, j])}
        for u, i, j in np.argwhere(F.counts > 0)
    ]
    return json.dumps({"n_states": F.n_states, "n_controls": F.n_controls, "counts": entries})


def load_counts(document: str) -> CountTensor:
    """
    从 JSON 文档读取计数张量。

    Raises:
        ParseError: 文档格式错误。
    """
    try:
        data = json.loads(document)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, location=f"line {e.lineno} column {e.colno}")
    try:
        n_states = int(data["n_states"])
        n_controls = int(data["n_controls"])
    except (KeyError, TypeError, ValueError, OverflowError):
        raise ParseError("缺少 n_states 或 n_controls", location="$")
    if n_states < 1 or n_controls < 1:
        raise ParseError("n_states 和 n_controls 必须为正", location="$")
    entries = data.get("counts", [])
    if not isinstance(entries, list):
        raise ParseError("counts 必须是数组", location="$.counts")
    counts = np.zeros((n_controls, n_states, n_states), dtype=np.int64)
    for k, entry in enumerate(entries):
        try:
            u, i, j, n = (int(entry[key]) for key in ("u", "i", "j", "n"))
        except (KeyError, TypeError, ValueError, OverflowError):
            raise ParseError("计数条目需要整数字段 u, i, j, n", location=f"$.counts[{k}]")
        if not (0 <= u < n_controls and 0 <= i < n_states and 0 <= j < n_states) or n < 0:
            raise ParseError("计数条目超出范围", location=f"$.counts[{k}]")
        counts[u, i, j] = n
    return CountTensor(counts)
