# pycmc/cmc.py

"""
此模块定义可控马尔可夫链 (CMC) `Cmc`、可重放的随机数流 `RngStream`，
以及内置基准环境的构造函数和 JSON 文档的读写。

所有状态和控制索引均从 0 开始：状态 0 对应"状态一"，控制 0 对应"u=1"。
学习者只能通过 `sample_transition` 把 `Cmc` 当作黑盒采样器使用。
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import constants
from .exceptions import (
    IndexOutOfRangeError,
    InvalidProbabilityError,
    InvalidStateCountError,
    NegativeProbabilityError,
    NonStochasticRowError,
    ParseError,
    ShapeMismatchError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Cmc:
    """
    一个有限状态、有限控制的可控马尔可夫链。

    `transitions[u, i, j]` 是在状态 i 选择控制 u 后转移到状态 j 的概率；
    `costs[i, u]` 是下游任务中的单步代价 g(i,u)，缺省为 0。
    构造后数组被设为只读，因此实例可以在线程间共享。
    """
    transitions: np.ndarray
    costs: np.ndarray = field(default=None)
    name: str = "cmc"

    def __post_init__(self):
        transitions = np.array(self.transitions, dtype=float)
        if transitions.ndim != 3 or transitions.shape[1] != transitions.shape[2]:
            raise ShapeMismatchError(f"transitions 必须是 (n_controls, n_states, n_states) 张量，得到 {transitions.shape}")
        n_controls, n_states, _ = transitions.shape
        if n_controls < 1 or n_states < 1:
            raise ShapeMismatchError("至少需要一个状态和一个控制")
        if self.costs is None:
            costs = np.zeros((n_states, n_controls))
        else:
            costs = np.array(self.costs, dtype=float)
            if costs.shape != (n_states, n_controls):
                raise ShapeMismatchError(f"costs 形状应为 {(n_states, n_controls)}，得到 {costs.shape}")
        transitions.setflags(write=False)
        costs.setflags(write=False)
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "costs", costs)

    @property
    def n_states(self) -> int:
        return self.transitions.shape[1]

    @property
    def n_controls(self) -> int:
        return self.transitions.shape[0]

    @property
    def is_deterministic(self) -> bool:
        """每一行都是单位向量时为真。"""
        return bool(np.all((self.transitions == 0.0) | (self.transitions == 1.0)))

    def row(self, i: int, u: int) -> np.ndarray:
        check_index(i, self.n_states, "state")
        check_index(u, self.n_controls, "control")
        return self.transitions[u, i]

    def true_successor(self, i: int, u: int) -> int:
        """返回 (i,u) 行中概率最大的下一状态 (并列时取最小索引)。"""
        return int(np.argmax(self.row(i, u)))


def check_index(index, size, what):
    if not 0 <= index < size:
        raise IndexOutOfRangeError(f"{what} 索引 {index} 超出范围 [0, {size})")


class RngStream:
    """
    可重放、可拆分的随机数流。

    基于 numpy 的 `SeedSequence` + `PCG64`：相同种子和相同调用序列产生相同样本；
    `spawn` 产生相互独立的子流，供并行的蒙特卡洛重复和试验使用。
    `draws` 是已消耗样本的计数器。单一所有者使用，不是线程安全的。
    """

    def __init__(self, seed=constants.DEFAULT_SEED, seed_sequence=None):
        self.seed = int(seed)
        self._seed_sequence = seed_sequence if seed_sequence is not None else np.random.SeedSequence(self.seed)
        self._generator = np.random.Generator(np.random.PCG64(self._seed_sequence))
        self.draws = 0

    @classmethod
    def for_key(cls, seed, *key):
        """由 (seed, key...) 确定性地派生一个流，与创建顺序无关。"""
        return cls(seed, np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))

    def spawn(self, n):
        return [RngStream(self.seed, child) for child in self._seed_sequence.spawn(n)]

    def uniform(self) -> float:
        self.draws += 1
        return float(self._generator.random())

    def integers(self, high: int) -> int:
        self.draws += 1
        return int(self._generator.integers(high))


def validate(cmc: Cmc) -> None:
    """
    检查 `cmc` 的两个不变量：每个元素在 [0,1] 内，每行之和为 1 (容差 1e-12)。

    Raises:
        NegativeProbabilityError: 某个概率不在 [0, 1] 内。
        NonStochasticRowError: 某一行之和偏离 1。
    """
    p = cmc.transitions
    bad = np.argwhere((p < 0.0) | (p > 1.0) | ~np.isfinite(p))
    if bad.size:
        u, i, j = (int(x) for x in bad[0])
        raise NegativeProbabilityError(u, i, j, float(p[u, i, j]))
    sums = p.sum(axis=2)
    off = np.argwhere(np.abs(sums - 1.0) > constants.ROW_SUM_TOLERANCE)
    if off.size:
        u, i = (int(x) for x in off[0])
        raise NonStochasticRowError(u, i, float(sums[u, i]))


def sample_transition(cmc: Cmc, i: int, u: int, rng: RngStream) -> int:
    """
    黑盒采样：返回 j ~ p_i.(u)，并推进 `rng`。

    使用逆 CDF 采样；概率为 0 的结果永远不会被选中。

    Raises:
        IndexOutOfRangeError: i 或 u 超出范围。
    """
    row = cmc.row(i, u)
    cdf = np.cumsum(row)
    j = int(np.searchsorted(cdf, rng.uniform(), side="right"))
    if j >= cmc.n_states:
        # 浮点累加使 cdf[-1] 略小于 1
        j = int(np.flatnonzero(row)[-1])
    return j


def build_two_state(p: float) -> Cmc:
    """
    两状态、两控制的链。

    控制 0：状态 0 以概率 p 自环、以 1-p 转移到状态 1；状态 1 吸收。
    控制 1：两个状态都以概率 1 自环。代价全为 0。

    Raises:
        InvalidProbabilityError: p 不在 [0, 1] 内。
    """
    if not 0.0 <= p <= 1.0:
        raise InvalidProbabilityError(f"p 必须在 [0, 1] 内，得到 {p!r}")
    transitions = np.zeros((2, 2, 2))
    transitions[0, 0] = (p, 1.0 - p)
    transitions[0, 1] = (0.0, 1.0)
    transitions[1] = np.eye(2)
    return Cmc(transitions, name=f"fig1(p={p})")


def build_embedded(n: int = constants.EMBEDDED_DEFAULT_STATES) -> Cmc:
    """
    把两状态链 (p=0) 嵌入 n 个状态中，其余状态在任何控制下都自吸收。

    代价：g(0,0)=2，g(0,1)=1，其余为 0。

    Raises:
        InvalidStateCountError: n < 2。
    """
    if n < 2:
        raise InvalidStateCountError(f"嵌入链至少需要 2 个状态，得到 {n}")
    transitions = np.zeros((2, n, n))
    transitions[:] = np.eye(n)
    transitions[0, 0] = 0.0
    transitions[0, 0, 1] = 1.0
    costs = np.zeros((n, 2))
    for (i, u), g in constants.EMBEDDED_COSTS.items():
        costs[i, u] = g
    return Cmc(transitions, costs, name=f"fig4(n={n})")


# 三状态三控制替代链的弧 (自行设计): SEQUENTIAL3_ARCS[u][i] = j
#   状态 0: u0 -> 2 (陷阱)，u1 -> 0，u2 -> 1
#   状态 1: u0 -> 0，u1 -> 1，u2 -> 2
#   状态 2: 所有控制都自吸收
SEQUENTIAL3_ARCS = (
    (2, 0, 2),
    (0, 1, 2),
    (1, 2, 2),
)


def build_sequential3() -> Cmc:
    """
    三状态、三控制的确定性替代链。

    从状态 0 出发，贪婪地选择最小索引的控制会立刻掉入吸收状态 2，
    只有先选控制 2 去状态 1 才能访问全部三个状态。
    """
    transitions = np.zeros((3, 3, 3))
    for u, successors in enumerate(SEQUENTIAL3_ARCS):
        for i, j in enumerate(successors):
            transitions[u, i, j] = 1.0
    return Cmc(transitions, name="seq3")


def save_cmc(cmc: Cmc) -> str:
    """把 `cmc` 序列化为 JSON 文档 (只写出非零代价)。"""
    document = {
        "n_states": cmc.n_states,
        "n_controls": cmc.n_controls,
        "transitions": [
            {"u": u, "i": i, "row": [float(x) for x in cmc.transitions[u, i]]}
            for u in range(cmc.n_controls)
            for i in range(cmc.n_states)
        ],
        "costs": [
            {"i": i, "u": u, "g": float(cmc.costs[i, u])}
            for i in range(cmc.n_states)
            for u in range(cmc.n_controls)
            if cmc.costs[i, u] != 0.0
        ],
    }
    return json.dumps(document)


def load_cmc(document: str, name: str = "cmc") -> Cmc:
    """
    从 JSON 文档构造并校验一个 `Cmc`。

    每个 (u,i) 行都必须出现；缺失的代价条目默认为 0。
    可选的 "available" 掩码是保留字段，目前只接受全部可用。

    Raises:
        ParseError: 文档不是合法 JSON 或不符合模式，`location` 指出出错位置。
        ValidationError: 概率不变量不成立 (由 `validate` 抛出)。
    """
    try:
        data = json.loads(document)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, location=f"line {e.lineno} column {e.colno}")
    if not isinstance(data, dict):
        raise ParseError("顶层必须是对象", location="$")

    n_states = _require_int(data, "n_states", "$")
    n_controls = _require_int(data, "n_controls", "$")
    if n_states < 1 or n_controls < 1:
        raise ParseError("n_states 和 n_controls 必须为正", location="$")

    transitions = np.full((n_controls, n_states, n_states), np.nan)
    entries = data.get("transitions")
    if not isinstance(entries, list):
        raise ParseError("缺少 transitions 数组", location="$.transitions")
    for k, entry in enumerate(entries):
        where = f"$.transitions[{k}]"
        u = _require_index(entry, "u", n_controls, where)
        i = _require_index(entry, "i", n_states, where)
        row = entry.get("row")
        if not isinstance(row, list) or len(row) != n_states:
            raise ParseError(f"row 必须是长度 {n_states} 的数组", location=f"{where}.row")
        try:
            values = [float(x) for x in row]
        except (TypeError, ValueError):
            raise ParseError("row 含有非数值元素", location=f"{where}.row")
        if not all(math.isfinite(x) for x in values):
            raise ParseError("row 含有 NaN 或无穷大", location=f"{where}.row")
        transitions[u, i] = values
    missing = np.argwhere(np.isnan(transitions[:, :, 0]))
    if missing.size:
        u, i = (int(x) for x in missing[0])
        raise ParseError(f"缺少行 (u={u}, i={i})", location="$.transitions")

    costs = np.zeros((n_states, n_controls))
    for k, entry in enumerate(_optional_list(data, "costs")):
        where = f"$.costs[{k}]"
        i = _require_index(entry, "i", n_states, where)
        u = _require_index(entry, "u", n_controls, where)
        g = entry.get("g")
        if not isinstance(g, (int, float)) or isinstance(g, bool) or not math.isfinite(g):
            raise ParseError("g 必须是数值", location=f"{where}.g")
        costs[i, u] = float(g)

    for k, entry in enumerate(_optional_list(data, "available")):
        if isinstance(entry, dict) and entry.get("available", True) is False:
            raise ParseError("不支持按状态屏蔽控制", location=f"$.available[{k}]")

    cmc = Cmc(transitions, costs, name=name)
    validate(cmc)
    return cmc


def _optional_list(data, key):
    value = data.get(key, [])
    if not isinstance(value, list):
        raise ParseError(f"{key} 必须是数组", location=f"$.{key}")
    return value


def _require_int(obj, key, where):
    value = obj.get(key) if isinstance(obj, dict) else None
    if not isinstance(value, int) or isinstance(value, bool):
        raise ParseError(f"{key} 必须是整数", location=f"{where}.{key}")
    return value


def _require_index(obj, key, size, where):
    value = _require_int(obj, key, where)
    if not 0 <= value < size:
        raise ParseError(f"{key}={value} 超出范围 [0, {size})", location=f"{where}.{key}")
    return value
