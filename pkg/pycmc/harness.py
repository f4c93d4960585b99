# pycmc/harness.py

"""
此模块把环境、探索策略、缺失信息指标和下游控制任务组合成可复现的实验。

`run_experiment` 根据 `ExperimentConfig` 运行所有策略的所有试验，并把结果写成
一组 CSV/JSON 产物；所有输出都是配置 (包括种子) 的确定性函数。
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from . import constants
from .cmc import Cmc, RngStream, build_embedded, build_sequential3, build_two_state, load_cmc
from .control import DiscountedTask, evaluate_learned_model, policy_iteration
from .estimation import CountTensor, DirichletPrior, increment, missing_information_terms, row_label
from .exceptions import ArtifactReadError, ConfigError
from .exploration import ExplorationLog, StrategyKind, explore
from .writer import CsvArtifactWriter, write_json

logger = logging.getLogger(__name__)

BUILTIN_FIG1 = "fig1"
BUILTIN_FIG4 = "fig4"
BUILTIN_SEQ3 = "seq3"
BUILTIN_NAMES = (BUILTIN_FIG1, BUILTIN_FIG4, BUILTIN_SEQ3)

# 下游任务表中报告的状态 ("状态一")
TABLE_STATE = 0


class BuiltinEnvironment(NamedTuple):
    name: str
    parameters: str
    description: str
    stand_in: bool = False

    def __str__(self):
        flag = " [stand-in]" if self.stand_in else ""
        return f"{self.name:<6} {self.parameters:<28} {self.description}{flag}"


def describe_builtins() -> Tuple[BuiltinEnvironment, ...]:
    """列出内置环境及其参数。"""
    return (
        BuiltinEnvironment(
            BUILTIN_FIG1, "p ∈ [0,1] (默认 0)",
            "两状态两控制链：控制 0 使状态 0 以概率 p 自环、否则进入吸收状态 1；控制 1 使两个状态都自环"),
        BuiltinEnvironment(
            BUILTIN_FIG4, f"n ≥ 2 (默认 {constants.EMBEDDED_DEFAULT_STATES})",
            "把 p=0 的两状态链嵌入 n 个状态，其余状态全部自吸收；代价 g(0,0)=2，g(0,1)=1"),
        BuiltinEnvironment(
            BUILTIN_SEQ3, "无参数",
            "三状态三控制的确定性链，必须按特定顺序选择控制才能访问全部状态 (自行设计的替代链)",
            stand_in=True),
    )


@dataclass
class ExperimentConfig:
    """
    一次实验的完整配置。缺省值与基准实验一致：N=20，alpha=0.05，
    折扣 0.99，从状态 0 出发，随机策略 200 次试验。

    `env` 是内置环境名或 CMC JSON 文档路径。`subset=None` 表示缺失信息子集取全部状态。
    """
    env: str = BUILTIN_FIG1
    p: float = 0.0
    n_states: int = constants.EMBEDDED_DEFAULT_STATES
    strategies: Tuple[str, ...] = constants.STRATEGY_NAMES
    periods: int = constants.DEFAULT_PERIODS
    trials: int = constants.DEFAULT_TRIALS
    alpha: float = constants.DEFAULT_ALPHA
    discount: float = constants.DEFAULT_DISCOUNT
    seed: int = constants.DEFAULT_SEED
    start: int = constants.DEFAULT_START_STATE
    subset: Optional[Tuple[int, ...]] = constants.DEFAULT_METRIC_SUBSET
    mc_repeats: Optional[int] = None
    nesting: int = 1
    out_dir: str = "results"
    compression: str = constants.COMPRESSION_NONE
    workers: int = 1

    def __post_init__(self):
        self.strategies = tuple(self.strategies)
        if self.subset is not None:
            self.subset = tuple(sorted(set(int(s) for s in self.subset)))

    def validate(self):
        """
        检查与环境无关的约束。

        Raises:
            ConfigError: 任一字段无效。
        """
        if self.env not in BUILTIN_NAMES and not os.path.isfile(self.env):
            raise ConfigError(f"未知环境 '{self.env}'：既不是内置环境 ({', '.join(BUILTIN_NAMES)}) 也不是文件")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"p 必须在 [0, 1] 内，得到 {self.p}")
        if self.n_states < 2:
            raise ConfigError(f"n_states 必须 >= 2，得到 {self.n_states}")
        if not self.strategies:
            raise ConfigError("至少需要一个探索策略")
        unknown = [s for s in self.strategies if s not in constants.STRATEGY_NAMES]
        if unknown:
            raise ConfigError(f"未知的探索策略: {', '.join(unknown)}")
        if len(set(self.strategies)) != len(self.strategies):
            raise ConfigError("探索策略不能重复")
        if self.periods < 1:
            raise ConfigError(f"periods 必须 >= 1，得到 {self.periods}")
        if self.trials < 1:
            raise ConfigError(f"trials 必须 >= 1，得到 {self.trials}")
        if not self.alpha > 0.0:
            raise ConfigError(f"alpha 必须为正，得到 {self.alpha}")
        if not 0.0 <= self.discount < 1.0:
            raise ConfigError(f"discount 必须在 [0, 1) 内，得到 {self.discount}")
        if self.seed < 0:
            raise ConfigError(f"seed 必须是非负整数，得到 {self.seed}")
        if self.start < 0:
            raise ConfigError(f"start 必须是非负整数，得到 {self.start}")
        if self.mc_repeats is not None and self.mc_repeats < 1:
            raise ConfigError(f"mc_repeats 必须 >= 1，得到 {self.mc_repeats}")
        if self.nesting not in range(1, constants.MAX_NESTING_DEPTH + 1):
            raise ConfigError(f"nesting 必须是 1 或 2，得到 {self.nesting}")
        if self.compression not in constants.COMPRESSION_CHOICES:
            raise ConfigError(f"不支持的压缩格式: {self.compression}")
        if self.workers < 1:
            raise ConfigError(f"workers 必须 >= 1，得到 {self.workers}")

    def strategy_kinds(self) -> List[StrategyKind]:
        kinds = []
        for name in self.strategies:
            if name == constants.STRATEGY_PIG_ROLLOUT:
                kinds.append(StrategyKind.pig_rollout(self.mc_repeats, self.nesting))
            else:
                kinds.append(StrategyKind(name))
        return kinds

    def to_document(self) -> dict:
        document = asdict(self)
        document["strategies"] = list(self.strategies)
        document["subset"] = list(self.subset) if self.subset is not None else None
        return document


def table1_config(out_dir: str, **overrides) -> ExperimentConfig:
    """下游任务对比实验的配置：100 状态嵌入链，四种策略。"""
    settings = dict(env=BUILTIN_FIG4, n_states=constants.EMBEDDED_DEFAULT_STATES, out_dir=out_dir)
    settings.update(overrides)
    return ExperimentConfig(**settings)


def make_environment(config: ExperimentConfig) -> Cmc:
    """
    根据配置构造环境。

    Raises:
        ArtifactReadError: CMC 文档无法读取。
        ParseError / ValidationError: CMC 文档无效。
    """
    if config.env == BUILTIN_FIG1:
        return build_two_state(config.p)
    if config.env == BUILTIN_FIG4:
        return build_embedded(config.n_states)
    if config.env == BUILTIN_SEQ3:
        return build_sequential3()
    try:
        document = Path(config.env).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise ArtifactReadError(f"无法读取 CMC 文档 '{config.env}': {e}")
    return load_cmc(document, name=Path(config.env).stem)


class TableRow(NamedTuple):
    strategy: str
    policy_state1: int
    true_cost_state1: float


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    env: Cmc
    logs: Dict[str, List[ExplorationLog]] = field(default_factory=dict)
    table: List[TableRow] = field(default_factory=list)
    paths: Dict[str, Path] = field(default_factory=dict)

    def mean_final_mi(self, label: str, subset: bool = True) -> float:
        logs = self.logs[label]
        values = [log.final_mi_subset if subset else log.final_mi_total for log in logs]
        return float(np.mean(values))


def _check_against_env(config: ExperimentConfig, env: Cmc):
    if config.start >= env.n_states:
        raise ConfigError(f"start={config.start} 超出环境状态数 {env.n_states}")
    if config.subset is not None:
        bad = [s for s in config.subset if s >= env.n_states]
        if bad:
            raise ConfigError(f"缺失信息子集中的状态 {bad} 超出环境状态数 {env.n_states}")


def _run_trials(strategy, strategy_index, env, config, prior, n_trials):
    def run(trial):
        rng = RngStream.for_key(config.seed, strategy_index, trial)
        return explore(strategy, env, config.start, config.periods, prior,
                       metric_subset=config.subset, rng=rng)

    if config.workers == 1 or n_trials == 1:
        return [run(trial) for trial in range(n_trials)]
    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        # map 按试验顺序返回结果，与调度无关
        return list(executor.map(run, range(n_trials)))


def _row_curves(env, log, prior, states):
    """逐时段重放计数，返回形状 (N+1, n_controls, len(states)) 的每行缺失信息。"""
    F = CountTensor.for_cmc(env)
    curves = [missing_information_terms(env, F, prior)[:, states]]
    for record in log.records:
        F = increment(F, record.control, record.state, record.next_state)
        curves.append(missing_information_terms(env, F, prior)[:, states])
    return np.stack(curves)


def _path(out, name, config):
    return out / f"{name}{constants.COMPRESSION_SUFFIXES[config.compression]}"


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """
    运行配置中的全部策略与试验，并写出产物目录：

    - `exploration_<strategy>.csv`：每个试验每个时段一行；
    - `curves.csv`：按试验平均的缺失信息曲线 (时段 0..N)；
    - `row_curves.csv`：子集内每个 (i,u) 行的平均缺失信息曲线；
    - `policy_trace.csv`：试验 0 的 (状态, 控制) 轨迹；
    - `table1.csv` / `table1.json`：在学到的模型上求最优策略，再在真实链上评估；
    - `config.json`：本次配置。

    确定性的策略/环境组合 (结果与种子无关) 只运行 1 次试验，其余运行 `trials` 次。

    Raises:
        ConfigError: 配置无效。
        ArtifactWriteError: 产物无法写出。
    """
    config.validate()
    env = make_environment(config)
    _check_against_env(config, env)

    prior = DirichletPrior(config.alpha)
    task = DiscountedTask.from_cmc(env, config.discount)
    states = list(config.subset) if config.subset is not None else list(range(env.n_states))
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = ExperimentResult(config, env)

    for strategy in config.strategy_kinds():
        n_trials = 1 if strategy.is_deterministic_on(env) else config.trials
        logger.info("%s: 在 %s 上运行 %d 次试验", strategy.label, env.name, n_trials)
        strategy_index = constants.STRATEGY_NAMES.index(strategy.kind)
        result.logs[strategy.label] = _run_trials(strategy, strategy_index, env, config, prior, n_trials)

    for label, logs in result.logs.items():
        path = _path(out, f"exploration_{label}.csv", config)
        with CsvArtifactWriter(path, constants.EXPLORATION_HEADER, config.compression) as writer:
            for trial, log in enumerate(logs):
                for r in log.records:
                    writer.write_row((trial, r.period, r.state, r.control, r.next_state,
                                      r.pig, r.mi_total, r.mi_subset))
        result.paths[f"exploration_{label}"] = path

    path = _path(out, "curves.csv", config)
    with CsvArtifactWriter(path, constants.CURVES_HEADER, config.compression) as writer:
        for label, logs in result.logs.items():
            totals = np.mean([log.mi_curve(subset=False) for log in logs], axis=0)
            subsets = np.mean([log.mi_curve(subset=True) for log in logs], axis=0)
            for period in range(config.periods + 1):
                writer.write_row((label, period, totals[period], subsets[period]))
    result.paths["curves"] = path

    path = _path(out, "row_curves.csv", config)
    with CsvArtifactWriter(path, constants.ROW_CURVES_HEADER, config.compression) as writer:
        for label, logs in result.logs.items():
            mean = np.mean([_row_curves(env, log, prior, states) for log in logs], axis=0)
            for period in range(config.periods + 1):
                for column, i in enumerate(states):
                    for u in range(env.n_controls):
                        writer.write_row((label, period, i, u, row_label(env, i, u), mean[period, u, column]))
    result.paths["row_curves"] = path

    path = _path(out, "policy_trace.csv", config)
    with CsvArtifactWriter(path, constants.POLICY_TRACE_HEADER, config.compression) as writer:
        for label, logs in result.logs.items():
            for r in logs[0].records:
                writer.write_row((label, r.period, r.state, r.control))
    result.paths["policy_trace"] = path

    optimal_policy, optimal_values = policy_iteration(env.transitions, task)
    document = {
        "discount": config.discount,
        "optimal": {"policy": list(optimal_policy.choice), "values": optimal_values.values.tolist()},
        "strategies": {},
    }
    for label, logs in result.logs.items():
        evaluated = [evaluate_learned_model(env, log.counts, prior, task) for log in logs]
        policy, values = evaluated[0]
        result.table.append(TableRow(label, policy[TABLE_STATE], values[TABLE_STATE]))
        document["strategies"][label] = {
            "policy": list(policy.choice),
            "values": values.values.tolist(),
            "trial_policy_state1": [p[TABLE_STATE] for p, _ in evaluated],
            "trial_cost_state1": [v[TABLE_STATE] for _, v in evaluated],
        }
    path = _path(out, "table1.csv", config)
    with CsvArtifactWriter(path, constants.TABLE_HEADER, config.compression) as writer:
        writer.write_rows(result.table)
    result.paths["table1"] = path

    path = out / "table1.json"
    write_json(path, document)
    result.paths["table1_json"] = path

    path = out / "config.json"
    write_json(path, config.to_document())
    result.paths["config"] = path

    logger.info("产物已写入 %s", out)
    return result
