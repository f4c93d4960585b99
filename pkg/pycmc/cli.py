# pycmc/cli.py

import argparse
import json
import logging
import sys
import traceback
from pathlib import Path

from . import constants
from .control import DiscountedTask, evaluate_learned_model
from .estimation import CountTensor, DirichletPrior, load_counts
from .exceptions import CmcError, UsageError
from .exploration import StrategyKind, exact_dp, explore
from .harness import (
    BUILTIN_FIG1,
    TABLE_STATE,
    ExperimentConfig,
    describe_builtins,
    make_environment,
    run_experiment,
    table1_config,
)
from .reader import counts_from_csv

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def _parse_int_list(text):
    """把 "0,1" 解析为 (0, 1)；"all" 表示不限制。"""
    if text.strip().lower() == "all":
        return None
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"需要逗号分隔的整数列表，得到 '{text}'")


def _parse_name_list(text):
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _print_json(document):
    print(json.dumps(document, ensure_ascii=False, sort_keys=True))


def _environment_config(args, **extra):
    return ExperimentConfig(env=args.env, p=args.p, n_states=args.n_states, alpha=args.alpha, **extra)


def handle_explore(args):
    """处理 explore 命令"""
    try:
        config = ExperimentConfig(
            env=args.env, p=args.p, n_states=args.n_states, strategies=args.strategies,
            periods=args.periods, trials=args.trials, alpha=args.alpha, discount=args.discount,
            seed=args.seed, start=args.start, subset=args.subset, mc_repeats=args.mc_repeats,
            nesting=args.nesting, out_dir=args.out, compression=args.compress, workers=args.workers,
        )
        result = run_experiment(config)
        for label, logs in result.logs.items():
            print(f"{label}: {len(logs)} 次试验，最终缺失信息 (子集) 平均 {result.mean_final_mi(label):.6f} nat")
        print(f"成功将实验产物写入 '{args.out}'。")
    except Exception as e:
        _handle_error(e)


def handle_task(args):
    """处理 task 命令：在学到的模型上求最优策略，并在真实链上评估"""
    try:
        config = _environment_config(args, discount=args.discount)
        config.validate()
        env = make_environment(config)
        if Path(args.counts).suffix == ".json":
            F = load_counts(Path(args.counts).read_text(encoding="utf-8"))
        else:
            F = counts_from_csv(args.counts, env.n_states, env.n_controls, trial=args.trial)
        task = DiscountedTask.from_cmc(env, args.discount)
        policy, values = evaluate_learned_model(env, F, DirichletPrior(args.alpha), task)
        _print_json({
            "policy": list(policy.choice),
            "true_values": values.values.tolist(),
            "policy_state1": policy[TABLE_STATE],
            "true_cost_state1": values[TABLE_STATE],
        })
    except Exception as e:
        _handle_error(e)


def handle_dp_oracle(args):
    """处理 dp-oracle 命令：精确 DP 值与贪婪/rollout 策略的实际 PIG 总和对比"""
    try:
        config = _environment_config(args, periods=args.periods, start=args.start)
        config.validate()
        env = make_environment(config)
        prior = DirichletPrior(args.alpha)
        F = CountTensor.for_cmc(env)
        value, control = exact_dp(args.start, F, 0, args.periods, env, prior)
        greedy = explore(StrategyKind.pig_greedy(), env, args.start, args.periods, prior, seed=args.seed)
        rollout = explore(StrategyKind.pig_rollout(), env, args.start, args.periods, prior, seed=args.seed)
        _print_json({
            "value": value,
            "best_control": control,
            "greedy_total_pig": greedy.total_pig(),
            "rollout_total_pig": rollout.total_pig(),
        })
    except Exception as e:
        _handle_error(e)


def handle_table1(args):
    """处理 table1 命令：一次性复现下游任务对比表"""
    try:
        config = table1_config(args.out, trials=args.trials, seed=args.seed,
                               compression=args.compress, workers=args.workers)
        result = run_experiment(config)
        print(",".join(constants.TABLE_HEADER))
        for row in result.table:
            print(f"{row.strategy},{row.policy_state1},{row.true_cost_state1!r}")
        print(f"成功将实验产物写入 '{args.out}'。")
    except Exception as e:
        _handle_error(e)


def handle_builtins(args):
    """处理 builtins 命令"""
    for builtin in describe_builtins():
        print(builtin)


def _handle_error(e):
    """统一错误处理：向 stderr 输出一行 JSON 并以退出码 1 结束"""
    if not isinstance(e, (CmcError, OSError, ValueError)):
        traceback.print_exc()
    print(json.dumps({"error": type(e).__name__, "message": str(e)}, ensure_ascii=False), file=sys.stderr)
    sys.exit(1)


def _add_environment_arguments(parser):
    parser.add_argument('--env', '-e', default=BUILTIN_FIG1, help='内置环境 (fig1|fig4|seq3) 或 CMC JSON 文档路径')
    parser.add_argument('--p', type=float, default=0.0, help='fig1 的自环概率 p')
    parser.add_argument('--n-states', dest='n_states', type=int, default=constants.EMBEDDED_DEFAULT_STATES,
                        help='fig4 的状态数')
    parser.add_argument('--alpha', type=float, default=constants.DEFAULT_ALPHA, help='Dirichlet 伪计数')


def _add_output_arguments(parser):
    parser.add_argument('--out', '-o', required=True, help='输出目录')
    parser.add_argument('--compress', '-c', choices=constants.COMPRESSION_CHOICES,
                        default=constants.COMPRESSION_NONE, help='CSV 输出压缩')
    parser.add_argument('--workers', type=int, default=1, help='并行试验的线程数')
    parser.add_argument('--seed', type=int, default=constants.DEFAULT_SEED, help='随机种子')


class _JsonErrorParser(argparse.ArgumentParser):
    """用法错误也经 _handle_error 输出一行 JSON，退出码 1。"""

    def error(self, message):
        self.print_usage(sys.stderr)
        _handle_error(UsageError(f"{self.prog}: {message}"))


def build_parser():
    parser = _JsonErrorParser(
        description="pycmc 命令行工具 - 可控马尔可夫链的信息性探索实验。"
    )
    parser.add_argument('-v', '--verbose', action='store_true', help='输出 DEBUG 日志')
    subparsers = parser.add_subparsers(dest='command', help='可用命令')

    # Explore Command
    parser_explore = subparsers.add_parser('explore', help='运行探索实验并写出产物')
    _add_environment_arguments(parser_explore)
    _add_output_arguments(parser_explore)
    parser_explore.add_argument('--strategies', '-s', type=_parse_name_list,
                                default=constants.STRATEGY_NAMES, help='逗号分隔的策略列表')
    parser_explore.add_argument('--periods', '-N', type=int, default=constants.DEFAULT_PERIODS, help='探索时段数')
    parser_explore.add_argument('--trials', '-t', type=int, default=constants.DEFAULT_TRIALS, help='随机运行的试验次数')
    parser_explore.add_argument('--discount', type=float, default=constants.DEFAULT_DISCOUNT, help='下游任务折扣因子')
    parser_explore.add_argument('--start', type=int, default=constants.DEFAULT_START_STATE, help='初始状态')
    parser_explore.add_argument('--mc-repeats', dest='mc_repeats', type=int, default=None,
                                help='rollout 的蒙特卡洛重复次数 (默认按环境自动选择)')
    parser_explore.add_argument('--nesting', type=int, choices=(1, 2), default=1, help='rollout 嵌套深度')
    parser_explore.add_argument('--subset', type=_parse_int_list, default=constants.DEFAULT_METRIC_SUBSET,
                                help='缺失信息统计的状态子集，如 "0,1"，或 "all"')
    parser_explore.set_defaults(func=handle_explore)

    # Task Command
    parser_task = subparsers.add_parser('task', help='在学到的模型上求解折扣代价任务')
    _add_environment_arguments(parser_task)
    parser_task.add_argument('--counts', required=True, help='探索 CSV 或计数 JSON 文档')
    parser_task.add_argument('--trial', type=int, default=0, help='使用探索 CSV 中的哪个试验')
    parser_task.add_argument('--discount', type=float, default=constants.DEFAULT_DISCOUNT, help='折扣因子')
    parser_task.set_defaults(func=handle_task)

    # DP Oracle Command
    parser_dp = subparsers.add_parser('dp-oracle', help='小规模实例上的精确有限时域 DP')
    _add_environment_arguments(parser_dp)
    parser_dp.add_argument('--periods', '-N', type=int, required=True, help='时域 N')
    parser_dp.add_argument('--start', type=int, default=constants.DEFAULT_START_STATE, help='初始状态')
    parser_dp.add_argument('--seed', type=int, default=constants.DEFAULT_SEED, help='随机种子')
    parser_dp.set_defaults(func=handle_dp_oracle)

    # Table Command
    parser_table = subparsers.add_parser('table1', help='一次性复现 100 状态链上的下游任务对比')
    _add_output_arguments(parser_table)
    parser_table.add_argument('--trials', '-t', type=int, default=constants.DEFAULT_TRIALS, help='随机运行的试验次数')
    parser_table.set_defaults(func=handle_table1)

    # Builtins Command
    parser_builtins = subparsers.add_parser('builtins', help='列出内置环境')
    parser_builtins.set_defaults(func=handle_builtins)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    if not getattr(args, 'command', None):
        parser.print_help()
        sys.exit(1)

    logging.basicConfig(
        level=logging.DEBUG if getattr(args, 'verbose', False) else logging.WARNING,
        format=LOG_FORMAT,
        stream=sys.stderr,
    )
    args.func(args)


if __name__ == "__main__":
    main()
