# pycmc/constants.py

# 估计器 (Dirichlet 先验)
DEFAULT_ALPHA = 0.05  # 每个结果的伪计数

# 探索实验
DEFAULT_PERIODS = 20  # 探索时段数 N
DEFAULT_TRIALS = 200  # 随机策略的重复试验次数
DEFAULT_SEED = 7
DEFAULT_START_STATE = 0  # 状态一
DEFAULT_METRIC_SUBSET = (0, 1)  # 缺失信息只统计状态一和状态二
DEFAULT_MC_REPEATS = 16  # 随机链上 rollout 的蒙特卡洛重复次数
DETERMINISTIC_MC_REPEATS = 1
MAX_NESTING_DEPTH = 2

# 下游控制任务
DEFAULT_DISCOUNT = 0.99
MAX_POLICY_ITERATIONS = 1000
DEFAULT_VI_TOLERANCE = 1e-9

# 数值容差
ROW_SUM_TOLERANCE = 1e-12
TIE_TOLERANCE = 1e-12  # argmax/argmin 平局判定
RESIDUAL_TOLERANCE = 1e-9  # ||MJ - g||_inf 上限
DP_TREE_LIMIT = 10 ** 7  # (n_states * n_controls)^(N-k) 上限

# 内置环境
EMBEDDED_DEFAULT_STATES = 100
EMBEDDED_COSTS = {(0, 0): 2.0, (0, 1): 1.0}  # g(i,u)，其余为 0

# 策略名称
STRATEGY_RANDOM = "random"
STRATEGY_PIG_GREEDY = "pig_greedy"
STRATEGY_JPIG_GREEDY = "jpig_greedy"
STRATEGY_PIG_ROLLOUT = "pig_rollout"
STRATEGY_NAMES = (STRATEGY_RANDOM, STRATEGY_PIG_GREEDY, STRATEGY_JPIG_GREEDY, STRATEGY_PIG_ROLLOUT)

# 输出压缩
COMPRESSION_NONE = "none"
COMPRESSION_GZIP = "gzip"
COMPRESSION_ZSTANDARD = "zstd"
COMPRESSION_CHOICES = (COMPRESSION_NONE, COMPRESSION_GZIP, COMPRESSION_ZSTANDARD)
COMPRESSION_SUFFIXES = {COMPRESSION_NONE: "", COMPRESSION_GZIP: ".gz", COMPRESSION_ZSTANDARD: ".zst"}
GZIP_MAGIC = b'\x1f\x8b'
ZSTD_MAGIC = b'\x28\xb5\x2f\xfd'

# CSV 表头
EXPLORATION_HEADER = ("trial", "period", "state", "control", "next_state", "pig", "mi_total", "mi_subset")
CURVES_HEADER = ("strategy", "period", "mi_total", "mi_subset")
ROW_CURVES_HEADER = ("strategy", "period", "state", "control", "label", "mi")
POLICY_TRACE_HEADER = ("strategy", "period", "state", "control")
TABLE_HEADER = ("strategy", "policy_state1", "true_cost_state1")

DEFAULT_BUFFER_FLUSH_RECORDS = 5000  # CSV 写入缓冲的记录数阈值
