# pycmc/reader.py

"""
此模块提供 `CsvArtifactReader` 和 `ExplorationCsvReader` 类，用于读回实验产物 CSV 文件。
压缩格式由文件开头的魔术字节自动识别，无需调用者指定。
"""

import csv
import gzip
import zlib
from typing import NamedTuple

try:
    import zstandard as zstd
except ImportError:
    zstd = None

import numpy as np

from . import constants
from .estimation import CountTensor
from .exceptions import ArtifactReadError, UnsupportedCompressionError


class ExplorationRow(NamedTuple):
    trial: int
    period: int
    state: int
    control: int
    next_state: int
    pig: float
    mi_total: float
    mi_subset: float


def detect_compression(head):
    """根据文件开头的字节判断压缩格式。"""
    if head.startswith(constants.GZIP_MAGIC):
        return constants.COMPRESSION_GZIP
    if head.startswith(constants.ZSTD_MAGIC):
        return constants.COMPRESSION_ZSTANDARD
    return constants.COMPRESSION_NONE


class CsvArtifactReader:
    """
    用于读取实验产物 CSV 文件的类。

    打开时读取整个文件、按魔术字节解压并校验表头；之后 `read_rows`
    以字符串列表的形式逐行产出数据。

    Args:
        file_path (str): 要读取的文件路径。
        header (tuple, optional): 期望的表头；为 None 时不校验。

    Raises:
        ArtifactReadError: 文件无法读取、解压失败或表头不符。
        UnsupportedCompressionError: 文件是 Zstandard 压缩的但缺少 zstandard 库。
    """
    def __init__(self, file_path, header=None):
        self.file_path = file_path
        self.file = None
        self.compression = None
        self.header = None
        self._lines = []

        try:
            self._open_file()
            self._read_header(header)
        except Exception:
            self.close()
            raise

    def _open_file(self):
        try:
            self.file = open(self.file_path, 'rb')
        except OSError as e:
            raise ArtifactReadError(f"无法打开文件 '{self.file_path}' 进行读取: {e}")

    def _decompress(self, data):
        if self.compression == constants.COMPRESSION_NONE:
            return data
        if self.compression == constants.COMPRESSION_GZIP:
            try:
                return gzip.decompress(data)
            except (OSError, EOFError, zlib.error) as e:
                raise ArtifactReadError(f"Gzip 解压失败: {e}")
        if zstd is None:
            raise UnsupportedCompressionError("Zstandard 解压库未安装。请安装 'zstandard'。")
        try:
            return zstd.ZstdDecompressor().decompressobj().decompress(data)
        except zstd.ZstdError as e:
            raise ArtifactReadError(f"Zstandard 解压失败: {e}")

    def _read_header(self, expected):
        try:
            data = self.file.read()
        except OSError as e:
            raise ArtifactReadError(f"读取文件失败: {e}")
        self.compression = detect_compression(data[:4])
        try:
            text = self._decompress(data).decode('utf-8')
        except UnicodeDecodeError as e:
            raise ArtifactReadError(f"文件不是 UTF-8 文本: {e}")

        lines = list(csv.reader(text.splitlines()))
        if not lines:
            raise ArtifactReadError(f"文件 '{self.file_path}' 是空的，缺少表头")
        self.header = tuple(lines[0])
        if expected is not None and self.header != tuple(expected):
            raise ArtifactReadError(f"表头不符: 期望 {','.join(expected)}，得到 {','.join(self.header)}")
        self._lines = lines[1:]

    def read_rows(self):
        for row in self._lines:
            if row:
                yield row

    def close(self):
        if self.file:
            try:
                self.file.close()
            except OSError as e:
                raise ArtifactReadError(f"关闭文件失败: {e}")
            self.file = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()


class ExplorationCsvReader(CsvArtifactReader):
    """读取 `exploration_<strategy>.csv`，产出带类型的 `ExplorationRow`。"""

    def __init__(self, file_path):
        super().__init__(file_path, constants.EXPLORATION_HEADER)

    def read_records(self):
        """
        Yields:
            ExplorationRow: 每个试验每个时段一行。

        Raises:
            ArtifactReadError: 某行列数或数值格式错误。
        """
        for line_number, row in enumerate(self.read_rows(), start=2):
            if len(row) != len(constants.EXPLORATION_HEADER):
                raise ArtifactReadError(f"第 {line_number} 行有 {len(row)} 列")
            try:
                ints = [int(x) for x in row[:5]]
                floats = [float(x) for x in row[5:]]
            except ValueError as e:
                raise ArtifactReadError(f"第 {line_number} 行数值格式错误: {e}")
            yield ExplorationRow(*ints, *floats)


def counts_from_csv(file_path, n_states, n_controls, trial=0):
    """
    从探索 CSV 重建某个试验的计数张量 F。

    Raises:
        ArtifactReadError: 文件格式错误，某行索引超出范围，或文件中没有该试验。
    """
    counts = np.zeros((n_controls, n_states, n_states), dtype=np.int64)
    found = False
    with ExplorationCsvReader(file_path) as reader:
        for row in reader.read_records():
            if row.trial != trial:
                continue
            if not (0 <= row.control < n_controls and 0 <= row.state < n_states and 0 <= row.next_state < n_states):
                raise ArtifactReadError(f"时段 {row.period} 的索引超出环境范围")
            counts[row.control, row.state, row.next_state] += 1
            found = True
    if not found:
        raise ArtifactReadError(f"文件 '{file_path}' 中没有试验 {trial}")
    return CountTensor(counts)
