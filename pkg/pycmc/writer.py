# pycmc/writer.py

"""
此模块提供 `CsvArtifactWriter` 类，用于写入实验产物 CSV 文件，
以及 `open_output_stream` / `write_json` 辅助函数。
支持无压缩、Gzip 和 Zstandard 三种输出压缩。
"""

import contextlib
import csv
import gzip
import io
import json
import numbers
import threading

try:
    import zstandard as zstd
except ImportError:
    zstd = None

from . import constants
from .exceptions import ArtifactWriteError, UnsupportedCompressionError


class TextToBytesWrapper:
    """
    一个简单的包装器，将字符串写入转换为 UTF-8 编码的字节写入。
    用于适配 gzip / zstandard 的二进制流。
    """
    def __init__(self, stream):
        self.stream = stream

    def write(self, data):
        if isinstance(data, str):
            return self.stream.write(data.encode('utf-8'))
        return self.stream.write(data)

    def flush(self):
        if hasattr(self.stream, 'flush'):
            self.stream.flush()


def _open_compressed(raw, compression):
    """在已打开的二进制文件上叠加压缩层。gzip 头中的 mtime 固定为 0，保证字节可复现。"""
    if compression == constants.COMPRESSION_NONE:
        return raw
    if compression == constants.COMPRESSION_GZIP:
        return gzip.GzipFile(filename='', mode='wb', fileobj=raw, mtime=0)
    if compression == constants.COMPRESSION_ZSTANDARD:
        if zstd is None:
            raise UnsupportedCompressionError("Zstandard 压缩不可用，因为 'zstandard' 库未安装。")
        return zstd.ZstdCompressor().stream_writer(raw)
    raise UnsupportedCompressionError(f"不支持的压缩格式: {compression}")


def _close_quietly(stream, raw):
    try:
        if stream is not None and stream is not raw:
            stream.close()
    finally:
        if raw is not None and not raw.closed:
            raw.close()


@contextlib.contextmanager
def open_output_stream(filepath, compression_format=constants.COMPRESSION_NONE):
    """
    根据压缩格式打开输出流的上下文管理器。
    始终产生一个接受字符串的 file-like 对象。

    Raises:
        UnsupportedCompressionError: 压缩格式未知或缺少 zstandard 库。
        ArtifactWriteError: 文件无法打开。
    """
    if compression_format not in constants.COMPRESSION_CHOICES:
        raise UnsupportedCompressionError(f"不支持的压缩格式: {compression_format}")
    try:
        raw = open(filepath, 'wb')
    except OSError as e:
        raise ArtifactWriteError(f"无法打开文件 '{filepath}' 进行写入: {e}")
    stream = None
    try:
        stream = _open_compressed(raw, compression_format)
        yield TextToBytesWrapper(stream)
    finally:
        _close_quietly(stream, raw)


def write_json(filepath, document):
    """以固定键顺序写出 JSON 文档 (UTF-8，无压缩)。"""
    with open_output_stream(filepath, constants.COMPRESSION_NONE) as f:
        f.write(json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False))
        f.write('\n')


def format_value(value):
    """浮点数用 repr (17 位有效数字)，整数用十进制，其余用 str。"""
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        return repr(float(value))
    return str(value)


class CsvArtifactWriter:
    """
    用于写入实验产物 CSV 文件的类。

    第一行是表头，之后每次 `write_row` 追加一行。记录先进入内部缓冲区，
    达到 `buffer_flush_records` 条时统一格式化并写入 (可选压缩的) 文件；
    关闭时刷新剩余记录。行尾固定为 '\\n'，浮点数按 repr 写出，
    因此相同的输入总是产生相同的字节。
    """
    def __init__(self, file_path, header, compression=constants.COMPRESSION_NONE,
                 buffer_flush_records=constants.DEFAULT_BUFFER_FLUSH_RECORDS):
        """
        初始化 CsvArtifactWriter 实例。

        Args:
            file_path (str): 要写入的 CSV 文件路径 (覆盖已有文件)。
            header (tuple): 列名。
            compression (str, optional): `none`、`gzip` 或 `zstd`。默认为 `none`。
            buffer_flush_records (int, optional): 缓冲区达到此记录数时刷新。

        Raises:
            ArtifactWriteError: 文件无法打开。
            UnsupportedCompressionError: 压缩格式未知或缺少 zstandard 库。
        """
        if compression not in constants.COMPRESSION_CHOICES:
            raise UnsupportedCompressionError(f"不支持的压缩格式: {compression}")
        self.file_path = file_path
        self.header = tuple(header)
        self.compression = compression
        self.buffer_flush_records = max(1, int(buffer_flush_records))
        self.buffer = []
        self.records_written = 0
        self.lock = threading.Lock()
        self._raw = None
        self._stream = None

        try:
            self._open_file()
        except Exception:
            _close_quietly(self._stream, self._raw)
            raise

    def _open_file(self):
        try:
            self._raw = open(self.file_path, 'wb')
        except OSError as e:
            raise ArtifactWriteError(f"无法打开文件 '{self.file_path}' 进行写入: {e}")
        self._stream = _open_compressed(self._raw, self.compression)
        self._write_lines([self.header])

    def _write_lines(self, rows):
        text = io.StringIO()
        writer = csv.writer(text, lineterminator='\n')
        for row in rows:
            writer.writerow([format_value(v) for v in row])
        try:
            self._stream.write(text.getvalue().encode('utf-8'))
        except OSError as e:
            raise ArtifactWriteError(f"写入文件 '{self.file_path}' 失败: {e}")

    def write_row(self, row):
        """
        写入一行。此方法是线程安全的。

        Raises:
            ArtifactWriteError: 列数与表头不一致，或写入失败。
        """
        row = tuple(row)
        if len(row) != len(self.header):
            raise ArtifactWriteError(f"行有 {len(row)} 列，表头有 {len(self.header)} 列")
        with self.lock:
            if self._stream is None:
                raise ArtifactWriteError(f"文件 '{self.file_path}' 已关闭")
            self.buffer.append(row)
            if len(self.buffer) >= self.buffer_flush_records:
                self._flush_buffer()

    def write_rows(self, rows):
        for row in rows:
            self.write_row(row)

    def _flush_buffer(self):
        if not self.buffer:
            return
        self._write_lines(self.buffer)
        self.records_written += len(self.buffer)
        self.buffer = []

    def close(self):
        """刷新缓冲区中剩余的记录并关闭文件。"""
        with self.lock:
            if self._stream is None:
                return
            try:
                self._flush_buffer()
            finally:
                stream, raw = self._stream, self._raw
                self._stream = None
                self._raw = None
                try:
                    _close_quietly(stream, raw)
                except OSError as e:
                    raise ArtifactWriteError(f"关闭文件失败: {e}")

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()
