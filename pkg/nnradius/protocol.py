""" CSV ingestion and emission

Input files are parsed by a Twisted :py:class:`Protocol` that frames an
arbitrary byte stream into CSV records, so the same parser serves files,
pipes and sockets. To handle records, subclass :py:class:`CSVRecordProtocol`
and implement ``record_received()``; :py:func:`load_series`,
:py:func:`load_group` and :py:func:`load_labelled` feed a file through the
stock subclasses.

Output is written with :py:class:`ReportWriter`, which fixes the header,
uses LF line endings and prints floats with 17 significant digits so that
reruns are byte-identical.
"""
from abc import abstractmethod
import csv
import enum
import math
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple

import numpy as np
from twisted.internet.protocol import Protocol

from nnradius.errors import InsufficientDataError, ShapeError


LONG_HEADER = ("timestamp", "channel", "value")
""" Header of long-format series files """

INDEX_COLUMNS = ("timestamp", "date", "time", "t")
""" Leading wide-format column names that are dropped as an index """

_CHUNK = 1 << 16


def format_value(value) -> str:
    """ Render one CSV cell

    :param value: Number, enumeration, string, sequence or ``None``
    :return: Text; floats use 17 significant digits
    """
    if value is None:
        return ""
    if isinstance(value, enum.Enum):
        return str(value)
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    if isinstance(value, (tuple, list, np.ndarray)):
        return ";".join(format_value(v) for v in value)
    return str(value)


class ReportWriter:
    """ Write report rows to a CSV stream

    .. py:attribute:: file_handle

        An open text stream where output will be written. Files must be
        opened with the ``newline=''`` option.
    """

    def __init__(self, file_handle: TextIO, fieldnames: Sequence[str]):
        self._fieldnames = tuple(fieldnames)
        self._writer = csv.DictWriter(file_handle,
                                      fieldnames=self._fieldnames,
                                      lineterminator="\n")
        self._writer.writeheader()

    def write(self, row) -> None:
        """ Write one row

        :param row: A record with ``as_dict()``, or a mapping
        """
        mapping = row.as_dict() if hasattr(row, "as_dict") else dict(row)
        self._writer.writerow({name: format_value(mapping.get(name))
                               for name in self._fieldnames})

    def write_all(self, rows: Iterable) -> None:
        """ Write every row in order """
        for row in rows:
            self.write(row)


def write_matrix(file_handle: TextIO, matrix, index_name: str = "t",
                 column_prefix: str = "x") -> None:
    """ Write a 2-D array with a 1-based index column

    :param file_handle: Text stream opened with ``newline=''``
    :param matrix: ``(n, d)`` array
    :param index_name: Header of the index column
    :param column_prefix: Data columns are named ``prefix1 .. prefixd``
    """
    arr = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    writer = csv.writer(file_handle, lineterminator="\n")
    writer.writerow([index_name] + [f"{column_prefix}{j + 1}"
                                    for j in range(arr.shape[1])])
    for t, values in enumerate(arr, start=1):
        writer.writerow([str(t)] + [format_value(v) for v in values])


class CSVRecordProtocol(Protocol):
    """ Twisted Protocol that frames bytes into CSV records

    Subclasses should override :py:meth:`CSVRecordProtocol.record_received`,
    which is called once for each non-blank line. A final line without a
    trailing newline is delivered when the connection is lost.
    """

    def __init__(self):
        super().__init__()
        self._buf = bytearray()
        self._line_number = 0

    @abstractmethod
    def record_received(self, fields: List[str], line_number: int) -> None:
        """ Callback for one parsed line

        :param fields: Cell texts with surrounding whitespace removed
        :param line_number: 1-based line number in the stream
        """

    def dataReceived(self, data: bytes) -> None:
        # The kept tail has no newline, so the scan starts at the new bytes
        scan = len(self._buf)
        self._buf += data
        start = 0
        while True:
            end = self._buf.find(b"\n", scan)
            if end < 0:
                break
            self._line_received(bytes(self._buf[start:end]))
            start = scan = end + 1
        del self._buf[:start]

    def connectionLost(self, reason=None):
        if self._buf:
            line = bytes(self._buf)
            self._buf.clear()
            self._line_received(line)

    def _line_received(self, line: bytes) -> None:
        self._line_number += 1
        encoding = "utf-8-sig" if self._line_number == 1 else "utf-8"
        text = line.decode(encoding).rstrip("\r")
        if not text.strip():
            return
        fields = next(csv.reader([text]))
        self.record_received([f.strip() for f in fields], self._line_number)


class LongSeriesProtocol(CSVRecordProtocol):
    """ Parse ``timestamp,channel,value`` records

    Channels keep their order of first appearance; values keep file order
    within each channel.
    """

    def __init__(self):
        super().__init__()
        self._channels: Dict[str, List[float]] = {}
        self._seen_header = False

    def record_received(self, fields: List[str], line_number: int) -> None:
        if not self._seen_header:
            if tuple(f.lower() for f in fields) != LONG_HEADER:
                raise ShapeError(f"line {line_number}: expected header "
                                 f"{','.join(LONG_HEADER)}")
            self._seen_header = True
            return
        if len(fields) != 3:
            raise ShapeError(f"line {line_number}: expected 3 fields")
        self._channels.setdefault(fields[1], []).append(
            _parse_float(fields[2], line_number))

    def series(self) -> Tuple[List[str], np.ndarray]:
        """ The parsed series

        :return: Channel names and a ``(T, channels)`` array
        """
        if not self._channels:
            raise InsufficientDataError("series file has no data rows")
        lengths = {len(v) for v in self._channels.values()}
        if len(lengths) != 1:
            raise ShapeError("channels have different lengths")
        names = list(self._channels)
        return names, np.column_stack([self._channels[c] for c in names])

    def groups(self) -> Tuple[List[str], List[np.ndarray]]:
        """ The parsed channels as separate series of any lengths

        :return: Series names and one 1-D array per series
        """
        if not self._channels:
            raise InsufficientDataError("series file has no data rows")
        names = list(self._channels)
        return names, [np.asarray(self._channels[c], dtype=np.float64)
                       for c in names]


class WideSeriesProtocol(CSVRecordProtocol):
    """ Parse a header row followed by one row per time step

    A leading column named like an index (see :py:data:`INDEX_COLUMNS`) is
    dropped.
    """

    def __init__(self):
        super().__init__()
        self._names: Optional[List[str]] = None
        self._skip_index = False
        self._rows: List[List[float]] = []

    def record_received(self, fields: List[str], line_number: int) -> None:
        if self._names is None:
            self._skip_index = fields[0].lower() in INDEX_COLUMNS
            self._names = fields[1:] if self._skip_index else fields
            if not self._names:
                raise ShapeError(f"line {line_number}: no data columns")
            return
        values = fields[1:] if self._skip_index else fields
        if len(values) != len(self._names):
            raise ShapeError(f"line {line_number}: expected "
                             f"{len(self._names)} values, got {len(values)}")
        self._rows.append([_parse_float(v, line_number) for v in values])

    def series(self) -> Tuple[List[str], np.ndarray]:
        """ The parsed series

        :return: Column names and a ``(T, channels)`` array
        """
        if not self._rows:
            raise InsufficientDataError("series file has no data rows")
        return list(self._names), np.asarray(self._rows, dtype=np.float64)


class LabelledSeriesProtocol(CSVRecordProtocol):
    """ Parse one series per line with a trailing integer class label """

    def __init__(self):
        super().__init__()
        self._inputs: List[List[float]] = []
        self._labels: List[int] = []

    def record_received(self, fields: List[str], line_number: int) -> None:
        if len(fields) < 2:
            raise ShapeError(f"line {line_number}: need values and a label")
        try:
            label = int(fields[-1])
        except ValueError as exc:
            raise ShapeError(
                f"line {line_number}: label {fields[-1]!r} is not an "
                "integer") from exc
        values = [_parse_float(v, line_number) for v in fields[:-1]]
        if self._inputs and len(values) != len(self._inputs[0]):
            raise ShapeError(f"line {line_number}: series length "
                             f"{len(values)} differs from "
                             f"{len(self._inputs[0])}")
        self._inputs.append(values)
        self._labels.append(label)

    def dataset(self) -> Tuple[np.ndarray, np.ndarray]:
        """ The parsed series and labels

        :return: ``(m, L)`` inputs and length-m integer labels
        """
        if not self._inputs:
            raise InsufficientDataError("labelled file has no rows")
        return (np.asarray(self._inputs, dtype=np.float64),
                np.asarray(self._labels, dtype=np.int64))


def feed_file(path: str, protocol: CSVRecordProtocol) -> CSVRecordProtocol:
    """ Stream a file through a protocol

    :param path: File to read
    :param protocol: Protocol instance to receive the bytes
    :return: The same protocol, after ``connectionLost``
    """
    with open(path, mode="rb") as infile:
        while True:
            chunk = infile.read(_CHUNK)
            if not chunk:
                break
            protocol.dataReceived(chunk)
    protocol.connectionLost()
    return protocol


def load_series(path: str, layout: str = "wide") \
        -> Tuple[List[str], np.ndarray]:
    """ Read a time-series file

    :param path: CSV file
    :param layout: ``wide`` or ``long``
    :return: Channel names and a ``(T, channels)`` array
    """
    if layout == "long":
        return feed_file(path, LongSeriesProtocol()).series()
    if layout == "wide":
        return feed_file(path, WideSeriesProtocol()).series()
    raise ValueError(f"unknown layout {layout!r}")


def load_group(path: str) -> Tuple[List[str], List[np.ndarray]]:
    """ Read a group of short series from a long-format file

    :param path: CSV file whose ``channel`` column names the series
    :return: Series names and one 1-D array per series
    """
    return feed_file(path, LongSeriesProtocol()).groups()


def load_labelled(path: str) -> Tuple[np.ndarray, np.ndarray]:
    """ Read a classification file

    :param path: CSV file with one labelled series per line
    :return: Inputs and labels
    """
    return feed_file(path, LabelledSeriesProtocol()).dataset()


def _parse_float(text: str, line_number: int) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise ShapeError(
            f"line {line_number}: {text!r} is not a number") from exc
    if not math.isfinite(value):
        raise ShapeError(f"line {line_number}: non-finite value {text!r}")
    return value
