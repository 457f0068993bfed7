import io
from typing import List

import numpy as np
import pytest

from nnradius.errors import InsufficientDataError, ShapeError
from nnradius.protocol import CSVRecordProtocol, LabelledSeriesProtocol, \
    LongSeriesProtocol, ReportWriter, WideSeriesProtocol, format_value, \
    load_group, load_labelled, load_series, write_matrix

from . import datasets


class BufferingRecordProto(CSVRecordProtocol):
    def __init__(self):
        super().__init__()
        self.records = []

    def record_received(self, fields: List[str], line_number: int):
        self.records.append((line_number, fields))


def test_framing_empty():
    buf = BufferingRecordProto()
    buf.dataReceived(b"")
    buf.connectionLost()

    assert len(buf.records) == 0
    assert len(buf._buf) == 0


def test_framing_split_writes():
    buf = BufferingRecordProto()
    for i in range(len(datasets.WIDE_SERIES)):
        buf.dataReceived(datasets.WIDE_SERIES[i:i + 1])
    buf.connectionLost()

    assert len(buf.records) == 4
    assert buf.records[0] == (1, ["timestamp", "a", "b"])
    assert buf.records[3] == (4, ["2020-01-03", "-3", "12"])


def test_framing_unterminated_last_line():
    buf = BufferingRecordProto()
    buf.dataReceived(datasets.WIDE_SERIES_BOM_CRLF)

    assert len(buf.records) == 3
    assert buf._buf == b"3,0.125"

    buf.connectionLost()
    assert buf.records[0] == (1, ["t", "a"])
    assert buf.records[-1] == (4, ["3", "0.125"])


def test_framing_slices_once_per_chunk():
    class BufferWatcher(BufferingRecordProto):
        def record_received(self, fields, line_number):
            super().record_received(fields, line_number)
            self.buffer_sizes.append(len(self._buf))

    payload = b"".join(b"%d,%d\n" % (i, 2 * i) for i in range(2000))
    buf = BufferWatcher()
    buf.buffer_sizes = []
    buf.dataReceived(payload + b"2000,")
    buf.dataReceived(b"4000\n")
    buf.connectionLost()

    assert len(buf.records) == 2001
    assert buf.records[-1] == (2001, ["2000", "4000"])
    # lines of a chunk are read in place, and the chunk is trimmed once
    assert set(buf.buffer_sizes[:2000]) == {len(payload) + 5}
    assert buf.buffer_sizes[2000] == 10
    assert len(buf._buf) == 0


def test_framing_blank_lines_keep_numbering():
    buf = BufferingRecordProto()
    buf.dataReceived(datasets.LABELLED)
    buf.connectionLost()

    assert [num for num, _ in buf.records] == [1, 2, 4]


def test_wide_series():
    proto = WideSeriesProtocol()
    proto.dataReceived(datasets.WIDE_SERIES)
    proto.connectionLost()
    names, values = proto.series()

    assert names == ["a", "b"]
    assert values.shape == (3, 2)
    assert values[:, 0].tolist() == [1.0, 2.5, -3.0]
    assert values[:, 1].tolist() == [10.0, 11.0, 12.0]


def test_wide_series_no_index():
    proto = WideSeriesProtocol()
    proto.dataReceived(datasets.WIDE_SERIES_NO_INDEX)
    proto.connectionLost()
    names, values = proto.series()

    assert names == ["x", "y"]
    assert values.tolist() == [[1.0, 2.0], [3.0, 4.0]]


def test_wide_series_rejects_text():
    proto = WideSeriesProtocol()
    with pytest.raises(ShapeError):
        proto.dataReceived(datasets.NOT_A_NUMBER)


def test_wide_series_empty():
    proto = WideSeriesProtocol()
    proto.dataReceived(b"t,a\n")
    proto.connectionLost()
    with pytest.raises(InsufficientDataError):
        proto.series()


def test_long_series():
    proto = LongSeriesProtocol()
    proto.dataReceived(datasets.LONG_SERIES)
    proto.connectionLost()
    names, values = proto.series()

    assert names == ["a", "b"]
    assert values.tolist() == [[1.0, 5.0], [2.0, 6.0], [3.0, 7.0]]


def test_long_series_ragged():
    proto = LongSeriesProtocol()
    proto.dataReceived(datasets.LONG_SERIES_RAGGED)
    proto.connectionLost()
    with pytest.raises(ShapeError):
        proto.series()


def test_long_series_groups():
    proto = LongSeriesProtocol()
    proto.dataReceived(datasets.LONG_SERIES_RAGGED)
    proto.connectionLost()
    names, groups = proto.groups()

    assert names == ["a", "b"]
    assert [g.tolist() for g in groups] == [[1.0, 2.0], [5.0]]


def test_long_series_bad_header():
    proto = LongSeriesProtocol()
    with pytest.raises(ShapeError):
        proto.dataReceived(datasets.LONG_SERIES_BAD_HEADER)


def test_labelled():
    proto = LabelledSeriesProtocol()
    proto.dataReceived(datasets.LABELLED)
    proto.connectionLost()
    inputs, labels = proto.dataset()

    assert inputs.shape == (3, 3)
    assert labels.tolist() == [0, 1, 0]
    assert inputs[1].tolist() == [1.0, 1.1, 1.2]


def test_labelled_errors():
    with pytest.raises(ShapeError):
        LabelledSeriesProtocol().dataReceived(datasets.LABELLED_BAD_LABEL)
    with pytest.raises(ShapeError):
        LabelledSeriesProtocol().dataReceived(datasets.LABELLED_RAGGED)


def test_load_from_files(tmp_path):
    wide = tmp_path / "wide.csv"
    wide.write_bytes(datasets.WIDE_SERIES)
    long = tmp_path / "long.csv"
    long.write_bytes(datasets.LONG_SERIES)
    labelled = tmp_path / "labelled.csv"
    labelled.write_bytes(datasets.LABELLED)

    assert load_series(str(wide))[1].shape == (3, 2)
    assert load_series(str(long), layout="long")[0] == ["a", "b"]
    assert load_labelled(str(labelled))[1].tolist() == [0, 1, 0]
    assert [g.size for g in load_group(str(long))[1]] == [3, 3]
    with pytest.raises(ValueError):
        load_series(str(wide), layout="sideways")


def test_format_value():
    assert format_value(None) == ""
    assert format_value(True) == "true"
    assert format_value(np.int64(3)) == "3"
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(float("nan")) == "nan"
    assert format_value((1, 2.5)) == "1;2.5"
    assert float(format_value(1.0 / 3.0)) == 1.0 / 3.0


def test_report_writer():
    out = io.StringIO(newline="")
    writer = ReportWriter(out, ["n", "radius", "note"])
    writer.write_all([{"n": 10, "radius": 0.5},
                      {"n": 20, "radius": 0.25, "note": "x",
                       "ignored": 1}])

    assert out.getvalue() == "n,radius,note\n10,0.5,\n20,0.25,x\n"


def test_write_matrix():
    out = io.StringIO(newline="")
    write_matrix(out, [[0.5, 0.25], [1.0, 0.0]])

    assert out.getvalue() == "t,x1,x2\n1,0.5,0.25\n2,1,0\n"
