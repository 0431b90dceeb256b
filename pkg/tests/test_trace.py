import warnings

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hourglass.trace import (
    AlignmentWarning,
    OpKind,
    TraceFile,
    TraceOp,
    TraceParseError,
    format_trace,
    parse_trace,
)


def test_single_load():
    tf = parse_trace("0 L 0x1000")
    assert list(tf.ops()) == [TraceOp(0, OpKind.LOAD, 0x1000)]


def test_two_writers_same_line():
    tf = parse_trace("3 S 0x1000\n0 S 0x1000")
    assert tf.n_cores == 4
    assert [op.core for op in tf.ops()] == [0, 3]
    assert {op.address for op in tf.ops()} == {0x1000}


def test_think():
    tf = parse_trace("2 D 40")
    assert tf.streams[2] == [TraceOp(2, OpKind.THINK, 40)]
    assert tf.streams[2][0].address is None


def test_comments_and_header():
    tf = parse_trace("# cores: 4\n# hello\n\n1 L 0x40\n")
    assert tf.n_cores == 4
    assert tf.comment == "hello"


@pytest.mark.parametrize("text,line,column", [
    ("0 L 0x1000\n0 X 0x1000", 2, 3),
    ("0 L zz", 1, 5),
    ("a L 0x10", 1, 1),
    ("0 L", 1, 1),
    ("0 D -4", 1, 5),
])
def test_parse_errors_carry_position(text, line, column):
    with pytest.raises(TraceParseError) as info:
        parse_trace(text)
    assert (info.value.line, info.value.column) == (line, column)


def test_unknown_core_rejected():
    with pytest.raises(TraceParseError, match="unknown core"):
        parse_trace("5 L 0x40", n_cores=4)


def test_misaligned_address_warns_and_aligns():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        tf = parse_trace("0 L 0x1004", line_bytes=64)
    assert any(issubclass(w.category, AlignmentWarning) for w in caught)
    assert next(tf.ops()).address == 0x1000


ops = st.builds(
    lambda core, kind, v: TraceOp(core, kind, v * 64 if kind is not OpKind.THINK else v),
    st.integers(0, 3), st.sampled_from(list(OpKind)), st.integers(0, 5000),
)


@given(st.lists(ops, max_size=40))
def test_format_parse_round_trip(op_list):
    tf = TraceFile.from_ops(4, op_list, comment="round trip")
    again = parse_trace(format_trace(tf))
    assert again.streams == tf.streams
    assert again.n_cores == 4
