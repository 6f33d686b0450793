"""Query language: grammar coverage, aliases, positions in syntax errors,
filters, and the canonical encoding round trip."""

import pytest

from privq.errors import QuerySyntaxError
from privq.harness.queryparse import apply_filter, decode_query, parse_query


def test_paper_style_query():
    q = parse_query("SELECT average heart_rate ON DP1,DP2 "
                    "WHERE patient_state = 'hypertensive'")
    assert q.operation.kind == "mean"
    assert q.attributes == ("heart_rate",)
    assert q.dp_list == ("DP1", "DP2")
    assert q.filter == ("patient_state", "=", "hypertensive")


def test_minimal_query():
    q = parse_query("SELECT sum x ON DP1")
    assert q.operation.kind == "sum" and q.dp_list == ("DP1",)
    assert q.filter is None and q.bounds is None


def test_unknown_operation_is_syntax_error():
    with pytest.raises(QuerySyntaxError) as err:
        parse_query("SELECT bogus x ON DP1")
    assert err.value.line == 1
    assert err.value.column == 7


def test_error_positions():
    with pytest.raises(QuerySyntaxError) as err:
        parse_query("SELECT sum x\nON DP1 WHERE x ??")
    assert err.value.line == 2
    with pytest.raises(QuerySyntaxError):
        parse_query("SELECT sum x ON")
    with pytest.raises(QuerySyntaxError):
        parse_query("SELECT sum ON DP1")


def test_range_clause():
    q = parse_query("SELECT min v ON DP1,DP2 RANGE 40,100")
    assert q.operation.kind == "min"
    assert q.bounds == (40, 100)
    with pytest.raises(QuerySyntaxError):
        parse_query("SELECT min v ON DP1 RANGE 100,40")
    with pytest.raises(QuerySyntaxError):
        parse_query("SELECT min v ON DP1")  # min needs bounds


def test_aliases():
    assert parse_query("SELECT avg x ON D").operation.kind == "mean"
    assert parse_query("SELECT std_dev x ON D").operation.kind == "stddev"
    assert parse_query("SELECT union x ON D RANGE 0,4").operation.kind == "set_union"
    assert parse_query("SELECT logistic_regression a,b,y ON D").operation.kind == "log_reg"


def test_regression_feature_count_from_attributes():
    q = parse_query("SELECT linear_regression x1,x2,x3,y ON DP1")
    assert q.operation.feature_count == 3
    assert q.attributes == ("x1", "x2", "x3", "y")


def test_comparators_and_numeric_literals():
    q = parse_query("SELECT sum x ON DP1 WHERE age >= 42")
    assert q.filter == ("age", ">=", 42)
    q = parse_query("SELECT sum x ON DP1 WHERE w < 1.5")
    assert q.filter == ("w", "<", 1.5)


def test_query_encode_decode_roundtrip():
    q = parse_query("SELECT variance hr ON DP1,DP2 WHERE s = 'ok' RANGE 0,16",
                    scale=10, dp_privacy=True)
    q.params["train"] = {"learning_rate": 0.1}
    decoded = decode_query(q.encode())
    assert decoded.query_id == q.query_id
    assert decoded.operation == q.operation
    assert decoded.attributes == q.attributes
    assert decoded.dp_list == q.dp_list
    assert decoded.filter == q.filter
    assert decoded.dp_privacy is True
    assert decoded.params == q.params
    assert decoded.encode() == q.encode()


def test_apply_filter():
    rows = [{"a": 5, "s": "x"}, {"a": 9, "s": "y"}, {"a": 7, "s": "x"}]
    assert apply_filter(rows, ("a", ">", 6)) == rows[1:]
    assert apply_filter(rows, ("s", "=", "x")) == [rows[0], rows[2]]
    assert apply_filter(rows, ("s", "!=", "x")) == [rows[1]]
    assert apply_filter(rows, None) == rows
    assert apply_filter(rows, ("missing", "=", 1)) == []


def test_query_ids_distinct():
    a = parse_query("SELECT sum x ON DP1")
    b = parse_query("SELECT sum y ON DP1")
    assert a.query_id != b.query_id
