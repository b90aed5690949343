import pytest

from szzkit.lines import (
    LineClass,
    classify_file,
    classify_line,
    classify_pair,
    code_only,
    collapse_ws,
    is_cosmetic_change,
)


@pytest.mark.parametrize("line,expected", [
    ("", LineClass.BLANK),
    ("   \t", LineClass.BLANK),
    ("// note", LineClass.COMMENT_ONLY),
    ("  /* short */  ", LineClass.COMMENT_ONLY),
    ("#include <x.h>", LineClass.COMMENT_ONLY),
    ("x = 1; // trailing", LineClass.CODE),
    ('s = "/* not a comment */";', LineClass.CODE),
    ("c = '/';", LineClass.CODE),
])
def test_classify_line(line, expected):
    assert classify_line(line) is expected


def test_block_comment_spans_lines():
    lines = ["/*", " * body", " */", "int x;", "a /* open", "still */ b;"]
    assert classify_file(lines) == [
        LineClass.COMMENT_ONLY, LineClass.COMMENT_ONLY, LineClass.COMMENT_ONLY,
        LineClass.CODE, LineClass.CODE, LineClass.CODE,
    ]


def test_blank_inside_block_is_comment():
    assert classify_file(["/*", "", "*/"])[1] is LineClass.COMMENT_ONLY


def test_cosmetic_changes():
    assert is_cosmetic_change("x = 1;", "    x  =  1;")
    assert is_cosmetic_change("x = 1; // a", "x = 1; /* b */")
    assert not is_cosmetic_change("x = 1;", "x = 2;")
    assert not is_cosmetic_change("same", "same")


def test_classify_pair_and_helpers():
    assert classify_pair("a b", "a  b") is LineClass.WHITESPACE_ONLY_DELTA
    assert classify_pair("a", "b") is LineClass.CODE
    assert code_only("a = b; /* c */ // d") == "a=b;"
    assert collapse_ws("  a \t b  ") == "a b"
