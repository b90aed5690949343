"""Line-level text classification used by the comment- and cosmetic-aware variants."""

from __future__ import annotations

import enum
import re

_WS = re.compile(r"\s+")


class LineClass(enum.Enum):
    CODE = "Code"
    BLANK = "Blank"
    COMMENT_ONLY = "CommentOnly"
    WHITESPACE_ONLY_DELTA = "WhitespaceOnlyDelta"


def collapse_ws(text: str) -> str:
    return _WS.sub(" ", text).strip()


def strip_ws(text: str) -> str:
    return _WS.sub("", text)


def _scan(line: str, in_block: bool) -> tuple[str, bool, bool]:
    """Strip comments from one line.

    Returns (code text, whether a comment was seen, block state after the
    line).  String and character literals are respected so that ``"/*"``
    inside a string does not open a comment.
    """
    code: list[str] = []
    saw_comment = in_block
    i, n = 0, len(line)
    quote = None
    while i < n:
        ch = line[i]
        if in_block:
            end = line.find("*/", i)
            if end == -1:
                return "".join(code), True, True
            in_block = False
            i = end + 2
            code.append(" ")
            continue
        if quote:
            code.append(ch)
            if ch == "\\" and i + 1 < n:
                code.append(line[i + 1])
                i += 2
                continue
            if ch == quote:
                quote = None
            i += 1
            continue
        if ch in ('"', "'"):
            quote = ch
            code.append(ch)
            i += 1
            continue
        if line.startswith("//", i):
            return "".join(code), True, False
        if line.startswith("/*", i):
            saw_comment = True
            in_block = True
            i += 2
            continue
        code.append(ch)
        i += 1
    return "".join(code), saw_comment, in_block


def classify_file(lines: list[str]) -> list[LineClass]:
    """Classify every line of a file, tracking ``/* ... */`` spans forward."""
    out = []
    in_block = False
    for line in lines:
        if not line.strip() and not in_block:
            out.append(LineClass.BLANK)
            continue
        code, saw_comment, in_block = _scan(line, in_block)
        if not code.strip():
            out.append(LineClass.COMMENT_ONLY if saw_comment or line.strip() else LineClass.BLANK)
        elif code.lstrip().startswith("#") and not saw_comment:
            out.append(LineClass.COMMENT_ONLY)
        else:
            out.append(LineClass.CODE)
    return out


def classify_line(line: str) -> LineClass:
    """Classify a line in isolation (no block-comment context)."""
    return classify_file([line])[0]


def code_only(line: str) -> str:
    """The line with comments and all whitespace removed."""
    code, _, _ = _scan(line, False)
    return strip_ws(code)


def is_cosmetic_change(old: str, new: str) -> bool:
    """True when two lines differ only in whitespace or comments."""
    if old == new:
        return False
    return strip_ws(old) == strip_ws(new) or code_only(old) == code_only(new)


def classify_pair(old: str, new: str) -> LineClass:
    if old != new and strip_ws(old) == strip_ws(new):
        return LineClass.WHITESPACE_ONLY_DELTA
    return classify_line(new)
