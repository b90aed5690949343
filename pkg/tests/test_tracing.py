from functools import lru_cache

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from szzkit.errors import LineNotRemovedByFix
from szzkit.git import LineChange
from szzkit.tracing import (
    Mode,
    Role,
    chain_stats,
    chronological,
    inducer_positions,
    levenshtein,
    line_similarity,
    tcszz,
    trace_line,
    unique_commits,
)
from szzkit.variants import bszz, removed_lines

from test_git import MOVE


def _brute_lev(a, b):
    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))
    return d(len(a), len(b))


def test_similarity_examples():
    assert line_similarity("abc", "abd") == pytest.approx(2 / 3, abs=1e-15)
    assert line_similarity("x = 1;", "x = 1;") == 1.0
    assert line_similarity("  x   = 1;", "x = 1;") == 1.0
    assert line_similarity("", "") == 1.0
    assert line_similarity("abc", "") == 0.0
    assert levenshtein("kitten", "sitting") == 3


short = st.text(alphabet="ab c;", max_size=9)


@settings(max_examples=300)
@given(short, short)
def test_levenshtein_matches_recursive_definition(a, b):
    assert levenshtein(a, b) == _brute_lev(a, b)
    assert levenshtein(a, b) == levenshtein(b, a)


@settings(max_examples=300)
@given(short, short)
def test_similarity_bounded_and_symmetric(a, b):
    s = line_similarity(a, b)
    assert 0.0 <= s <= 1.0
    assert s == line_similarity(b, a)


def _lineage(opened):
    fmap, repo = opened("lineage_replica")
    (line,) = removed_lines(repo, fmap["fix"])
    return fmap, repo, line


def test_lineage_chain(opened):
    fmap, repo, line = _lineage(opened)
    chain = trace_line(repo, fmap["fix"], line)
    assert chain.commits == [fmap[k] for k in ("previous", "desc3", "inducer", "desc1", "initial")]
    assert [k.role for k in chain.chain] == [
        Role.PREVIOUS, Role.DESCENDANT, Role.DESCENDANT, Role.DESCENDANT, Role.INITIAL]
    assert chain.previous == fmap["previous"] and chain.initial == fmap["initial"]
    assert chain.chain[2].matched_line.strip() == "ret = dev_read(dev, buf, size, 0);"


def test_lineage_inducer_position(opened):
    fmap, repo, _ = _lineage(opened)
    pred = tcszz(repo, fmap["fix"])
    assert fmap["inducer"] in pred.inducing
    pos = inducer_positions(pred.chains, {fmap["inducer"].id})
    assert pos["intermediate"] == 1 and pos["previous"] == 0


def test_depth_bound(opened):
    fmap, repo, line = _lineage(opened)
    for depth in (1, 2, 3, 7):
        assert len(trace_line(repo, fmap["fix"], line, max_depth=depth).chain) == min(depth, 5)
    with pytest.raises(ValueError):
        trace_line(repo, fmap["fix"], line, max_depth=0)


def test_custom_blame_one_equals_b(opened):
    fmap, repo, _ = _lineage(opened)
    assert tcszz(repo, fmap["fix"], Mode.CUSTOM, 1).inducing == bszz(repo, fmap["fix"]).inducing


def test_root_origin_gives_single_previous(opened):
    fmap, repo = opened("@commit A\n@file a.c\nx = 1;\n@end\n@commit fix\n@file a.c\nx = 2;\n@end\n")
    (line,) = removed_lines(repo, fmap["fix"])
    chain = trace_line(repo, fmap["fix"], line)
    assert chain.commits == [fmap["A"]] and chain.chain[0].role is Role.PREVIOUS


def test_low_similarity_stops(opened):
    text = ("@commit A\n@file a.c\ncompletely different\n@end\n"
            "@commit B\n@file a.c\nx = 1;\n@end\n@commit fix\n@file a.c\nx = 2;\n@end\n")
    fmap, repo = opened(text)
    (line,) = removed_lines(repo, fmap["fix"])
    assert trace_line(repo, fmap["fix"], line).commits == [fmap["B"]]
    assert trace_line(repo, fmap["fix"], line, threshold=0.0).commits == [fmap["B"], fmap["A"]]


def test_trace_continues_through_relocation(opened):
    fmap, repo = opened(MOVE)
    (line,) = removed_lines(repo, fmap["fix"])
    chain = trace_line(repo, fmap["fix"], line)
    assert chain.commits == [fmap["move"], fmap["edit"], fmap["A"]]


def test_line_not_removed(opened):
    fmap, repo, line = _lineage(opened)
    bogus = LineChange(line.path, line.line + 1, "int ret;", "removed")
    with pytest.raises(LineNotRemovedByFix):
        trace_line(repo, fmap["fix"], bogus)


def test_modes_and_helpers(opened):
    text = ("@commit A\n@file a.c\np = 1;\nq = 1;\n@end\n"
            "@commit B\n@file a.c\np = 2;\nq = 1;\n@end\n"
            "@commit fix\n@file a.c\np = 3;\nq = 3;\n@end\n")
    fmap, repo = opened(text)
    pred = tcszz(repo, fmap["fix"], Mode.CHRONOLOGICAL)
    assert chronological(pred) == [fmap["B"], fmap["A"], fmap["A"]]
    assert unique_commits(pred) == [fmap["B"], fmap["A"]]
    assert set(pred.inducing) == {fmap["A"], fmap["B"]}
    assert chain_stats(pred.chains) == {"n": 2, "mean_length": 1.5, "max_length": 2}
    js = pred.chains[0].to_json()
    assert js["chain"][0] == {"sha": fmap["B"].id, "role": "Previous", "matched_line": "p = 2;"}
