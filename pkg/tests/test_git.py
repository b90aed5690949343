import pickle
import re
import subprocess

import pytest

from szzkit.errors import (
    EmptyRepo,
    LineOutOfRange,
    MalformedPartial,
    NoSuchPathAtCommit,
    NotARepo,
    RangeInvalid,
    UnknownCommit,
)
from szzkit.fixture import FixtureScript, build_fixture
from szzkit.git import CommitRef, map_new_to_old, open_repo, parse_unified_diff, split_lines

LINEAR = """
@commit A
@file a.c
one
two
three
@end
@commit B
@file a.c
one
TWO
three
@end
@commit C
@file a.c
one
TWO!
three
@end
"""

MERGE = """
@commit A
@file a.c
base
@end
@commit B
@file b.c
left
@end
@commit C
@parents A
@file c.c
right
@end
@commit M
@parents B C
@file c.c
right
@end
"""


def test_open_repo_single_commit(build):
    fmap = build("@commit only\n@file x\nx\n@end\n")
    with open_repo(fmap.path) as repo:
        assert repo.head == fmap["only"]
        assert repo.head.is_root and repo.head.parent_count == 0


def test_open_repo_not_a_repo(tmp_path):
    with pytest.raises(NotARepo):
        open_repo(tmp_path)


def test_open_repo_empty(tmp_path):
    subprocess.run(["git", "init", "-q", str(tmp_path)], check=True)
    with pytest.raises(EmptyRepo):
        open_repo(tmp_path)


def test_commitref_invariants(opened):
    fmap, repo = opened(MERGE)
    for c in repo.list_commits():
        assert re.fullmatch(r"[0-9a-f]{40}", c.id)
        assert c.parent_count >= 0
        assert c.is_merge == (c.parent_count >= 2)
    assert repo.commit(fmap["M"]).is_merge
    assert repo.commit(fmap["B"]).subject == "B"


def test_list_commits_linear(opened):
    fmap, repo = opened(LINEAR)
    assert repo.list_commits(fmap["C"]) == [fmap["C"], fmap["B"], fmap["A"]]
    assert repo.list_commits(fmap["A"]) == [fmap["A"]]


def _brute_ancestors(repo, sha):
    seen, stack = set(), [sha]
    while stack:
        s = stack.pop()
        if s not in seen:
            seen.add(s)
            stack.extend(repo.lookup(s).parents)
    return seen


def test_list_commits_merge_dag(opened):
    fmap, repo = opened(MERGE)
    got = repo.list_commits(fmap["M"])
    assert len(got) == len({c.id for c in got})
    assert {c.id for c in got} == _brute_ancestors(repo, fmap["M"].id)
    pos = {c.id: i for i, c in enumerate(got)}
    for c in got:
        for p in c.parents:
            assert pos[c.id] < pos[p]


def test_list_commits_unknown(opened):
    _, repo = opened(LINEAR)
    with pytest.raises(UnknownCommit):
        repo.list_commits("f" * 40)


def test_commit_diff_single_edit(opened):
    fmap, repo = opened(LINEAR)
    ds = repo.commit_diff(fmap["B"])
    assert [(lc.line, lc.content, lc.kind) for lc in ds.removed_lines()] == [(2, "two", "removed")]
    assert [(lc.line, lc.content, lc.kind) for lc in ds.added_lines()] == [(2, "TWO", "added")]


def test_commit_diff_root_and_merge(opened):
    fmap, repo = opened(MERGE)
    root = repo.commit_diff(fmap["A"])
    assert root.n_removed == 0 and root.n_added == 1
    assert repo.commit_diff(fmap["M"]).files == ()


def test_commit_diff_rename(opened):
    text = ("@commit A\n@file old.c\n" + "".join(f"line {i}\n" for i in range(10)) + "@end\n"
            "@commit B\n@delete old.c\n@file new.c\n" + "".join(f"line {i}\n" for i in range(9))
            + "line changed\n@end\n")
    fmap, repo = opened(text)
    (f,) = repo.commit_diff(fmap["B"]).files
    assert f.rename_flag and f.old_path == "old.c" and f.new_path == "new.c"
    assert [lc.content for lc in f.removed()] == ["line 9"]


def test_blame_line_examples(opened):
    fmap, repo = opened(LINEAR)
    e = repo.blame_line(fmap["C"], "a.c", 2)
    assert e.origin == fmap["B"] and e.content == "TWO" and e.origin_line == 2
    assert repo.blame_line(fmap["C"], "a.c", 1).origin == fmap["A"]


def test_blame_line_errors(opened):
    fmap, repo = opened(LINEAR)
    with pytest.raises(LineOutOfRange):
        repo.blame_line(fmap["C"], "a.c", 4)
    with pytest.raises(NoSuchPathAtCommit):
        repo.blame_line(fmap["C"], "missing.c", 1)
    with pytest.raises(NoSuchPathAtCommit):
        repo.blame_line(fmap["A"], "a.c", 1)


def test_blame_follows_rename(opened):
    text = ("@commit A\n@file old.c\n" + "".join(f"line {i}\n" for i in range(10)) + "@end\n"
            "@commit B\n@delete old.c\n@file new.c\n" + "".join(f"line {i}\n" for i in range(10))
            + "@end\n@commit C\n@file new.c\n" + "".join(f"line {i}\n" for i in range(9))
            + "LINE 9\n@end\n")
    fmap, repo = opened(text)
    e = repo.blame_line(fmap["C"], "new.c", 3)
    assert e.origin == fmap["A"] and e.origin_path == "old.c"


def test_log_line_range_root_only(opened):
    fmap, repo = opened(LINEAR)
    assert repo.log_line_range("a.c", 1, 1, fmap["C"]) == [fmap["A"]]
    assert repo.log_line_range("a.c", 2, 2, fmap["C"]) == [fmap["C"], fmap["B"], fmap["A"]]


def _raw_log_l(path, spec, rev):
    out = subprocess.run(["git", "-c", "core.abbrev=40", "log", f"-L{spec}", "--format=C %H", rev],
                         cwd=path, capture_output=True, text=True, check=True).stdout
    return re.findall(r"^C ([0-9a-f]{40})$", out, re.M)


MOVE = """
@commit A
@file m.c
int small(void)
{
	return 1;
}

int big(void)
{
	int a = 1;
	int b = 2;
	int c = 3;
	int d = 4;
	int e = 5;
	return a + b + c + d + e;
}
@end
@commit edit
@file m.c
int small(void)
{
	return 2;
}

int big(void)
{
	int a = 1;
	int b = 2;
	int c = 3;
	int d = 4;
	int e = 5;
	return a + b + c + d + e;
}
@end
@commit move
@file m.c
int big(void)
{
	int a = 1;
	int b = 2;
	int c = 3;
	int d = 4;
	int e = 5;
	return a + b + c + d + e;
}

int small(void)
{
	return 2;
}
@end
@commit fix
@file m.c
int big(void)
{
	int a = 1;
	int b = 2;
	int c = 3;
	int d = 4;
	int e = 5;
	return a + b + c + d + e;
}

int small(void)
{
	return 3;
}
@end
"""


def test_log_line_range_matches_git_on_moved_function(opened):
    fmap, repo = opened(MOVE)
    got = repo.log_line_range("m.c", 11, 14, fmap["fix"])
    assert [c.id for c in got] == _raw_log_l(fmap.path, "11,14:m.c", fmap["fix"].id)
    # the range log cannot see through the relocation
    assert fmap["move"] in got and fmap["edit"] not in got


def test_log_line_range_invalid(opened):
    fmap, repo = opened(LINEAR)
    with pytest.raises(RangeInvalid):
        repo.log_line_range("a.c", 3, 9, fmap["C"])
    with pytest.raises(NoSuchPathAtCommit):
        repo.log_line_range("nope.c", 1, 1, fmap["C"])


def test_file_history(opened):
    fmap, repo = opened(MERGE)
    assert repo.file_history("c.c", fmap["M"]) == [fmap["C"]]


def test_resolve_partial_id(opened):
    fmap, repo = opened(LINEAR)
    b = fmap["B"].id
    assert repo.resolve_partial_id(b) == [fmap["B"]]
    assert repo.resolve_partial_id(b[:12]) == [fmap["B"]]
    assert repo.resolve_partial_id(b[1:13]) == [fmap["B"]]
    with pytest.raises(MalformedPartial):
        repo.resolve_partial_id("abc")


def test_line_counts(opened):
    fmap, repo = opened(MERGE)
    counts = repo.line_counts()
    assert counts[fmap["A"].id] == (1, 0)
    assert counts[fmap["M"].id] == (0, 0)


def test_handles_refuse_pickling(opened):
    _, repo = opened(LINEAR)
    with pytest.raises(TypeError):
        pickle.dumps(repo)


def test_parse_unified_diff_increasing_lines():
    text = (
        "diff --git a/x.c b/x.c\n--- a/x.c\n+++ b/x.c\n"
        "@@ -2 +2,2 @@ int f(void)\n-old\n+new1\n+new2\n"
        "@@ -10,2 +11,0 @@\n-gone1\n-gone2\n"
    )
    (f,) = parse_unified_diff(text)
    assert [lc.line for lc in f.removed()] == [2, 10, 11]
    assert [lc.line for lc in f.added()] == [2, 3]
    assert all(lc.kind == "removed" for lc in f.removed())


def test_map_new_to_old():
    text = "diff --git a/x b/x\n--- a/x\n+++ b/x\n@@ -2 +2,2 @@\n-b\n+B\n+B2\n@@ -5,0 +7 @@\n+z\n"
    (f,) = parse_unified_diff(text)
    assert map_new_to_old(f, 1) == (1, None)
    assert map_new_to_old(f, 3)[1] is f.hunks[0]
    assert map_new_to_old(f, 4) == (3, None)
    assert map_new_to_old(f, 7)[1] is f.hunks[1]
    assert map_new_to_old(f, 8) == (6, None)


def test_split_lines():
    assert split_lines("") == []
    assert split_lines("a\nb\n") == ["a", "b"]
    assert split_lines("a\nb") == ["a", "b"]


def test_commitref_equality_by_id():
    assert CommitRef("a" * 40, 1) == CommitRef("a" * 40, 2, ("b" * 40,), "s")


def test_build_is_deterministic(tmp_path):
    script = FixtureScript().add("A", {"f": "x\n"}).add("B", {"f": "y\n"})
    one = build_fixture(script, tmp_path / "one")
    two = build_fixture(script, tmp_path / "two")
    assert {k: v.id for k, v in one.commits.items()} == {k: v.id for k, v in two.commits.items()}
