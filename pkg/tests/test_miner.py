import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from szzkit.errors import Ambiguous
from szzkit.miner import (
    AbnormalCategory,
    RawFixesRef,
    Resolved,
    extract_fixes_annotations,
    link_bug_inducing,
    mine_dataset,
    multiplicity,
)

FEAT_A = "532e50a3bc5dd1695c94eed8595d17ac04c40664"
FEAT_B = "1ca329f3b6610b5493d554b72a3946ffc32ee7fc"
TWIN_A = "453e46e04f33c8d83ee1e9198f291f427bc01ac8"
TWIN_B = "198d7a6568562a92ed0025112c6e04f336091208"


def test_extract_standard_trailer():
    msg = 'sched: fix it\n\nFixes: 629c66a22c21 ("sched: add the thing")\nSigned-off-by: x\n'
    (ref,) = extract_fixes_annotations(msg)
    assert ref.extracted_partial == "629c66a22c21"
    assert ref.trailer_subject == "sched: add the thing"
    assert ref.raw_line == 'Fixes: 629c66a22c21 ("sched: add the thing")'


def test_extract_link_without_partial():
    (ref,) = extract_fixes_annotations("x\n\nFixes: https://bugs.gentoo.org/show_bug.cgi?id=5\n")
    assert ref.extracted_partial is None


def test_extract_ignores_inline_and_empty():
    msg = "subject\n\nThis Fixes: abcdef1234 inline\nFixes:\n  Fixes: abcdef1234567\n"
    refs = extract_fixes_annotations(msg)
    assert [r.extracted_partial for r in refs] == ["abcdef1234567"]


def test_extract_multiple():
    msg = "s\n\nFixes: 1111111aaaa\nFixes: 2222222bbbb (\"b\")\n"
    assert [r.extracted_partial for r in extract_fixes_annotations(msg)] == ["1111111aaaa", "2222222bbbb"]


@given(st.text(alphabet="0123456789abcdefxyz (\")Fixes:", max_size=60))
def test_extracted_partial_is_hex(payload):
    for ref in extract_fixes_annotations("s\n\nFixes:" + payload):
        assert ref.extracted_partial is None or re.fullmatch(r"[0-9a-f]{7,40}", ref.extracted_partial)


def test_robustness_fixture_frozen(opened):
    fmap, repo = opened("miner_robustness")
    assert fmap["feat_a"].id == FEAT_A and fmap["feat_b"].id == FEAT_B
    assert fmap["twin_a"].id == TWIN_A and fmap["twin_b"].id == TWIN_B
    res = mine_dataset(repo)
    assert [(l.fixing_commit, l.inducing_commits) for l in res.dataset] == [
        (fmap["fix_clean"], (fmap["feat_a"],)),
        (fmap["fix_typo"], (fmap["feat_b"],)),
    ]
    got = {r.fixing_commit.id: (r.category, r.subcause) for r in res.abnormal}
    assert got == {
        fmap["fix_url"].id: (AbnormalCategory.NOT_IN_REPOSITORY, "link"),
        fmap["fix_short"].id: (AbnormalCategory.PARTIAL_COMMIT_ID, "too_short"),
    }
    (flag,) = res.flagged
    assert flag.fixing_commit == fmap["fix_amb"] and flag.category is AbnormalCategory.AMBIGUOUS
    assert set(flag.candidates) == {fmap["twin_a"], fmap["twin_b"]}
    assert res.common_commits == [] and res.self_references == []


def test_link_resolution_kinds(opened):
    fmap, repo = opened("miner_robustness")
    fix = fmap["fix_clean"]
    full = link_bug_inducing(repo, RawFixesRef(fix, "Fixes: " + FEAT_A, FEAT_A))
    assert full == Resolved((fmap["feat_a"],), typo=False)
    typo = link_bug_inducing(repo, RawFixesRef(fix, "Fixes: ca329f3b6610", "ca329f3b6610"))
    assert typo == Resolved((fmap["feat_b"],), typo=True)
    with pytest.raises(Ambiguous):
        link_bug_inducing(repo, RawFixesRef(fix, "Fixes: 6e04f33", "6e04f33"))
    subj = fmap["twin_b"].subject
    by_subject = link_bug_inducing(repo, RawFixesRef(fix, f'Fixes: 6e04f33 ("{subj}")', "6e04f33", subj))
    assert by_subject.commits == (fmap["twin_b"],)


def test_unknown_hex_is_not_in_repository(opened):
    fmap, repo = opened("miner_robustness")
    rec = link_bug_inducing(repo, RawFixesRef(fmap["fix_clean"], "Fixes: 0000000deadbeef", "0000000deadbeef"))
    assert rec.category is AbnormalCategory.NOT_IN_REPOSITORY and rec.subcause == "unreachable"


def test_mining_is_idempotent(opened):
    _, repo = opened("miner_robustness")
    one, two = mine_dataset(repo), mine_dataset(repo)
    assert [(l.fixing_commit, l.inducing_commits) for l in one.dataset] == \
        [(l.fixing_commit, l.inducing_commits) for l in two.dataset]
    assert one.abnormal == two.abnormal


def test_empty_dataset(opened):
    _, repo = opened("@commit A\n@file a\nx\n@end\n")
    res = mine_dataset(repo)
    assert res.dataset == [] and res.abnormal == [] and res.truth() == {}


FIVE = """
@commit c1
@file a.c
one
@end
@commit c2
@file a.c
two
@end
@commit c3
@message
fix two

Fixes: {{c2}} ("c2")
@file a.c
three
@end
@commit c4
@file b.c
b
@end
@commit c5
@message
fix three and b

Fixes: {{c3}} ("fix two")
Fixes: {{c4}}
@file a.c
four
@end
"""


def test_five_commit_history(opened):
    fmap, repo = opened(FIVE)
    res = mine_dataset(repo)
    assert res.truth() == {
        fmap["c3"].id: {fmap["c2"].id},
        fmap["c5"].id: {fmap["c3"].id, fmap["c4"].id},
    }
    assert res.common_commits == [fmap["c3"]]
    assert multiplicity(res.dataset) == {1: 1, 2: 1}
    assert mine_dataset(repo, fmap["c4"]).truth() == {fmap["c3"].id: {fmap["c2"].id}}


def test_self_reference_dropped(opened, monkeypatch):
    # a commit cannot quote its own id, so make the resolver point back at it
    fmap, repo = opened("@commit A\n@file a\nx\n@end\n@commit B\n@message\nb\n\nFixes: 1234567abc\n@file a\ny\n@end\n")
    monkeypatch.setattr(repo, "resolve_partial_id", lambda partial: [fmap["B"]])
    res = mine_dataset(repo)
    assert res.dataset == [] and res.self_references == [fmap["B"]]
