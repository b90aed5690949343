"""Ground-truth mining from ``Fixes:`` trailers.

A fixing commit names its culprit as ``Fixes: <12 hex> ("subject")``.  The
hex run is resolved by substring search over all full ids, which also
recovers ids with a dropped or mistyped leading character.  References that
cannot be resolved are kept as abnormal records rather than discarded.
"""

from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass, field
from typing import Iterable

from .errors import Ambiguous
from .git import CommitRef, Repository

logger = logging.getLogger(__name__)

FIXES_LINE = re.compile(r"^\s*Fixes:(?P<payload>.*)$")
HEX_RUN = re.compile(r"[0-9a-f]{7,40}")
SHORT_HEX = re.compile(r"(?<![0-9A-Za-z])[0-9a-fA-F]{1,6}(?![0-9A-Za-z])")
SUBJECT = re.compile(r"\(\s*\"(?P<subject>.*)\"\s*\)")
LINK = re.compile(r"(?:https?|ftp)://|www\.", re.IGNORECASE)


class AbnormalCategory(str, enum.Enum):
    PARTIAL_COMMIT_ID = "PartialCommitId"
    NOT_IN_REPOSITORY = "NotInRepository"
    AMBIGUOUS = "Ambiguous"


@dataclass(frozen=True)
class RawFixesRef:
    fixing_commit: CommitRef
    raw_line: str
    extracted_partial: str | None = None
    trailer_subject: str | None = None


@dataclass(frozen=True)
class AbnormalRecord:
    fixing_commit: CommitRef
    raw_line: str
    category: AbnormalCategory
    subcause: str
    candidates: tuple[CommitRef, ...] = ()


@dataclass
class BugFixLink:
    fixing_commit: CommitRef
    inducing_commits: tuple[CommitRef, ...]
    raw_refs: list[RawFixesRef] = field(default_factory=list)

    @property
    def inducing_ids(self) -> set[str]:
        return {c.id for c in self.inducing_commits}


@dataclass
class Resolved:
    commits: tuple[CommitRef, ...]
    typo: bool = False


@dataclass
class MineResult:
    dataset: list[BugFixLink]
    abnormal: list[AbnormalRecord]
    common_commits: list[CommitRef]
    flagged: list[AbnormalRecord] = field(default_factory=list)
    self_references: list[CommitRef] = field(default_factory=list)

    def truth(self) -> dict[str, set[str]]:
        return {link.fixing_commit.id: link.inducing_ids for link in self.dataset}


def extract_fixes_annotations(message: str, fixing_commit: CommitRef | None = None) -> list[RawFixesRef]:
    refs = []
    for line in message.splitlines():
        m = FIXES_LINE.match(line)
        if m is None:
            continue
        payload = m.group("payload")
        if not payload.strip():
            continue
        hexrun = HEX_RUN.search(payload)
        subj = SUBJECT.search(payload)
        refs.append(RawFixesRef(
            fixing_commit, line.strip(),
            hexrun.group(0) if hexrun else None,
            subj.group("subject") if subj else None,
        ))
    return refs


def _subcause(ref: RawFixesRef, category: AbnormalCategory) -> str:
    payload = FIXES_LINE.match(ref.raw_line).group("payload")
    if LINK.search(payload):
        return "link"
    if category is AbnormalCategory.PARTIAL_COMMIT_ID:
        return "too_short" if SHORT_HEX.search(payload.split("(")[0]) else "format"
    if category is AbnormalCategory.AMBIGUOUS:
        return "ambiguous"
    return "unreachable"


def link_bug_inducing(repo: Repository, ref: RawFixesRef) -> Resolved | AbnormalRecord:
    """Resolve one trailer.  Raises Ambiguous when several ids match and the
    quoted subject does not single one out."""
    if ref.extracted_partial is None:
        cat = AbnormalCategory.PARTIAL_COMMIT_ID
        return AbnormalRecord(ref.fixing_commit, ref.raw_line, cat, _subcause(ref, cat))
    partial = ref.extracted_partial
    found = repo.resolve_partial_id(partial)
    if not found:
        cat = AbnormalCategory.NOT_IN_REPOSITORY
        return AbnormalRecord(ref.fixing_commit, ref.raw_line, cat, _subcause(ref, cat))
    if len(found) > 1:
        by_subject = [c for c in found if ref.trailer_subject is not None
                      and c.subject == ref.trailer_subject]
        if len(by_subject) != 1:
            raise Ambiguous(partial, found)
        found = by_subject
    return Resolved(tuple(found), typo=not found[0].id.startswith(partial))


def mine_dataset(repo: Repository, until: CommitRef | str | None = None) -> MineResult:
    links: list[BugFixLink] = []
    abnormal: list[AbnormalRecord] = []
    flagged: list[AbnormalRecord] = []
    selfrefs: list[CommitRef] = []
    for commit, message in repo.iter_messages(until):
        refs = extract_fixes_annotations(message, commit)
        if not refs:
            continue
        resolved: dict[str, CommitRef] = {}
        bad: list[AbnormalRecord] = []
        for ref in refs:
            try:
                out = link_bug_inducing(repo, ref)
            except Ambiguous as exc:
                rec = AbnormalRecord(commit, ref.raw_line, AbnormalCategory.AMBIGUOUS,
                                     "ambiguous", tuple(exc.candidates))
                logger.warning("ambiguous Fixes: in %s: %s", commit.short, ref.raw_line)
                flagged.append(rec)
                continue
            if isinstance(out, AbnormalRecord):
                bad.append(out)
                continue
            for c in out.commits:
                if c.id == commit.id:
                    selfrefs.append(commit)
                    continue
                resolved[c.id] = c
        if resolved:
            links.append(BugFixLink(commit, tuple(sorted(resolved.values(), key=lambda c: c.id)), refs))
        else:
            abnormal.extend(bad)
    order = lambda c: (c.timestamp, c.id)  # noqa: E731
    links.sort(key=lambda link: order(link.fixing_commit))
    abnormal.sort(key=lambda r: (order(r.fixing_commit), r.raw_line))
    flagged.sort(key=lambda r: (order(r.fixing_commit), r.raw_line))
    fixing = {link.fixing_commit.id for link in links}
    common = {c.id: c for link in links for c in link.inducing_commits if c.id in fixing}
    return MineResult(links, abnormal, sorted(common.values(), key=lambda c: c.id),
                      flagged, selfrefs)


def multiplicity(links: Iterable[BugFixLink]) -> dict[int, int]:
    """Histogram of inducing-set sizes."""
    hist: dict[int, int] = {}
    for link in links:
        n = len(link.inducing_commits)
        hist[n] = hist.get(n, 0) + 1
    return dict(sorted(hist.items()))
