"""The six blame-based SZZ variants.

Every variant maps a fixing commit to the set of commits it blames.  They
share one pipeline: take the lines the fix removed, optionally drop
comment/blank lines, blame each line at the fix's parent, and optionally
walk past cosmetic or meta-change origins.  L and R then pick a single
candidate from the AG result.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable

from .errors import GitError
from .git import BlameEntry, CommitRef, LineChange, Repository, canonical, map_new_to_old
from .lines import LineClass, classify_file, is_cosmetic_change

logger = logging.getLogger(__name__)

MAX_STEP_PAST = 64


class Algorithm(str, enum.Enum):
    B = "B"
    AG = "AG"
    L = "L"
    R = "R"
    MA = "MA"
    PYD = "PYD"
    TC = "TC"

    @property
    def label(self) -> str:
        return "SZZ@PYD" if self is Algorithm.PYD else f"{self.value}-SZZ"


@dataclass
class Prediction:
    fixing_commit: CommitRef
    algorithm: Algorithm
    inducing: tuple[CommitRef, ...] = ()
    per_line_attribution: dict[LineChange, CommitRef] = field(default_factory=dict)
    chains: list = field(default_factory=list)  # TraceChain objects, TC only

    @property
    def inducing_ids(self) -> set[str]:
        return {c.id for c in self.inducing}


def removed_lines(repo: Repository, fix: CommitRef | str) -> list[LineChange]:
    """Lines deleted or modified by ``fix`` (old-side numbering), in diff order."""
    return repo.commit_diff(fix).removed_lines()


def _line_classes(repo: Repository, rev: CommitRef, path: str,
                  cache: dict[tuple[str, str], list[LineClass]]) -> list[LineClass]:
    key = (rev.id, path)
    if key not in cache:
        cache[key] = classify_file(repo.file_lines(rev, path))
    return cache[key]


def _filter_noise(repo: Repository, fix: CommitRef, lines: list[LineChange]) -> list[LineChange]:
    parent = repo.first_parent(fix)
    if parent is None:
        return []
    cache: dict[tuple[str, str], list[LineClass]] = {}
    kept = []
    for lc in lines:
        classes = _line_classes(repo, parent, lc.path, cache)
        if classes[lc.line - 1] is LineClass.CODE:
            kept.append(lc)
    return kept


def _cosmetic_predecessor(repo: Repository, entry: BlameEntry) -> tuple[CommitRef, str, int] | None:
    """Where the blamed line lived before ``entry.origin`` if that commit only restyled it."""
    commit = entry.origin
    parent = repo.first_parent(commit)
    if parent is None:
        return None
    fdiff = repo.commit_diff(commit).file_for(entry.origin_path, "new")
    if fdiff is None or fdiff.old_path is None:
        return None
    _, hunk = map_new_to_old(fdiff, entry.origin_line)
    if hunk is None:
        return None
    idx = entry.origin_line - hunk.added[0].line
    added = hunk.added[idx].content
    order = ([idx] if idx < len(hunk.removed) else []) + [
        i for i in range(len(hunk.removed)) if i != idx]
    for i in order:
        if is_cosmetic_change(hunk.removed[i].content, added):
            return parent, fdiff.old_path, hunk.removed[i].line
    return None


def is_meta_change(repo: Repository, commit: CommitRef) -> bool:
    if commit.is_merge:
        return True
    ds = repo.commit_diff(commit)
    return ds.n_added == 0 and ds.n_removed == 0


def _meta_predecessor(repo: Repository, entry: BlameEntry) -> tuple[CommitRef, str, int] | None:
    """Map the blamed line of a merge/empty commit into one of its parents."""
    commit = entry.origin
    for parent_id in commit.parents:
        parent = repo.lookup(parent_id)
        files = repo.diff_between(parent, commit)
        fdiff = next((f for f in files if f.new_path == entry.origin_path), None)
        if fdiff is None:
            if repo.path_exists(parent, entry.origin_path):
                return parent, entry.origin_path, entry.origin_line
            continue
        if fdiff.old_path is None:
            continue
        old_line, hunk = map_new_to_old(fdiff, entry.origin_line)
        if hunk is not None:
            idx = entry.origin_line - hunk.added[0].line
            if idx >= len(hunk.removed):
                continue
            old_line = hunk.removed[idx].line
        return parent, fdiff.old_path, old_line
    return None


def step_past(repo: Repository, entry: BlameEntry, cosmetic: bool, meta: bool) -> BlameEntry:
    """Re-blame past cosmetic and/or meta-change origins."""
    for _ in range(MAX_STEP_PAST):
        target = None
        if meta and is_meta_change(repo, entry.origin):
            target = _meta_predecessor(repo, entry)
        elif cosmetic:
            target = _cosmetic_predecessor(repo, entry)
        if target is None:
            return entry
        rev, path, line = target
        try:
            entry = repo.blame_at(rev, path, line)
        except GitError as exc:
            logger.warning("step-past blame failed at %s %s:%d: %s", rev.short, path, line, exc)
            return entry
    logger.warning("step-past depth cap hit for %s:%d", entry.origin_path, entry.origin_line)
    return entry


def _blame_lines(repo: Repository, fix: CommitRef, lines: list[LineChange],
                 refine: Callable[[BlameEntry], BlameEntry] | None = None) -> dict[LineChange, CommitRef]:
    attribution: dict[LineChange, CommitRef] = {}
    for lc in lines:
        try:
            entry = repo.blame_line(fix, lc.path, lc.line)
        except GitError as exc:
            logger.warning("blame failed for %s %s:%d: %s", fix.short, lc.path, lc.line, exc)
            continue
        if refine is not None:
            entry = refine(entry)
        attribution[lc] = entry.origin
    return attribution


def _prediction(fix: CommitRef, algo: Algorithm, attribution: dict[LineChange, CommitRef]) -> Prediction:
    return Prediction(fix, algo, canonical(attribution.values()), attribution)


def bszz(repo: Repository, fix: CommitRef | str) -> Prediction:
    fix = repo.commit(fix)
    return _prediction(fix, Algorithm.B, _blame_lines(repo, fix, removed_lines(repo, fix)))


def szz_pyd(repo: Repository, fix: CommitRef | str) -> Prediction:
    fix = repo.commit(fix)
    lines = _filter_noise(repo, fix, removed_lines(repo, fix))
    return _prediction(fix, Algorithm.PYD, _blame_lines(repo, fix, lines))


def agszz(repo: Repository, fix: CommitRef | str) -> Prediction:
    fix = repo.commit(fix)
    lines = _filter_noise(repo, fix, removed_lines(repo, fix))
    attribution = _blame_lines(repo, fix, lines,
                               lambda e: step_past(repo, e, cosmetic=True, meta=False))
    return _prediction(fix, Algorithm.AG, attribution)


def maszz(repo: Repository, fix: CommitRef | str) -> Prediction:
    fix = repo.commit(fix)
    lines = _filter_noise(repo, fix, removed_lines(repo, fix))
    attribution = _blame_lines(repo, fix, lines,
                               lambda e: step_past(repo, e, cosmetic=True, meta=True))
    return _prediction(fix, Algorithm.MA, attribution)


def changed_line_count(repo: Repository, commit: CommitRef) -> int:
    ds = repo.commit_diff(commit)
    return ds.n_removed + ds.n_added


def _pick_one(fix: CommitRef, algo: Algorithm, base: Prediction, key) -> Prediction:
    if not base.inducing:
        return Prediction(fix, algo)
    # max by key, ties to the lexicographically smallest id
    best = min(base.inducing, key=lambda c: (-key(c), c.id))
    attribution = {lc: c for lc, c in base.per_line_attribution.items() if c == best}
    return Prediction(fix, algo, (best,), attribution)


def lszz(repo: Repository, fix: CommitRef | str, base: Prediction | None = None) -> Prediction:
    fix = repo.commit(fix)
    base = base or agszz(repo, fix)
    return _pick_one(fix, Algorithm.L, base, lambda c: changed_line_count(repo, c))


def rszz(repo: Repository, fix: CommitRef | str, base: Prediction | None = None) -> Prediction:
    fix = repo.commit(fix)
    base = base or agszz(repo, fix)
    return _pick_one(fix, Algorithm.R, base, lambda c: repo.lookup(c.id).timestamp)


VARIANTS = {
    Algorithm.B: bszz,
    Algorithm.AG: agszz,
    Algorithm.L: lszz,
    Algorithm.R: rszz,
    Algorithm.MA: maszz,
    Algorithm.PYD: szz_pyd,
}
