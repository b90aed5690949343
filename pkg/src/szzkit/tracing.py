"""Tracing-commit SZZ: follow each removed line's blame lineage to its start.

Plain SZZ blames a removed line once.  Here the blame is repeated: when the
blamed commit itself replaced lines, the trace continues on the replaced
line most similar to the tracked one (ties: nearest, then lowest line
number) and stops once nothing similar enough was replaced, a root commit
is reached, or a state repeats.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

from .errors import GitError, LineNotRemovedByFix
from .git import BlameEntry, CommitRef, LineChange, Repository, canonical
from .lines import collapse_ws
from .variants import Algorithm, Prediction, removed_lines

DEFAULT_THRESHOLD = 0.75


class Role(str, enum.Enum):
    PREVIOUS = "Previous"
    DESCENDANT = "Descendant"
    INITIAL = "Initial"


class Mode(str, enum.Enum):
    CHRONOLOGICAL = "ChronologicalTrace"
    UNIQUE = "UniqueCommits"
    CUSTOM = "CustomBlame"


@dataclass(frozen=True)
class ChainLink:
    commit: CommitRef
    role: Role
    matched_line: str
    path: str = ""
    line: int = 0


@dataclass(frozen=True)
class TraceChain:
    fix: CommitRef
    line: LineChange
    chain: tuple[ChainLink, ...]

    @property
    def commits(self) -> list[CommitRef]:
        return [link.commit for link in self.chain]

    @property
    def previous(self) -> CommitRef:
        return self.chain[0].commit

    @property
    def initial(self) -> CommitRef:
        return self.chain[-1].commit

    def to_json(self) -> dict:
        return {
            "line": {"path": self.line.path, "line": self.line.line, "content": self.line.content},
            "chain": [{"sha": k.commit.id, "role": k.role.value, "matched_line": k.matched_line}
                      for k in self.chain],
        }


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def line_similarity(a: str, b: str) -> float:
    """1 - normalized edit distance of the whitespace-collapsed lines."""
    a, b = collapse_ws(a), collapse_ws(b)
    if not a and not b:
        return 1.0
    return 1.0 - levenshtein(a, b) / max(len(a), len(b))


def _best_candidate(repo: Repository, entry: BlameEntry) -> tuple[float, LineChange] | None:
    best_key = None
    best = None
    for fdiff in repo.commit_diff(entry.origin).files:
        same_file = fdiff.new_path == entry.origin_path
        for lc in fdiff.removed():
            sim = line_similarity(entry.content, lc.content)
            dist = abs(entry.origin_line - lc.line) if same_file else math.inf
            key = (-sim, dist, lc.line, lc.path)
            if best_key is None or key < best_key:
                best_key, best = key, (sim, lc)
    return best


def trace_line(repo: Repository, fix: CommitRef | str, line: LineChange, max_depth: int = -1,
               threshold: float = DEFAULT_THRESHOLD) -> TraceChain:
    """Iterated blame of one line removed by ``fix``.

    ``max_depth`` bounds the chain length; -1 traces to the initial commit.
    """
    if max_depth == 0 or max_depth < -1:
        raise ValueError("max_depth must be >= 1 or -1")
    fix = repo.commit(fix)
    if line not in removed_lines(repo, fix):
        raise LineNotRemovedByFix(f"{line.path}:{line.line} is not removed by {fix.short}")
    entry = repo.blame_line(fix, line.path, line.line)
    links: list[BlameEntry] = []
    seen_states: set[tuple[str, str, int]] = set()
    seen_commits: set[str] = set()
    while True:
        state = (entry.origin.id, entry.origin_path, entry.origin_line)
        if state in seen_states or entry.origin.id in seen_commits:
            break
        seen_states.add(state)
        seen_commits.add(entry.origin.id)
        links.append(entry)
        if max_depth > 0 and len(links) >= max_depth:
            break
        if entry.origin.is_root:
            break
        found = _best_candidate(repo, entry)
        if found is None or found[0] < threshold:
            break
        try:
            entry = repo.blame_line(entry.origin, found[1].path, found[1].line)
        except GitError:
            break
    chain = []
    for i, e in enumerate(links):
        if i == 0:
            role = Role.PREVIOUS
        elif i == len(links) - 1:
            role = Role.INITIAL
        else:
            role = Role.DESCENDANT
        chain.append(ChainLink(e.origin, role, e.content, e.origin_path, e.origin_line))
    return TraceChain(fix, line, tuple(chain))


def tcszz(repo: Repository, fix: CommitRef | str, mode: Mode | str = Mode.UNIQUE,
          blame_count: int = -1, threshold: float = DEFAULT_THRESHOLD) -> Prediction:
    """Run the tracer over every removed line of ``fix``.

    ``blame_count`` is only used in CustomBlame mode (1 reproduces plain
    SZZ, -1 traces fully).  The other modes always trace fully.
    """
    mode = Mode(mode)
    fix = repo.commit(fix)
    depth = blame_count if mode is Mode.CUSTOM else -1
    chains: list[TraceChain] = []
    for lc in removed_lines(repo, fix):
        try:
            chains.append(trace_line(repo, fix, lc, depth, threshold))
        except GitError:
            continue
    attribution = {c.line: c.previous for c in chains}
    found = canonical(link.commit for c in chains for link in c.chain)
    return Prediction(fix, Algorithm.TC, found, attribution, chains)


def chronological(pred: Prediction) -> list[CommitRef]:
    """All traced commits line by line in blame order, duplicates kept."""
    return [link.commit for chain in pred.chains for link in chain.chain]


def unique_commits(pred: Prediction) -> list[CommitRef]:
    """Traced commits without duplicates, in order of first appearance."""
    seen: set[str] = set()
    out = []
    for c in chronological(pred):
        if c.id not in seen:
            seen.add(c.id)
            out.append(c)
    return out


def chain_stats(chains: Iterable[TraceChain]) -> dict:
    lengths = [len(c.chain) for c in chains]
    if not lengths:
        return {"n": 0, "mean_length": 0.0, "max_length": 0}
    return {"n": len(lengths), "mean_length": math.fsum(lengths) / len(lengths),
            "max_length": max(lengths)}


def inducer_positions(chains: Iterable[TraceChain], truth: set[str]) -> dict[str, int]:
    """Count where true inducers sit in their chains."""
    counts = {"second": 0, "intermediate": 0, "initial": 0, "previous": 0}
    for chain in chains:
        n = len(chain.chain)
        for i, link in enumerate(chain.chain):
            if link.commit.id not in truth:
                continue
            if i == 0:
                counts["previous"] += 1
            elif i == n - 1:
                counts["initial"] += 1
            elif i == 1:
                counts["second"] += 1
            else:
                counts["intermediate"] += 1
    return counts
