"""Ghost labels, outcome categories and the failure-mode ladder.

A fix that only adds lines gives blame nothing to work with; an inducer
that only removed lines can never be returned by blame.  Fixes missed for
neither reason are pushed down a ladder of ever wider searches (line
lineage, enclosing function, function history, file history) and labelled
with the first one that finds a true inducer.  The module also renders the
prompt text used to hand those cases to a language model.
"""

from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import (
    GitError,
    MismatchedFix,
    MissingContext,
    NoSuchPathAtCommit,
    PreconditionViolated,
    UnparsableFile,
)
from .git import CommitRef, Repository
from .miner import BugFixLink
from .tracing import Mode, tcszz
from .variants import Prediction, bszz, removed_lines

logger = logging.getLogger(__name__)


class GhostKind(str, enum.Enum):
    REMOVE = "RemoveMappingGhost"
    ADD = "AddMappingGhost"


class Side(str, enum.Enum):
    AS_FIX = "AsFix"
    AS_INDUCER = "AsInducer"


class Outcome(str, enum.Enum):
    SUCCESS = "Success"
    PARTIAL = "PartialSuccess"
    REMOVE_MG = "RemoveMG"
    ADD_MG = "AddMG"
    FAILURE = "FailureWithoutMG"


class FailureMode(str, enum.Enum):
    LINE_CHANGE = "LineChange"
    FUNCTION_BLAME = "FunctionBlame"
    FUNCTION_LOG = "FunctionLog"
    WITHIN_FILE = "WithinFile"
    CROSS_FILE = "CrossFile"


LADDER = tuple(FailureMode)


@dataclass(frozen=True)
class GhostLabel:
    kind: GhostKind
    commit: CommitRef


@dataclass(frozen=True)
class OutcomeCategory:
    category: Outcome
    detail: FailureMode | None = None


@dataclass(frozen=True)
class FunctionSpan:
    file: str
    name: str
    start_line: int
    end_line: int
    at: CommitRef | None = None

    def contains(self, line: int) -> bool:
        return self.start_line <= line <= self.end_line


@dataclass(frozen=True)
class Ratio:
    numerator: int
    denominator: int

    @property
    def value(self) -> float:
        return self.numerator / self.denominator if self.denominator else 0.0


# ------------------------------------------------------------------ ghosts


def _ghost_kind(added: int, removed: int) -> GhostKind | None:
    if removed == 0 and added >= 1:
        return GhostKind.REMOVE
    if added == 0 and removed >= 1:
        return GhostKind.ADD
    return None


def classify_ghost(repo: Repository, c: CommitRef | str, side: Side | str) -> GhostLabel | None:
    c = repo.commit(c)
    ds = repo.commit_diff(c)
    kind = _ghost_kind(ds.n_added, ds.n_removed)
    want = GhostKind.REMOVE if Side(side) is Side.AS_FIX else GhostKind.ADD
    return GhostLabel(kind, c) if kind is want else None


def is_rmg(repo: Repository, c: CommitRef | str) -> bool:
    return classify_ghost(repo, c, Side.AS_FIX) is not None


def is_amg(repo: Repository, c: CommitRef | str) -> bool:
    return classify_ghost(repo, c, Side.AS_INDUCER) is not None


@dataclass
class GhostFrequencies:
    rmg_rate_over_fixes: Ratio
    amg_rate_over_all_commits: Ratio
    amg_rate_over_inducers: Ratio
    fixes_failing_from_amg: int
    rmg_fixes: list[str] = field(default_factory=list)
    amg_inducers: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        def r(x: Ratio) -> dict:
            return {"numerator": x.numerator, "denominator": x.denominator, "rate": x.value}
        return {
            "rmg_rate_over_fixes": r(self.rmg_rate_over_fixes),
            "amg_rate_over_all_commits": r(self.amg_rate_over_all_commits),
            "amg_rate_over_inducers": r(self.amg_rate_over_inducers),
            "fixes_failing_from_amg": self.fixes_failing_from_amg,
        }


def ghost_frequencies(repo: Repository, dataset: Iterable[BugFixLink],
                      until: CommitRef | str | None = None) -> GhostFrequencies:
    dataset = list(dataset)
    counts = repo.line_counts(until)
    kinds = {sha: _ghost_kind(a, r) for sha, (a, r) in counts.items()}

    def kind_of(c: CommitRef) -> GhostKind | None:
        if c.id in kinds:
            return kinds[c.id]
        ds = repo.commit_diff(c)
        return _ghost_kind(ds.n_added, ds.n_removed)

    rmg = [link.fixing_commit.id for link in dataset if kind_of(link.fixing_commit) is GhostKind.REMOVE]
    inducers = {c.id: c for link in dataset for c in link.inducing_commits}
    amg = sorted(sha for sha, c in inducers.items() if kind_of(c) is GhostKind.ADD)
    amg_all = sum(1 for k in kinds.values() if k is GhostKind.ADD)
    amg_set = set(amg)
    rmg_set = set(rmg)
    failing = sum(1 for link in dataset
                  if link.fixing_commit.id not in rmg_set and link.inducing_commits
                  and all(c.id in amg_set for c in link.inducing_commits))
    return GhostFrequencies(
        Ratio(len(rmg), len(dataset)),
        Ratio(amg_all, len(kinds)),
        Ratio(len(amg), len(inducers)),
        failing, rmg, amg,
    )


# ---------------------------------------------------------------- outcomes


def categorize_outcome(truth: BugFixLink, predicted: Prediction, repo: Repository) -> OutcomeCategory:
    if truth.fixing_commit.id != predicted.fixing_commit.id:
        raise MismatchedFix(f"{truth.fixing_commit.short} vs {predicted.fixing_commit.short}")
    want = truth.inducing_ids
    hit = want & predicted.inducing_ids
    if hit == want:
        return OutcomeCategory(Outcome.SUCCESS)
    if hit:
        return OutcomeCategory(Outcome.PARTIAL)
    if is_rmg(repo, truth.fixing_commit):
        return OutcomeCategory(Outcome.REMOVE_MG)
    if all(is_amg(repo, c) for c in truth.inducing_commits):
        return OutcomeCategory(Outcome.ADD_MG)
    return OutcomeCategory(Outcome.FAILURE)


# --------------------------------------------------------------- functions

_CONTROL = {"if", "for", "while", "switch", "return", "sizeof", "do", "else",
            "__attribute__", "__typeof__", "typeof", "alignof", "_Alignof"}
_NOT_FUNCTION = re.compile(r"^\s*(?:typedef\b|(?:struct|union|enum|class|namespace)\b[^(]*$)")
_CALL = re.compile(r"([A-Za-z_]\w*)\s*\(")


def _blank_noise(lines: list[str]) -> list[str]:
    """Blank out everything that is not code so stray braces are ignored.

    Line lengths are kept so offsets still map to the original text.
    """
    out = []
    in_block = False
    continued = False
    for line in lines:
        if continued or (not in_block and line.lstrip().startswith("#")):
            continued = line.rstrip().endswith("\\")
            out.append(" " * len(line))
            continue
        buf = list(line)
        i, n = 0, len(line)
        quote = None
        while i < n:
            if in_block:
                end = line.find("*/", i)
                stop = n if end == -1 else end + 2
                for k in range(i, stop):
                    buf[k] = " "
                if end == -1:
                    break
                in_block = False
                i = stop
                continue
            ch = line[i]
            if quote:
                if ch == "\\" and i + 1 < n:
                    buf[i] = buf[i + 1] = " "
                    i += 2
                    continue
                if ch == quote:
                    quote = None
                else:
                    buf[i] = " "
                i += 1
                continue
            if ch in ('"', "'"):
                quote = ch
            elif line.startswith("//", i):
                for k in range(i, n):
                    buf[k] = " "
                break
            elif line.startswith("/*", i):
                in_block = True
                continue
            i += 1
        out.append("".join(buf))
    return out


def _function_name(header: str) -> str | None:
    if "=" in header.replace("==", "") or _NOT_FUNCTION.match(header):
        return None
    for m in _CALL.finditer(header):
        if m.group(1) not in _CONTROL:
            return m.group(1)
    return None


def scan_functions(lines: list[str], path: str = "", at: CommitRef | None = None) -> list[FunctionSpan]:
    """Top-level C function definitions found by brace matching.

    Raises UnparsableFile when braces do not balance.
    """
    clean = _blank_noise(lines)
    spans = []
    depth = 0
    header: list[str] = []
    header_start: int | None = None
    open_line = 0
    name: str | None = None
    for lineno, text in enumerate(clean, 1):
        for ch in text:
            if depth == 0:
                if ch == "{":
                    name = _function_name("".join(header))
                    open_line = header_start or lineno
                    depth = 1
                elif ch in ";}":
                    if ch == "}":
                        raise UnparsableFile(f"{path}:{lineno}: unbalanced '}}'")
                    header, header_start = [], None
                else:
                    if header_start is None and not ch.isspace():
                        header_start = lineno
                    header.append(ch)
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    if name is not None:
                        spans.append(FunctionSpan(path, name, open_line, lineno, at))
                    header, header_start, name = [], None, None
        if depth == 0 and header:
            header.append("\n")
    if depth != 0:
        raise UnparsableFile(f"{path}: {depth} unclosed '{{'")
    return spans


def extract_functions(repo: Repository, c: CommitRef | str, file: str) -> list[FunctionSpan]:
    """Function spans of ``file`` at ``c``; a single whole-file span if unparsable."""
    c = repo.commit(c)
    lines = repo.file_lines(c, file)
    try:
        return scan_functions(lines, file, c)
    except UnparsableFile as exc:
        logger.warning("falling back to whole-file span: %s", exc)
        return [FunctionSpan(file, file, 1, max(1, len(lines)), c)] if lines else []


def enclosing_spans(repo: Repository, fix: CommitRef) -> list[FunctionSpan]:
    """Functions (at the fix's parent) that contain at least one removed line."""
    parent = repo.first_parent(fix)
    if parent is None:
        return []
    found: dict[tuple[str, int], FunctionSpan] = {}
    cache: dict[str, list[FunctionSpan]] = {}
    for lc in removed_lines(repo, fix):
        if lc.path not in cache:
            try:
                cache[lc.path] = extract_functions(repo, parent, lc.path)
            except NoSuchPathAtCommit:
                cache[lc.path] = []
        for span in cache[lc.path]:
            if span.contains(lc.line):
                found[(span.file, span.start_line)] = span
    return [found[k] for k in sorted(found)]


# ------------------------------------------------------------------ ladder


def _changed_paths(repo: Repository, fix: CommitRef) -> list[str]:
    paths = []
    for f in repo.commit_diff(fix).files:
        p = f.old_path or f.new_path
        if p and p not in paths:
            paths.append(p)
    return paths


def rung_hits(repo: Repository, fix: CommitRef, mode: FailureMode) -> set[str]:
    """Commit ids reachable by one rung of the ladder (the membership set)."""
    parent = repo.first_parent(fix)
    if mode is FailureMode.LINE_CHANGE:
        return tcszz(repo, fix, Mode.UNIQUE).inducing_ids
    if mode is FailureMode.CROSS_FILE or parent is None:
        return set()
    found: set[str] = set()
    if mode is FailureMode.FUNCTION_BLAME:
        for span in enclosing_spans(repo, fix):
            entries = repo.blame_file(parent, span.file)
            found.update(e.origin.id for e in entries[span.start_line - 1:span.end_line])
    elif mode is FailureMode.FUNCTION_LOG:
        for span in enclosing_spans(repo, fix):
            try:
                found.update(c.id for c in repo.log_line_range(span.file, span.start_line,
                                                                span.end_line, parent))
            except GitError as exc:
                logger.warning("range log failed for %s: %s", span.file, exc)
    elif mode is FailureMode.WITHIN_FILE:
        for path in _changed_paths(repo, fix):
            if repo.path_exists(parent, path):
                found.update(c.id for c in repo.file_history(path, parent))
    return found


def classify_failure(repo: Repository, truth: BugFixLink, baseline: Prediction | None = None) -> FailureMode:
    fix = repo.commit(truth.fixing_commit)
    baseline = baseline or bszz(repo, fix)
    outcome = categorize_outcome(truth, baseline, repo)
    if outcome.category is not Outcome.FAILURE:
        raise PreconditionViolated(f"{fix.short} is {outcome.category.value}, not FailureWithoutMG")
    want = truth.inducing_ids
    for mode in LADDER[:-1]:
        if rung_hits(repo, fix, mode) & want:
            return mode
    return FailureMode.CROSS_FILE


# ----------------------------------------------------------------- prompts

PROMPT_A = ("Based on the above commit message of a bug-fixing commit, which file in the "
            "Linux kernel could be causing this bug-fixing commit?")
PROMPT_B = ("Based on the above commit message of a bug-fixing commit and function names in "
            "file {file}, which function or functions could be causing this bug-fixing commit?")
PROMPT_C = ("Based on the above commit message of a bug-fixing commit, please identify the "
            "line or lines of code in the following code that could be causing this "
            "bug-fixing commit:")

_FIXES_LINE = re.compile(r"^\s*Fixes:.*(?:\n|$)", re.M)
_HEX = re.compile(r"[0-9a-f]{7,40}")


def scrub_message(message: str, inducing_ids: Iterable[str] = ()) -> str:
    """Drop ``Fixes:`` lines and any hex run that names a true inducer."""
    ids = [i.lower() for i in inducing_ids]

    def drop(m: re.Match) -> str:
        return "" if any(m.group(0) in i for i in ids) else m.group(0)

    # hex first: dropping a run can splice a new "Fixes:" together
    text = _FIXES_LINE.sub("", _HEX.sub(drop, message))
    return re.sub(r"\n{3,}", "\n\n", text).strip("\n")


def prompt_label(mode: FailureMode | str) -> str:
    mode = FailureMode(mode)
    if mode is FailureMode.CROSS_FILE:
        return "A"
    if mode is FailureMode.WITHIN_FILE:
        return "B"
    if mode in (FailureMode.FUNCTION_LOG, FailureMode.FUNCTION_BLAME):
        return "C"
    raise ValueError(f"no prompt template for {mode.value}")


def emit_llm_prompt(mode: FailureMode | str, fix_message: str, context: Mapping | None = None,
                    inducing_ids: Iterable[str] = ()) -> str:
    context = context or {}
    which = prompt_label(mode)
    message = scrub_message(fix_message, inducing_ids)
    if which == "A":
        return f"{message}\n{PROMPT_A}\n"
    if which == "B":
        file, names = context.get("file"), context.get("function_names")
        if not file or not names:
            raise MissingContext("prompt B needs 'file' and a non-empty 'function_names'")
        return f"{message}\n{PROMPT_B.format(file=file)}\n" + "\n".join(names) + "\n"
    code = context.get("function_code")
    if not code:
        raise MissingContext("prompt C needs 'function_code'")
    return f"{message}\n{PROMPT_C}\n{code.rstrip(chr(10))}\n"


def prompt_context(repo: Repository, fix: CommitRef, mode: FailureMode) -> dict:
    """Gather the context fields a prompt for ``mode`` needs."""
    parent = repo.first_parent(fix)
    which = prompt_label(mode)
    if which == "A" or parent is None:
        return {}
    if which == "B":
        for path in _changed_paths(repo, fix):
            if repo.path_exists(parent, path):
                spans = extract_functions(repo, parent, path)
                names = list(dict.fromkeys(s.name for s in spans))
                return {"file": path, "function_names": names}
        return {}
    parts = []
    for span in enclosing_spans(repo, fix):
        lines = repo.file_lines(parent, span.file)
        parts.append("\n".join(lines[span.start_line - 1:span.end_line]))
    return {"function_code": "\n\n".join(parts)} if parts else {}
