"""Synthetic repositories built from declarative scripts.

A script is a list of steps.  Each step names its parents by label and
gives the *whole* new content of every file it touches, so the resulting
history is unambiguous.  Repositories are written with ``git fast-import``
using fixed identities and a fixed clock, which makes rebuilds
byte-identical.

Text format (one directive per line, ``#`` comments outside blocks)::

    @commit fix
    @parents prev            # optional; default is the previous step, "-" = root
    @time 1500003600         # optional; default BASE + index * 3600
    @message
    Subject line

    Fixes: 0123456789ab ("Subject")
    @file src/a.c            # following lines until the next directive
    int a;
    @delete src/old.c
    @end

Inside ``@message`` and ``@file`` blocks a line of the form ``\\<rest>`` where
``<rest>`` starts with optional backslashes then ``@`` stands for ``<rest>``.
"""

from __future__ import annotations

import os
import random
import re
import string
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import IoFailure, ScriptInvalid
from .git import CommitRef, Repository, git_binary, git_env, split_lines

BASE_TIME = 1_500_000_000
STEP_SECONDS = 3600
IDENTITY = "Fixture Forge <forge@fixtures.invalid>"


@dataclass(frozen=True)
class Edit:
    path: str
    content: str | None  # None deletes the file


@dataclass(frozen=True)
class Step:
    label: str
    edits: tuple[Edit, ...] = ()
    message: str = ""
    parents: tuple[str, ...] | None = None  # None: previous step (root for the first)
    author_time: int | None = None


@dataclass
class FixtureScript:
    steps: list[Step] = field(default_factory=list)

    def add(self, label: str, files: dict[str, str | None] | None = None,
            message: str | None = None, parents: Iterable[str] | None = None,
            author_time: int | None = None) -> "FixtureScript":
        edits = tuple(Edit(p, c) for p, c in (files or {}).items())
        self.steps.append(Step(label, edits, message if message is not None else label,
                               None if parents is None else tuple(parents), author_time))
        return self

    def resolved_parents(self) -> list[tuple[str, ...]]:
        out = []
        for i, step in enumerate(self.steps):
            if step.parents is None:
                out.append(() if i == 0 else (self.steps[i - 1].label,))
            else:
                out.append(tuple(step.parents))
        return out

    def validate(self) -> None:
        seen: set[str] = set()
        for step, parents in zip(self.steps, self.resolved_parents()):
            if not step.label or any(ch.isspace() for ch in step.label):
                raise ScriptInvalid(f"bad label {step.label!r}")
            if step.label in seen:
                raise ScriptInvalid(f"duplicate label {step.label!r}")
            for p in parents:
                if p not in seen:
                    raise ScriptInvalid(f"step {step.label!r} has dangling parent {p!r}")
            if len(set(parents)) != len(parents):
                raise ScriptInvalid(f"step {step.label!r} repeats a parent")
            for e in step.edits:
                if not e.path or e.path.startswith("/") or "\n" in e.path:
                    raise ScriptInvalid(f"bad path {e.path!r}")
            seen.add(step.label)

    def times(self) -> list[int]:
        return [s.author_time if s.author_time is not None else BASE_TIME + i * STEP_SECONDS
                for i, s in enumerate(self.steps)]

    def trees(self) -> dict[str, dict[str, str]]:
        """File contents of every step (first parent's tree plus the edits)."""
        trees: dict[str, dict[str, str]] = {}
        for step, parents in zip(self.steps, self.resolved_parents()):
            tree = dict(trees[parents[0]]) if parents else {}
            for e in step.edits:
                if e.content is None:
                    tree.pop(e.path, None)
                else:
                    tree[e.path] = e.content
            trees[step.label] = tree
        return trees


# ------------------------------------------------------------- text format


_ESCAPED = re.compile(r"\\+@")
_NEEDS_ESCAPE = re.compile(r"\\*@")


def _unescape(line: str) -> str:
    return line[1:] if _ESCAPED.match(line) else line


def _escape(line: str) -> str:
    return "\\" + line if _NEEDS_ESCAPE.match(line) else line


def parse_script(text: str) -> FixtureScript:
    script = FixtureScript()
    cur: dict | None = None
    block: list[str] | None = None

    def close_block():
        nonlocal block
        if cur is None or block is None:
            block = None
            return
        body = "\n".join(block)
        if cur["_block"] == "message":
            cur["message"] = body.strip("\n")
        else:
            while block and block[-1] == "":
                block.pop()
            cur["files"][cur["_block"][1]] = "\n".join(block) + "\n" if block else ""
        block = None

    for lineno, raw in enumerate(text.split("\n"), 1):
        if block is not None and not raw.startswith("@"):
            block.append(_unescape(raw))
            continue
        if block is not None:
            close_block()
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        directive, _, arg = stripped.partition(" ")
        arg = arg.split(" #")[0].strip()
        if directive == "@commit":
            if cur is not None:
                raise ScriptInvalid(f"line {lineno}: @commit before @end")
            cur = {"label": arg, "files": {}, "message": arg, "parents": None, "time": None}
        elif cur is None:
            raise ScriptInvalid(f"line {lineno}: {directive} outside a commit")
        elif directive == "@parents":
            cur["parents"] = () if arg in ("", "-") else tuple(arg.split())
        elif directive == "@time":
            cur["time"] = int(arg)
        elif directive == "@message":
            cur["_block"], block = "message", []
        elif directive == "@file":
            cur["_block"], block = ("file", arg), []
        elif directive == "@delete":
            cur["files"][arg] = None
        elif directive == "@end":
            script.add(cur["label"], cur["files"], cur["message"], cur["parents"], cur["time"])
            cur = None
        else:
            raise ScriptInvalid(f"line {lineno}: unknown directive {directive}")
    if block is not None:
        close_block()
    if cur is not None:
        raise ScriptInvalid("script ends inside a commit (missing @end)")
    script.validate()
    return script


def dump_script(script: FixtureScript) -> str:
    out: list[str] = []
    for i, step in enumerate(script.steps):
        out.append(f"@commit {step.label}")
        if step.parents is not None:
            out.append("@parents " + (" ".join(step.parents) or "-"))
        if step.author_time is not None:
            out.append(f"@time {step.author_time}")
        out.append("@message")
        out.extend(_escape(x) for x in step.message.split("\n"))
        for e in step.edits:
            if e.content is None:
                out.append(f"@delete {e.path}")
            else:
                if e.content and not e.content.endswith("\n"):
                    raise ScriptInvalid(f"{e.path}: text format needs a trailing newline")
                out.append(f"@file {e.path}")
                out.extend(_escape(x) for x in split_lines(e.content))
        out.append("@end")
        out.append("")
    return "\n".join(out)


# ----------------------------------------------------------------- building


@dataclass
class FixtureMap:
    path: Path
    commits: dict[str, CommitRef]
    script: FixtureScript

    def __getitem__(self, label: str) -> CommitRef:
        return self.commits[label]

    def label_of(self, commit: CommitRef | str) -> str | None:
        sha = commit if isinstance(commit, str) else commit.id
        for label, ref in self.commits.items():
            if ref.id == sha:
                return label
        return None

    def open(self) -> Repository:
        return Repository(self.path)


def _data(payload: bytes) -> bytes:
    return b"data %d\n" % len(payload) + payload + b"\n"


def _fast_import_stream(script: FixtureScript) -> bytes:
    parts: list[bytes] = []
    marks = {s.label: i + 1 for i, s in enumerate(script.steps)}
    for step, parents, ts in zip(script.steps, script.resolved_parents(), script.times()):
        if not parents:
            parts.append(b"reset refs/heads/master\n")
        ident = f"{IDENTITY} {ts} +0000".encode()
        msg = step.message if step.message.endswith("\n") else step.message + "\n"
        parts.append(b"commit refs/heads/master\n")
        parts.append(b"mark :%d\n" % marks[step.label])
        parts.append(b"author " + ident + b"\n")
        parts.append(b"committer " + ident + b"\n")
        parts.append(_data(msg.encode("utf-8", "surrogateescape")))
        if parents:
            parts.append(b"from :%d\n" % marks[parents[0]])
            for p in parents[1:]:
                parts.append(b"merge :%d\n" % marks[p])
        for e in step.edits:
            path = e.path.encode("utf-8", "surrogateescape")
            if e.content is None:
                parts.append(b"D " + path + b"\n")
            else:
                parts.append(b"M 100644 inline " + path + b"\n")
                parts.append(_data(e.content.encode("utf-8", "surrogateescape")))
        parts.append(b"\n")
    if script.steps:
        parts.append(b"reset refs/heads/master\nfrom :%d\n\n" % marks[script.steps[-1].label])
    return b"".join(parts)


def build_fixture(script: FixtureScript, directory: str | os.PathLike) -> FixtureMap:
    """Realize ``script`` as a git repository in the (empty) ``directory``."""
    script.validate()
    target = Path(directory)
    try:
        target.mkdir(parents=True, exist_ok=True)
        if any(target.iterdir()):
            raise IoFailure(f"{target} is not empty")
    except OSError as exc:
        if isinstance(exc, IoFailure):
            raise
        raise IoFailure(str(exc)) from exc
    git = [git_binary(), "-c", "core.abbrev=40"]

    def run(*args: str, input: bytes | None = None) -> bytes:
        proc = subprocess.run(git + list(args), cwd=target, env=git_env(), input=input,
                              stdout=subprocess.PIPE, stderr=subprocess.PIPE)
        if proc.returncode != 0:
            raise IoFailure(f"git {args[0]} failed: {proc.stderr.decode(errors='replace')}")
        return proc.stdout

    run("init", "-q", "--initial-branch=master")
    commits: dict[str, CommitRef] = {}
    if script.steps:
        with tempfile.NamedTemporaryFile("r", suffix=".marks", delete=False) as fh:
            marks_path = fh.name
        try:
            run("fast-import", "--quiet", "--date-format=raw", f"--export-marks={marks_path}",
                input=_fast_import_stream(script))
            by_mark = {}
            for line in Path(marks_path).read_text().split("\n"):
                if line.startswith(":"):
                    mark, sha = line[1:].split()
                    by_mark[int(mark)] = sha
        finally:
            os.unlink(marks_path)
        run("reset", "-q", "--hard", "master")
        repo = Repository(target)
        try:
            for i, step in enumerate(script.steps):
                commits[step.label] = repo.commit(by_mark[i + 1])
        finally:
            repo.close()
    return FixtureMap(target, commits, script)


PLACEHOLDER = re.compile(r"\{\{([A-Za-z0-9_.-]+)(?::(\d+))?\}\}")


def _substitute(text: str, commits: dict[str, CommitRef]) -> str:
    def repl(m: re.Match) -> str:
        ref = commits.get(m.group(1))
        if ref is None:
            return m.group(0)
        return ref.id[:int(m.group(2) or 12)]
    return PLACEHOLDER.sub(repl, text)


def build_fixture_text(text: str, directory: str | os.PathLike) -> FixtureMap:
    """Build from the text format.

    ``{{label}}`` (or ``{{label:N}}``) is replaced by the first 12 (N) hex
    digits of the id of step ``label``.  Ids depend on messages, so the
    script is rebuilt until the substitution reaches a fixed point.
    """
    if not PLACEHOLDER.search(text):
        return build_fixture(parse_script(text), directory)
    current = text
    for _ in range(len(parse_script(text).steps) + 1):
        with tempfile.TemporaryDirectory() as scratch:
            fmap = build_fixture(parse_script(current), scratch)
        resolved = _substitute(text, fmap.commits)
        if resolved == current:
            break
        current = resolved
    else:
        raise ScriptInvalid("placeholders did not converge (a step refers to itself or a later step)")
    if PLACEHOLDER.search(current):
        raise ScriptInvalid(f"unknown placeholder {PLACEHOLDER.search(current).group(0)}")
    return build_fixture(parse_script(current), directory)


# ------------------------------------------------------------------ oracle


def _lcs_pairs(old: list[str], new: list[str]) -> list[tuple[int, int]]:
    """Index pairs of a longest common subsequence (plain DP)."""
    n, m = len(old), len(new)
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        row, below = table[i], table[i + 1]
        for j in range(m - 1, -1, -1):
            row[j] = below[j + 1] + 1 if old[i] == new[j] else max(below[j], row[j + 1])
    pairs = []
    i = j = 0
    while i < n and j < m:
        if old[i] == new[j]:
            pairs.append((i, j))
            i += 1
            j += 1
        elif table[i + 1][j] >= table[i][j + 1]:
            i += 1
        else:
            j += 1
    return pairs


def _align(old: list[str], new: list[str]) -> tuple[dict[int, int], dict[int, int]]:
    """Map new-line index -> old-line index.

    Returns (exact, positional): exact-content matches first, then the
    unmatched lines inside each gap are paired up in order.
    """
    exact_pairs = _lcs_pairs(old, new)
    exact = {j: i for i, j in exact_pairs}
    positional: dict[int, int] = {}
    bounds = [(-1, -1), *exact_pairs, (len(old), len(new))]
    for (i0, j0), (i1, j1) in zip(bounds, bounds[1:]):
        for k, (i, j) in enumerate(zip(range(i0 + 1, i1), range(j0 + 1, j1))):
            positional[j] = i
    return exact, positional


class ProvenanceOracle:
    """Brute-force per-line edit histories for a small fixture.

    ``history(label, path, line)`` returns, newest first, every commit that
    created or modified the given line of the file as of step ``label``.
    The newest entry is what blame must report.
    """

    def __init__(self, fmap: FixtureMap):
        self.fmap = fmap
        self.script = fmap.script
        self._state: dict[str, dict[str, list[tuple[str, tuple[str, ...]]]]] = {}
        self._replay()

    def _replay(self) -> None:
        trees = self.script.trees()
        for step, parents in zip(self.script.steps, self.script.resolved_parents()):
            label = step.label
            files: dict[str, list[tuple[str, tuple[str, ...]]]] = {}
            for path, content in trees[label].items():
                new = split_lines(content)
                hist: list[tuple[str, ...] | None] = [None] * len(new)
                carried: list[tuple[str, ...] | None] = [None] * len(new)
                # each parent in order claims the lines it has unchanged
                for p in parents:
                    prev = self._state[p].get(path)
                    if prev is None:
                        continue
                    old = [c for c, _ in prev]
                    exact, positional = _align(old, new)
                    for j, i in exact.items():
                        if hist[j] is None:
                            hist[j] = prev[i][1]
                    if p == parents[0]:
                        for j, i in positional.items():
                            carried[j] = prev[i][1]
                for j in range(len(new)):
                    if hist[j] is None:
                        hist[j] = (label,) + (carried[j] or ())
                files[path] = [(c, h) for c, h in zip(new, hist)]
            self._state[label] = files

    def history_labels(self, label: str, path: str, line: int) -> tuple[str, ...]:
        return self._state[label][path][line - 1][1]

    def history(self, label: str, path: str, line: int) -> list[CommitRef]:
        return [self.fmap.commits[x] for x in self.history_labels(label, path, line)]

    def lines(self, label: str, path: str) -> list[str]:
        return [c for c, _ in self._state[label][path]]

    def removed_line_history(self, fix_label: str, path: str, line: int) -> list[CommitRef]:
        """History of a line removed by ``fix_label`` (numbered on its first parent)."""
        parent = self.script.resolved_parents()[self._index(fix_label)][0]
        return self.history(parent, path, line)

    def _index(self, label: str) -> int:
        for i, s in enumerate(self.script.steps):
            if s.label == label:
                return i
        raise KeyError(label)


def line_provenance_oracle(fmap: FixtureMap) -> ProvenanceOracle:
    return ProvenanceOracle(fmap)


# --------------------------------------------------------- random scripts


def _token(rng: random.Random, n: int = 8) -> str:
    return "".join(rng.choice(string.ascii_lowercase + string.digits) for _ in range(n))


def random_script(seed: int, max_commits: int = 25, max_files: int = 6,
                  merges: bool = True) -> FixtureScript:
    """A random history whose line matching is unambiguous.

    Lines are globally unique and never reordered.  Within one commit each
    file receives a single kind of edit.  Modifications only bump a trailing counter so the modified
    line stays textually close to its predecessor.  Under these rules the
    brute-force oracle and git's diff agree line for line.
    """
    rng = random.Random(seed)
    counter = iter(range(1, 10**9))
    n_commits = rng.randint(2, max_commits - 2)

    def new_line() -> str:
        return f"{_token(rng)}_{_token(rng, 4)} = fn_{_token(rng, 6)}({next(counter)});"

    def bump(line: str) -> str:
        head, _, _ = line.rpartition("(")
        return f"{head}({next(counter)});"

    script = FixtureScript()
    heads: dict[str, dict[str, list[str]]] = {}
    labels: list[str] = []
    side: str | None = None
    side_base: str | None = None
    main_tip: str | None = None

    def mutate(tree: dict[str, list[str]]) -> dict[str, list[str]]:
        tree = {k: list(v) for k, v in tree.items()}
        touched = {}
        n_touch = rng.randint(1, 2)
        for _ in range(n_touch):
            if (not tree or rng.random() < 0.2) and len(tree) < max_files:
                path = f"src/f{len(tree)}.c"
                tree[path] = [new_line() for _ in range(rng.randint(3, 8))]
                touched[path] = tree[path]
                continue
            path = rng.choice(sorted(tree))
            if path in touched:
                continue
            lines = tree[path]
            op = rng.choice(["modify", "modify", "insert", "delete"])
            if op == "delete" and len(lines) <= 2:
                op = "insert"
            if op == "modify" and lines:
                for idx in rng.sample(range(len(lines)), rng.randint(1, min(3, len(lines)))):
                    lines[idx] = bump(lines[idx])
            elif op == "insert":
                for _ in range(rng.randint(1, 3)):
                    lines.insert(rng.randint(0, len(lines)), new_line())
            else:
                for _ in range(rng.randint(1, min(2, len(lines) - 1))):
                    del lines[rng.randrange(len(lines))]
            touched[path] = lines
        return tree

    def emit(label, tree, parents, old_tree):
        files = {p: "\n".join(ls) + "\n" for p, ls in tree.items()
                 if old_tree.get(p) != ls}
        script.add(label, files, f"{label} {_token(rng, 6)}", parents)
        heads[label] = tree
        labels.append(label)

    def merge(label):
        nonlocal main_tip, side, side_base
        base, ours, theirs = heads[side_base], heads[main_tip], heads[side]
        merged = dict(ours)
        for path, lines in theirs.items():
            if base.get(path) != lines and ours.get(path) == base.get(path):
                merged[path] = list(lines)
        emit(label, merged, (main_tip, side), ours)
        main_tip, side, side_base = label, None, None

    for i in range(n_commits):
        label = f"c{i:02d}"
        if i == 0:
            emit(label, mutate({}), (), {})
            main_tip = label
            continue
        if merges and side is None and i < n_commits - 2 and rng.random() < 0.15:
            side = side_base = main_tip
        if side is not None:
            roll = rng.random()
            if side == side_base or roll < 0.3:
                emit(label, mutate(heads[side]), (side,), heads[side])
                side = label
                continue
            if roll < 0.7:
                merge(label)
                continue
        emit(label, mutate(heads[main_tip]), (main_tip,), heads[main_tip])
        main_tip = label
    if side is not None and side != side_base:
        merge(f"m{n_commits:02d}")
    elif labels[-1] != main_tip:
        # the main line must end on the final (head) step
        emit(f"c{n_commits:02d}", mutate(heads[main_tip]), (main_tip,), heads[main_tip])
    return script
